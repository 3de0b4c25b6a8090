#pragma once

// Keyed random streams. Every consumer derives its own stream from a master
// seed and a tuple of integer keys (repetition, iteration, purpose, ...), so a
// run's draws never depend on scheduling or worker count.

#include <cstdint>
#include <initializer_list>
#include <random>
#include <string_view>

namespace cespectra {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

inline std::uint64_t hash_combine(std::uint64_t seed, std::uint64_t value) {
  return splitmix64(seed ^ splitmix64(value + 0x632BE59BD9B4E019ULL));
}

/// FNV-1a, for turning names (experiment kind, scheme) into stream keys.
constexpr std::uint64_t hash_name(std::string_view s) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001B3ULL;
  }
  return h;
}

/// What a stream is used for inside one iteration.
enum class Purpose : std::uint64_t {
  quantile_batch = 1,  // Y_1..Y_m
  update_batch = 2,    // X_1..X_n
  final_batch = 3,     // the n_p draws of the final estimate
  sweep = 4,
  gamma = 5,
  bootstrap = 6,
  test = 7,
};

class RngStream {
 public:
  explicit RngStream(std::uint64_t key) : key_(key), engine_(splitmix64(key)) {}

  RngStream(std::uint64_t master, std::initializer_list<std::uint64_t> keys)
      : RngStream(derive_key(master, keys)) {}

  static std::uint64_t derive_key(std::uint64_t master, std::initializer_list<std::uint64_t> keys) {
    std::uint64_t k = splitmix64(master);
    for (auto v : keys) k = hash_combine(k, v);
    return k;
  }

  /// Independent child stream; does not advance this stream.
  RngStream split(std::uint64_t key) const { return RngStream(hash_combine(key_, key)); }
  RngStream split(std::uint64_t a, Purpose p) const {
    return RngStream(hash_combine(hash_combine(key_, a), static_cast<std::uint64_t>(p)));
  }

  double normal() { return normal_(engine_); }
  double uniform() { return uniform_(engine_); }
  std::uint64_t key() const noexcept { return key_; }
  std::mt19937_64& engine() noexcept { return engine_; }

 private:
  std::uint64_t key_;
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

}  // namespace cespectra
