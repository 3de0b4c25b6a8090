#pragma once

// key=value experiment configuration. Blank lines and '#' comments are
// ignored; list values are comma separated. The key set is closed: anything
// else is a configuration error.

#include <algorithm>
#include <charconv>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "cespectra/ce_schemes.hpp"
#include "cespectra/phase_lab.hpp"

namespace cespectra::cli {

/// Maps to exit code 2.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Maps to exit code 3.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Kind { benchmark, phase, gamma, table1 };

inline Kind parse_kind(const std::string& s) {
  if (s == "benchmark") return Kind::benchmark;
  if (s == "phase") return Kind::phase;
  if (s == "gamma") return Kind::gamma;
  if (s == "table1") return Kind::table1;
  throw ConfigError("unknown kind '" + s + "'");
}

inline std::string to_string(Kind k) {
  switch (k) {
    case Kind::benchmark: return "benchmark";
    case Kind::phase: return "phase";
    case Kind::gamma: return "gamma";
    case Kind::table1: return "table1";
  }
  return "?";
}

inline const std::set<std::string>& known_keys() {
  static const std::set<std::string> keys{
      "kind",  "target", "scheme", "strategy", "rho",       "delta_target", "m",
      "n",     "n_p",    "t_max",  "N",        "lambda1",   "kappa",        "dims",
      "alpha", "alignment", "seed", "workers", "output_dir", "divergence_lambda_cap", "cap_quantile_at_zero"};
  return keys;
}

inline std::size_t default_workers() {
  const unsigned hc = std::thread::hardware_concurrency();
  return hc == 0 ? 1 : hc;
}

struct ExperimentConfig {
  Kind kind = Kind::benchmark;
  /// lin | quad | fin for benchmarks (table1 also accepts "all"); slab | halfspace otherwise.
  std::string target;
  SchemeConfig scheme;
  bool m_set = false;
  bool n_set = false;
  /// Explicit dimensions; benchmarks take the first entry as d.
  std::vector<std::size_t> dims;
  /// Learning sizes; the gamma experiment uses the whole list as its n grid.
  std::vector<std::size_t> n_list;
  std::vector<double> kappas;
  double lambda1 = 0.5;
  std::optional<double> alpha;
  Alignment alignment = Alignment::v_in_u_perp;
  std::size_t repetitions = kTable1Repetitions;
  std::size_t workers = default_workers();
  std::string output_dir = "out";
  std::uint64_t seed = 0;
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

inline double to_double(const std::string& key, const std::string& v) {
  double x = 0.0;
  const auto* end = v.data() + v.size();
  auto [p, ec] = std::from_chars(v.data(), end, x);
  if (ec != std::errc() || p != end) throw ConfigError("key '" + key + "': not a number: '" + v + "'");
  return x;
}

inline std::uint64_t to_uint(const std::string& key, const std::string& v) {
  std::uint64_t x = 0;
  const auto* end = v.data() + v.size();
  auto [p, ec] = std::from_chars(v.data(), end, x);
  if (ec != std::errc() || p != end) throw ConfigError("key '" + key + "': not a non-negative integer: '" + v + "'");
  return x;
}

inline std::size_t to_positive(const std::string& key, const std::string& v) {
  const auto x = to_uint(key, v);
  if (x == 0) throw ConfigError("key '" + key + "' must be positive");
  return static_cast<std::size_t>(x);
}

inline bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError("key '" + key + "': not a boolean: '" + v + "'");
}

}  // namespace detail

/// Raw key/value pairs; rejects unknown and repeated keys and malformed lines.
inline std::map<std::string, std::string> parse_pairs(const std::string& text) {
  std::map<std::string, std::string> kv;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("line " + std::to_string(lineno) + ": expected key=value");
    const std::string key = detail::trim(line.substr(0, eq));
    const std::string value = detail::trim(line.substr(eq + 1));
    if (!known_keys().count(key)) throw ConfigError("line " + std::to_string(lineno) + ": unknown key '" + key + "'");
    if (value.empty()) throw ConfigError("line " + std::to_string(lineno) + ": empty value for '" + key + "'");
    if (!kv.emplace(key, value).second) throw ConfigError("line " + std::to_string(lineno) + ": repeated key '" + key + "'");
  }
  return kv;
}

/// Checks the fields relevant to cfg.kind; throws ConfigError.
inline void validate(ExperimentConfig& cfg) {
  auto fail = [](const std::string& m) { throw ConfigError(m); };
  if (cfg.repetitions < 1) fail("N must be at least 1");
  if (cfg.workers < 1) fail("workers must be at least 1");
  if (cfg.output_dir.empty()) fail("output_dir must not be empty");
  switch (cfg.kind) {
    case Kind::benchmark:
    case Kind::table1: {
      if (cfg.target.empty()) cfg.target = cfg.kind == Kind::table1 ? "all" : "";
      if (cfg.target.empty()) fail("benchmark needs a target (lin, quad or fin)");
      if (cfg.target != "lin" && cfg.target != "quad" && cfg.target != "fin" &&
          !(cfg.kind == Kind::table1 && cfg.target == "all"))
        fail("unknown benchmark target '" + cfg.target + "'");
      if (cfg.dims.size() > 1) fail("benchmarks take a single dimension");
      if (cfg.n_list.size() > 1) fail("benchmarks take a single n");
      try {
        SchemeConfig probe = cfg.scheme;
        if (cfg.kind == Kind::table1) {
          probe.scheme = Scheme::ce;
          probe.strategy = DirectionStrategy::none;
        }
        probe.validate();
      } catch (const DomainError& e) {
        fail(e.what());
      }
      break;
    }
    case Kind::phase: {
      if (cfg.target.empty()) cfg.target = "halfspace";
      if (cfg.kappas.empty()) fail("phase needs at least one kappa");
      if (cfg.dims.empty()) fail("dims must not be empty");
      try {
        parse_phase_target(cfg.target);
        for (double k : cfg.kappas) {
          SweepConfig s;
          s.target = parse_phase_target(cfg.target);
          s.alignment = cfg.alignment;
          s.lambda1 = cfg.lambda1;
          s.kappa = k;
          s.dims = cfg.dims;
          s.reps = cfg.repetitions;
          s.alpha = cfg.alpha;
          s.validate();
        }
      } catch (const DomainError& e) {
        fail(e.what());
      }
      break;
    }
    case Kind::gamma: {
      if (cfg.target.empty()) cfg.target = "slab";
      if (cfg.dims.size() > 1) fail("gamma takes a single dimension");
      if (cfg.n_list.size() < 4) fail("gamma needs an n grid of at least 4 sizes");
      for (std::size_t i = 1; i < cfg.n_list.size(); ++i)
        if (cfg.n_list[i] <= cfg.n_list[i - 1]) fail("the n grid must be increasing");
      if (static_cast<double>(cfg.n_list.back()) < 100.0 * static_cast<double>(cfg.n_list.front()))
        fail("the n grid must span at least two decades");
      if (cfg.repetitions < 2) fail("gamma needs N >= 2");
      try {
        const auto t = parse_phase_target(cfg.target);
        if (!(cfg.lambda1 > 0.0 && cfg.lambda1 <= 1.0)) fail("lambda1 must lie in (0,1]");
        if (cfg.alpha) {
          if (t != PhaseTarget::slab) fail("alpha applies to the slab target only");
          if (!(*cfg.alpha > 0.0 && *cfg.alpha <= 1.0)) fail("alpha must lie in (0,1]");
          if (!(cfg.lambda1 < 1.0)) fail("alpha requires lambda1 < 1");
        }
      } catch (const DomainError& e) {
        fail(e.what());
      }
      if (!cfg.dims.empty() && cfg.dims[0] < 2) fail("gamma needs d >= 2");
      break;
    }
  }
}

/// Parses and validates. `kind_override` (the subcommand) must agree with a
/// `kind` key when both are present.
inline ExperimentConfig parse_config(const std::string& text, std::optional<Kind> kind_override = std::nullopt) {
  const auto kv = parse_pairs(text);
  ExperimentConfig cfg;
  auto get = [&](const char* k) -> const std::string* {
    auto it = kv.find(k);
    return it == kv.end() ? nullptr : &it->second;
  };
  using namespace detail;

  if (auto v = get("kind")) cfg.kind = parse_kind(*v);
  if (kind_override) {
    if (get("kind") && cfg.kind != *kind_override)
      throw ConfigError("config kind '" + to_string(cfg.kind) + "' does not match command '" +
                        to_string(*kind_override) + "'");
    cfg.kind = *kind_override;
  } else if (!get("kind")) {
    throw ConfigError("missing key 'kind'");
  }

  try {
    if (auto v = get("target")) cfg.target = *v;
    if (auto v = get("scheme")) cfg.scheme.scheme = parse_scheme(*v);
    if (auto v = get("strategy")) cfg.scheme.strategy = parse_strategy(*v);
    if (auto v = get("alignment")) cfg.alignment = parse_alignment(*v);
  } catch (const DomainError& e) {
    throw ConfigError(e.what());
  }
  if (auto v = get("rho")) cfg.scheme.rho = to_double("rho", *v);
  if (auto v = get("delta_target")) cfg.scheme.delta_target = to_double("delta_target", *v);
  if (auto v = get("m")) {
    cfg.scheme.m = to_positive("m", *v);
    cfg.m_set = true;
  }
  if (auto v = get("n")) {
    for (const auto& s : split_list(*v)) cfg.n_list.push_back(to_positive("n", s));
    if (cfg.n_list.empty()) throw ConfigError("key 'n' is empty");
    cfg.scheme.n = cfg.n_list.front();
    cfg.n_set = true;
  }
  if (auto v = get("n_p")) cfg.scheme.n_p = to_positive("n_p", *v);
  if (auto v = get("t_max")) cfg.scheme.t_max = to_positive("t_max", *v);
  if (auto v = get("N")) cfg.repetitions = to_positive("N", *v);
  if (auto v = get("lambda1")) cfg.lambda1 = to_double("lambda1", *v);
  if (auto v = get("kappa"))
    for (const auto& s : split_list(*v)) cfg.kappas.push_back(to_double("kappa", s));
  if (auto v = get("dims")) {
    for (const auto& s : split_list(*v)) cfg.dims.push_back(to_positive("dims", s));
    if (cfg.dims.empty()) throw ConfigError("dims must not be empty");
  }
  if (auto v = get("alpha")) cfg.alpha = to_double("alpha", *v);
  if (auto v = get("seed")) cfg.seed = to_uint("seed", *v);
  if (auto v = get("workers")) cfg.workers = to_positive("workers", *v);
  if (auto v = get("output_dir")) cfg.output_dir = *v;
  if (auto v = get("divergence_lambda_cap")) cfg.scheme.divergence_lambda_cap = to_double("divergence_lambda_cap", *v);
  if (auto v = get("cap_quantile_at_zero")) cfg.scheme.cap_quantile_at_zero = to_bool("cap_quantile_at_zero", *v);
  if (!cfg.m_set) cfg.scheme.m = cfg.scheme.n;
  cfg.scheme.seed = cfg.seed;

  validate(cfg);
  return cfg;
}

inline ExperimentConfig load_config(const std::string& path, std::optional<Kind> kind_override = std::nullopt) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read config file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), kind_override);
}

}  // namespace cespectra::cli
