#pragma once

// Flat key=value experiment configuration with dotted section keys:
//
//   # comment
//   seed = 42
//   dist.family = stable
//   dist.stabilityIndex = 0.7
//   sweep.n = 1..50
//
// Lists are comma separated; integer lists also accept a..b and a..b:step.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <initializer_list>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "heavytail/copula.hpp"
#include "heavytail/dist.hpp"
#include "heavytail/error.hpp"
#include "heavytail/io.hpp"
#include "heavytail/portfolio.hpp"
#include "heavytail/rng.hpp"
#include "heavytail/utility.hpp"

namespace heavytail {

/// 64-bit FNV-1a.
inline std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

class Config {
 public:
  Config() = default;
  explicit Config(std::map<std::string, std::string> values) : values_(std::move(values)) {}
  Config(std::initializer_list<std::pair<const std::string, std::string>> values) : values_(values) {}

  static Config parse(std::istream& in, const std::string& source = "<config>") {
    std::map<std::string, std::string> v;
    std::string line;
    std::size_t no = 0;
    while (std::getline(in, line)) {
      ++no;
      const std::string t = detail::trim(line);
      if (t.empty() || t.front() == '#') continue;
      const auto eq = t.find('=');
      const auto where = source + ":" + std::to_string(no);
      require(eq != std::string::npos, ErrorKind::Validation, where + ": expected key = value");
      const std::string key = detail::trim(std::string_view(t).substr(0, eq));
      const std::string val = detail::trim(std::string_view(t).substr(eq + 1));
      require(!key.empty(), ErrorKind::Validation, where + ": empty key");
      require(v.emplace(key, val).second, ErrorKind::Validation, where + ": duplicate key '" + key + "'");
    }
    return Config(std::move(v));
  }

  static Config load(const std::string& path) {
    std::ifstream in(path);
    require(static_cast<bool>(in), ErrorKind::Io, "cannot open config " + path);
    return parse(in, path);
  }

  bool has(const std::string& key) const { return values_.count(key) != 0; }
  void set(const std::string& key, const std::string& value) { values_[key] = value; }
  const std::map<std::string, std::string>& values() const noexcept { return values_; }

  std::string get_string(const std::string& key) const {
    used_.insert(key);
    const auto it = values_.find(key);
    require(it != values_.end(), ErrorKind::Validation, "missing config key '" + key + "'");
    return it->second;
  }
  std::string get_string(const std::string& key, const std::string& fallback) const {
    return has(key) ? get_string(key) : fallback;
  }

  double get_double(const std::string& key) const { return to_double(key, get_string(key)); }
  double get_double(const std::string& key, double fallback) const {
    return has(key) ? get_double(key) : fallback;
  }

  std::uint64_t get_uint(const std::string& key) const { return to_uint(key, get_string(key)); }
  std::uint64_t get_uint(const std::string& key, std::uint64_t fallback) const {
    return has(key) ? get_uint(key) : fallback;
  }

  bool get_bool(const std::string& key, bool fallback) const {
    if (!has(key)) return fallback;
    const auto s = get_string(key);
    if (s == "true" || s == "1" || s == "yes") return true;
    if (s == "false" || s == "0" || s == "no") return false;
    throw Error(ErrorKind::Validation, "config key '" + key + "': expected a boolean, got '" + s + "'");
  }

  std::vector<double> get_doubles(const std::string& key) const {
    std::vector<double> out;
    for (const auto& item : detail::split(get_string(key), ',')) out.push_back(to_double(key, item));
    return out;
  }
  std::vector<double> get_doubles(const std::string& key, std::vector<double> fallback) const {
    return has(key) ? get_doubles(key) : fallback;
  }

  std::vector<std::size_t> get_sizes(const std::string& key) const {
    std::vector<std::size_t> out;
    for (const auto& item : detail::split(get_string(key), ',')) {
      const auto dots = item.find("..");
      if (dots == std::string::npos) {
        out.push_back(to_uint(key, item));
        continue;
      }
      const std::string rest = item.substr(dots + 2);
      const auto colon = rest.find(':');
      const auto lo = to_uint(key, item.substr(0, dots));
      const auto hi = to_uint(key, rest.substr(0, colon));
      const auto step = colon == std::string::npos ? 1 : to_uint(key, rest.substr(colon + 1));
      require(lo <= hi && step >= 1, ErrorKind::Validation, "config key '" + key + "': bad range '" + item + "'");
      for (auto v = lo; v <= hi; v += step) out.push_back(v);
    }
    return out;
  }
  std::vector<std::size_t> get_sizes(const std::string& key, std::vector<std::size_t> fallback) const {
    return has(key) ? get_sizes(key) : fallback;
  }

  std::vector<std::string> get_strings(const std::string& key, std::vector<std::string> fallback) const {
    return has(key) ? detail::split(get_string(key), ',') : fallback;
  }

  /// Keys present in the file that no getter has read.
  std::vector<std::string> unused_keys() const {
    std::vector<std::string> out;
    for (const auto& [k, v] : values_)
      if (!used_.count(k)) out.push_back(k);
    return out;
  }

  /// Sorted "key=value" lines; hashing this text identifies the run.
  std::string canonical() const {
    std::string s;
    for (const auto& [k, v] : values_) s += k + "=" + v + "\n";
    return s;
  }

  std::uint64_t hash() const { return fnv1a(canonical()); }

 private:
  static double to_double(const std::string& key, const std::string& s) {
    if (s == "inf" || s == "infinity") return kInfinity;
    const auto v = detail::parse_double(s);
    require(v.has_value(), ErrorKind::Validation, "config key '" + key + "': expected a number, got '" + s + "'");
    return *v;
  }
  static std::uint64_t to_uint(const std::string& key, const std::string& s) {
    std::uint64_t v = 0;
    std::string t = s;
    t.erase(std::remove(t.begin(), t.end(), '_'), t.end());
    // Allow 1e6-style counts.
    if (t.find_first_of("eE.") != std::string::npos) {
      const auto d = detail::parse_double(t);
      require(d && *d >= 0.0 && *d == std::floor(*d) && *d < 1.8e19, ErrorKind::Validation,
              "config key '" + key + "': expected a nonnegative integer, got '" + s + "'");
      return static_cast<std::uint64_t>(*d);
    }
    const auto res = std::from_chars(t.data(), t.data() + t.size(), v);
    require(res.ec == std::errc() && res.ptr == t.data() + t.size() && !t.empty(), ErrorKind::Validation,
            "config key '" + key + "': expected a nonnegative integer, got '" + s + "'");
    return v;
  }

  std::map<std::string, std::string> values_;
  mutable std::set<std::string> used_;
};

/// Master seed: config `seed`, then HEAVYTAIL_SEED, then an explicit override.
inline Seed resolve_seed(const Config& c, std::optional<Seed> cli_override = std::nullopt) {
  Seed s = c.get_uint("seed", 0);
  if (const char* env = std::getenv("HEAVYTAIL_SEED"); env && *env) {
    Config e({{"HEAVYTAIL_SEED", env}});
    s = e.get_uint("HEAVYTAIL_SEED");
  }
  if (cli_override) s = *cli_override;
  return s;
}

/// Distribution under `prefix` (e.g. "dist"); `prefix.family` selects the
/// variant and the remaining keys use the field names below.
inline DistributionSpec parse_distribution(const Config& c, const std::string& prefix) {
  const auto key = [&](const char* k) { return prefix + "." + k; };
  const std::string family = c.get_string(key("family"));
  DistributionSpec spec;
  if (family == "stable") {
    Stable s;
    s.stability_index = c.has(key("alpha")) ? c.get_double(key("alpha")) : c.get_double(key("stabilityIndex"));
    s.scale = c.get_double(key("scale"), 1.0);
    s.skewness = c.get_double(key("skewness"), 0.0);
    s.location = c.get_double(key("location"), 0.0);
    const auto p = c.get_string(key("parameterization"), "S0");
    require(p == "S0" || p == "S1", ErrorKind::Validation, key("parameterization") + " must be S0 or S1");
    s.parameterization = p == "S0" ? StableParameterization::S0 : StableParameterization::S1;
    spec = s;
  } else if (family == "normal") {
    spec = Normal{c.get_double(key("mean"), 0.0), c.get_double(key("stdev"), 1.0)};
  } else if (family == "lognormal") {
    spec = LogNormal{c.get_double(key("logMean"), 0.0), c.get_double(key("logStdev"), 1.0)};
  } else if (family == "levy") {
    const auto o = c.get_string(key("orientation"), "right-tailed");
    require(o == "right-tailed" || o == "paper-mirrored", ErrorKind::Validation,
            key("orientation") + " must be right-tailed or paper-mirrored");
    spec = Levy{c.get_double(key("location"), 0.0), c.get_double(key("scale"), 1.0),
                o == "right-tailed" ? LevyOrientation::RightTailed : LevyOrientation::PaperMirrored};
  } else if (family == "cauchy") {
    spec = Cauchy{c.get_double(key("location"), 0.0), c.get_double(key("scale"), 1.0)};
  } else if (family == "gpd") {
    spec = Gpd{c.get_double(key("shape")), c.get_double(key("scale"), 1.0), c.get_double(key("threshold"), 0.0)};
  } else if (family == "powerlaw") {
    const double a = c.has(key("alpha")) ? c.get_double(key("alpha")) : c.get_double(key("tailIndex"));
    spec = PowerLaw{a, c.get_double(key("lowerBound"), 1.0)};
  } else {
    throw Error(ErrorKind::Validation, key("family") + ": unknown family '" + family + "'");
  }
  try {
    validate(spec);
  } catch (const Error& e) {
    throw Error(ErrorKind::Validation, prefix + ": " + e.what());
  }
  return spec;
}

inline CopulaSpec parse_copula(const Config& c, const std::string& prefix) {
  const auto key = [&](const char* k) { return prefix + "." + k; };
  const std::string type = c.get_string(key("type"), "efgm");
  CopulaSpec spec;
  if (type == "efgm") {
    spec = Efgm{c.get_uint(key("dimension"), 2), c.get_double(key("gamma"))};
  } else if (type == "cubic-section") {
    spec = PowerCopula{cubic_section_polynomial(c.get_double(key("theta")), c.get_double(key("lambda"), 0.0))};
  } else if (type == "efgm-coefficients") {
    spec = PowerCopula{efgm_polynomial(c.get_uint(key("dimension"), 2), c.get_double(key("gamma")))};
  } else {
    throw Error(ErrorKind::Validation, key("type") + ": unknown copula type '" + type + "'");
  }
  try {
    validate(spec);
  } catch (const Error& e) {
    throw Error(ErrorKind::Validation, prefix + ": " + e.what());
  }
  return spec;
}

inline LiabilitySpec parse_liability(const Config& c, const std::string& prefix) {
  LiabilitySpec l;
  l.cap = c.get_double(prefix + ".k", 70.0);
  l.risk_aversion = c.get_double(prefix + ".riskAversion", 0.0315);
  const auto conv = c.get_string(prefix + ".convention", "remaining-capital");
  require(conv == "remaining-capital" || conv == "literal-loss-negated", ErrorKind::Validation,
          prefix + ".convention must be remaining-capital or literal-loss-negated");
  l.convention = conv == "remaining-capital" ? UtilityConvention::RemainingCapital
                                             : UtilityConvention::LiteralLossNegated;
  try {
    validate(l);
  } catch (const Error& e) {
    throw Error(ErrorKind::Validation, prefix + ": " + e.what());
  }
  return l;
}

inline TruncationSpec parse_truncation(const Config& c, const std::string& prefix) {
  TruncationSpec t;
  const auto mode = c.get_string(prefix + ".mode", "zero-out");
  require(mode == "zero-out" || mode == "clip", ErrorKind::Validation, prefix + ".mode must be zero-out or clip");
  t.mode = mode == "zero-out" ? TruncationMode::ZeroOut : TruncationMode::Clip;
  if (c.has(prefix + ".a")) {
    t.support_length = c.get_double(prefix + ".a");
    require(t.support_length > 0.0, ErrorKind::Validation, prefix + ".a must be > 0");
  }
  return t;
}

}  // namespace heavytail
