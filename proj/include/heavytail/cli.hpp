#pragma once

// Experiment dispatch behind the heavytail command line. Each subcommand
// reads a Config, runs one experiment and yields a long-format result table;
// dispatch() writes it as <subcommand>.csv next to a manifest.json.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numeric>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <boost/version.hpp>
#include <json.hpp>

#include "heavytail/config.hpp"
#include "heavytail/copula.hpp"
#include "heavytail/dist.hpp"
#include "heavytail/error.hpp"
#include "heavytail/fit.hpp"
#include "heavytail/io.hpp"
#include "heavytail/parallel.hpp"
#include "heavytail/portfolio.hpp"
#include "heavytail/risk.hpp"
#include "heavytail/stats.hpp"
#include "heavytail/utility.hpp"

#ifndef HEAVYTAIL_VERSION
#define HEAVYTAIL_VERSION "0.0.0"
#endif

namespace heavytail::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitError = 2;
inline constexpr int kExitInconclusive = 3;

inline constexpr std::string_view kResultSchema = "heavytail-result/1";
inline constexpr std::string_view kResultHeader =
    "subcommand,series,parameter,value,quantity,estimate,ci_low,ci_high,sample_count,verdict";

inline constexpr std::string_view kSubcommands[] = {"fit",          "var-sweep",  "bootstrap", "schur-scan",
                                                    "trunc-scan",   "copula-check", "eu-sweep", "synth"};

// Seed streams under the master seed.
inline constexpr std::uint64_t kDataStream = 0;
inline constexpr std::uint64_t kExperimentStream = 1;

/// One long-format row. Empty optionals are written as empty cells.
struct ResultRow {
  ResultRow() = default;
  ResultRow(std::string series_, std::string parameter_, std::string value_, std::string quantity_)
      : series(std::move(series_)), parameter(std::move(parameter_)), value(std::move(value_)),
        quantity(std::move(quantity_)) {}

  std::string series;
  std::string parameter;
  std::string value;
  std::string quantity;
  std::optional<double> estimate;
  std::optional<double> ci_low;
  std::optional<double> ci_high;
  std::size_t sample_count = 0;
  std::string verdict;

  bool operator==(const ResultRow&) const = default;
};

struct ResultTable {
  std::string subcommand;
  std::vector<ResultRow> rows;

  ResultRow& add(std::string series, std::string parameter, std::string value, std::string quantity) {
    rows.emplace_back(std::move(series), std::move(parameter), std::move(value), std::move(quantity));
    return rows.back();
  }

  /// Rows matching every non-empty selector.
  std::vector<ResultRow> find(std::string_view quantity, std::string_view series = {},
                              std::string_view value = {}) const {
    std::vector<ResultRow> out;
    for (const auto& r : rows)
      if (r.quantity == quantity && (series.empty() || r.series == series) && (value.empty() || r.value == value))
        out.push_back(r);
    return out;
  }
};

namespace detail {

inline std::string cell(std::string s) {
  std::replace(s.begin(), s.end(), ',', ';');
  std::replace(s.begin(), s.end(), '\n', ' ');
  return s;
}

inline std::string cell(const std::optional<double>& v) { return v ? format_double(*v) : std::string(); }

inline std::optional<double> parse_cell(const std::string& s, std::size_t line) {
  if (s.empty()) return std::nullopt;
  if (s == "inf") return kInfinity;
  if (s == "-inf") return -kInfinity;
  if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  const auto v = heavytail::detail::parse_double(s);
  require(v.has_value(), ErrorKind::Validation, "result line " + std::to_string(line) + ": bad number '" + s + "'");
  return v;
}

}  // namespace detail

inline void write_results(const ResultTable& t, std::ostream& out) {
  out << "# schema: " << kResultSchema << '\n' << kResultHeader << '\n';
  for (const auto& r : t.rows)
    out << detail::cell(t.subcommand) << ',' << detail::cell(r.series) << ',' << detail::cell(r.parameter) << ','
        << detail::cell(r.value) << ',' << detail::cell(r.quantity) << ',' << detail::cell(r.estimate) << ','
        << detail::cell(r.ci_low) << ',' << detail::cell(r.ci_high) << ',' << r.sample_count << ','
        << detail::cell(r.verdict) << '\n';
}

inline std::string results_text(const ResultTable& t) {
  std::ostringstream os;
  write_results(t, os);
  return os.str();
}

inline ResultTable parse_results(std::istream& in) {
  ResultTable t;
  std::string line;
  std::size_t no = 0;
  bool schema = false, header = false;
  while (std::getline(in, line)) {
    ++no;
    if (line.empty()) continue;
    if (line.front() == '#') {
      if (line == "# schema: " + std::string(kResultSchema)) schema = true;
      continue;
    }
    if (!header) {
      require(schema, ErrorKind::Validation, "result file lacks schema " + std::string(kResultSchema));
      require(line == kResultHeader, ErrorKind::Validation, "unexpected result header: " + line);
      header = true;
      continue;
    }
    const auto f = heavytail::detail::split(line, ',');
    require(f.size() == 10, ErrorKind::Validation, "result line " + std::to_string(no) + ": expected 10 fields");
    if (t.subcommand.empty()) t.subcommand = f[0];
    ResultRow r(f[1], f[2], f[3], f[4]);
    r.estimate = detail::parse_cell(f[5], no);
    r.ci_low = detail::parse_cell(f[6], no);
    r.ci_high = detail::parse_cell(f[7], no);
    r.sample_count = static_cast<std::size_t>(*detail::parse_cell(f[8], no));
    r.verdict = f[9];
    t.rows.push_back(std::move(r));
  }
  require(header, ErrorKind::EmptyInput, "result file has no header");
  return t;
}

/// Inputs shared by every subcommand.
struct Experiment {
  const Config& config;
  Seed seed = 0;
  std::filesystem::path base_dir;  // relative data paths resolve against this
  std::ostream* log = nullptr;

  /// Call after all settings are read: any key left over is a typo.
  void seal() const {
    const auto unused = config.unused_keys();
    if (unused.empty()) return;
    std::string s;
    for (const auto& k : unused) s += (s.empty() ? "" : ", ") + k;
    throw Error(ErrorKind::Validation, "unknown config key(s): " + s);
  }

  Seed stream(std::initializer_list<std::uint64_t> path) const {
    std::vector<std::uint64_t> p{kExperimentStream};
    p.insert(p.end(), path.begin(), path.end());
    Seed s = seed;
    for (auto v : p) s = derive_seed(s, {v});
    return s;
  }

  void note(const std::string& msg) const {
    if (log) *log << "heavytail: " << msg << '\n';
  }
};

struct ExperimentOutput {
  ResultTable table;
  bool inconclusive = false;
  std::vector<std::pair<std::string, std::string>> extra_files;  // name, content
};

namespace detail {

inline std::string level_label(double level) { return "level=" + format_double(level); }

inline std::string spec_label(const DistributionSpec& s) { return describe(s); }

inline std::vector<std::pair<std::string, double>> spec_fields(const DistributionSpec& s) {
  if (const auto* d = std::get_if<Normal>(&s)) return {{"mean", d->mean}, {"stdev", d->stdev}};
  if (const auto* d = std::get_if<LogNormal>(&s)) return {{"logMean", d->log_mean}, {"logStdev", d->log_stdev}};
  if (const auto* d = std::get_if<Gpd>(&s)) return {{"shape", d->shape}, {"scale", d->scale}};
  if (const auto* d = std::get_if<PowerLaw>(&s)) return {{"tailIndex", d->tail_index}};
  return {};
}

/// strictly-decreasing, strictly-increasing, decreasing-trend,
/// increasing-trend or inconclusive, with Kendall's tau as the estimate.
inline std::pair<std::string, double> trend(std::span<const double> x, std::span<const double> y) {
  if (y.size() < 2) return {"inconclusive", 0.0};
  bool dec = true, inc = true;
  for (std::size_t i = 1; i < y.size(); ++i) {
    dec = dec && y[i] < y[i - 1];
    inc = inc && y[i] > y[i - 1];
  }
  const double tau = stats::kendall_tau(x, y);
  if (dec) return {"strictly-decreasing", tau};
  if (inc) return {"strictly-increasing", tau};
  if (tau < 0.0) return {"decreasing-trend", tau};
  if (tau > 0.0) return {"increasing-trend", tau};
  return {"inconclusive", tau};
}

inline void add_report(ResultRow& row, const RiskMeasureReport& r) {
  row.estimate = r.point_estimate;
  row.ci_low = r.ci_low;
  row.ci_high = r.ci_high;
  row.sample_count = r.sample_count;
}

inline void add_interval(ResultRow& row, double estimate, const stats::Interval& ci, std::size_t count) {
  row.estimate = estimate;
  row.ci_low = ci.low;
  row.ci_high = ci.high;
  row.sample_count = count;
}

/// Loss data from `data.path`, or synthesized from the `data.*` spec.
class DataSource {
 public:
  explicit DataSource(const Experiment& x) : x_(x) {
    if (x.config.has("data.path")) {
      std::filesystem::path p = x.config.get_string("data.path");
      if (p.is_relative()) p = x.base_dir / p;
      path_ = p.string();
    } else {
      spec_ = parse_distribution(x.config, "data");
      count_ = x.config.get_uint("data.count", 9015);
    }
  }

  LossDataset dataset() const {
    if (path_) {
      auto ds = load_losses(*path_);
      auto v = ds.losses();
      std::sort(v.begin(), v.end());
      x_.note("loaded " + std::to_string(v.size()) + " records from " + *path_ + " (min " + format_double(v.front()) +
              ", median " + format_double(v[v.size() / 2]) + ", max " + format_double(v.back()) +
              (ds.unit.empty() ? "" : ", unit " + ds.unit) + ")");
      return ds;
    }
    return synth_dataset(*spec_, count_, derive_seed(x_.seed, {kDataStream}));
  }

  std::vector<double> losses() const { return dataset().losses(); }

 private:
  const Experiment& x_;
  std::optional<std::string> path_;
  std::optional<DistributionSpec> spec_;
  std::size_t count_ = 0;
};

}  // namespace detail

inline ExperimentOutput run_synth(const Experiment& x) {
  const detail::DataSource src(x);
  const std::string file = x.config.get_string("synth.file", "losses.csv");
  x.seal();
  auto ds = src.dataset();
  if (!x.config.has("data.path")) ds.provenance.push_back("master seed: " + std::to_string(x.seed) + " (data stream)");
  ExperimentOutput out;
  out.table.subcommand = "synth";
  std::ostringstream os;
  write_losses(ds, os);
  out.extra_files.emplace_back(file, os.str());
  auto v = ds.losses();
  std::sort(v.begin(), v.end());
  const std::string series = ds.provenance.size() > 1 && ds.provenance[1].rfind("spec: ", 0) == 0
                                 ? ds.provenance[1].substr(6)
                                 : "data";
  out.table.add(series, "file", file, "count").estimate = static_cast<double>(v.size());
  out.table.add(series, "file", file, "min").estimate = v.front();
  out.table.add(series, "file", file, "median").estimate = v[v.size() / 2];
  out.table.add(series, "file", file, "mean").estimate = stats::mean(v);
  out.table.add(series, "file", file, "max").estimate = v.back();
  return out;
}

inline ExperimentOutput run_fit(const Experiment& x) {
  const detail::DataSource src(x);
  std::vector<FitFamily> families;
  for (const auto& f : x.config.get_strings("fit.families", {"normal", "lognormal", "gpd"}))
    families.push_back(parse_fit_family(f));
  const double hill_fraction = x.config.get_double("fit.hillFraction", 0.1);
  x.seal();

  const auto data = src.losses();
  std::vector<FitReport> reports;
  for (auto f : families) reports.push_back(fit_mle(f, data));
  const auto ranked = select_model(reports);

  ExperimentOutput out;
  auto& t = out.table;
  t.subcommand = "fit";
  for (std::size_t i = 0; i < ranked.size(); ++i) {
    const auto& r = ranked[i];
    const std::string fam = to_string(r.family);
    for (const auto& [name, v] : detail::spec_fields(r.fitted)) {
      auto& row = t.add(fam, "parameter", name, "fitted");
      row.estimate = v;
      row.sample_count = r.sample_size;
    }
    const std::pair<const char*, double> stats_rows[] = {{"loglik", r.log_likelihood}, {"aic", r.aic},
                                                         {"bic", r.bic}, {"ks", r.ks_statistic},
                                                         {"ad", r.ad_statistic}};
    for (const auto& [name, v] : stats_rows) {
      auto& row = t.add(fam, "statistic", name, "gof");
      row.estimate = v;
      row.sample_count = r.sample_size;
    }
    auto& rank = t.add(fam, "ranking", "aic", "rank");
    rank.estimate = static_cast<double>(i + 1);
    rank.sample_count = r.sample_size;
    rank.verdict = i == 0 ? "selected" : "not-selected";
  }
  auto& hill = t.add("data", "topFraction", format_double(hill_fraction), "hill-tail-index");
  try {
    const auto h = hill_tail_index(data, hill_fraction);
    const double half = stats::z_critical(0.95) * h.std_error;
    detail::add_interval(hill, h.tail_index, {h.tail_index - half, h.tail_index + half}, h.order_statistics);
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::InsufficientTail && e.kind() != ErrorKind::ThresholdDegeneracy) throw;
    hill.verdict = std::string(to_string(e.kind()));
  }
  return out;
}

inline ExperimentOutput run_var_sweep(const Experiment& x) {
  std::optional<detail::DataSource> src;
  std::optional<FitFamily> fit_family;
  std::optional<DistributionSpec> spec;
  if (x.config.has("fit.family")) {
    fit_family = parse_fit_family(x.config.get_string("fit.family"));
    src.emplace(x);
  } else {
    spec = parse_distribution(x.config, "dist");
  }
  const auto n_list = x.config.get_sizes("sweep.n", [] {
    std::vector<std::size_t> v(50);
    std::iota(v.begin(), v.end(), 1);
    return v;
  }());
  const auto levels = x.config.get_doubles("levels", {0.995});
  const auto measures = x.config.get_strings("measures", {"var", "cvar"});
  const std::size_t mc = x.config.get_uint("mc", 1'000'000);
  const double conf = x.config.get_double("ci.confidence", 0.95);
  for (const auto& m : measures)
    require(m == "var" || m == "cvar", ErrorKind::Validation, "measures: expected var or cvar, got '" + m + "'");
  require(!n_list.empty() && !levels.empty(), ErrorKind::Validation, "sweep.n and levels must be nonempty");
  x.seal();

  ExperimentOutput out;
  auto& t = out.table;
  t.subcommand = "var-sweep";
  if (fit_family) {
    const auto r = fit_mle(*fit_family, src->losses());
    spec = r.fitted;
    for (const auto& [name, v] : detail::spec_fields(r.fitted)) {
      auto& row = t.add("fit", "parameter", name, "fitted");
      row.estimate = v;
      row.sample_count = r.sample_size;
    }
  }
  validate(*spec);
  const std::string label = detail::spec_label(*spec);

  const bool want_var = std::count(measures.begin(), measures.end(), "var") > 0;
  const bool want_cvar = std::count(measures.begin(), measures.end(), "cvar") > 0;
  std::vector<std::vector<double>> var_curve(levels.size()), cvar_curve(levels.size());
  std::vector<ResultRow> rows;
  mean_of_n_sweep(*spec, n_list, mc, x.stream({}), [&](std::size_t n, const std::vector<double>& z) {
    for (std::size_t l = 0; l < levels.size(); ++l) {
      if (want_var) {
        auto r = var_report(z, levels[l], conf);
        ResultRow row{detail::level_label(levels[l]), "n", std::to_string(n), "VaR"};
        detail::add_report(row, r);
        rows.push_back(row);
        var_curve[l].push_back(r.point_estimate);
      }
      if (want_cvar) {
        auto r = cvar_report(z, levels[l], conf);
        ResultRow row{detail::level_label(levels[l]), "n", std::to_string(n), "CVaR"};
        detail::add_report(row, r);
        rows.push_back(row);
        cvar_curve[l].push_back(r.point_estimate);
      }
    }
  });
  t.rows.insert(t.rows.end(), rows.begin(), rows.end());

  const std::vector<double> nx(n_list.begin(), n_list.end());
  for (std::size_t l = 0; l < levels.size(); ++l) {
    const std::pair<const char*, const std::vector<double>*> curves[] = {{"VaR-trend", &var_curve[l]},
                                                                         {"CVaR-trend", &cvar_curve[l]}};
    for (const auto& [name, curve] : curves) {
      if (curve->empty()) continue;
      const auto [verdict, tau] = detail::trend(nx, *curve);
      auto& row = t.add(detail::level_label(levels[l]), "n", "all", name);
      row.estimate = tau;
      row.sample_count = mc;
      row.verdict = verdict;
      out.inconclusive = out.inconclusive || verdict == "inconclusive";
    }
  }
  for (auto& r : t.rows)
    if (r.series != "fit") r.series = label + " " + r.series;
  return out;
}

inline ExperimentOutput run_bootstrap(const Experiment& x) {
  const detail::DataSource src(x);
  const auto n_list = x.config.get_sizes("sweep.n", {1, 2, 5, 10, 20, 50});
  const double level = x.config.get_double("level", 0.995);
  BootstrapOptions opt;
  opt.inner_reps = x.config.get_uint("bootstrap.innerReps", opt.inner_reps);
  opt.outer_reps = x.config.get_uint("bootstrap.outerReps", opt.outer_reps);
  opt.ci_confidence = x.config.get_double("bootstrap.ciConfidence", opt.ci_confidence);
  x.seal();

  const auto data = src.losses();
  const auto reports = bootstrap_var_sweep(data, n_list, level, opt, x.stream({}));
  ExperimentOutput out;
  auto& t = out.table;
  t.subcommand = "bootstrap";
  std::vector<double> nx, curve;
  for (const auto& r : reports) {
    auto& row = t.add(detail::level_label(level), "n", std::to_string(r.aggregation_count), "VaR");
    detail::add_report(row, r);
    nx.push_back(static_cast<double>(r.aggregation_count));
    curve.push_back(r.point_estimate);
  }
  const auto [verdict, tau] = detail::trend(nx, curve);
  auto& row = t.add(detail::level_label(level), "n", "all", "VaR-trend");
  row.estimate = tau;
  row.sample_count = opt.inner_reps;
  row.verdict = verdict;
  out.inconclusive = verdict == "inconclusive";
  return out;
}

inline ExperimentOutput run_schur_scan(const Experiment& x) {
  const auto spec = parse_distribution(x.config, "dist");
  const std::size_t n = x.config.get_uint("schur.n", 4);
  const std::size_t steps = x.config.get_uint("schur.steps", 4);
  const double level = x.config.get_double("level", 0.99);
  const std::size_t mc = x.config.get_uint("mc", 1'000'000);
  SchurScanOptions opt;
  opt.confidence = x.config.get_double("schur.confidence", opt.confidence);
  opt.batches = x.config.get_uint("schur.batches", opt.batches);
  x.seal();

  const auto chain = majorization_chain(n, steps);
  const auto res = schur_scan(spec, chain, level, mc, x.stream({}), opt);
  ExperimentOutput out;
  auto& t = out.table;
  t.subcommand = "schur-scan";
  const std::string label = detail::spec_label(spec) + " " + detail::level_label(level);
  for (const auto& r : res.reports) {
    auto& row = t.add(label, "weights", r.weights.to_string(), "VaR");
    detail::add_interval(row, r.var_estimate, {r.ci_low, r.ci_high}, r.sample_count);
  }
  for (std::size_t g = 0; g < res.gaps.size(); ++g) {
    const auto& gap = res.gaps[g];
    auto& row = t.add(label, "weights", chain[g].to_string() + "->" + chain[g + 1].to_string(), "VaR-gap");
    detail::add_interval(row, gap.estimate, gap.ci, mc);
    row.verdict = gap.ci.low > 0.0 ? "positive" : gap.ci.high < 0.0 ? "negative" : "overlaps-zero";
  }
  auto& v = t.add(label, "chain", "n=" + std::to_string(n) + ";steps=" + std::to_string(steps), "schur-verdict");
  v.sample_count = mc;
  v.verdict = to_string(res.verdict);
  out.inconclusive = res.verdict == SchurVerdict::Inconclusive;
  return out;
}

inline ExperimentOutput run_trunc_scan(const Experiment& x) {
  const auto spec = parse_distribution(x.config, "dist");
  const double r = x.config.get_double("trunc.r", 0.5);
  std::optional<WeightVector> w;
  if (x.config.has("trunc.weights")) w = WeightVector(x.config.get_doubles("trunc.weights"));
  const std::size_t n = x.config.get_uint("trunc.n", w ? w->size() : 2);
  if (!w) w = WeightVector::equal(n);
  require(w->size() == n, ErrorKind::Validation, "trunc.weights must have trunc.n entries");
  const auto zs = x.config.get_doubles("trunc.z", {5.0});
  const auto variant_name = x.config.get_string("trunc.variant", "symmetric");
  BoundVariant variant;
  if (variant_name == "symmetric") variant = BoundVariant::Symmetric;
  else if (variant_name == "skewed") variant = BoundVariant::Skewed;
  else if (variant_name == "equal-weight-Fn") variant = BoundVariant::EqualWeightFn;
  else throw Error(ErrorKind::Validation, "trunc.variant must be symmetric, skewed or equal-weight-Fn");
  const auto tspec = parse_truncation(x.config, "trunc");
  const bool fixed_a = x.config.has("trunc.a");
  const std::size_t mc = x.config.get_uint("mc", 1'000'000);
  const std::size_t bound_mc = x.config.get_uint("trunc.boundMc", mc);
  const bool compare_fn = x.config.get_bool("trunc.compareFn", false);
  const std::size_t fn_n = x.config.get_uint("trunc.fnN", 3);
  x.seal();

  ExperimentOutput out;
  auto& t = out.table;
  t.subcommand = "trunc-scan";
  const std::string label = detail::spec_label(spec) + " " + to_string(variant) + " w=" + w->to_string() +
                            " mode=" + to_string(tspec.mode);
  for (std::size_t k = 0; k < zs.size(); ++k) {
    const double z = zs[k];
    const std::string zl = format_double(z);
    TruncationSpec ts = tspec;
    if (!fixed_a) {
      auto& a_row = t.add(label, "z", zl, "a");
      try {
        const auto b = support_bound(spec, *w, z, r, n, variant, bound_mc, x.stream({0, k}));
        t.add(label, "z", zl, "moment").estimate = b.moment;
        t.rows.back().sample_count = bound_mc;
        t.add(label, "z", zl, "divisor").estimate = b.divisor;
        t.rows.back().sample_count = bound_mc;
        auto& a = t.rows[t.rows.size() - 3];
        a.estimate = b.a;
        a.sample_count = bound_mc;
        ts.support_length = b.a;
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::BoundUndefined) throw;
        a_row.verdict = "bound-undefined";
        out.inconclusive = true;
        continue;
      }
    } else {
      t.add(label, "z", zl, "a").estimate = ts.support_length;
    }
    const auto ord = verify_truncated_ordering(spec, *w, z, ts, mc, x.stream({1, k}));
    const auto& d = ord.difference;
    t.add(label, "z", zl, "prob-weighted").estimate = d.prob_first;
    t.rows.back().sample_count = d.sample_count;
    t.add(label, "z", zl, "prob-single").estimate = d.prob_second;
    t.rows.back().sample_count = d.sample_count;
    auto& diff = t.add(label, "z", zl, "difference");
    detail::add_interval(diff, d.estimate, d.ci, d.sample_count);
    diff.verdict = d.ci.low > 0.0 ? "ordered" : d.ci.high < 0.0 ? "reversed" : "inconclusive";
    out.inconclusive = out.inconclusive || diff.verdict == "inconclusive";

    if (compare_fn) {
      const auto fn = estimate_Fn(spec, fn_n, z, mc, x.stream({2, k}));
      const auto g = estimate_G(spec, WeightVector::equal(2), z, mc, x.stream({3, k}));
      const std::string fl = "F_" + std::to_string(fn_n);
      detail::add_interval(t.add(label, "z", zl, fl), fn.estimate, fn.ci, fn.sample_count);
      detail::add_interval(t.add(label, "z", zl, "G_equal2"), g.estimate, g.ci, g.sample_count);
      auto& dom = t.add(label, "z", zl, fl + "-vs-G");
      dom.estimate = fn.estimate - g.estimate;
      dom.sample_count = mc;
      dom.verdict = fn.ci.low > g.ci.high ? "Fn-dominates" : g.ci.low > fn.ci.high ? "G-dominates" : "inconclusive";
      out.inconclusive = out.inconclusive || dom.verdict == "inconclusive";
    }
  }
  return out;
}

inline ExperimentOutput run_copula_check(const Experiment& x) {
  const auto cop = parse_copula(x.config, "copula");
  const double alpha = x.config.get_double("copula.alpha", 0.7);
  const auto levels = x.config.get_doubles("copula.levels", {0.99, 0.999});
  const std::size_t q_mc = x.config.get_uint("copula.quantileMc", 1'000'000);
  const std::size_t mc = x.config.get_uint("mc", 2'000'000);
  const bool sign_on = x.config.get_bool("sign.enabled", true);
  const auto sign_alphas = x.config.get_doubles("sign.alphas", {1.5, 0.7});
  const double sign_level = x.config.get_double("sign.level", 0.999);
  const std::size_t sign_mc = x.config.get_uint("sign.mc", 10'000'000);
  const auto* efgm = std::get_if<Efgm>(&cop);
  const double sign_gamma =
      efgm ? x.config.get_double("sign.gamma", efgm->dependence) : (sign_on ? x.config.get_double("sign.gamma") : 0.0);
  const std::size_t tau_mc = x.config.get_uint("tau.mc", 0);
  x.seal();

  ExperimentOutput out;
  auto& t = out.table;
  t.subcommand = "copula-check";
  const std::size_t n = dimension(cop);
  const std::string cl = efgm ? "efgm(gamma=" + format_double(efgm->dependence) + ";n=" + std::to_string(n) + ")"
                              : "power-copula(n=" + std::to_string(n) + ")";
  if (const auto* p = std::get_if<PowerCopula>(&cop)) {
    const auto v = power_copula_validity_check(p->cdf);
    auto& row = t.add(cl, "grid", "32", "validity");
    row.estimate = v.min_volume;
    row.verdict = v.valid ? "valid" : v.violation;
  }

  if (tau_mc > 0 && n == 2) {
    const auto u = sample_copula_uniforms(cop, tau_mc, x.stream({3}));
    std::vector<double> a(tau_mc), b(tau_mc);
    for (std::size_t i = 0; i < tau_mc; ++i) {
      a[i] = u.values[2 * i];
      b[i] = u.values[2 * i + 1];
    }
    auto& row = t.add(cl, "pairs", std::to_string(tau_mc), "kendall-tau");
    row.estimate = stats::kendall_tau(a, b);
    row.sample_count = tau_mc;
    if (efgm) t.add(cl, "pairs", std::to_string(tau_mc), "kendall-tau-efgm").estimate = 2.0 * efgm->dependence / 9.0;
  }

  const std::string tl = cl + " alpha=" + format_double(alpha);
  std::vector<double> gaps;
  for (std::size_t k = 0; k < levels.size(); ++k) {
    const std::string ll = format_double(levels[k]);
    const double q = independent_sum_quantile(alpha, n, levels[k], q_mc, x.stream({0, k}));
    const double z = q / static_cast<double>(n);
    auto& zr = t.add(tl, "level", ll, "z");
    zr.estimate = z;
    zr.sample_count = q_mc;
    const auto r = tail_equivalence_ratio(cop, alpha, n, z, mc, x.stream({1, k}));
    detail::add_interval(t.add(tl, "level", ll, "tail-ratio"), r.ratio, r.ci, mc);
    t.add(tl, "level", ll, "abs-ratio-minus-one").estimate = std::abs(r.ratio - 1.0);
    t.rows.back().sample_count = mc;
    gaps.push_back(std::abs(r.ratio - 1.0));
  }
  if (gaps.size() >= 2) {
    bool conv = true;
    for (std::size_t k = 1; k < gaps.size(); ++k) conv = conv && gaps[k] < gaps[k - 1];
    auto& row = t.add(tl, "level", "all", "tail-convergence");
    row.sample_count = mc;
    row.verdict = conv ? "converging" : "inconclusive";
    out.inconclusive = !conv;
  }

  if (sign_on) {
    for (std::size_t k = 0; k < sign_alphas.size(); ++k) {
      const auto c = var_compare_dependent(sign_alphas[k], sign_gamma, sign_level, sign_mc, x.stream({2, k}));
      const std::string sl = "efgm(gamma=" + format_double(sign_gamma) + ") alpha=" + format_double(sign_alphas[k]);
      const std::string ll = format_double(sign_level);
      detail::add_report(t.add(sl, "level", ll, "VaR-aggregate"), c.aggregate);
      detail::add_report(t.add(sl, "level", ll, "VaR-single"), c.single);
      auto& row = t.add(sl, "level", ll, "VaR-sign");
      row.estimate = c.aggregate.point_estimate - c.single.point_estimate;
      row.sample_count = sign_mc;
      row.verdict = to_string(c.verdict);
      out.inconclusive = out.inconclusive || c.verdict == SignVerdict::Inconclusive;
    }
  }
  return out;
}

inline ExperimentOutput run_eu_sweep(const Experiment& x) {
  const auto spec = parse_distribution(x.config, "dist");
  const auto liab = parse_liability(x.config, "liability");
  const auto n_list = x.config.get_sizes("eu.n", {1, 2, 3, 4, 5, 7, 10, 15, 20, 30, 40, 50, 70, 100});
  const auto m_list = x.config.get_sizes("eu.m", n_list);
  const auto curves = x.config.get_strings("eu.curves", {"fixed-pool", "equal-pool"});
  const std::size_t mc = x.config.get_uint("mc", 100'000);
  for (const auto& c : curves)
    require(c == "fixed-pool" || c == "equal-pool", ErrorKind::Validation,
            "eu.curves: expected fixed-pool or equal-pool, got '" + c + "'");
  x.seal();

  const auto g = pooled_eu_sweep(spec, n_list, m_list, liab, mc, x.stream({}));
  ExperimentOutput out;
  auto& t = out.table;
  t.subcommand = "eu-sweep";
  const std::string label = detail::spec_label(spec) + " k=" + format_double(liab.cap) +
                            " beta=" + format_double(liab.risk_aversion) + " " + to_string(liab.convention);
  for (std::size_t j = 0; j < m_list.size(); ++j)
    for (std::size_t i = 0; i < n_list.size(); ++i)
      detail::add_interval(t.add(label + " m=" + std::to_string(m_list[j]), "n", std::to_string(n_list[i]), "EU"),
                           g.at(i, j).mean, g.at(i, j).ci, mc);

  const auto classify = [&](const std::string& series, const std::vector<CurvePoint>& curve) {
    auto& row = t.add(series, "n", "all", "shape");
    row.sample_count = mc;
    if (curve.size() < 5) {
      row.verdict = "inconclusive";
      out.inconclusive = true;
      return;
    }
    const auto s = ushape_detect(curve);
    row.estimate = s.argmin;
    row.verdict = to_string(s.verdict);
    out.inconclusive = out.inconclusive || s.verdict == ShapeVerdict::Inconclusive;
  };
  if (std::count(curves.begin(), curves.end(), "fixed-pool"))
    for (std::size_t j = 0; j < m_list.size(); ++j)
      classify(label + " m=" + std::to_string(m_list[j]), eu_curve_fixed_pool(g, j));
  if (std::count(curves.begin(), curves.end(), "equal-pool")) classify(label + " m=n", eu_curve_equal_pool(g));
  return out;
}

using Runner = std::function<ExperimentOutput(const Experiment&)>;

inline Runner runner_for(const std::string& subcommand) {
  if (subcommand == "fit") return run_fit;
  if (subcommand == "var-sweep") return run_var_sweep;
  if (subcommand == "bootstrap") return run_bootstrap;
  if (subcommand == "schur-scan") return run_schur_scan;
  if (subcommand == "trunc-scan") return run_trunc_scan;
  if (subcommand == "copula-check") return run_copula_check;
  if (subcommand == "eu-sweep") return run_eu_sweep;
  if (subcommand == "synth") return run_synth;
  std::string known;
  for (auto s : kSubcommands) known += (known.empty() ? "" : ", ") + std::string(s);
  throw Error(ErrorKind::Usage, "unknown subcommand '" + subcommand + "' (expected one of: " + known + ")");
}

/// Runs one subcommand in memory.
inline ExperimentOutput run_experiment(const std::string& subcommand, const Config& config, Seed seed,
                                       const std::filesystem::path& base_dir = ".", std::ostream* log = nullptr) {
  const auto run = runner_for(subcommand);
  config.get_string("seed", "");  // consumed by resolve_seed
  config.get_string("output.dir", "");
  return run(Experiment{config, seed, base_dir, log});
}

struct Options {
  std::string subcommand;
  std::string config_path;
  std::optional<Seed> seed;
  std::optional<std::string> out_dir;
  bool assert_verdicts = false;
};

namespace detail {

inline std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

inline void write_file(const std::filesystem::path& p, const std::string& content) {
  std::ofstream out(p, std::ios::binary);
  require(static_cast<bool>(out), ErrorKind::Io, "cannot write " + p.string());
  out << content;
  out.flush();
  require(static_cast<bool>(out), ErrorKind::Io, "write failed for " + p.string());
}

}  // namespace detail

inline nlohmann::ordered_json manifest(const Options& opt, const Config& config, Seed seed,
                                       const std::vector<std::string>& outputs, bool inconclusive, int exit_code) {
  char hash[32];
  std::snprintf(hash, sizeof hash, "fnv1a64:%016llx", static_cast<unsigned long long>(config.hash()));
  nlohmann::ordered_json j;
  j["tool"] = "heavytail";
  j["version"] = HEAVYTAIL_VERSION;
  j["resultSchema"] = kResultSchema;
  j["subcommand"] = opt.subcommand;
  j["seed"] = seed;
  j["configPath"] = opt.config_path;
  j["configHash"] = hash;
  j["config"] = config.values();
  j["outputs"] = outputs;
  j["inconclusive"] = inconclusive;
  j["exitCode"] = exit_code;
  j["workers"] = worker_count();
  j["compiler"] = __VERSION__;
  j["boost"] = BOOST_LIB_VERSION;
  j["timestamp"] = detail::utc_timestamp();
  return j;
}

/// Full command: load config, run, write <out>/<subcommand>.csv,
/// any extra files and <out>/manifest.json. Returns the process exit code.
inline int dispatch(const Options& opt, std::ostream& log) {
  try {
    runner_for(opt.subcommand);
    const Config config = Config::load(opt.config_path);
    const Seed seed = resolve_seed(config, opt.seed);
    const std::filesystem::path out_dir =
        opt.out_dir ? *opt.out_dir : config.get_string("output.dir", "heavytail-out");
    const auto base = std::filesystem::path(opt.config_path).parent_path();
    const auto t0 = std::chrono::steady_clock::now();
    const auto result = run_experiment(opt.subcommand, config, seed, base.empty() ? "." : base, &log);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    require(!ec, ErrorKind::Io, "cannot create output directory " + out_dir.string() + ": " + ec.message());
    std::vector<std::string> outputs{opt.subcommand + ".csv"};
    detail::write_file(out_dir / outputs.front(), results_text(result.table));
    for (const auto& [name, content] : result.extra_files) {
      detail::write_file(out_dir / name, content);
      outputs.push_back(name);
    }
    const int code = opt.assert_verdicts && result.inconclusive ? kExitInconclusive : kExitOk;
    auto m = manifest(opt, config, seed, outputs, result.inconclusive, code);
    m["elapsedSeconds"] = secs;
    detail::write_file(out_dir / "manifest.json", m.dump(2) + "\n");
    log << "heavytail: " << opt.subcommand << " wrote " << (out_dir / outputs.front()).string() << " ("
        << result.table.rows.size() << " rows, seed " << seed << ")\n";
    if (code == kExitInconclusive) log << "heavytail: inconclusive verdict (--assert)\n";
    return code;
  } catch (const Error& e) {
    log << "heavytail: error: " << e.what() << '\n';
    return e.kind() == ErrorKind::Usage ? kExitUsage : kExitError;
  } catch (const std::exception& e) {
    log << "heavytail: error: " << e.what() << '\n';
    return kExitError;
  }
}

}  // namespace heavytail::cli
