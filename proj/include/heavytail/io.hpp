#pragma once

// Loss dataset CSV reading/writing and synthetic dataset generation.
//
// Schema (UTF-8, '#' starts a comment line):
//   record_id,event_date,entity_category,loss_amount
// event_date (YYYY-MM-DD) and entity_category may be empty. A comment of the
// form "# unit: <text>" sets the dataset's unit metadata.

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "heavytail/dist.hpp"
#include "heavytail/error.hpp"
#include "heavytail/rng.hpp"

namespace heavytail {

inline constexpr std::string_view kLossCsvHeader = "record_id,event_date,entity_category,loss_amount";

struct LossRecord {
  std::string record_id;
  std::optional<std::string> event_date;
  std::optional<std::string> entity_category;
  double loss_amount = 0.0;

  bool operator==(const LossRecord&) const = default;
};

struct LossDataset {
  std::vector<LossRecord> records;
  std::string unit;
  std::vector<std::string> provenance;  // comment lines, without the '#'

  std::vector<double> losses() const {
    std::vector<double> x;
    x.reserve(records.size());
    for (const auto& r : records) x.push_back(r.loss_amount);
    return x;
  }
};

/// Shortest decimal text that parses back to the same double.
inline std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return {buf, res.ptr};
}

namespace detail {

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

inline std::vector<std::string> split(std::string_view line, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(sep, start);
    out.push_back(trim(line.substr(start, pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

inline std::optional<double> parse_double(std::string_view s) {
  double v = 0.0;
  const auto* end = s.data() + s.size();
  const auto res = std::from_chars(s.data(), end, v);
  if (res.ec != std::errc() || res.ptr != end) return std::nullopt;
  return v;
}

inline bool valid_iso_date(std::string_view d) {
  if (d.size() != 10 || d[4] != '-' || d[7] != '-') return false;
  for (std::size_t i : {0, 1, 2, 3, 5, 6, 8, 9})
    if (d[i] < '0' || d[i] > '9') return false;
  const int month = (d[5] - '0') * 10 + (d[6] - '0');
  const int day = (d[8] - '0') * 10 + (d[9] - '0');
  return month >= 1 && month <= 12 && day >= 1 && day <= 31;
}

}  // namespace detail

inline LossDataset parse_losses(std::istream& in, const std::string& source = "<stream>") {
  LossDataset ds;
  std::unordered_set<std::string> ids;
  std::string line;
  std::size_t line_no = 0;
  bool header_seen = false;
  const auto fail = [&](const std::string& field, const std::string& what) {
    throw Error(ErrorKind::Validation,
                source + ":" + std::to_string(line_no) + ": field " + field + ": " + what);
  };
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = detail::trim(line);
    if (t.empty()) continue;
    if (t.front() == '#') {
      const std::string body = detail::trim(std::string_view(t).substr(1));
      if (body.rfind("unit:", 0) == 0) ds.unit = detail::trim(std::string_view(body).substr(5));
      ds.provenance.push_back(body);
      continue;
    }
    if (!header_seen) {
      if (t != kLossCsvHeader)
        throw Error(ErrorKind::Validation, source + ":" + std::to_string(line_no) +
                                               ": expected header '" + std::string(kLossCsvHeader) + "'");
      header_seen = true;
      continue;
    }
    const auto f = detail::split(t, ',');
    if (f.size() != 4) fail("row", "expected 4 fields, found " + std::to_string(f.size()));
    LossRecord r;
    r.record_id = f[0];
    if (r.record_id.empty()) fail("record_id", "must be nonempty");
    if (!ids.insert(r.record_id).second) fail("record_id", "duplicate id '" + r.record_id + "'");
    if (!f[1].empty()) {
      if (!detail::valid_iso_date(f[1])) fail("event_date", "not an ISO-8601 date: '" + f[1] + "'");
      r.event_date = f[1];
    }
    if (!f[2].empty()) r.entity_category = f[2];
    const auto v = detail::parse_double(f[3]);
    if (!v || !std::isfinite(*v)) fail("loss_amount", "not a number: '" + f[3] + "'");
    if (*v <= 0.0) fail("loss_amount", "must be > 0, got " + f[3]);
    r.loss_amount = *v;
    ds.records.push_back(std::move(r));
  }
  if (!header_seen) throw Error(ErrorKind::EmptyInput, source + ": missing header");
  require(!ds.records.empty(), ErrorKind::EmptyInput, source + ": dataset has no records");
  return ds;
}

inline LossDataset load_losses(const std::string& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorKind::Io, "cannot open " + path);
  return parse_losses(in, path);
}

inline void write_losses(const LossDataset& ds, std::ostream& out) {
  for (const auto& p : ds.provenance) out << "# " << p << '\n';
  out << kLossCsvHeader << '\n';
  for (const auto& r : ds.records)
    out << r.record_id << ',' << r.event_date.value_or("") << ',' << r.entity_category.value_or("") << ','
        << format_double(r.loss_amount) << '\n';
}

inline void write_losses(const LossDataset& ds, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  require(static_cast<bool>(out), ErrorKind::Io, "cannot write " + path);
  write_losses(ds, out);
  out.flush();
  require(static_cast<bool>(out), ErrorKind::Io, "write failed for " + path);
}

/// count records drawn from spec; the spec and seed go into the comment header.
inline LossDataset synth_dataset(const DistributionSpec& spec, std::size_t count, Seed seed) {
  validate(spec);
  require(count >= 1, ErrorKind::Domain, "count must be >= 1");
  const auto x = sample(spec, count, seed);
  LossDataset ds;
  ds.unit = "synthetic";
  ds.provenance = {"heavytail synthetic loss dataset", "spec: " + describe(spec),
                   "seed: " + std::to_string(seed), "count: " + std::to_string(count), "unit: synthetic"};
  const int width = static_cast<int>(std::to_string(count).size());
  ds.records.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    require(x[i] > 0.0, ErrorKind::Validation,
            "synthetic draw " + std::to_string(i) + " is not a positive loss; use a positive-support spec");
    char id[32];
    std::snprintf(id, sizeof id, "S%0*zu", width, i + 1);
    ds.records.push_back({id, std::nullopt, std::nullopt, x[i]});
  }
  return ds;
}

inline LossDataset synth_dataset(const DistributionSpec& spec, std::size_t count, Seed seed,
                                 const std::string& path) {
  auto ds = synth_dataset(spec, count, seed);
  write_losses(ds, path);
  return ds;
}

}  // namespace heavytail
