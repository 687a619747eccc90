#pragma once

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <system_error>
#include <vector>

#include <json.hpp>

#include "gmmdiff/bounds.hpp"
#include "gmmdiff/gmm.hpp"
#include "gmmdiff/sample_batch.hpp"
#include "gmmdiff/schedule.hpp"
#include "gmmdiff/sweep.hpp"

namespace gmmdiff::io {

using json = nlohmann::ordered_json;

/// Shortest decimal string that parses back to exactly `v`.
inline std::string format_double(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::IoError, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::IoError, "cannot write " + path.string());
  out << text;
  if (!out) throw Error(Errc::IoError, "write failed for " + path.string());
}

// ---------------------------------------------------------------------------
// Mixture spec files
//
//   {"dim": 2, "components": [{"weight": 0.5, "mean": [0, 1],
//                              "cov": [[1, 0], [0, 1]]}, ...]}

namespace detail {

inline std::string line_col(const std::string& text, std::size_t byte) {
  std::size_t line = 1, col = 1;
  for (std::size_t i = 0; i < byte && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return "line " + std::to_string(line) + ", column " + std::to_string(col);
}

[[noreturn]] inline void field_error(const std::string& source, const std::string& field, const std::string& what) {
  throw Error(Errc::ParseError, source + ": field '" + field + "': " + what);
}

inline double number_at(const json& j, const std::string& source, const std::string& field) {
  if (!j.is_number()) field_error(source, field, "expected a number");
  return j.get<double>();
}

inline std::vector<double> numbers_at(const json& j, const std::string& source, const std::string& field) {
  if (!j.is_array()) field_error(source, field, "expected an array of numbers");
  std::vector<double> v;
  for (std::size_t i = 0; i < j.size(); ++i) v.push_back(number_at(j[i], source, field + "[" + std::to_string(i) + "]"));
  return v;
}

}  // namespace detail

/// Parses a spec document into unvalidated parameters. Syntax errors report
/// line and column; structural errors name the offending field.
inline RawMixture parse_spec(const std::string& text, const std::string& source = "<spec>") {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(Errc::ParseError, source + ": " + detail::line_col(text, e.byte == 0 ? 0 : e.byte - 1) + ": " +
                                      "malformed document");
  }
  if (!doc.is_object()) throw Error(Errc::ParseError, source + ": top level must be an object");
  RawMixture raw;
  if (doc.contains("dim")) {
    if (!doc["dim"].is_number_integer()) detail::field_error(source, "dim", "expected an integer");
    raw.dim = doc["dim"].get<int>();
  }
  if (!doc.contains("components") || !doc["components"].is_array())
    detail::field_error(source, "components", "expected an array");
  const auto& comps = doc["components"];
  for (std::size_t i = 0; i < comps.size(); ++i) {
    const std::string base = "components[" + std::to_string(i) + "]";
    const auto& c = comps[i];
    if (!c.is_object()) detail::field_error(source, base, "expected an object");
    for (const char* key : {"weight", "mean", "cov"})
      if (!c.contains(key)) detail::field_error(source, base + "." + key, "missing");
    RawComponent rc;
    rc.weight = detail::number_at(c["weight"], source, base + ".weight");
    const auto mean = detail::numbers_at(c["mean"], source, base + ".mean");
    rc.mean = Eigen::Map<const Vector>(mean.data(), static_cast<Eigen::Index>(mean.size()));
    const auto& cov = c["cov"];
    if (!cov.is_array()) detail::field_error(source, base + ".cov", "expected an array of rows");
    const auto rows = static_cast<Eigen::Index>(cov.size());
    rc.cov.resize(rows, rows);
    for (Eigen::Index r = 0; r < rows; ++r) {
      const std::string rf = base + ".cov[" + std::to_string(r) + "]";
      const auto row = detail::numbers_at(cov[static_cast<std::size_t>(r)], source, rf);
      if (static_cast<Eigen::Index>(row.size()) != rows)
        detail::field_error(source, rf, "expected " + std::to_string(rows) + " entries, got " + std::to_string(row.size()));
      for (Eigen::Index col = 0; col < rows; ++col) rc.cov(r, col) = row[static_cast<std::size_t>(col)];
    }
    raw.components.push_back(std::move(rc));
  }
  return raw;
}

inline GmmSpec load_spec(const std::filesystem::path& path) {
  return validate_spec(parse_spec(read_text(path), path.string()));
}

inline json spec_to_json(const GmmSpec& spec) {
  json doc;
  doc["dim"] = spec.dim();
  doc["components"] = json::array();
  for (const auto& c : spec.components()) {
    json jc;
    jc["weight"] = c.weight();
    jc["mean"] = std::vector<double>(c.mean().data(), c.mean().data() + c.mean().size());
    json cov = json::array();
    for (Eigen::Index r = 0; r < c.covariance().rows(); ++r) {
      std::vector<double> row(static_cast<std::size_t>(c.covariance().cols()));
      for (Eigen::Index k = 0; k < c.covariance().cols(); ++k) row[static_cast<std::size_t>(k)] = c.covariance()(r, k);
      cov.push_back(row);
    }
    jc["cov"] = cov;
    doc["components"].push_back(jc);
  }
  return doc;
}

inline GmmSpec spec_from_json(const json& j, const std::string& source = "<embedded spec>") {
  return validate_spec(parse_spec(j.dump(), source));
}

// ---------------------------------------------------------------------------
// CSV

inline std::string samples_csv(const SampleBatch& batch) {
  std::string out;
  for (int c = 0; c < batch.dim(); ++c) {
    if (c) out += ',';
    out += "x" + std::to_string(c);
  }
  out += '\n';
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto p = batch.point(i);
    for (int c = 0; c < batch.dim(); ++c) {
      if (c) out += ',';
      out += format_double(p(c));
    }
    out += '\n';
  }
  return out;
}

/// Reads a samples CSV written by samples_csv (points only; metadata lives in
/// the sidecar).
inline SampleBatch parse_samples_csv(const std::string& text, const std::string& source = "<csv>") {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw Error(Errc::ParseError, source + ": empty file");
  const auto d = static_cast<Eigen::Index>(std::count(line.begin(), line.end(), ',') + 1);
  std::vector<double> values;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    Eigen::Index fields = 0;
    const char* p = line.data();
    const char* end = line.data() + line.size();
    while (p <= end) {
      const char* sep = std::find(p, end, ',');
      double v = 0.0;
      const auto res = std::from_chars(p, sep, v);
      if (res.ec != std::errc() || res.ptr != sep)
        throw Error(Errc::ParseError, source + ": line " + std::to_string(lineno) + ": bad number");
      values.push_back(v);
      ++fields;
      p = sep + 1;
    }
    if (fields != d)
      throw Error(Errc::ParseError, source + ": line " + std::to_string(lineno) + ": expected " + std::to_string(d) +
                                        " fields");
  }
  SampleBatch b;
  b.points = Eigen::Map<const Matrix>(values.data(), d, static_cast<Eigen::Index>(values.size()) / d);
  return b;
}

inline std::string grid_csv(const TimeGrid& grid) {
  std::string out = "k,t_k,h_k\n";
  for (std::size_t k = 0; k < grid.points.size(); ++k) {
    out += std::to_string(k) + ',' + format_double(grid.points[k]) + ',' + format_double(k == 0 ? 0.0 : grid.step(k)) +
           '\n';
  }
  return out;
}

// ---------------------------------------------------------------------------
// Reports

inline json bound_report_json(const BoundReport& r) {
  json j;
  j["t"] = r.t;
  j["L"] = r.L.value;
  j["log_L"] = r.L.log_value;
  j["m2"] = r.moment.m2;
  j["M2"] = r.moment.M2;
  j["M2_component_max"] = r.moment.max_term;
  j["kl_upper"] = r.kl.upper;
  j["kl_convexity"] = r.kl.convexity;
  j["sigma_min"] = r.summary.sigma_min;
  j["sigma_max"] = r.summary.sigma_max;
  j["det_min"] = r.summary.det_min;
  j["mu_max"] = r.summary.mu_max;
  j["R"] = r.params.R;
  j["beta"] = r.params.beta;
  j["gamma"] = r.params.gamma;
  return j;
}

inline std::string sweep_csv(const SweepResult& s) {
  std::string out = std::string(axis_name(s.axis)) + ",metric,value,se,clamped\n";
  for (const auto& r : s.rows) {
    out += format_double(r.value) + ',' + r.metric + ',' + format_double(r.metric_value) + ',' + format_double(r.se) +
           ',' + std::to_string(r.clamped) + '\n';
  }
  return out;
}

inline json sweep_summary_json(const SweepResult& s) {
  json j;
  j["axis"] = axis_name(s.axis);
  j["points"] = s.rows.size();
  if (s.fit) {
    j["slope"] = s.fit->slope;
    j["intercept"] = s.fit->intercept;
    j["slope_se"] = s.fit->se;
    j["slope_half_width_95"] = s.fit->half_width;
  } else {
    j["slope"] = nullptr;
  }
  j["ratios"] = s.ratios;
  return j;
}

}  // namespace gmmdiff::io
