#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "medcbr/util/csv.hpp"
#include "medcbr/util/error.hpp"
#include "medcbr/util/strings.hpp"

namespace medcbr {

inline constexpr double kCigsLevels[] = {0.0, 0.25, 0.75, 1.0};
inline constexpr double kBasLevels[] = {0.0, 0.8, 1.0};

struct RubricScore {
  std::string case_id;
  std::string reviewer_id;
  double cints = 0;  // correctly interpreted / interpreted
  double cigs = 0;
  double bas = 0;
};

namespace detail {
inline std::string rubric_where(std::size_t row, const char* field) {
  return "rubric row " + std::to_string(row) + ", field '" + field + "'";
}

inline double parse_number(const std::string& s, std::size_t row, const char* field) {
  const auto t = std::string(str::trim(s));
  std::size_t used = 0;
  double v = 0;
  try {
    v = std::stod(t, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (t.empty() || used != t.size() || !std::isfinite(v))
    throw ValidationError(rubric_where(row, field) + ": '" + s + "' is not a number");
  return v;
}

inline double snap_level(double v, const double* levels, std::size_t n, std::size_t row, const char* field) {
  for (std::size_t i = 0; i < n; ++i)
    if (std::abs(v - levels[i]) < 1e-9) return levels[i];
  std::string allowed;
  for (std::size_t i = 0; i < n; ++i) allowed += (i ? ", " : "") + str::format_double(levels[i]);
  throw ValidationError(rubric_where(row, field) + ": " + str::format_double(v) + " is not a rubric level (allowed: " +
                        allowed + ")");
}
}  // namespace detail

// "k/n" with 0 <= k <= n, n > 0, or a decimal in [0,1].
inline double parse_cints(const std::string& s, std::size_t row = 0) {
  const auto t = std::string(str::trim(s));
  if (auto slash = t.find('/'); slash != std::string::npos) {
    const double k = detail::parse_number(t.substr(0, slash), row, "cints");
    const double n = detail::parse_number(t.substr(slash + 1), row, "cints");
    if (n <= 0) throw ValidationError(detail::rubric_where(row, "cints") + ": denominator must be > 0");
    if (k < 0 || k > n) throw ValidationError(detail::rubric_where(row, "cints") + ": " + t + " is outside [0,1]");
    return k / n;
  }
  const double v = detail::parse_number(t, row, "cints");
  if (v < 0 || v > 1) throw ValidationError(detail::rubric_where(row, "cints") + ": " + t + " is outside [0,1]");
  return v;
}

inline double parse_cigs(const std::string& s, std::size_t row = 0) {
  return detail::snap_level(detail::parse_number(s, row, "cigs"), kCigsLevels, std::size(kCigsLevels), row, "cigs");
}

inline double parse_bas(const std::string& s, std::size_t row = 0) {
  return detail::snap_level(detail::parse_number(s, row, "bas"), kBasLevels, std::size(kBasLevels), row, "bas");
}

inline constexpr const char* kRubricColumns[] = {"case_id", "reviewer_id", "cints", "cigs", "bas"};

inline std::vector<RubricScore> read_rubric_scores(std::istream& in, const std::string& source = "rubric") {
  const auto table = csv::read(in);
  std::size_t col[5];
  for (std::size_t i = 0; i < 5; ++i) {
    try {
      col[i] = table.column(kRubricColumns[i]);
    } catch (const ValidationError& e) {
      throw ValidationError(source + ": " + e.what());
    }
  }
  const auto [ci, ri, ni, gi, bi] = col;
  std::vector<RubricScore> out;
  for (const auto& [line, f] : table.rows) {
    RubricScore s;
    s.case_id = std::string(str::trim(f[ci]));
    s.reviewer_id = std::string(str::trim(f[ri]));
    if (s.case_id.empty()) throw ValidationError(detail::rubric_where(line, "case_id") + ": empty");
    if (s.reviewer_id.empty()) throw ValidationError(detail::rubric_where(line, "reviewer_id") + ": empty");
    s.cints = parse_cints(f[ni], line);
    s.cigs = parse_cigs(f[gi], line);
    s.bas = parse_bas(f[bi], line);
    out.push_back(std::move(s));
  }
  return out;
}

inline std::vector<RubricScore> import_rubric_scores(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw LookupError("cannot open rubric file " + path.string());
  return read_rubric_scores(in, path.string());
}

struct RubricSummary {
  double mean_cints = 0, mean_cigs = 0, mean_bas = 0;  // percentages
  std::size_t n = 0;
};

inline RubricSummary aggregate_rubric(const std::vector<RubricScore>& scores) {
  if (scores.empty()) throw ValidationError("aggregate_rubric: no scores");
  RubricSummary s;
  for (const auto& r : scores) {
    s.mean_cints += r.cints;
    s.mean_cigs += r.cigs;
    s.mean_bas += r.bas;
  }
  const double n = static_cast<double>(scores.size());
  s.mean_cints = 100.0 * s.mean_cints / n;
  s.mean_cigs = 100.0 * s.mean_cigs / n;
  s.mean_bas = 100.0 * s.mean_bas / n;
  s.n = scores.size();
  return s;
}

}  // namespace medcbr
