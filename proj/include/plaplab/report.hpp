#pragma once

// Check results and report emission (JSON per check, flat CSV for tables).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "plaplab/grid.hpp"

namespace plaplab {

using Json = nlohmann::ordered_json;

struct Violation {
  std::size_t index = 0;   // node or trial index, depending on the check
  Point where{0.0, 0.0};   // node coordinates when applicable
  double amount = 0.0;     // by how much the bound was exceeded
};

struct SweepRow {
  double param = 0.0;
  double residual = 0.0;
};

struct CheckResult {
  std::string name;
  Json params = Json::object();
  bool pass = true;
  double min_residual = std::numeric_limits<double>::quiet_NaN();
  std::vector<Violation> violations;
  std::vector<SweepRow> table;

  void add_violation(std::size_t index, Point where, double amount) {
    violations.push_back({index, where, amount});
    pass = false;
  }

  const Violation* worst() const {
    if (violations.empty()) return nullptr;
    auto it = std::max_element(
        violations.begin(), violations.end(),
        [](const Violation& a, const Violation& b) { return a.amount < b.amount; });
    return &*it;
  }
};

struct VerificationReport {
  std::vector<CheckResult> checks;

  bool all_pass() const {
    for (const auto& c : checks)
      if (!c.pass) return false;
    return true;
  }

  CheckResult& add(CheckResult c) {
    checks.push_back(std::move(c));
    return checks.back();
  }
};

namespace detail {
constexpr std::size_t kMaxViolationsInReport = 200;

inline Json violation_json(const Violation& v, int dim) {
  Json j = Json::object();
  j["index"] = v.index;
  j["x"] = v.where[0];
  if (dim == 2) j["y"] = v.where[1];
  j["amount"] = v.amount;
  return j;
}
}  // namespace detail

inline Json check_to_json(const CheckResult& c, int dim = 1) {
  Json j = Json::object();
  j["name"] = c.name;
  j["params"] = c.params;
  j["pass"] = c.pass;
  if (std::isfinite(c.min_residual)) j["min_residual"] = c.min_residual;
  j["violation_count"] = c.violations.size();
  if (const Violation* w = c.worst()) j["worst"] = detail::violation_json(*w, dim);
  Json vs = Json::array();
  std::size_t cap = std::min(c.violations.size(), detail::kMaxViolationsInReport);
  for (std::size_t i = 0; i < cap; ++i) vs.push_back(detail::violation_json(c.violations[i], dim));
  j["violations"] = vs;
  Json tb = Json::array();
  for (const auto& row : c.table) {
    Json r = Json::object();
    r["param"] = row.param;
    r["residual"] = row.residual;
    tb.push_back(r);
  }
  j["table"] = tb;
  return j;
}

inline Json report_to_json(const VerificationReport& rep, int dim = 1) {
  Json j = Json::object();
  Json cs = Json::array();
  for (const auto& c : rep.checks) cs.push_back(check_to_json(c, dim));
  j["checks"] = cs;
  j["pass"] = rep.all_pass();
  return j;
}

inline void write_table_csv(const CheckResult& c, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open for writing: " + path);
  os << "param,residual\n";
  for (const auto& row : c.table)
    os << detail::fmt_double(row.param) << ',' << detail::fmt_double(row.residual) << '\n';
}

// Least-squares slope of log(residual) against log(param); rows with
// non-positive entries are skipped. Returns NaN when fewer than two usable
// rows remain.
inline double fit_order(const std::vector<SweepRow>& table) {
  std::vector<double> xs, ys;
  for (const auto& r : table) {
    if (r.param > 0.0 && r.residual > 0.0) {
      xs.push_back(std::log(r.param));
      ys.push_back(std::log(r.residual));
    }
  }
  if (xs.size() < 2) return std::numeric_limits<double>::quiet_NaN();
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= xs.size();
  my /= ys.size();
  double sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxy += (xs[i] - mx) * (ys[i] - my);
    sxx += (xs[i] - mx) * (xs[i] - mx);
  }
  return sxy / sxx;
}

}  // namespace plaplab
