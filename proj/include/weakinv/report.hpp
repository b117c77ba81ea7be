#pragma once

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "invariance.hpp"

namespace weakinv {

using Json = nlohmann::ordered_json;

enum class CheckStatus { Pass, Fail, NotApplicable };

inline std::string_view to_string(CheckStatus s)
{
  switch (s) {
  case CheckStatus::Pass: return "pass";
  case CheckStatus::Fail: return "fail";
  case CheckStatus::NotApplicable: return "not_applicable";
  }
  return "?";
}

/// One executed (or explicitly skipped) check.
struct CheckRecord
{
  std::string name;
  CheckStatus status{CheckStatus::NotApplicable};
  std::optional<ResidualStats> stats;
  double tolerance{0.0};
  std::string detail;
};

/// Outcome of one CLI command. Every check appears exactly once.
struct RunReport
{
  std::string scenario;
  std::string command;
  std::string classification;
  std::vector<CheckRecord> preconditions;
  std::vector<CheckRecord> properties;
  Json tables = Json::object();
  Json invariance;
  std::map<std::string, double> timing;
  int exit_code{0};

  void add_precondition(CheckRecord r) { push(preconditions, std::move(r)); }
  void add_property(CheckRecord r) { push(properties, std::move(r)); }

  [[nodiscard]] bool any_failed() const
  {
    auto failed = [](const CheckRecord & c) { return c.status == CheckStatus::Fail; };
    return std::any_of(preconditions.begin(), preconditions.end(), failed) ||
           std::any_of(properties.begin(), properties.end(), failed);
  }

  [[nodiscard]] const CheckRecord * find(std::string_view name) const
  {
    for (const auto * list : {&preconditions, &properties}) {
      for (const auto & c : *list) {
        if (c.name == name) { return &c; }
      }
    }
    return nullptr;
  }

private:
  void push(std::vector<CheckRecord> & list, CheckRecord r)
  {
    if (find(r.name) != nullptr) { throw std::logic_error("duplicate check '" + r.name + "' in run report"); }
    list.push_back(std::move(r));
  }
};

/// Pass iff `stats` is finite and below `tol`.
inline CheckRecord make_check(std::string name, const ResidualStats & stats, double tol, std::string detail = {})
{
  return {std::move(name), stats.below(tol) ? CheckStatus::Pass : CheckStatus::Fail, stats, tol, std::move(detail)};
}

inline CheckRecord not_applicable(std::string name, std::string why)
{
  return {std::move(name), CheckStatus::NotApplicable, std::nullopt, 0.0, std::move(why)};
}

// ---------------------------------------------------------------------------
// JSON

inline Json to_json(const Eigen::VectorXd & v)
{
  Json out = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) { out.push_back(v(i)); }
  return out;
}

inline Json to_json(const Eigen::MatrixXd & m)
{
  Json out = Json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) { out.push_back(to_json(Eigen::VectorXd(m.row(i).transpose()))); }
  return out;
}

/// Non-finite values become strings so they survive a round trip.
inline Json number_json(double x)
{
  if (std::isnan(x)) { return "nan"; }
  if (std::isinf(x)) { return x > 0 ? "inf" : "-inf"; }
  return x;
}

inline Json to_json(const ResidualStats & s)
{
  return Json{{"max", number_json(s.max)}, {"mean", number_json(s.mean())}, {"count", s.count}};
}

inline Json to_json(const SamplingPlan & p)
{
  return Json{{"seed", p.seed}, {"group_samples", p.group_samples}, {"point_samples", p.point_samples}, {"box", p.box}};
}

inline Json to_json(const Tolerances & t)
{
  return Json{{"strong", t.strong},           {"weak", t.weak},
              {"rank", t.rank},               {"group_linear", t.group_linear},
              {"automorphism", t.automorphism}, {"sigma_match", t.sigma_match}};
}

inline Json to_json(const InvarianceReport & r)
{
  Json out;
  out["classification"] = std::string(to_string(r.classification));
  out["certification"]  = "numerical: holds at the sampled points within tolerance; not a proof";
  Json stats            = Json::object();
  for (const auto & [k, v] : r.residual_stats) { stats[k] = to_json(v); }
  out["residual_stats"] = stats;
  Json scalars          = Json::object();
  for (const auto & [k, v] : r.scalars) { scalars[k] = number_json(v); }
  out["scalars"]              = scalars;
  out["sampling"]             = to_json(r.samples);
  out["tolerances"]           = to_json(r.tolerances);
  out["infinitesimally_free"] = r.infinitesimally_free;
  Json xi                     = Json::array();
  for (const auto & row : r.xiW_table) { xi.push_back(Json{{"g", to_json(row.g)}, {"xi", to_json(row.xi)}}); }
  out["xiW_table"] = xi;
  Json sg          = Json::array();
  for (const auto & row : r.sigma_table) { sg.push_back(Json{{"g", to_json(row.g)}, {"sigma", to_json(row.sigma)}}); }
  out["sigma_table"] = sg;
  out["notes"]       = r.notes;
  return out;
}

inline Json to_json(const CheckRecord & c)
{
  Json out{{"name", c.name}, {"status", std::string(to_string(c.status))}};
  if (c.stats) {
    out["max"]   = number_json(c.stats->max);
    out["mean"]  = number_json(c.stats->mean());
    out["count"] = c.stats->count;
  }
  if (c.status != CheckStatus::NotApplicable) { out["tolerance"] = c.tolerance; }
  out["detail"] = c.detail;
  return out;
}

/// Report JSON. `timing` is the only key that varies between identical runs.
inline Json to_json(const RunReport & r, bool with_timing = true)
{
  Json out;
  out["scenario"]       = r.scenario;
  out["command"]        = r.command;
  out["classification"] = r.classification;
  out["exit_code"]      = r.exit_code;
  Json pre              = Json::array();
  for (const auto & c : r.preconditions) { pre.push_back(to_json(c)); }
  out["preconditions"] = pre;
  Json props           = Json::array();
  for (const auto & c : r.properties) { props.push_back(to_json(c)); }
  out["properties"] = props;
  out["tables"]     = r.tables;
  if (!r.invariance.is_null()) { out["invariance"] = r.invariance; }
  if (with_timing) {
    Json t = Json::object();
    for (const auto & [k, v] : r.timing) { t[k] = v; }
    out["timing"] = t;
  }
  return out;
}

// ---------------------------------------------------------------------------
// text

inline std::string format_real(double x)
{
  std::ostringstream os;
  os << std::setprecision(3) << std::scientific << x;
  return os.str();
}

inline void print_checks(std::ostream & os, const std::string & title, const std::vector<CheckRecord> & checks)
{
  if (checks.empty()) { return; }
  os << title << "\n";
  for (const auto & c : checks) {
    os << "  " << std::left << std::setw(26) << c.name << std::setw(15) << to_string(c.status);
    if (c.stats) {
      os << "max " << std::setw(11) << format_real(c.stats->max) << " tol " << std::setw(11) << format_real(c.tolerance);
    }
    if (!c.detail.empty()) { os << "  " << c.detail; }
    os << "\n";
  }
}

inline void print_report(std::ostream & os, const RunReport & r)
{
  os << r.command << " " << r.scenario << ": " << r.classification << "\n";
  print_checks(os, "preconditions", r.preconditions);
  print_checks(os, "properties (certified at sampled points, not proved)", r.properties);
}

}  // namespace weakinv
