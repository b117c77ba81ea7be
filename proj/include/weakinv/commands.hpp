#pragma once

#include <chrono>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "report.hpp"
#include "scenario.hpp"

namespace weakinv {

/// Exit codes shared by the CLI commands.
namespace exit_code {
inline constexpr int ok          = 0;
inline constexpr int error       = 1;
inline constexpr int partial     = 2;
inline constexpr int none        = 3;
inline constexpr int check_fails = 4;
}  // namespace exit_code

struct CommandOptions
{
  std::optional<std::uint64_t> seed;
  std::filesystem::path out_dir{"."};
  std::vector<std::pair<std::string, double>> tolerances;
  bool json{false};
  bool write_files{true};
};

inline int classification_exit_code(Classification c)
{
  switch (c) {
  case Classification::Strong:
  case Classification::Weak: return exit_code::ok;
  case Classification::PartialOnly: return exit_code::partial;
  case Classification::None: return exit_code::none;
  }
  return exit_code::error;
}

/// Seed and tolerance overrides from the command line.
inline void apply_options(Scenario & sc, const CommandOptions & opts)
{
  if (opts.seed) { sc.plan.seed = *opts.seed; }
  for (const auto & [name, value] : opts.tolerances) { set_tolerance(sc.tol, sc.vtol, name, value); }
}

namespace detail {

class Stopwatch
{
public:
  Stopwatch() : start_(std::chrono::steady_clock::now()) {}
  [[nodiscard]] double seconds() const
  {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

private:
  std::chrono::steady_clock::time_point start_;
};

inline void write_json_file(const std::filesystem::path & path, const Json & j)
{
  std::filesystem::create_directories(path.parent_path().empty() ? "." : path.parent_path());
  std::ofstream os(path);
  if (!os) { throw ConfigurationError("cannot write " + path.string()); }
  os << j.dump(2) << "\n";
}

inline IntegratorConfig group_integrator(const IntegratorConfig & base)
{
  IntegratorConfig cfg = base;
  cfg.scheme           = Scheme::RKMK4;
  return cfg;
}

inline VectorFieldG scaled(const VectorFieldG & W, double s)
{
  if (s == 1.0) { return W; }
  return {W.group(), [W, s](const GroupElement & g) -> Eigen::MatrixXd { return s * W.matrix_at(g); }};
}

}  // namespace detail

/// Result of running the cascade next to the direct flow.
struct CascadeRun
{
  ChartPtr chart;
  Eigen::VectorXd y0;
  GroupElement g0;
  CascadeResult cascade;
  Trajectory direct;
  ResidualStats deviation;  ///< ||reconstruct(y_k, g_k) - p_k|| over all grid times
  double terminal_deviation{0.0};
};

inline ChartPtr scenario_chart(const Scenario & sc)
{
  if (sc.chart) { return sc.chart; }
  if (sc.acts_on_itself()) { return group_chart(sc.group); }
  throw ConfigurationError(sc.name + ": scenario has no chart; decomposition needs [chart] or a group acting on itself");
}

inline CascadeRun run_cascade(const Scenario & sc, const VectorFieldG & W, double t, std::optional<Eigen::VectorXd> y0_in,
                              std::optional<Eigen::VectorXd> g0_in)
{
  ChartPtr chart = scenario_chart(sc);
  Eigen::VectorXd y0 = y0_in ? *y0_in : Eigen::VectorXd::Constant(chart->quotient_dim(), 0.5);
  chart->check_quotient(y0);
  Eigen::VectorXd gc = g0_in ? *g0_in : Eigen::VectorXd::Zero(sc.group->algebra_dim());
  if (gc.size() != sc.group->algebra_dim()) {
    throw DescriptorMismatch("g0 needs " + std::to_string(sc.group->algebra_dim()) + " algebra coordinates");
  }
  GroupElement g0(sc.group, sc.group->exp(gc));
  auto sys = build_cascade(sc.V(), W, chart, sc.tol.weak);
  CascadeRun run{chart, y0, g0, integrate_cascade(sys, detail::group_integrator(sc.integrator), t, y0, g0, true), {}, {}, 0.0};
  Eigen::VectorXd p0 = reconstruct(*chart, y0, g0);
  integrate(sc.V(), sc.integrator, t, p0, &run.direct);
  if (run.direct.size() != run.cascade.rows.size()) { throw std::logic_error("cascade and direct grids differ"); }
  for (std::size_t k = 0; k < run.direct.size(); ++k) {
    const auto & row  = run.cascade.rows[k];
    Eigen::VectorXd p = chart->action()->apply(row.g, chart->section(row.y));
    double dev        = (p - run.direct[k].second).norm();
    run.deviation.add(dev);
    if (k + 1 == run.direct.size()) { run.terminal_deviation = dev; }
  }
  return run;
}

// ---------------------------------------------------------------------------
// classify

inline RunReport cmd_classify(const Scenario & sc, const InvarianceReport & inv)
{
  RunReport rep;
  rep.scenario       = sc.name;
  rep.command        = "classify";
  rep.classification = std::string(to_string(inv.classification));
  rep.invariance     = to_json(inv);
  rep.exit_code      = classification_exit_code(inv.classification);
  return rep;
}

inline RunReport cmd_classify(Scenario sc, const CommandOptions & opts = {})
{
  apply_options(sc, opts);
  detail::Stopwatch sw;
  auto inv = classify_vector_field(sc.V(), sc.action, sc.plan, sc.tol);
  auto rep = cmd_classify(sc, inv);
  rep.timing["classify_seconds"] = sw.seconds();
  return rep;
}

// ---------------------------------------------------------------------------
// verify

namespace detail {

inline void add_flow_properties(RunReport & rep, const Scenario & sc, const InvarianceReport & inv)
{
  const auto & G     = sc.group;
  const auto & V     = sc.V();
  const auto & vs    = sc.verify;
  auto points        = sc.manifold->sample(sc.plan, sc.plan.point_samples, "points");
  VectorFieldG W     = scaled(*inv.recovered_W, vs.w_scale);
  ManifoldFlow Vflow(V, sc.integrator);
  GroupFlow Wflow(W, group_integrator(sc.integrator));
  std::string wnote = vs.w_scale == 1.0 ? "" : "W scaled by " + format_real(vs.w_scale);

  Stopwatch sw;
  auto gl = check_group_linear(W, sc.plan, sc.tol.group_linear);
  rep.add_property(make_check("group_linear_W", gl.stats, sc.tol.group_linear, "||W(e)|| = " + format_real(gl.at_identity)));
  rep.timing["group_linear_W"] = sw.seconds();

  sw = {};
  auto nec = check_flow_weak_invariance(Vflow, Wflow, *sc.action, vs.times, sc.plan);
  rep.add_property(make_check("flow_weak_invariance", nec, sc.vtol.flow_invariance, wnote));
  rep.timing["flow_weak_invariance"] = sw.seconds();

  sw = {};
  auto suf = check_vector_field_relation(Vflow, Wflow, *sc.action, sc.plan);
  rep.add_property(make_check("vector_field_relation", suf, sc.vtol.vector_field_relation, wnote));
  rep.timing["vector_field_relation"] = sw.seconds();

  sw = {};
  try {
    auto sigma = recovered_sigma(flow_diffeomorphism(Vflow, vs.sigma_time), sc.action, points);
    auto aut   = check_automorphism(sigma, sc.plan);
    ResidualStats all = aut.homomorphism;
    all.add(aut.identity);
    all.merge(aut.inverse);
    CheckRecord rec = make_check("sigma_automorphism", all, sc.tol.automorphism,
                                 "t = " + format_real(vs.sigma_time) + ", homomorphism " + format_real(aut.homomorphism.max) +
                                   ", identity " + format_real(aut.identity) + ", inverse failures " +
                                   std::to_string(aut.inverse_failures));
    if (aut.inverse_failures > 0) { rec.status = CheckStatus::Fail; }
    rep.add_property(rec);

    if (inv.classification == Classification::Strong) {
      ResidualStats dev;
      for (const auto & g : sample_group(G, sc.plan, sc.plan.point_samples, "sigma_identity")) {
        dev.add((sigma(g).matrix() - g.matrix()).norm());
      }
      rep.add_property(make_check("sigma_is_identity", dev, sc.tol.automorphism, "t = " + format_real(vs.sigma_time)));
    }
  } catch (const RecoveryFailed & e) {
    ResidualStats bad;
    bad.add(e.residual());
    rep.add_property(make_check("sigma_automorphism", bad, sc.tol.automorphism, std::string("recovery failed: ") + e.what()));
    if (inv.classification == Classification::Strong) {
      rep.add_property(make_check("sigma_is_identity", bad, sc.tol.automorphism, "sigma recovery failed"));
    }
  }
  rep.timing["sigma_automorphism"] = sw.seconds();

  sw = {};
  auto family = sigma_family(Vflow, sc.action, points);
  auto sflow  = check_sigma_is_flow(family, vs.sigma_pairs, G, sc.plan);
  ResidualStats comp = sflow.composition;
  comp.merge(sflow.identity);
  rep.add_property(make_check("sigma_is_flow", comp, sc.vtol.sigma_flow,
                              std::to_string(vs.sigma_pairs.size()) + " time pairs, sigma_0 vs id " +
                                format_real(sflow.identity.max)));
  rep.timing["sigma_is_flow"] = sw.seconds();

  sw = {};
  auto small = check_small_time_extension(Vflow, sc.action, vs.delta, vs.n_max, sc.plan);
  rep.add_property(make_check("small_time_extension", small.residual, sc.vtol.small_time,
                              "delta = " + format_real(vs.delta) + ", n <= " + std::to_string(vs.n_max) +
                                (small.recovered ? "" : ", recovery failed: " + small.failure)));
  rep.timing["small_time_extension"] = sw.seconds();

  if (inv.classification == Classification::Strong) {
    auto it = inv.residual_stats.find("xiW_norm");
    if (it != inv.residual_stats.end()) {
      rep.add_property(make_check("W_is_zero", it->second, sc.tol.weak, "|xi^W(g)| over sampled g"));
    } else {
      rep.add_property(make_check("W_is_zero", inv.residual_stats.at("strong_residual"), sc.tol.strong,
                                  "action not free: W = 0 certified by the strong residual"));
    }
  }
}

inline const std::vector<std::string> & flow_property_names()
{
  static const std::vector<std::string> v{"group_linear_W",  "flow_weak_invariance", "vector_field_relation",
                                          "sigma_automorphism", "sigma_is_flow",       "small_time_extension"};
  return v;
}

inline void add_structure_properties(RunReport & rep, const Scenario & sc, const InvarianceReport & inv)
{
  const bool invariant = inv.recovered_W.has_value();
  const std::string why = "needs a Strong or Weak classification, got " + std::string(to_string(inv.classification));

  if (sc.acts_on_itself()) {
    auto ga = check_group_affine(sc.V(), sc.plan);
    rep.add_property(make_check("group_affine", ga, sc.vtol.group_affine));
  }

  if (sc.chart) {
    if (!invariant) {
      rep.add_property(not_applicable("quotient_well_defined", why));
      rep.add_property(not_applicable("forcing_term_tangency", why));
    } else {
      auto wd = check_well_definedness(sc.V(), *sc.chart, sc.plan);
      rep.add_property(make_check("quotient_well_defined", wd, sc.vtol.well_defined));
      ResidualStats sub;
      std::string detail;
      for (const auto & p : sc.manifold->sample(sc.plan, sc.plan.point_samples, "forcing")) {
        Eigen::VectorXd y = sc.chart->project(p);
        try {
          sub.add(forcing_term(sc.V(), *sc.chart, y, std::numeric_limits<double>::max()).substitution);
        } catch (const Error & e) {
          sub.add(std::numeric_limits<double>::infinity());
          detail = e.what();
        }
      }
      rep.add_property(make_check("forcing_term_tangency", sub, sc.tol.weak, detail));
    }
  }

  if (sc.chart || sc.acts_on_itself()) {
    if (!invariant) {
      rep.add_property(not_applicable("cascade_equivalence", why));
    } else {
      Stopwatch sw;
      try {
        auto run = run_cascade(sc, scaled(*inv.recovered_W, sc.verify.w_scale), sc.decompose.t, sc.decompose.y0,
                               sc.decompose.g0);
        rep.add_property(make_check("cascade_equivalence", run.deviation, sc.vtol.cascade,
                                    "t = " + format_real(sc.decompose.t) + ", terminal deviation " +
                                      format_real(run.terminal_deviation)));
      } catch (const Error & e) {
        ResidualStats bad;
        bad.add(std::numeric_limits<double>::infinity());
        rep.add_property(make_check("cascade_equivalence", bad, sc.vtol.cascade, e.what()));
      }
      rep.timing["cascade_equivalence"] = sw.seconds();
    }
  }
}

}  // namespace detail

/**
 * @brief Full property battery for a scenario.
 *
 * Exit code: 4 if any executed check fails, otherwise the classification code.
 */
inline RunReport cmd_verify(Scenario sc, const CommandOptions & opts = {})
{
  apply_options(sc, opts);
  detail::Stopwatch total;
  RunReport rep;
  rep.scenario = sc.name;
  rep.command  = "verify";

  auto ax = check_action_axioms(*sc.action, sc.plan);
  ResidualStats axs = ax.identity;
  axs.merge(ax.compatibility);
  rep.add_precondition(make_check("action_axioms", axs, sc.vtol.action_axioms));
  auto dif = check_action_differentials(*sc.action, sc.plan);
  ResidualStats difs = dif.manifold_slot;
  difs.merge(dif.group_slot);
  rep.add_precondition(make_check("action_differentials", difs, sc.vtol.action_differentials));
  if (sc.chart) {
    auto cc = check_chart(*sc.chart, sc.plan);
    ResidualStats ccs = cc.project_section;
    ccs.merge(cc.decompose_roundtrip);
    ccs.merge(cc.d_project_section);
    rep.add_precondition(make_check("chart_consistency", ccs, sc.vtol.chart));
  }

  detail::Stopwatch sw;
  auto inv           = classify_vector_field(sc.V(), sc.action, sc.plan, sc.tol);
  rep.timing["classify"] = sw.seconds();
  rep.classification = std::string(to_string(inv.classification));
  rep.invariance     = to_json(inv);

  if (inv.recovered_W) {
    detail::add_flow_properties(rep, sc, inv);
  } else {
    for (const auto & name : detail::flow_property_names()) {
      rep.add_property(not_applicable(name, "needs a Strong or Weak classification, got " + rep.classification));
    }
  }
  detail::add_structure_properties(rep, sc, inv);

  rep.exit_code              = rep.any_failed() ? exit_code::check_fails : classification_exit_code(inv.classification);
  rep.timing["total_seconds"] = total.seconds();
  return rep;
}

// ---------------------------------------------------------------------------
// decompose

struct DecomposeOutput
{
  RunReport report;
  std::optional<CascadeRun> run;
};

/**
 * @brief Cascade integration next to direct integration of V.
 *
 * For a group acting on itself, W and U come from the group-affine split;
 * otherwise W comes from the classifier.
 */
inline DecomposeOutput cmd_decompose(Scenario sc, const CommandOptions & opts = {}, std::optional<double> t = std::nullopt,
                                     std::optional<Eigen::VectorXd> y0 = std::nullopt,
                                     std::optional<Eigen::VectorXd> g0 = std::nullopt)
{
  apply_options(sc, opts);
  detail::Stopwatch total;
  DecomposeOutput out;
  auto & rep   = out.report;
  rep.scenario = sc.name;
  rep.command  = "decompose";
  scenario_chart(sc);

  double T = t.value_or(sc.decompose.t);
  if (!y0) { y0 = sc.decompose.y0; }
  if (!g0) { g0 = sc.decompose.g0; }

  std::optional<VectorFieldG> W;
  if (sc.acts_on_itself()) {
    auto Vg = as_group_field(sc.V());
    auto ga = check_group_affine(Vg, sc.plan);
    rep.add_property(make_check("group_affine", ga, sc.vtol.group_affine));
    auto dec = group_affine_decompose(Vg, sc.plan, sc.tol.group_linear);
    rep.add_property(make_check("decomposed_W_group_linear", dec.group_linear.stats, sc.tol.group_linear));
    rep.tables["U"] = to_json(dec.U.coords);
    auto gs         = sample_group(sc.group, sc.plan, sc.plan.point_samples, "decompose/g");
    if (sc.derivation) {
      rep.tables["D"] = to_json(*sc.derivation);
      auto inner      = inner_derivation_field(sc.group, *sc.derivation);
      ResidualStats dw;
      for (const auto & g : gs) { dw.add((dec.W.matrix_at(g) - inner.matrix_at(g)).norm()); }
      rep.add_property(make_check("W_matches_derivation", dw, sc.tol.group_linear, "W(g) vs Dg - gD"));
    }
    if (sc.affine_U) {
      ResidualStats du;
      du.add((dec.U.coords - *sc.affine_U).norm());
      rep.add_property(make_check("U_matches_field", du, sc.tol.group_linear));
    }
    auto inv = classify_vector_field(sc.V(), sc.action, sc.plan, sc.tol);
    rep.classification = std::string(to_string(inv.classification));
    if (inv.recovered_W) {
      ResidualStats dc;
      for (const auto & g : gs) { dc.add((dec.W.matrix_at(g) - inv.recovered_W->matrix_at(g)).norm()); }
      rep.add_property(make_check("W_matches_classifier", dc, sc.tol.group_linear, "group-affine split vs xi^W recovery"));
    } else {
      rep.add_property(not_applicable("W_matches_classifier", "classifier found " + rep.classification));
    }
    W = dec.W;
  } else {
    auto inv = classify_vector_field(sc.V(), sc.action, sc.plan, sc.tol);
    rep.classification = std::string(to_string(inv.classification));
    if (!inv.recovered_W) {
      throw ConsistencyError(sc.name + ": field classifies " + rep.classification + ", the cascade needs Strong or Weak", 0.0);
    }
    W = *inv.recovered_W;
  }

  detail::Stopwatch sw;
  auto run = run_cascade(sc, *W, T, y0, g0);
  rep.timing["integrate_seconds"] = sw.seconds();
  rep.add_property(make_check("cascade_equivalence", run.deviation, sc.vtol.cascade,
                              "terminal deviation " + format_real(run.terminal_deviation)));
  rep.tables["t"]                  = T;
  rep.tables["y0"]                 = to_json(run.y0);
  rep.tables["g0"]                 = to_json(run.g0.matrix());
  rep.tables["terminal_deviation"] = run.terminal_deviation;
  rep.tables["y_final"]            = to_json(run.cascade.y);
  rep.tables["g_final"]            = to_json(run.cascade.g.matrix());
  rep.tables["p_final_direct"]     = to_json(run.direct.back().second);
  rep.tables["rows"]               = run.direct.size();

  if (opts.write_files) {
    std::filesystem::create_directories(opts.out_dir);
    std::ofstream cas(opts.out_dir / (sc.name + "_cascade.csv"));
    write_cascade_csv(cas, *run.chart, run.cascade.rows);
    std::ofstream dir(opts.out_dir / (sc.name + "_direct.csv"));
    write_trajectory_csv(dir, run.direct);
    rep.tables["cascade_csv"] = sc.name + "_cascade.csv";
    rep.tables["direct_csv"]  = sc.name + "_direct.csv";
  }
  rep.exit_code               = rep.any_failed() ? exit_code::check_fails : exit_code::ok;
  rep.timing["total_seconds"] = total.seconds();
  out.run                     = std::move(run);
  return out;
}

// ---------------------------------------------------------------------------
// list

inline void cmd_list(std::ostream & os)
{
  auto section = [&os](const char * title, const std::vector<std::string> & items) {
    os << title << ":\n";
    for (const auto & s : items) { os << "  " << s << "\n"; }
  };
  section("groups", builtin_groups());
  section("actions", builtin_actions());
  section("field families", builtin_field_families());
  section("charts", builtin_charts());
  os << "scenarios:\n";
  for (const auto & [name, path] : list_scenarios()) {
    std::string desc;
    try {
      desc = load_scenario_file(path).description;
    } catch (const Error & e) {
      desc = std::string("(invalid: ") + e.what() + ")";
    }
    os << "  " << name << (desc.empty() ? "" : "  " + desc) << "\n";
  }
}

/// Write `<out>/<scenario>_<command>.json` and print the report.
inline void emit_report(const RunReport & rep, const CommandOptions & opts, std::ostream & os)
{
  Json j = to_json(rep);
  if (opts.write_files) { detail::write_json_file(opts.out_dir / (rep.scenario + "_" + rep.command + ".json"), j); }
  if (opts.json) {
    os << j.dump(2) << "\n";
  } else {
    print_report(os, rep);
  }
}

}  // namespace weakinv
