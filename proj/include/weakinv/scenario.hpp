#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <toml.hpp>

#include "cascade.hpp"

namespace weakinv {

/// Parse or validation failure, with "file:line: field.path: message" text.
class ScenarioError : public ConfigurationError
{
public:
  using ConfigurationError::ConfigurationError;
};

/// Pass thresholds for the verify battery (the invariance ones live in Tolerances).
struct VerifyTolerances
{
  double flow_invariance{1e-6};
  double vector_field_relation{1e-4};
  double sigma_flow{1e-7};
  double small_time{1e-7};
  double group_affine{1e-12};
  double cascade{1e-6};
  double action_axioms{1e-10};
  double action_differentials{1e-5};
  double chart{1e-10};
  double well_defined{1e-8};
};

struct VerifySettings
{
  std::vector<double> times{0.1, 0.5, 1.0};
  double sigma_time{0.1};
  std::vector<std::pair<double, double>> sigma_pairs{{0.1, 0.1}, {0.1, 0.2}, {0.2, 0.1}, {0.2, 0.2}};
  double delta{0.05};
  int n_max{8};
  /// Multiplies the recovered W before the flow checks; anything but 1 is a deliberately wrong W.
  double w_scale{1.0};
};

struct DecomposeSettings
{
  double t{1.0};
  std::optional<Eigen::VectorXd> y0;
  std::optional<Eigen::VectorXd> g0;  ///< algebra coordinates, g0 = exp(g0)
};

/// A fully built, validated system description.
struct Scenario
{
  std::string name;
  std::string description;
  std::string source;
  GroupPtr group;
  ManifoldPtr manifold;
  ActionPtr action;
  std::string field_family;
  std::optional<VectorFieldM> field;
  std::optional<VectorFieldG> group_field;  ///< set for fields declared on G
  std::optional<Eigen::MatrixXd> derivation;
  std::optional<Eigen::VectorXd> affine_U;
  ChartPtr chart;
  SamplingPlan plan;
  Tolerances tol;
  VerifyTolerances vtol;
  IntegratorConfig integrator;
  VerifySettings verify;
  DecomposeSettings decompose;

  [[nodiscard]] const VectorFieldM & V() const { return *field; }
  [[nodiscard]] bool acts_on_itself() const { return manifold->kind() == ManifoldKind::MatrixGroup; }
};

namespace detail {

class Reader
{
public:
  Reader(const toml::table & root, std::string source) : root_(root), source_(std::move(source)) {}

  [[noreturn]] void fail(const toml::node * node, const std::string & path, const std::string & msg) const
  {
    std::ostringstream os;
    os << source_;
    if (node != nullptr && node->source().begin.line > 0) { os << ":" << node->source().begin.line; }
    os << ": " << path << ": " << msg;
    throw ScenarioError(os.str());
  }

  [[nodiscard]] const toml::node * find(const std::string & path) const { return root_.at_path(path).node(); }
  [[nodiscard]] bool has(const std::string & path) const { return find(path) != nullptr; }

  [[nodiscard]] const toml::node & require(const std::string & path) const
  {
    const auto * n = find(path);
    if (n == nullptr) { fail(nullptr, path, "missing required field"); }
    return *n;
  }

  [[nodiscard]] std::string str(const std::string & path) const
  {
    const auto & n = require(path);
    if (!n.is_string()) { fail(&n, path, "expected a string"); }
    return *n.value<std::string>();
  }
  [[nodiscard]] std::string str_or(const std::string & path, std::string def) const { return has(path) ? str(path) : def; }

  [[nodiscard]] static std::optional<double> number(const toml::node & n)
  {
    if (n.is_floating_point()) { return *n.value<double>(); }
    if (n.is_integer()) { return static_cast<double>(*n.value<std::int64_t>()); }
    return std::nullopt;
  }

  [[nodiscard]] double real(const std::string & path) const
  {
    const auto & n = require(path);
    auto v         = number(n);
    if (!v) { fail(&n, path, "expected a number"); }
    return *v;
  }
  [[nodiscard]] double real_or(const std::string & path, double def) const { return has(path) ? real(path) : def; }

  [[nodiscard]] std::int64_t integer(const std::string & path) const
  {
    const auto & n = require(path);
    if (!n.is_integer()) { fail(&n, path, "expected an integer"); }
    return *n.value<std::int64_t>();
  }
  [[nodiscard]] std::int64_t integer_or(const std::string & path, std::int64_t def) const
  {
    return has(path) ? integer(path) : def;
  }

  [[nodiscard]] Eigen::VectorXd vector(const std::string & path, std::optional<Eigen::Index> len = std::nullopt) const
  {
    const auto & n = require(path);
    return vector_of(n, path, len);
  }

  [[nodiscard]] Eigen::VectorXd vector_of(const toml::node & n, const std::string & path, std::optional<Eigen::Index> len) const
  {
    const auto * arr = n.as_array();
    if (arr == nullptr) { fail(&n, path, "expected an array of numbers"); }
    Eigen::VectorXd out(static_cast<Eigen::Index>(arr->size()));
    for (std::size_t i = 0; i < arr->size(); ++i) {
      auto v = number((*arr)[i]);
      if (!v) { fail(&(*arr)[i], path + "[" + std::to_string(i) + "]", "expected a number"); }
      out(static_cast<Eigen::Index>(i)) = *v;
    }
    if (len && out.size() != *len) {
      fail(&n, path, "expected " + std::to_string(*len) + " entries, got " + std::to_string(out.size()));
    }
    return out;
  }

  [[nodiscard]] Eigen::MatrixXd matrix(const std::string & path, Eigen::Index rows, Eigen::Index cols) const
  {
    return matrix_of(require(path), path, rows, cols);
  }

  [[nodiscard]] Eigen::MatrixXd matrix_of(const toml::node & n, const std::string & path, Eigen::Index rows, Eigen::Index cols) const
  {
    const auto * arr = n.as_array();
    if (arr == nullptr) { fail(&n, path, "expected an array of rows"); }
    if (static_cast<Eigen::Index>(arr->size()) != rows) {
      fail(&n, path, "expected " + std::to_string(rows) + "x" + std::to_string(cols) + " matrix, got " +
                       std::to_string(arr->size()) + " rows");
    }
    Eigen::MatrixXd out(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i) {
      std::string rp = path + "[" + std::to_string(i) + "]";
      out.row(i)     = vector_of((*arr)[static_cast<std::size_t>(i)], rp, cols).transpose();
    }
    return out;
  }

  [[nodiscard]] const toml::table * table(const std::string & path) const
  {
    const auto * n = find(path);
    if (n == nullptr) { return nullptr; }
    if (!n->is_table()) { fail(n, path, "expected a table"); }
    return n->as_table();
  }

  /// Rejects keys outside `allowed` so typos do not pass silently.
  void only_keys(const std::string & path, std::initializer_list<std::string_view> allowed) const
  {
    const auto * t = path.empty() ? &root_ : table(path);
    if (t == nullptr) { return; }
    for (const auto & [k, v] : *t) {
      if (std::find(allowed.begin(), allowed.end(), k.str()) == allowed.end()) {
        fail(&v, path.empty() ? std::string(k.str()) : path + "." + std::string(k.str()), "unknown key");
      }
    }
  }

private:
  const toml::table & root_;
  std::string source_;
};

inline GroupPtr parse_group_name(const std::string & spec)
{
  std::vector<GroupPtr> factors;
  std::stringstream ss(spec);
  std::string part;
  while (std::getline(ss, part, '*')) {
    if (part == "SO2") {
      factors.push_back(LieGroup::so2());
    } else if (part == "SO3") {
      factors.push_back(LieGroup::so3());
    } else if (part == "SE2") {
      factors.push_back(LieGroup::se2());
    } else if (part == "SE3") {
      factors.push_back(LieGroup::se3());
    } else if (part.size() > 1 && part[0] == 'R' &&
               std::all_of(part.begin() + 1, part.end(), [](char c) { return std::isdigit(static_cast<unsigned char>(c)); })) {
      factors.push_back(LieGroup::translation(std::stoi(part.substr(1))));
    } else {
      throw ConfigurationError("unknown group '" + part + "'");
    }
  }
  if (factors.empty()) { throw ConfigurationError("empty group name"); }
  return factors.size() == 1 ? factors.front() : LieGroup::product(std::move(factors));
}

inline std::optional<Eigen::Index> parse_rn(const std::string & s)
{
  if (s.size() < 2 || s[0] != 'R') { return std::nullopt; }
  for (std::size_t i = 1; i < s.size(); ++i) {
    if (!std::isdigit(static_cast<unsigned char>(s[i]))) { return std::nullopt; }
  }
  return std::stol(s.substr(1));
}

inline std::vector<Eigen::Index> parse_axes(const Reader & r, const std::string & path, Eigen::Index n)
{
  Eigen::VectorXd v = r.vector(path);
  std::vector<Eigen::Index> axes;
  std::set<Eigen::Index> seen;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    auto a = static_cast<Eigen::Index>(v(i));
    if (static_cast<double>(a) != v(i) || a < 0 || a >= n) {
      r.fail(r.find(path), path, "axes must be integers in [0, " + std::to_string(n) + ")");
    }
    if (!seen.insert(a).second) { r.fail(r.find(path), path, "duplicate axis " + std::to_string(a)); }
    axes.push_back(a);
  }
  if (axes.empty()) { r.fail(r.find(path), path, "at least one axis required"); }
  return axes;
}

inline Scheme parse_scheme(const Reader & r, const std::string & path, Scheme def)
{
  if (!r.has(path)) { return def; }
  auto s = r.str(path);
  if (s == "RK4Ambient") { return Scheme::RK4Ambient; }
  if (s == "RKMK4") { return Scheme::RKMK4; }
  if (s == "LieEulerExp") { return Scheme::LieEulerExp; }
  r.fail(r.find(path), path, "unknown scheme '" + s + "' (RK4Ambient, RKMK4, LieEulerExp)");
}

}  // namespace detail

inline std::string_view to_string(Scheme s)
{
  switch (s) {
  case Scheme::RK4Ambient: return "RK4Ambient";
  case Scheme::RKMK4: return "RKMK4";
  case Scheme::LieEulerExp: return "LieEulerExp";
  }
  return "?";
}

/// Applies one `name=value` override to whichever tolerance set has that name.
inline void set_tolerance(Tolerances & tol, VerifyTolerances & vtol, const std::string & name, double value)
{
  std::map<std::string, double *> slots{
    {"strong", &tol.strong},
    {"weak", &tol.weak},
    {"rank", &tol.rank},
    {"group_linear", &tol.group_linear},
    {"automorphism", &tol.automorphism},
    {"sigma_match", &tol.sigma_match},
    {"flow_invariance", &vtol.flow_invariance},
    {"vector_field_relation", &vtol.vector_field_relation},
    {"sigma_flow", &vtol.sigma_flow},
    {"small_time", &vtol.small_time},
    {"group_affine", &vtol.group_affine},
    {"cascade", &vtol.cascade},
    {"action_axioms", &vtol.action_axioms},
    {"action_differentials", &vtol.action_differentials},
    {"chart", &vtol.chart},
    {"well_defined", &vtol.well_defined},
  };
  auto it = slots.find(name);
  if (it == slots.end()) { throw ConfigurationError("unknown tolerance '" + name + "'"); }
  if (!(value > 0.0)) { throw ConfigurationError("tolerance '" + name + "' must be positive"); }
  *it->second = value;
}

inline const std::vector<std::string> & builtin_groups()
{
  static const std::vector<std::string> v{"SO2", "SO3", "SE2", "SE3", "R<n>", "<G1>*<G2> (direct product)"};
  return v;
}
inline const std::vector<std::string> & builtin_actions()
{
  static const std::vector<std::string> v{"translation", "left", "rotation", "rigid", "scaling"};
  return v;
}
inline const std::vector<std::string> & builtin_field_families()
{
  static const std::vector<std::string> v{"AffineOnRN", "QuadraticOnRN", "GroupAffine", "LeftInvariant", "CascadeSynthetic"};
  return v;
}
inline const std::vector<std::string> & builtin_charts()
{
  static const std::vector<std::string> v{"translation", "group", "radial"};
  return v;
}

/// Build a scenario from parsed TOML. `source` prefixes error messages.
inline Scenario build_scenario(const toml::table & doc, const std::string & source)
{
  detail::Reader r(doc, source);
  r.only_keys("", {"name", "description", "group", "manifold", "action", "field", "chart", "sampling", "tolerances",
                   "integrator", "verify", "decompose"});
  Scenario sc;
  sc.source      = source;
  sc.name        = r.str("name");
  sc.description = r.str_or("description", "");

  // group
  r.only_keys("group", {"name"});
  try {
    sc.group = detail::parse_group_name(r.str("group.name"));
  } catch (const ScenarioError &) {
    throw;
  } catch (const Error & e) {
    r.fail(r.find("group.name"), "group.name", e.what());
  }
  const auto m = sc.group->matrix_dim();
  const auto d = sc.group->algebra_dim();

  // manifold
  r.only_keys("manifold", {"kind", "exclude_radius"});
  auto mkind    = r.str("manifold.kind");
  double excl   = r.real_or("manifold.exclude_radius", 0.0);
  if (excl < 0.0) { r.fail(r.find("manifold.exclude_radius"), "manifold.exclude_radius", "must be >= 0"); }
  if (mkind == "G") {
    if (excl != 0.0) { r.fail(r.find("manifold.exclude_radius"), "manifold.exclude_radius", "only valid for R<N>"); }
    sc.manifold = Manifold::group(sc.group);
  } else if (auto n = detail::parse_rn(mkind)) {
    if (*n < 1) { r.fail(r.find("manifold.kind"), "manifold.kind", "dimension must be >= 1"); }
    sc.manifold = Manifold::euclidean(*n, excl);
  } else {
    r.fail(r.find("manifold.kind"), "manifold.kind", "expected 'G' or 'R<N>', got '" + mkind + "'");
  }
  const auto N = sc.manifold->ambient_dim();
  const bool on_group = mkind == "G";

  // action
  r.only_keys("action", {"kind", "axes"});
  auto akind = r.str("action.kind");
  auto action_fail = [&](const std::string & msg) { r.fail(r.find("action.kind"), "action.kind", msg); };
  if (akind == "translation") {
    if (on_group) { action_fail("translation acts on R<N>, not on G"); }
    if (excl != 0.0) { action_fail("translation does not preserve an excluded ball"); }
    std::vector<Eigen::Index> axes;
    if (r.has("action.axes")) { axes = detail::parse_axes(r, "action.axes", N); }
    sc.action = translation_action(N, axes);
  } else if (akind == "left") {
    if (!on_group) { action_fail("left action needs manifold.kind = 'G'"); }
    sc.action = left_action(sc.group);
  } else if (akind == "rotation") {
    if (on_group || (N != 2 && N != 3)) { action_fail("rotation acts on R2 or R3"); }
    sc.action = rotation_action(static_cast<int>(N), excl);
  } else if (akind == "rigid") {
    if (on_group || (N != 2 && N != 3)) { action_fail("rigid acts on R2 or R3"); }
    if (excl != 0.0) { action_fail("rigid motions do not preserve an excluded ball"); }
    sc.action = rigid_action(static_cast<int>(N));
  } else if (akind == "scaling") {
    if (on_group) { action_fail("scaling acts on R<N>"); }
    sc.action = scaling_action(N, excl);
  } else {
    action_fail("unknown action '" + akind + "'");
  }
  if (r.has("action.axes") && akind != "translation") { r.fail(r.find("action.axes"), "action.axes", "only valid for translation"); }
  if (!sc.action->group()->same_as(*sc.group)) {
    r.fail(r.find("group.name"), "group.name",
           "action '" + akind + "' on " + sc.manifold->name() + " needs group " + sc.action->group()->name() + ", got " +
             sc.group->name());
  }
  sc.group = sc.action->group();

  // field
  sc.field_family = r.str("field.family");
  const auto & fam = sc.field_family;
  auto need_rn = [&]() {
    if (on_group) { r.fail(r.find("field.family"), "field.family", fam + " lives on R<N>, manifold is G"); }
  };
  if (fam == "AffineOnRN") {
    r.only_keys("field", {"family", "A", "b"});
    need_rn();
    sc.field = affine_field(r.matrix("field.A", N, N), r.vector("field.b", N), excl);
  } else if (fam == "QuadraticOnRN") {
    r.only_keys("field", {"family", "A", "b", "Q"});
    need_rn();
    Eigen::MatrixXd A = r.has("field.A") ? r.matrix("field.A", N, N) : Eigen::MatrixXd::Zero(N, N);
    Eigen::VectorXd b = r.has("field.b") ? r.vector("field.b", N) : Eigen::VectorXd::Zero(N);
    std::vector<Eigen::MatrixXd> Q;
    if (r.has("field.Q")) {
      const auto * arr = r.require("field.Q").as_array();
      if (arr == nullptr || static_cast<Eigen::Index>(arr->size()) != N) {
        r.fail(r.find("field.Q"), "field.Q", "expected " + std::to_string(N) + " matrices");
      }
      for (std::size_t i = 0; i < arr->size(); ++i) {
        Q.push_back(r.matrix_of((*arr)[i], "field.Q[" + std::to_string(i) + "]", N, N));
      }
    } else {
      Q.assign(static_cast<std::size_t>(N), Eigen::MatrixXd::Zero(N, N));
    }
    sc.field = quadratic_field(A, b, Q, excl);
  } else if (fam == "GroupAffine") {
    r.only_keys("field", {"family", "D", "U"});
    if (!on_group) { r.fail(r.find("field.family"), "field.family", "GroupAffine needs manifold.kind = 'G'"); }
    Eigen::MatrixXd D = r.has("field.D") ? r.matrix("field.D", m, m) : Eigen::MatrixXd::Zero(m, m);
    Eigen::VectorXd U = r.has("field.U") ? r.vector("field.U", d) : Eigen::VectorXd::Zero(d);
    sc.derivation  = D;
    sc.affine_U    = U;
    sc.group_field = group_affine_field(sc.group, D, U);
    sc.field       = lifted_field(*sc.group_field);
  } else if (fam == "LeftInvariant") {
    r.only_keys("field", {"family", "xi"});
    if (!on_group) { r.fail(r.find("field.family"), "field.family", "LeftInvariant needs manifold.kind = 'G'"); }
    sc.group_field = left_invariant_field({sc.group, r.vector("field.xi", d)});
    sc.field       = lifted_field(*sc.group_field);
  } else if (fam == "CascadeSynthetic") {
    r.only_keys("field", {"family", "f1", "f2", "h", "c", "xz_coupling"});
    if (on_group || N != 3 || excl != 0.0) {
      r.fail(r.find("field.family"), "field.family", "CascadeSynthetic lives on R3 without an excluded ball");
    }
    CascadeSyntheticKind k;
    auto coeffs = [&](const char * key, std::array<double, 6> & dst) {
      std::string path = std::string("field.") + key;
      if (!r.has(path)) { return; }
      Eigen::VectorXd v = r.vector(path, 6);
      for (int i = 0; i < 6; ++i) { dst[static_cast<std::size_t>(i)] = v(i); }
    };
    coeffs("f1", k.f1);
    coeffs("f2", k.f2);
    coeffs("h", k.h);
    k.c           = r.real_or("field.c", 0.0);
    k.xz_coupling = r.real_or("field.xz_coupling", 0.0);
    sc.field      = cascade_synthetic_field(k);
  } else {
    r.fail(r.find("field.family"), "field.family", "unknown family '" + fam + "'");
  }

  // chart
  if (r.table("chart") != nullptr) {
    r.only_keys("chart", {"kind", "axes"});
    auto ckind = r.str("chart.kind");
    auto chart_fail = [&](const std::string & msg) { r.fail(r.find("chart.kind"), "chart.kind", msg); };
    if (ckind == "translation") {
      if (akind != "translation") { chart_fail("translation chart needs the translation action"); }
      auto axes = r.has("chart.axes") ? detail::parse_axes(r, "chart.axes", N) : std::vector<Eigen::Index>{};
      if (axes.empty()) {
        axes = r.has("action.axes") ? detail::parse_axes(r, "action.axes", N) : std::vector<Eigen::Index>{};
        if (axes.empty()) {
          for (Eigen::Index i = 0; i < N; ++i) { axes.push_back(i); }
        }
      }
      sc.chart = translation_chart(N, axes);
    } else if (ckind == "group") {
      if (akind != "left") { chart_fail("group chart needs the left action"); }
      sc.chart = group_chart(sc.group);
    } else if (ckind == "radial") {
      if (akind != "rotation" || N != 2 || excl <= 0.0) { chart_fail("radial chart needs rotation on R2 with exclude_radius > 0"); }
      sc.chart = radial_chart(excl);
    } else {
      chart_fail("unknown chart '" + ckind + "'");
    }
    if (sc.chart->action()->name() != sc.action->name() || !sc.chart->action()->group()->same_as(*sc.group) ||
        sc.chart->action()->manifold()->name() != sc.manifold->name()) {
      chart_fail("chart action does not match the scenario action");
    }
    if (sc.chart->action()->group()->algebra_dim() != sc.group->algebra_dim()) { chart_fail("chart axes do not match action axes"); }
    sc.action = sc.chart->action();
  }

  // sampling
  r.only_keys("sampling", {"seed", "group_samples", "point_samples", "box"});
  sc.plan.seed          = static_cast<std::uint64_t>(r.integer_or("sampling.seed", 0));
  auto gsamp            = r.integer_or("sampling.group_samples", static_cast<std::int64_t>(sc.plan.group_samples));
  auto psamp            = r.integer_or("sampling.point_samples", static_cast<std::int64_t>(sc.plan.point_samples));
  if (gsamp < 1) { r.fail(r.find("sampling.group_samples"), "sampling.group_samples", "must be >= 1"); }
  if (psamp < 1) { r.fail(r.find("sampling.point_samples"), "sampling.point_samples", "must be >= 1"); }
  sc.plan.group_samples = static_cast<std::size_t>(gsamp);
  sc.plan.point_samples = static_cast<std::size_t>(psamp);
  sc.plan.box           = r.real_or("sampling.box", sc.plan.box);
  if (!(sc.plan.box > 0.0)) { r.fail(r.find("sampling.box"), "sampling.box", "must be positive"); }

  // tolerances
  if (const auto * t = r.table("tolerances")) {
    for (const auto & [k, v] : *t) {
      std::string path = "tolerances." + std::string(k.str());
      auto val         = detail::Reader::number(v);
      if (!val) { r.fail(&v, path, "expected a number"); }
      try {
        set_tolerance(sc.tol, sc.vtol, std::string(k.str()), *val);
      } catch (const ConfigurationError & e) {
        r.fail(&v, path, e.what());
      }
    }
  }

  // integrator
  r.only_keys("integrator", {"scheme", "step", "projection", "blowup"});
  sc.integrator.scheme = detail::parse_scheme(r, "integrator.scheme", on_group ? Scheme::RKMK4 : Scheme::RK4Ambient);
  if (sc.integrator.scheme != Scheme::RK4Ambient && !on_group) {
    r.fail(r.find("integrator.scheme"), "integrator.scheme", "Lie schemes need a field on G");
  }
  sc.integrator.step = r.real_or("integrator.step", sc.integrator.step);
  if (!(sc.integrator.step > 0.0)) { r.fail(r.find("integrator.step"), "integrator.step", "must be positive"); }
  auto proj = r.str_or("integrator.projection", "constraint");
  if (proj == "constraint") {
    sc.integrator.projection = Projection::ConstraintProjection;
  } else if (proj == "none") {
    sc.integrator.projection = Projection::None;
  } else {
    r.fail(r.find("integrator.projection"), "integrator.projection", "expected 'constraint' or 'none'");
  }
  sc.integrator.blowup = r.real_or("integrator.blowup", sc.integrator.blowup);

  // verify
  r.only_keys("verify", {"times", "sigma_time", "sigma_pairs", "delta", "n_max", "w_scale"});
  if (r.has("verify.times")) {
    Eigen::VectorXd v = r.vector("verify.times");
    sc.verify.times.assign(v.data(), v.data() + v.size());
  }
  sc.verify.sigma_time = r.real_or("verify.sigma_time", sc.verify.sigma_time);
  if (r.has("verify.sigma_pairs")) {
    const auto * arr = r.require("verify.sigma_pairs").as_array();
    if (arr == nullptr) { r.fail(r.find("verify.sigma_pairs"), "verify.sigma_pairs", "expected an array of [t1, t2] pairs"); }
    sc.verify.sigma_pairs.clear();
    for (std::size_t i = 0; i < arr->size(); ++i) {
      Eigen::VectorXd p = r.vector_of((*arr)[i], "verify.sigma_pairs[" + std::to_string(i) + "]", 2);
      sc.verify.sigma_pairs.emplace_back(p(0), p(1));
    }
  }
  sc.verify.delta   = r.real_or("verify.delta", sc.verify.delta);
  sc.verify.n_max   = static_cast<int>(r.integer_or("verify.n_max", sc.verify.n_max));
  sc.verify.w_scale = r.real_or("verify.w_scale", sc.verify.w_scale);
  if (sc.verify.n_max < 1) { r.fail(r.find("verify.n_max"), "verify.n_max", "must be >= 1"); }

  // decompose
  r.only_keys("decompose", {"t", "y0", "g0"});
  sc.decompose.t = r.real_or("decompose.t", sc.decompose.t);
  if (r.has("decompose.y0")) {
    Eigen::Index q = sc.chart ? sc.chart->quotient_dim() : (on_group ? 0 : -1);
    if (q < 0) { r.fail(r.find("decompose.y0"), "decompose.y0", "scenario has no chart"); }
    sc.decompose.y0 = r.vector("decompose.y0", q);
  }
  if (r.has("decompose.g0")) { sc.decompose.g0 = r.vector("decompose.g0", d); }
  return sc;
}

inline Scenario load_scenario_string(std::string_view text, const std::string & source)
{
  toml::table doc;
  try {
    doc = toml::parse(text, source);
  } catch (const toml::parse_error & e) {
    std::ostringstream os;
    os << source << ":" << e.source().begin.line << ": " << e.description();
    throw ScenarioError(os.str());
  }
  return build_scenario(doc, source);
}

inline Scenario load_scenario_file(const std::filesystem::path & path)
{
  std::ifstream in(path);
  if (!in) { throw ScenarioError(path.string() + ": cannot open scenario file"); }
  std::stringstream ss;
  ss << in.rdbuf();
  return load_scenario_string(ss.str(), path.string());
}

/// Directories searched for bundled scenarios: WEAKINV_SCENARIO_PATH (colon separated) if set, else the built-in dir.
inline std::vector<std::filesystem::path> scenario_search_path()
{
  std::vector<std::filesystem::path> out;
  if (const char * env = std::getenv("WEAKINV_SCENARIO_PATH")) {
    std::stringstream ss(env);
    std::string dir;
    while (std::getline(ss, dir, ':')) {
      if (!dir.empty()) { out.emplace_back(dir); }
    }
    return out;
  }
#ifdef WEAKINV_SCENARIO_DIR
  out.emplace_back(WEAKINV_SCENARIO_DIR);
#endif
  return out;
}

/// A path as given, or a bare name looked up (with or without `.toml`) on the search path.
inline std::filesystem::path resolve_scenario(const std::string & arg)
{
  namespace fs = std::filesystem;
  if (fs::exists(arg)) { return arg; }
  for (const auto & dir : scenario_search_path()) {
    for (const auto & cand : {dir / arg, dir / (arg + ".toml")}) {
      if (fs::exists(cand)) { return cand; }
    }
  }
  throw ScenarioError(arg + ": scenario not found (checked the path and the scenario search path)");
}

/// Sorted scenario names (file stems) across the search path; first occurrence wins.
inline std::vector<std::pair<std::string, std::filesystem::path>> list_scenarios()
{
  namespace fs = std::filesystem;
  std::map<std::string, fs::path> found;
  for (const auto & dir : scenario_search_path()) {
    std::error_code ec;
    if (!fs::is_directory(dir, ec)) { continue; }
    std::vector<fs::path> files;
    for (const auto & e : fs::directory_iterator(dir, ec)) {
      if (e.is_regular_file() && e.path().extension() == ".toml") { files.push_back(e.path()); }
    }
    for (const auto & f : files) { found.try_emplace(f.stem().string(), f); }
  }
  return {found.begin(), found.end()};
}

}  // namespace weakinv
