#include <complex>
#include <numbers>
#include <sstream>

#include "test_util.hpp"

using namespace weakinv;
using wtest::vec;

namespace {

// x' = -y, y' = x, z' = c z + x, translated along z
CascadeSyntheticKind rotating_driver(double c = 0.3, double xz = 0.0)
{
  CascadeSyntheticKind k;
  k.f1          = {0, 0, -1, 0, 0, 0};
  k.f2          = {0, 1, 0, 0, 0, 0};
  k.h           = {0, 1, 0, 0, 0, 0};
  k.c           = c;
  k.xz_coupling = xz;
  return k;
}

// closed form of the rotating driver from (x0, y0, z0)
Eigen::Vector3d rotating_driver_exact(double c, const Eigen::Vector3d & p0, double t)
{
  using cd = std::complex<double>;
  cd w0(p0(0), p0(1));
  cd w = w0 * std::exp(cd(0, t));
  // z = e^{ct} z0 + Re(w0 e^{ct} (e^{(i - c) t} - 1) / (i - c))
  cd forced = w0 * std::exp(c * t) * (std::exp(cd(-c, 1) * t) - 1.0) / cd(-c, 1);
  return {w.real(), w.imag(), std::exp(c * t) * p0(2) + forced.real()};
}

IntegratorConfig rkmk(double step = 1e-3)
{
  IntegratorConfig c;
  c.scheme = Scheme::RKMK4;
  c.step   = step;
  return c;
}

}  // namespace

TEST(Charts, RoundTripsHold)
{
  SamplingPlan plan;
  std::vector<ChartPtr> charts{translation_chart(3, {2}), translation_chart(4, {0, 3}), group_chart(LieGroup::so3()),
                               group_chart(LieGroup::se2()), radial_chart(0.1)};
  for (const auto & c : charts) {
    auto chk = check_chart(*c, plan);
    EXPECT_LT(chk.decompose_roundtrip.max, 1e-12) << c->name();
    EXPECT_LT(chk.project_section.max, 1e-12) << c->name();
    EXPECT_LT(chk.d_project_section.max, 1e-12) << c->name();
  }
}

TEST(Charts, QuotientDimensionIsChecked)
{
  auto c = translation_chart(3, {2});
  EXPECT_EQ(c->quotient_dim(), 2);
  EXPECT_THROW((void)c->section(vec({1, 2, 3})), DescriptorMismatch);
  EXPECT_EQ(group_chart(LieGroup::so3())->quotient_dim(), 0);
}

TEST(Charts, RadialDecomposition)
{
  auto c      = radial_chart();
  auto [g, y] = c->decompose(vec({0, 2}));
  EXPECT_NEAR(y(0), 2.0, 1e-15);
  EXPECT_LT((g.matrix() - c->action()->group()->exp(vec({std::numbers::pi / 2}))).norm(), 1e-15);
  EXPECT_LT((reconstruct(*c, y, g) - vec({0, 2})).norm(), 1e-15);
}

TEST(ForcingTerm, TranslationDriverForcesByX)
{
  auto V     = cascade_synthetic_field(rotating_driver());
  auto chart = translation_chart(3, {2});
  for (const auto & y : {vec({0.8, -0.4}), vec({-1.5, 2.0})}) {
    auto f = forcing_term(V, *chart, y);
    ASSERT_EQ(f.xi.size(), 1);
    EXPECT_NEAR(f.xi(0), y(0), 1e-15);
    EXPECT_LT(f.substitution, 1e-15);
    EXPECT_LT((induced_quotient_field(V, *chart, y) - vec({-y(1), y(0)})).norm(), 1e-15);
  }
}

TEST(ForcingTerm, RotationCommutingFieldForcesByAngularRate)
{
  // V = (a I + b J) p: radial part a r, angular velocity b
  Eigen::Matrix2d A;
  A << -0.3, -1.2, 1.2, -0.3;
  auto V     = affine_field(A, Eigen::Vector2d::Zero(), 0.1);
  auto chart = radial_chart(0.1);
  for (double r : {0.5, 2.0}) {
    EXPECT_NEAR(forcing_term(V, *chart, vec({r})).xi(0), 1.2, 1e-14);
    EXPECT_NEAR(induced_quotient_field(V, *chart, vec({r}))(0), -0.3 * r, 1e-14);
  }
}

TEST(ForcingTerm, BrokenSectionDifferentialIsRejected)
{
  auto good = translation_chart(3, {2});
  Eigen::MatrixXd keep(2, 3);
  keep << 1, 0, 0, 0, 1, 0;
  BundleChart::Maps maps{
    [keep](const Eigen::VectorXd & p) -> Eigen::VectorXd { return keep * p; },
    [keep](const Eigen::VectorXd & y) -> Eigen::VectorXd { return keep.transpose() * y; },
    [keep](const Eigen::VectorXd &, const Eigen::VectorXd & v) -> Eigen::VectorXd { return keep * v; },
    [keep](const Eigen::VectorXd &, const Eigen::VectorXd & yd) -> Eigen::VectorXd { return 2.0 * keep.transpose() * yd; },
    [good](const Eigen::VectorXd & p) -> std::pair<Eigen::MatrixXd, Eigen::VectorXd> {
      auto [g, y] = good->decompose(p);
      return {g.matrix(), y};
    }};
  BundleChart broken("broken", good->action(), 2, maps);
  auto V = cascade_synthetic_field(rotating_driver());
  EXPECT_THROW((void)forcing_term(V, broken, vec({0.8, -0.4})), ConsistencyError);
  EXPECT_GT(check_chart(broken, SamplingPlan{}).d_project_section.max, 0.1);
}

TEST(WellDefinedness, HoldsForDriverAndFailsWithCoupling)
{
  auto chart = translation_chart(3, {2});
  SamplingPlan plan;
  EXPECT_LT(check_well_definedness(cascade_synthetic_field(rotating_driver()), *chart, plan).max, 1e-12);
  EXPECT_GT(check_well_definedness(cascade_synthetic_field(rotating_driver(0.3, 0.5)), *chart, plan).max, 1e-2);
}

TEST(Cascade, TranslationDriverReproducesClosedForm)
{
  const double c = 0.3;
  auto V         = cascade_synthetic_field(rotating_driver(c));
  auto chart     = translation_chart(3, {2});
  auto action    = chart->action();
  SamplingPlan plan;
  auto W   = solver_backed_W(V, action, action->manifold()->sample(plan, plan.point_samples, "points"));
  auto sys = build_cascade(V, W, chart);
  auto G   = action->group();
  GroupElement g0(G, G->exp(vec({0.5})));
  Eigen::VectorXd y0 = vec({0.8, -0.4});
  auto res           = integrate_cascade(sys, rkmk(), 2.0, y0, g0, true);
  Eigen::Vector3d exact = rotating_driver_exact(c, Eigen::Vector3d(0.8, -0.4, 0.5), 2.0);
  EXPECT_LT((reconstruct(*chart, res.y, res.g) - exact).norm(), 1e-10);

  // every recorded row agrees with the direct flow
  IntegratorConfig direct;
  ManifoldFlow flow(V, direct);
  double worst = 0.0;
  for (const auto & row : res.rows) {
    Eigen::VectorXd p = action->apply(row.g, chart->section(row.y));
    worst             = std::max(worst, (p - flow(row.t, vec({0.8, -0.4, 0.5}))).norm());
  }
  EXPECT_LT(worst, 1e-6);
  EXPECT_EQ(res.rows.size(), 2001U);
}

TEST(Cascade, GroupAffineOnSo3MatchesDirectFlow)
{
  auto G            = LieGroup::so3();
  Eigen::MatrixXd D = G->hat(vec({0.3, -0.5, 0.2}));
  auto Vg           = group_affine_field(G, D, vec({0.4, -0.1, 0.7}));
  auto V            = lifted_field(Vg);
  auto chart        = group_chart(G);
  auto sys          = build_cascade(V, inner_derivation_field(G, D), chart);
  EXPECT_LT((sys.Vhat(Eigen::VectorXd(0)) - vec({0.4, -0.1, 0.7})).norm(), 1e-14);
  GroupElement g0(G, G->exp(vec({0.3, -0.5, 0.2})));
  auto res = integrate_cascade(sys, rkmk(), 1.0, Eigen::VectorXd(0), g0);
  auto direct = integrate(Vg, rkmk(), 1.0, g0);
  EXPECT_LT((res.g.matrix() - direct.matrix()).norm(), 1e-6);
}

TEST(Cascade, ZeroTimeAndCsvHeader)
{
  auto V     = cascade_synthetic_field(rotating_driver());
  auto chart = translation_chart(3, {2});
  auto G     = chart->action()->group();
  VectorFieldG W(G, [G](const GroupElement & g) -> Eigen::MatrixXd { return g.matrix() * G->hat(vec({0.3 * g.matrix()(0, 1)})); });
  auto res = integrate_cascade(build_cascade(V, W, chart), rkmk(), 0.0, vec({1, 2}), GroupElement::identity(G), true);
  ASSERT_EQ(res.rows.size(), 1U);
  std::ostringstream os;
  write_cascade_csv(os, *chart, res.rows);
  EXPECT_EQ(os.str().substr(0, os.str().find('\n')), "t,y_0,y_1,g_0,g_1,g_2,g_3,p_0,p_1,p_2");
  EXPECT_NE(os.str().find("\n0,1,2,1,0,0,1,1,2,0\n"), std::string::npos) << os.str();
}

// ---------------------------------------------------------------------------
// group affine fields

TEST(GroupAffine, DecomposeRecoversDerivationAndU)
{
  for (const auto & G : {LieGroup::so3(), LieGroup::se2(), LieGroup::se3()}) {
    SamplingPlan plan;
    Eigen::VectorXd d = Eigen::VectorXd::LinSpaced(G->algebra_dim(), -0.7, 0.4);
    Eigen::VectorXd u = Eigen::VectorXd::LinSpaced(G->algebra_dim(), 0.2, 1.1);
    Eigen::MatrixXd D = G->hat(d);
    auto dec          = group_affine_decompose(group_affine_field(G, D, u), plan);
    EXPECT_LT((dec.U.coords - u).norm(), 1e-14) << G->name();
    auto inner = inner_derivation_field(G, D);
    for (const auto & g : sample_group(G, plan, 5, "g")) {
      EXPECT_LT((dec.W.matrix_at(g) - inner.matrix_at(g)).norm(), 1e-13) << G->name();
    }
    EXPECT_LT(check_group_affine(group_affine_field(G, D, u), plan).max, 1e-12) << G->name();
  }
}

TEST(GroupAffine, NonAffineFieldIsRejected)
{
  // V(g) = g (g - g^T) is tangent on SO3 but quadratic in g
  auto G = LieGroup::so3();
  VectorFieldG V(G, [](const GroupElement & g) -> Eigen::MatrixXd {
    return g.matrix() * (g.matrix() - g.matrix().transpose());
  });
  SamplingPlan plan;
  EXPECT_GT(check_group_affine(V, plan).max, 1e-2);
  EXPECT_THROW((void)group_affine_decompose(V, plan), ConsistencyError);
  VectorFieldM Vm(Manifold::group(G), [V, G](const Eigen::VectorXd & p) {
    return flatten(V.matrix_at(GroupElement(G, unflatten(p, 3), false)));
  });
  EXPECT_NE(classify_vector_field(Vm, left_action(G), plan).classification, Classification::Weak);
}

TEST(GroupAffine, WeakUnderLeftActionImpliesAffine)
{
  // fields classified Weak under the left action pass the affine identity, for random data
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    SamplingPlan plan;
    plan.seed = seed;
    auto G    = LieGroup::se3();
    auto d    = plan.coords(6, 1, "d")[0];
    auto u    = plan.coords(6, 1, "u")[0];
    auto V    = lifted_field(group_affine_field(G, G->hat(d), u));
    ASSERT_EQ(classify_vector_field(V, left_action(G), plan).classification, Classification::Weak);
    EXPECT_LT(check_group_affine(V, plan).max, 1e-10);
  }
}

TEST(GroupAffine, AsGroupFieldNeedsAGroupManifold)
{
  EXPECT_THROW((void)as_group_field(affine_field(Eigen::Matrix2d::Identity(), Eigen::Vector2d::Zero())), ConfigurationError);
}
