#include <cmath>
#include <cstdio>
#include <sstream>

#include <unsupported/Eigen/MatrixFunctions>

#include "test_util.hpp"

using namespace weakinv;
using wtest::vec;

namespace {

IntegratorConfig rk4(double step = 1e-3)
{
  IntegratorConfig c;
  c.step = step;
  return c;
}

IntegratorConfig lie(Scheme s, double step = 1e-3)
{
  IntegratorConfig c;
  c.scheme = s;
  c.step   = step;
  return c;
}

// x' = b x + a on the line
VectorFieldM scalar_affine(double b, double a)
{
  Eigen::MatrixXd A(1, 1);
  A(0, 0) = b;
  return affine_field(A, vec({a}));
}

}  // namespace

TEST(Integrate, ScalarAffineMatchesClosedForm)
{
  const double b = 0.7;
  const double a = -0.4;
  auto V         = scalar_affine(b, a);
  for (double p : {-1.5, 0.0, 2.0}) {
    for (double t : {0.25, 1.0, 2.0, -1.0}) {
      double exact = std::exp(b * t) * p + a / b * (std::exp(b * t) - 1.0);
      EXPECT_NEAR(integrate(V, rk4(), t, vec({p}))(0), exact, 1e-10) << "p " << p << " t " << t;
    }
  }
}

TEST(Integrate, LinearFieldMatchesMatrixExponential)
{
  Eigen::MatrixXd A = wtest::sample_matrix(2, 3, 3, "A");
  Eigen::VectorXd p = vec({1, -0.5, 0.25});
  Eigen::MatrixXd E = (A * 1.5).exp();
  EXPECT_LT((integrate(affine_field(A, Eigen::VectorXd::Zero(3)), rk4(), 1.5, p) - E * p).norm(), 1e-10);
}

TEST(Integrate, Rk4IsFourthOrder)
{
  Eigen::MatrixXd A(2, 2);
  A << -0.2, 1.0, -1.0, -0.2;
  auto V            = affine_field(A, Eigen::VectorXd::Zero(2));
  Eigen::VectorXd p = vec({1, 0});
  Eigen::VectorXd x = (A * 2.0).exp() * p;
  double e1         = (integrate(V, rk4(0.2), 2.0, p) - x).norm();
  double e2         = (integrate(V, rk4(0.1), 2.0, p) - x).norm();
  EXPECT_GE(e1 / e2, 8.0) << e1 << " " << e2;
  EXPECT_LE(e1 / e2, 20.0);
}

TEST(Integrate, ZeroTimeReturnsInitialPoint)
{
  auto V = scalar_affine(1.0, 1.0);
  EXPECT_EQ(integrate(V, rk4(), 0.0, vec({3}))(0), 3.0);
  ManifoldFlow flow(V, rk4());
  auto traj = flow.trajectory(0.0, vec({3}));
  ASSERT_EQ(traj.size(), 1U);
  EXPECT_EQ(traj[0].first, 0.0);
}

TEST(Integrate, BackwardUndoesForward)
{
  Eigen::MatrixXd A = wtest::sample_matrix(5, 2, 2, "A");
  ManifoldFlow flow(affine_field(A, vec({0.3, -0.1})), rk4());
  Eigen::VectorXd p = vec({0.4, 1.2});
  EXPECT_LT((flow(-0.8, flow(0.8, p)) - p).norm(), 1e-11);
}

TEST(Integrate, GridIsUniformAndCoversT)
{
  ManifoldFlow flow(scalar_affine(0.0, 1.0), rk4(0.3));
  auto traj = flow.trajectory(1.0, vec({0}));
  ASSERT_EQ(traj.size(), 5U);
  EXPECT_DOUBLE_EQ(traj.back().first, 1.0);
  EXPECT_NEAR(traj[1].first, 0.25, 1e-15);
  EXPECT_NEAR(traj.back().second(0), 1.0, 1e-14);
}

TEST(Integrate, RejectsNonPositiveStep)
{
  EXPECT_THROW((void)integrate(scalar_affine(1, 0), rk4(0.0), 1.0, vec({1})), ConfigurationError);
}

TEST(Integrate, BlowUpRaisesDivergenceWithTime)
{
  // x' = x^2 from x = 1 escapes at t = 1
  Eigen::MatrixXd Q(1, 1);
  Q(0, 0) = 1.0;
  auto V  = quadratic_field(Eigen::MatrixXd::Zero(1, 1), vec({0}), {Q});
  try {
    (void)integrate(V, rk4(1e-3), 2.0, vec({1}));
    FAIL() << "expected DivergenceError";
  } catch (const DivergenceError & e) {
    EXPECT_GT(e.time(), 0.9);
    EXPECT_LT(e.time(), 1.1);
  }
}

TEST(Integrate, LieSchemesNeedAGroupManifold)
{
  EXPECT_THROW((void)integrate(scalar_affine(1, 0), lie(Scheme::RKMK4), 1.0, vec({1})), ConfigurationError);
}

// ---------------------------------------------------------------------------
// group integrators

TEST(GroupIntegrators, RkmkIsExactForLeftInvariantFields)
{
  auto G = LieGroup::so3();
  AlgebraVector xi{G, vec({0.3, -0.8, 0.5})};
  GroupElement g0(G, G->exp(vec({0.1, 0.2, -0.4})));
  auto g = integrate(left_invariant_field(xi), lie(Scheme::RKMK4, 0.25), 2.0, g0);
  EXPECT_LT((g.matrix() - g0.matrix() * G->exp(2.0 * xi.coords)).norm(), 1e-13);
}

TEST(GroupIntegrators, InnerDerivationFlowIsConjugation)
{
  for (const auto & G : {LieGroup::so3(), LieGroup::se2()}) {
    Eigen::MatrixXd D = G->hat(Eigen::VectorXd::LinSpaced(G->algebra_dim(), -0.6, 0.9));
    GroupElement g0(G, G->exp(Eigen::VectorXd::LinSpaced(G->algebra_dim(), 0.4, -0.2)));
    Eigen::MatrixXd expected = (D * 1.3).exp() * g0.matrix() * (-D * 1.3).exp();
    for (auto s : {Scheme::RKMK4, Scheme::RK4Ambient}) {
      auto g = integrate(inner_derivation_field(G, D), lie(s, 1e-2), 1.3, g0);
      EXPECT_LT((g.matrix() - expected).norm(), 1e-9) << G->name();
    }
  }
}

TEST(GroupIntegrators, LieEulerIsFirstOrder)
{
  auto G            = LieGroup::so3();
  Eigen::MatrixXd D = G->hat(vec({0.5, -0.4, 0.8}));
  GroupElement g0(G, G->exp(vec({0.3, 0.1, 0.2})));
  Eigen::MatrixXd x = (D).exp() * g0.matrix() * (-D).exp();
  auto W            = inner_derivation_field(G, D);
  double e1         = (integrate(W, lie(Scheme::LieEulerExp, 0.02), 1.0, g0).matrix() - x).norm();
  double e2         = (integrate(W, lie(Scheme::LieEulerExp, 0.01), 1.0, g0).matrix() - x).norm();
  EXPECT_GT(e1 / e2, 1.7);
  EXPECT_LT(e1 / e2, 2.3);
  // every iterate is a group element
  EXPECT_LT(G->membership_residual(integrate(W, lie(Scheme::LieEulerExp, 0.02), 1.0, g0).matrix()), 1e-13);
}

TEST(GroupIntegrators, ProjectionKeepsAmbientRk4OnTheGroup)
{
  auto G = LieGroup::so3();
  AlgebraVector xi{G, vec({1.0, -2.0, 0.5})};
  GroupElement g0 = GroupElement::identity(G);
  auto with       = lie(Scheme::RK4Ambient, 0.1);
  auto without    = with;
  without.projection = Projection::None;
  auto W             = left_invariant_field(xi);
  double on          = G->membership_residual(integrate(W, with, 10.0, g0).matrix());
  double off         = G->membership_residual(unflatten(integrate(lifted_field(W), without, 10.0, flatten(g0.matrix())), 3));
  EXPECT_LT(on, 1e-12);
  EXPECT_GT(off, on);
}

TEST(GroupIntegrators, TrajectoryCsvHasHeaderAndRows)
{
  auto G = LieGroup::so2();
  Trajectory traj;
  (void)integrate(left_invariant_field(AlgebraVector{G, vec({1})}), lie(Scheme::RKMK4, 0.5), 1.0, GroupElement::identity(G), &traj);
  std::ostringstream os;
  write_trajectory_csv(os, traj);
  std::istringstream is(os.str());
  std::string line;
  std::getline(is, line);
  EXPECT_EQ(line, "t,coord_0,coord_1,coord_2,coord_3");
  std::vector<std::string> rows;
  while (std::getline(is, line)) { rows.push_back(line); }
  ASSERT_EQ(rows.size(), 3U);
  EXPECT_EQ(rows[0], "0,1,0,0,1");
  double c = 0.0;
  ASSERT_EQ(std::sscanf(rows[1].c_str(), "0.5,%lf", &c), 1);
  EXPECT_NEAR(c, std::cos(0.5), 1e-15);
}

// ---------------------------------------------------------------------------
// flow-level weak invariance

class AffineFlows : public ::testing::Test
{
protected:
  void SetUp() override
  {
    A      = wtest::sample_matrix(7, 3, 3, "A");
    V      = affine_field(A, vec({0.3, -0.2, 0.1}));
    action = translation_action(3);
    points = action->manifold()->sample(plan, plan.point_samples, "points");
  }

  // W(c) = g hat(A c), optionally scaled
  VectorFieldG exact_W(double scale = 1.0) const
  {
    auto G              = action->group();
    Eigen::MatrixXd Acp = A * scale;
    return {G, [G, Acp](const GroupElement & g) -> Eigen::MatrixXd {
              return g.matrix() * G->hat(Acp * g.matrix().col(3).head(3));
            }};
  }

  Eigen::MatrixXd A;
  std::optional<VectorFieldM> V;
  ActionPtr action;
  SamplingPlan plan;
  std::vector<Eigen::VectorXd> points;
};

TEST_F(AffineFlows, SolverBackedWMatchesClosedForm)
{
  auto W = solver_backed_W(*V, action, points);
  for (const auto & g : sample_group(action->group(), plan, 10, "g")) {
    EXPECT_LT((W.matrix_at(g) - exact_W().matrix_at(g)).norm(), 1e-10);
  }
}

TEST_F(AffineFlows, FlowsAreWeaklyInvariant)
{
  ManifoldFlow Vflow(*V, rk4());
  GroupFlow Wflow(solver_backed_W(*V, action, points), lie(Scheme::RKMK4));
  EXPECT_LT(check_flow_weak_invariance(Vflow, Wflow, *action, {0.1, 0.5, 1.0}, plan).max, 1e-6);
  EXPECT_LT(check_vector_field_relation(Vflow, Wflow, *action, plan).max, 1e-4);
}

TEST_F(AffineFlows, CorruptedWFailsTheFlowCheck)
{
  ManifoldFlow Vflow(*V, rk4());
  GroupFlow Wflow(exact_W(2.0), lie(Scheme::RKMK4));
  EXPECT_GT(check_flow_weak_invariance(Vflow, Wflow, *action, {0.1, 0.5, 1.0}, plan).max, 0.1);
  EXPECT_GT(check_vector_field_relation(Vflow, Wflow, *action, plan).max, 0.1);
}

TEST_F(AffineFlows, WFlowIsCompleteAndIsTheExponentialOfA)
{
  GroupFlow Wflow(exact_W(), lie(Scheme::RKMK4, 1e-2));
  auto G = action->group();
  GroupElement g(G, G->exp(vec({0.5, -1, 2})));
  for (double t : {-10.0, 10.0}) {
    auto h = Wflow(t, g);
    EXPECT_TRUE(h.matrix().allFinite());
    Eigen::VectorXd c = (A * t).exp() * vec({0.5, -1, 2});
    EXPECT_LT((h.matrix().col(3).head(3) - c).norm(), 1e-6 * std::max(1.0, c.norm()));
  }
}

TEST_F(AffineFlows, SmallTimeExtensionHolds)
{
  ManifoldFlow Vflow(*V, rk4());
  auto chk = check_small_time_extension(Vflow, action, 0.05, 8, plan);
  EXPECT_TRUE(chk.recovered) << chk.failure;
  EXPECT_LT(chk.residual.max, 1e-7);
}

TEST_F(AffineFlows, SigmaIsAOneParameterGroup)
{
  ManifoldFlow Vflow(*V, rk4());
  auto chk = check_sigma_is_flow(sigma_family(Vflow, action, points), {{0.1, 0.2}, {0.2, 0.1}}, action->group(), plan);
  EXPECT_LT(chk.composition.max, 1e-7);
  EXPECT_LT(chk.identity.max, 1e-12);
}

TEST(Sigma, ScalarAffineSigmaIsExponentialScaling)
{
  // phi_t(p + c) = phi_t(p) + e^{bt} c
  const double b = 0.6;
  ManifoldFlow flow(scalar_affine(b, 1.0), rk4());
  auto action = translation_action(1);
  SamplingPlan plan;
  auto sigma = recovered_sigma(flow_diffeomorphism(flow, 0.5), action, action->manifold()->sample(plan, 4, "points"));
  auto G     = action->group();
  for (double c : {-2.0, 0.3, 1.7}) {
    GroupElement g(G, G->exp(vec({c})));
    EXPECT_NEAR(sigma(g).matrix()(0, 1), std::exp(b * 0.5) * c, 1e-9);
  }
}

TEST(Sigma, GroupAffineSigmaIsConjugationByFlowOfD)
{
  auto G            = LieGroup::so3();
  Eigen::MatrixXd D = G->hat(vec({0.3, -0.5, 0.2}));
  ManifoldFlow flow(lifted_field(group_affine_field(G, D, vec({0.4, -0.1, 0.7}))), lie(Scheme::RKMK4));
  auto action = left_action(G);
  SamplingPlan plan;
  auto sigma = recovered_sigma(flow_diffeomorphism(flow, 0.4), action, action->manifold()->sample(plan, 4, "points"));
  for (const auto & g : sample_group(G, plan, 5, "g")) {
    Eigen::MatrixXd expected = (0.4 * D).exp() * g.matrix() * (-0.4 * D).exp();
    EXPECT_LT((sigma(g).matrix() - expected).norm(), 1e-9);
  }
}

TEST(FlowRelation, ScalarAffineHandArithmetic)
{
  // V = a + b p, W(g) = b g: both sides equal V(q + g) = a + b (q + g)
  const double a = 1.0;
  const double b = 0.5;
  auto V         = scalar_affine(b, a);
  auto action    = translation_action(1);
  auto G         = action->group();
  auto make_W    = [G](double k) {
    return VectorFieldG(G, [G, k](const GroupElement & g) -> Eigen::MatrixXd { return g.matrix() * G->hat(vec({k * g.matrix()(0, 1)})); });
  };
  ManifoldFlow Vflow(V, rk4());
  GroupElement g(G, G->exp(vec({2.0})));
  Eigen::VectorXd q = vec({0.0});

  // phi^V_1(0) + e^{b} 2 = phi^V_1(2)
  GroupFlow Wflow(make_W(b), lie(Scheme::RKMK4));
  Eigen::VectorXd lhs = action->apply(Wflow(1.0, g).matrix(), Vflow(1.0, q));
  EXPECT_NEAR(lhs(0), Vflow(1.0, vec({2.0}))(0), 1e-10);
  EXPECT_NEAR(lhs(0), std::exp(b) * 2.0 + a / b * (std::exp(b) - 1.0), 1e-10);

  auto d = differentiate_flow_at_zero(Vflow, Wflow, *action, g, q);
  EXPECT_NEAR(d.lhs(0), a + b * 2.0, 1e-8);
  EXPECT_NEAR(d.rhs(0), a + b * 2.0, 1e-8);

  GroupFlow wrong(make_W(2 * b), lie(Scheme::RKMK4));
  auto dw = differentiate_flow_at_zero(Vflow, wrong, *action, g, q);
  EXPECT_NEAR(std::abs(dw.lhs(0) - dw.rhs(0)), b * 2.0, 1e-8);
}

TEST(Sigma, ScalarSmallTimeIteratesAreExact)
{
  // sigma_delta(g) = e^{b delta} g, so the n-th iterate is sigma_{n delta}
  ManifoldFlow flow(scalar_affine(0.5, 1.0), rk4());
  auto action = translation_action(1);
  auto chk    = check_small_time_extension(flow, action, 0.05, 8, SamplingPlan{});
  EXPECT_TRUE(chk.recovered);
  EXPECT_LT(chk.residual.max, 1e-10);
}
