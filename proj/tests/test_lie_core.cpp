#include <cmath>
#include <limits>
#include <numbers>

#include <unsupported/Eigen/MatrixFunctions>

#include "test_util.hpp"

using namespace weakinv;
using wtest::vec;

constexpr double kPi = std::numbers::pi;

TEST(LieGroupExp, So3QuarterTurnAboutZ)
{
  auto G = LieGroup::so3();
  Eigen::Matrix3d expected;
  expected << 0, -1, 0, 1, 0, 0, 0, 0, 1;
  EXPECT_LT((G->exp(vec({0, 0, kPi / 2})) - expected).norm(), 1e-15);
}

TEST(LieGroupExp, So2Angle)
{
  auto G = LieGroup::so2();
  Eigen::Matrix2d expected;
  expected << 0.5, -std::sqrt(3.0) / 2, std::sqrt(3.0) / 2, 0.5;
  EXPECT_LT((G->exp(vec({kPi / 3})) - expected).norm(), 1e-15);
}

TEST(LieGroupExp, Se2QuarterTurnWithUnitVelocity)
{
  // translation is V(w) v with V = [[sin w, -(1 - cos w)], [1 - cos w, sin w]] / w
  auto G = LieGroup::se2();
  Eigen::Matrix3d expected;
  expected << 0, -1, 2 / kPi, 1, 0, 2 / kPi, 0, 0, 1;
  EXPECT_LT((G->exp(vec({1, 0, kPi / 2})) - expected).norm(), 1e-15);
}

TEST(LieGroupExp, Se3PureTranslation)
{
  auto G            = LieGroup::se3();
  Eigen::MatrixXd g = G->exp(vec({1, -2, 3, 0, 0, 0}));
  EXPECT_LT((g.topLeftCorner(3, 3) - Eigen::Matrix3d::Identity()).norm(), 1e-15);
  EXPECT_LT((g.topRightCorner(3, 1) - vec({1, -2, 3})).norm(), 1e-15);
}

TEST(LieGroupExp, TranslationIsHomogeneous)
{
  auto G            = LieGroup::translation(3);
  Eigen::MatrixXd g = G->exp(vec({0.5, -1, 2}));
  EXPECT_EQ(g.rows(), 4);
  EXPECT_LT((g.col(3).head(3) - vec({0.5, -1, 2})).norm(), 1e-15);
  EXPECT_LT((g.topLeftCorner(3, 3) - Eigen::Matrix3d::Identity()).norm(), 1e-15);
}

// closed-form exp agrees with scaling-and-squaring Pade on every builtin group
TEST(LieGroupProperty, ClosedFormExpMatchesPade)
{
  SamplingPlan plan;
  plan.seed = 101;
  for (const auto & G : wtest::all_groups()) {
    for (const auto & x : plan.coords(static_cast<std::size_t>(G->algebra_dim()), 20, "exp")) {
      Eigen::MatrixXd pade = G->hat(x).exp();
      EXPECT_LT((G->exp(x) - pade).norm(), 1e-12) << G->name();
    }
  }
}

TEST(LieGroupProperty, LogInvertsExpInsideInjectivityRadius)
{
  SamplingPlan plan;
  plan.seed = 102;
  for (const auto & G : wtest::all_groups()) {
    for (const auto & x : plan.coords(static_cast<std::size_t>(G->algebra_dim()), 20, "log")) {
      EXPECT_LT((G->log(G->exp(x)) - x).norm(), 1e-10) << G->name();
    }
  }
}

TEST(LieGroupProperty, HatVeeRoundTripAndInverse)
{
  SamplingPlan plan;
  plan.seed = 103;
  for (const auto & G : wtest::all_groups()) {
    for (const auto & x : plan.coords(static_cast<std::size_t>(G->algebra_dim()), 10, "hat")) {
      EXPECT_LT((G->vee(G->hat(x)) - x).norm(), 1e-14) << G->name();
      Eigen::MatrixXd g = G->exp(x);
      EXPECT_LT((g * G->inverse(g) - G->identity_matrix()).norm(), 1e-13) << G->name();
      EXPECT_LT(G->membership_residual(g), G->membership_tolerance()) << G->name();
    }
  }
}

TEST(LieGroupLog, NearCutLocusIsOutOfDomain)
{
  auto so3 = LieGroup::so3();
  EXPECT_THROW((void)so3->log(so3->exp(vec({0, 0, kPi - 1e-8}))), OutOfDomain);
  auto so2 = LieGroup::so2();
  EXPECT_THROW((void)so2->log(so2->exp(vec({kPi}))), OutOfDomain);
  EXPECT_NO_THROW((void)so3->log(so3->exp(vec({0, 0, kPi - 1e-3}))));
}

TEST(LieGroupLog, SmallAngleSeries)
{
  auto G = LieGroup::se3();
  Eigen::VectorXd x = vec({1e-9, 2e-9, -1e-9, 1e-10, -3e-10, 2e-10});
  EXPECT_LT((G->log(G->exp(x)) - x).norm(), 1e-20);
}

TEST(GroupElementTest, MembershipIsChecked)
{
  auto G = LieGroup::so3();
  EXPECT_THROW(GroupElement(G, 2.0 * Eigen::MatrixXd::Identity(3, 3)), MembershipError);
  EXPECT_THROW(GroupElement(G, Eigen::MatrixXd::Identity(2, 2)), DescriptorMismatch);
  Eigen::MatrixXd reflect = Eigen::MatrixXd::Identity(3, 3);
  reflect(2, 2)           = -1;
  EXPECT_THROW(GroupElement(G, reflect), MembershipError);
  EXPECT_NO_THROW(GroupElement(G, G->exp(vec({0.1, 0.2, 0.3}))));
}

TEST(GroupElementTest, MixedGroupsAreRejected)
{
  auto a = GroupElement::identity(LieGroup::so3());
  auto b = GroupElement::identity(LieGroup::so2());
  EXPECT_THROW((void)compose(a, b), DescriptorMismatch);
}

TEST(GroupElementTest, ComposeInverseExpLog)
{
  auto G = LieGroup::se2();
  GroupElement g(G, G->exp(vec({0.3, -0.2, 0.7})));
  EXPECT_LT((compose(g, inverse(g)).matrix() - G->identity_matrix()).norm(), 1e-14);
  EXPECT_LT((log(g).coords - vec({0.3, -0.2, 0.7})).norm(), 1e-14);
  EXPECT_LT((exp(AlgebraVector{G, vec({0.3, -0.2, 0.7})}).matrix() - g.matrix()).norm(), 1e-15);
}

TEST(LieAlgebra, So3BracketOfBasis)
{
  auto G             = LieGroup::so3();
  const auto & basis = G->basis();
  EXPECT_LT((bracket(basis[0], basis[1]) - basis[2]).norm(), 1e-15);
  EXPECT_LT((bracket(basis[1], basis[2]) - basis[0]).norm(), 1e-15);
}

TEST(LieAlgebra, TangentMaps)
{
  auto G = LieGroup::so3();
  GroupElement g(G, G->exp(vec({0.4, 0.1, -0.3})));
  GroupElement h(G, G->exp(vec({-0.2, 0.5, 0.3})));
  auto v  = at_identity({G, vec({1, 2, 3})});
  auto lv = dLeft(g, v);
  auto rv = dRight(h, v);
  EXPECT_LT((lv.base.matrix() - g.matrix()).norm(), 1e-15);
  EXPECT_LT((lv.matrix - g.matrix() * G->hat(vec({1, 2, 3}))).norm(), 1e-14);
  EXPECT_LT((rv.matrix - G->hat(vec({1, 2, 3})) * h.matrix()).norm(), 1e-14);
  EXPECT_LT(lv.tangent_residual(), 1e-13);
}

TEST(ProductGroup, ExpIsBlockwise)
{
  auto so3 = LieGroup::so3();
  auto r2  = LieGroup::translation(2);
  auto G   = LieGroup::product({so3, r2});
  EXPECT_EQ(G->name(), "SO3*R2");
  EXPECT_EQ(G->algebra_dim(), 5);
  EXPECT_EQ(G->matrix_dim(), 6);
  Eigen::MatrixXd g = G->exp(vec({0.3, -0.1, 0.2, 1.5, -2}));
  EXPECT_LT((g.topLeftCorner(3, 3) - so3->exp(vec({0.3, -0.1, 0.2}))).norm(), 1e-12);
  EXPECT_LT((g.bottomRightCorner(3, 3) - r2->exp(vec({1.5, -2}))).norm(), 1e-12);
  EXPECT_LT(g.topRightCorner(3, 3).norm(), 1e-15);
}

TEST(NearestRotation, ProjectsPerturbedRotation)
{
  auto G            = LieGroup::so3();
  Eigen::MatrixXd r = G->exp(vec({0.2, 0.4, -0.1}));
  r(0, 1) += 1e-3;
  Eigen::MatrixXd q = nearest_rotation(r);
  EXPECT_LT((q.transpose() * q - Eigen::Matrix3d::Identity()).norm(), 1e-14);
  EXPECT_NEAR(q.determinant(), 1.0, 1e-14);
  EXPECT_LT((q - r).norm(), 1e-3);
}

// ---------------------------------------------------------------------------
// fields on G

TEST(GroupLinear, InnerDerivationPasses)
{
  auto G = LieGroup::so3();
  SamplingPlan plan;
  auto chk = check_group_linear(inner_derivation_field(G, G->hat(vec({0.3, -0.5, 0.2}))), plan);
  EXPECT_TRUE(chk.passed);
  EXPECT_LT(chk.stats.max, 1e-12);
  EXPECT_EQ(chk.stats.count, plan.group_samples);
  EXPECT_LT(chk.at_identity, 1e-15);
}

TEST(GroupLinear, LeftInvariantResidualIsRootTwoNormXi)
{
  // W(gh) - g W(h) - W(g) h = -g xi h, whose Frobenius norm is sqrt(2) |xi| on SO3
  auto G             = LieGroup::so3();
  Eigen::VectorXd xi = vec({0.3, -0.4, 1.2});
  auto W             = left_invariant_field({G, xi});
  SamplingPlan plan;
  for (const auto & [g, h] : sample_group_pairs(G, plan, 10, "pairs")) {
    EXPECT_NEAR(group_linear_residual(W, g, h), std::sqrt(2.0) * xi.norm(), 1e-13);
  }
  EXPECT_FALSE(check_group_linear(W, plan).passed);
}

TEST(GroupAffine, ConstructedFieldsSatisfyIdentity)
{
  SamplingPlan plan;
  plan.seed = 5;
  for (const auto & G : {LieGroup::so3(), LieGroup::se2(), LieGroup::se3()}) {
    Eigen::MatrixXd D = G->hat(plan.coords(static_cast<std::size_t>(G->algebra_dim()), 1, "D")[0]);
    Eigen::VectorXd U = plan.coords(static_cast<std::size_t>(G->algebra_dim()), 1, "U")[0];
    auto V            = group_affine_field(G, D, U);
    for (const auto & [g, h] : sample_group_pairs(G, plan, 20, "ga")) {
      EXPECT_LT(group_affine_residual(V, g, h), 1e-12) << G->name();
    }
  }
}

TEST(LeftTrivialize, RecoversXiAndRejectsNonTangent)
{
  auto G             = LieGroup::so3();
  Eigen::VectorXd xi = vec({0.1, 0.2, 0.3});
  auto W             = left_invariant_field({G, xi});
  GroupElement g(G, G->exp(vec({1, -1, 0.5})));
  EXPECT_LT((left_trivialize(W, g).coords - xi).norm(), 1e-14);
  VectorFieldG bad(G, [](const GroupElement & x) -> Eigen::MatrixXd { return x.matrix(); });
  EXPECT_THROW((void)left_trivialize(bad, g), InvalidTangent);
}

// ---------------------------------------------------------------------------
// sampling

TEST(Sampling, DeterministicPerSeedAndStream)
{
  SamplingPlan a;
  a.seed = 42;
  SamplingPlan b = a;
  auto x         = a.coords(3, 30, "s");
  auto y         = b.coords(3, 30, "s");
  auto z         = a.coords(3, 30, "t");
  ASSERT_EQ(x.size(), 30U);
  for (std::size_t i = 0; i < x.size(); ++i) {
    EXPECT_EQ(x[i], y[i]);
    EXPECT_LE(x[i].cwiseAbs().maxCoeff(), a.box);
  }
  EXPECT_NE(x[0], z[0]);
  b.seed = 43;
  EXPECT_NE(b.coords(3, 1, "s")[0], x[0]);
}

TEST(Sampling, HighDimensionUsesSubstreams)
{
  SamplingPlan plan;
  auto x = plan.coords(81, 4, "big");
  ASSERT_EQ(x[0].size(), 81);
  EXPECT_LE(x[3].cwiseAbs().maxCoeff(), plan.box);
  EXPECT_NE(x[0].head(40), x[0].segment(40, 40));
}

TEST(ResidualStatsTest, NanPoisonsMax)
{
  ResidualStats s;
  s.add(1.0);
  s.add(3.0);
  EXPECT_DOUBLE_EQ(s.mean(), 2.0);
  EXPECT_TRUE(s.below(3.5));
  s.add(std::numeric_limits<double>::quiet_NaN());
  EXPECT_FALSE(s.below(1e300));
  s.add(5.0);
  EXPECT_TRUE(std::isnan(s.max));
}

TEST(GroupElementTest, Se2ProductOfHomogeneousMatrices)
{
  // (quarter turn, t = (1, 0)) then (no turn, t = (0, 1)): t = (1, 0) + R(pi/2)(0, 1) = (0, 0)
  auto G = LieGroup::se2();
  Eigen::Matrix3d a;
  a << 0, -1, 1, 1, 0, 0, 0, 0, 1;
  Eigen::Matrix3d b;
  b << 1, 0, 0, 0, 1, 1, 0, 0, 1;
  auto ab = compose(GroupElement(G, a), GroupElement(G, b));
  Eigen::Matrix3d expected;
  expected << 0, -1, 0, 1, 0, 0, 0, 0, 1;
  EXPECT_LT((ab.matrix() - expected).norm(), 1e-15);
}

TEST(LeftTrivialize, InnerDerivationAtRotationAboutY)
{
  // g^-1 D g - D with g = exp(0.7 e_y), D = hat(e_z)
  auto G = LieGroup::so3();
  const double c = std::cos(0.7);
  const double s = std::sin(0.7);
  Eigen::Matrix3d g;
  g << c, 0, s, 0, 1, 0, -s, 0, c;
  Eigen::Matrix3d D;
  D << 0, -1, 0, 1, 0, 0, 0, 0, 0;
  auto W = inner_derivation_field(G, D);
  Eigen::Matrix3d x = g.transpose() * D * g - D;
  Eigen::Vector3d expected(x(2, 1), x(0, 2), x(1, 0));
  EXPECT_LT((left_trivialize(W, GroupElement(G, g)).coords - expected).norm(), 1e-15);
  // rotating e_z about y by -0.7 gives (-sin 0.7, 0, cos 0.7)
  EXPECT_LT((expected - Eigen::Vector3d(-s, 0, c - 1)).norm(), 1e-15);
}
