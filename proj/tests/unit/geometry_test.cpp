#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "screenaim/geometry.hpp"

#include "oracles.hpp"

using namespace screenaim;

namespace {

using namespace oracle;

ExtentBox random_box(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-0.5, 1.5);
  std::uniform_real_distribution<double> size(0.01, 1.0);
  const double x = u(rng), y = u(rng);
  return {x, x + size(rng), y, y + size(rng)};
}

// Corner-jittered rectangles; rejected when the jitter breaks convexity.
std::array<NormPoint, 4> random_convex_quad(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> j(-0.15, 0.15);
  while (true) {
    std::array<NormPoint, 4> c{NormPoint{0.2 + j(rng), 0.2 + j(rng)},
                               NormPoint{0.8 + j(rng), 0.2 + j(rng)},
                               NormPoint{0.8 + j(rng), 0.8 + j(rng)},
                               NormPoint{0.2 + j(rng), 0.8 + j(rng)}};
    try {
      Quad q(c);
      return c;
    } catch (const std::invalid_argument&) {
    }
  }
}

}  // namespace

TEST(AimFromExtents, SymmetricBoxGivesCenter) {
  const auto r = aim_from_extents({0.25, 0.75, 0.25, 0.75});
  EXPECT_EQ(r.x_sr, 0.5);
  EXPECT_EQ(r.y_sr, 0.5);
  EXPECT_TRUE(r.on_screen);
  EXPECT_EQ(r.confidence, Confidence::TwoColor);
}

TEST(AimFromExtents, HandEvaluatedRatio) {
  const auto r = aim_from_extents({0.2, 0.6, 0.3, 0.7});
  EXPECT_NEAR(r.x_sr, literal_ratio(0.2, 0.6), 1e-15);
  EXPECT_NEAR(r.x_sr, 0.75, 1e-15);
  EXPECT_NEAR(r.y_sr, 0.5, 1e-15);
  EXPECT_TRUE(r.on_screen);
}

TEST(AimFromExtents, CenterLeftOfScreenIsNegative) {
  const auto r = aim_from_extents({0.6, 0.9, 0.25, 0.75});
  EXPECT_NEAR(r.x_sr, -1.0 / 3.0, 1e-15);
  EXPECT_FALSE(r.on_screen);
}

TEST(AimFromExtents, ContinuousAcrossLeftEdge) {
  // Approaching x_min -> 0.5 from below, the literal form tends to 0 and the
  // signed form passes through 0 without a jump.
  for (double eps : {1e-3, 1e-6, 1e-9}) {
    const auto inside = aim_from_extents({0.5 - eps, 0.9, 0.25, 0.75});
    const auto outside = aim_from_extents({0.5 + eps, 0.9, 0.25, 0.75});
    EXPECT_NEAR(inside.x_sr, literal_ratio(0.5 - eps, 0.9), 1e-12);
    EXPECT_NEAR(inside.x_sr, 0.0, 4 * eps);
    EXPECT_NEAR(outside.x_sr, 0.0, 4 * eps);
    EXPECT_LT(outside.x_sr, 0.0);
  }
}

TEST(AimFromExtents, DegenerateThrows) {
  EXPECT_THROW(aim_from_extents({0.5, 0.5, 0.2, 0.8}), DegenerateExtent);
  EXPECT_THROW(aim_from_extents({0.2, 0.8, 0.3, 0.3 + 1e-10}), DegenerateExtent);
}

TEST(AimFromExtents, OnScreenMatchesRange) {
  std::mt19937_64 rng(3);
  for (int i = 0; i < 2000; ++i) {
    const auto r = aim_from_extents(random_box(rng));
    const bool inside = r.x_sr >= 0 && r.x_sr <= 1 && r.y_sr >= 0 && r.y_sr <= 1;
    EXPECT_EQ(r.on_screen, inside);
  }
}

TEST(AimFromExtents, LiteralFormEquivalence) {
  std::mt19937_64 rng(1);
  for (int i = 0; i < 10000; ++i) {
    const ExtentBox b = random_box_around_center(rng);
    const auto r = aim_from_extents(b);
    ASSERT_NEAR(r.x_sr, literal_ratio(b.x_min(), b.x_max()), 1e-12);
    ASSERT_NEAR(r.y_sr, literal_ratio(b.y_min(), b.y_max()), 1e-12);
  }
}

TEST(AimFromExtents, TranslationShiftsByDeltaOverWidth) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> d(-0.3, 0.3);
  for (int i = 0; i < 2000; ++i) {
    const ExtentBox b = random_box(rng);
    const double delta = d(rng);
    const auto r0 = aim_from_extents(b);
    const auto r1 =
        aim_from_extents({b.x_min() + delta, b.x_max() + delta, b.y_min(), b.y_max()});
    EXPECT_NEAR(r1.x_sr, r0.x_sr - delta / b.width(), 1e-9);
    EXPECT_DOUBLE_EQ(r1.y_sr, r0.y_sr);
  }
}

TEST(AimFromExtents, ScalingAboutCenter) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> sd(0.2, 5.0);
  for (int i = 0; i < 2000; ++i) {
    const ExtentBox b = random_box(rng);
    const double s = sd(rng);
    const auto scale = [s](double v) { return 0.5 + (v - 0.5) * s; };
    const auto r0 = aim_from_extents(b);
    const auto r1 = aim_from_extents(
        {scale(b.x_min()), scale(b.x_max()), scale(b.y_min()), scale(b.y_max())});
    // Scaling the box about the aim center leaves the aim point unchanged.
    EXPECT_NEAR(r1.x_sr, r0.x_sr, 1e-9);
    EXPECT_NEAR(r1.y_sr, r0.y_sr, 1e-9);
  }
}

TEST(AimFromExtents, CenteredBoxIsFixedPointUnderScaling) {
  for (double s : {0.1, 0.5, 1.0, 2.0, 7.5}) {
    const double h = 0.25 * s;
    const auto r = aim_from_extents({0.5 - h, 0.5 + h, 0.5 - h, 0.5 + h});
    EXPECT_NEAR(r.x_sr, 0.5, 1e-15);
    EXPECT_NEAR(r.y_sr, 0.5, 1e-15);
  }
}

TEST(ExtentBox, RejectsInvertedBounds) {
  EXPECT_THROW(ExtentBox(0.6, 0.5, 0, 1), std::invalid_argument);
  EXPECT_THROW(ExtentBox(0, 1, 0.6, 0.5), std::invalid_argument);
  EXPECT_NO_THROW(ExtentBox(0.5, 0.5, 0.5, 0.5));
}

TEST(NormPoint, InFrame) {
  EXPECT_TRUE((NormPoint{0, 0}).in_frame());
  EXPECT_TRUE((NormPoint{1, 1}).in_frame());
  EXPECT_FALSE((NormPoint{-1e-12, 0.5}).in_frame());
  EXPECT_FALSE((NormPoint{0.5, 1.5}).in_frame());
}

TEST(Reconcile, KeepsLessExtremeBounds) {
  const auto r = reconcile_extents({0.10, 0.90, 0.10, 0.90}, {0.20, 0.85, 0.10, 0.90});
  EXPECT_EQ(r, ExtentBox(0.20, 0.85, 0.10, 0.90));
}

TEST(Reconcile, IdentityOnEqualInputs) {
  const ExtentBox a{0.3, 0.7, 0.3, 0.7};
  EXPECT_EQ(reconcile_extents(a, a), a);
}

TEST(Reconcile, DisjointBoxesConflict) {
  EXPECT_THROW(reconcile_extents({0.0, 0.2, 0.0, 0.2}, {0.8, 1.0, 0.8, 1.0}), ReconcileConflict);
  // Disjoint on one axis only still conflicts.
  EXPECT_THROW(reconcile_extents({0.0, 0.2, 0.0, 1.0}, {0.8, 1.0, 0.0, 1.0}), ReconcileConflict);
}

TEST(Reconcile, CommutativeAndIdempotent) {
  std::mt19937_64 rng(5);
  for (int i = 0; i < 2000; ++i) {
    const ExtentBox a = random_box(rng);
    const ExtentBox b = random_box(rng);
    EXPECT_EQ(reconcile_extents(a, a), a);
    try {
      const ExtentBox ab = reconcile_extents(a, b);
      EXPECT_EQ(ab, reconcile_extents(b, a));
      EXPECT_EQ(reconcile_extents(ab, ab), ab);
      EXPECT_EQ(reconcile_extents(ab, a), ab);
    } catch (const ReconcileConflict&) {
      EXPECT_THROW(reconcile_extents(b, a), ReconcileConflict);
    }
  }
}

TEST(ValidateAspect, ExactRatio) {
  const ExtentBox b{0.2, 0.8, 0.3, 0.6375};
  EXPECT_TRUE(validate_aspect(b, 16.0 / 9.0, 0.05));
  EXPECT_TRUE(validate_aspect(b, 16.0 / 9.0, 0.0));
}

TEST(ValidateAspect, SquareIsNotWidescreen) {
  EXPECT_FALSE(validate_aspect({0.2, 0.8, 0.2, 0.8}, 16.0 / 9.0, 0.05));
}

TEST(ValidateAspect, ToleranceBoundary) {
  // width/height = 1.0; expected 1.1 needs tol >= 0.1/1.1.
  const ExtentBox b{0.0, 0.5, 0.0, 0.5};
  EXPECT_TRUE(validate_aspect(b, 1.1, 0.1 / 1.1 + 1e-12));
  EXPECT_FALSE(validate_aspect(b, 1.1, 0.09));
}

TEST(Quad, RejectsNonConvexOrMisordered) {
  // Clockwise in y-down coordinates is the accepted winding.
  EXPECT_NO_THROW(Quad({NormPoint{0, 0}, {1, 0}, {1, 1}, {0, 1}}));
  EXPECT_THROW(Quad({NormPoint{0, 0}, {0, 1}, {1, 1}, {1, 0}}), std::invalid_argument);
  EXPECT_THROW(Quad({NormPoint{0, 0}, {1, 1}, {1, 0}, {0, 1}}), std::invalid_argument);
  // Dart: one reflex vertex.
  EXPECT_THROW(Quad({NormPoint{0, 0}, {1, 0}, {0.3, 0.3}, {0, 1}}), std::invalid_argument);
  // Collinear triple.
  EXPECT_THROW(Quad({NormPoint{0, 0}, {0.5, 0}, {1, 0}, {0, 1}}), std::invalid_argument);
  EXPECT_THROW(Quad({NormPoint{NAN, 0}, {1, 0}, {1, 1}, {0, 1}}), std::invalid_argument);
}

TEST(Homography, UnitSquareIsIdentity) {
  const auto h = estimate_homography(Quad({NormPoint{0, 0}, {1, 0}, {1, 1}, {0, 1}}));
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) EXPECT_NEAR(h.matrix()[r][c], r == c ? 1.0 : 0.0, 1e-15);
  }
}

TEST(Homography, HalfScale) {
  const auto h = estimate_homography(Quad({NormPoint{0, 0}, {0.5, 0}, {0.5, 0.5}, {0, 0.5}}));
  const Mat3 expected{{{0.5, 0, 0}, {0, 0.5, 0}, {0, 0, 1}}};
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) EXPECT_NEAR(h.matrix()[r][c], expected[r][c], 1e-15);
  }
}

TEST(Homography, ReproducesGeneralQuadCorners) {
  const Quad q({NormPoint{0.2, 0.2}, {0.8, 0.25}, {0.75, 0.8}, {0.25, 0.75}});
  const auto h = estimate_homography(q);
  const NormPoint unit[4] = {{0, 0}, {1, 0}, {1, 1}, {0, 1}};
  for (int i = 0; i < 4; ++i) {
    const auto p = h.map(unit[i]);
    EXPECT_NEAR(p.x, q[i].x, 1e-9);
    EXPECT_NEAR(p.y, q[i].y, 1e-9);
  }
  EXPECT_DOUBLE_EQ(h.matrix()[2][2], 1.0);
}

TEST(Homography, RandomRoundTrips) {
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const NormPoint unit[4] = {{0, 0}, {1, 0}, {1, 1}, {0, 1}};
  for (int n = 0; n < 300; ++n) {
    const Quad q(random_convex_quad(rng));
    const auto h = estimate_homography(q);
    for (int i = 0; i < 4; ++i) {
      const auto p = h.map(unit[i]);
      ASSERT_NEAR(p.x, q[i].x, 1e-9);
      ASSERT_NEAR(p.y, q[i].y, 1e-9);
    }
    const auto inv = h.inverse();
    for (int k = 0; k < 100; ++k) {
      const NormPoint p{u(rng), u(rng)};
      const auto back = inv.map(h.map(p));
      ASSERT_NEAR(back.x, p.x, 1e-9);
      ASSERT_NEAR(back.y, p.y, 1e-9);
    }
  }
}

TEST(Homography, SingularMatrixRejected) {
  EXPECT_THROW(Homography(Mat3{{{1, 2, 3}, {2, 4, 6}, {0, 0, 1}}}), SingularConfiguration);
}

TEST(Homography, DivideByZero) {
  // w = x + 1 vanishes at x = -1.
  const Homography h(Mat3{{{1, 0, 0}, {0, 1, 0}, {1, 0, 1}}});
  EXPECT_THROW(h.map({-1, 0.5}), PerspectiveDivideByZero);
}

TEST(AimFromQuad, AxisAlignedCentered) {
  const auto r = aim_from_quad(Quad({NormPoint{0.25, 0.25}, {0.75, 0.25}, {0.75, 0.75}, {0.25, 0.75}}));
  EXPECT_NEAR(r.x_sr, 0.5, 1e-12);
  EXPECT_NEAR(r.y_sr, 0.5, 1e-12);
  EXPECT_TRUE(r.on_screen);
  EXPECT_EQ(r.confidence, Confidence::TwoColor);
}

TEST(AimFromQuad, RectanglesMatchExtents) {
  std::mt19937_64 rng(7);
  for (int i = 0; i < 1000; ++i) {
    const ExtentBox b = random_box(rng);
    const Quad q({NormPoint{b.x_min(), b.y_min()}, {b.x_max(), b.y_min()},
                  {b.x_max(), b.y_max()}, {b.x_min(), b.y_max()}});
    const auto rq = aim_from_quad(q);
    const auto re = aim_from_extents(b);
    ASSERT_NEAR(rq.x_sr, re.x_sr, 1e-9);
    ASSERT_NEAR(rq.y_sr, re.y_sr, 1e-9);
    ASSERT_EQ(rq.on_screen, re.on_screen);
  }
}

TEST(AimFromQuad, ForwardMapHitsCenter) {
  // The returned SR point must map forward onto the CR center.
  std::mt19937_64 rng(8);
  for (int i = 0; i < 300; ++i) {
    const Quad q(random_convex_quad(rng));
    const auto r = aim_from_quad(q);
    const auto p = estimate_homography(q).map({r.x_sr, r.y_sr});
    ASSERT_NEAR(p.x, 0.5, 1e-9);
    ASSERT_NEAR(p.y, 0.5, 1e-9);
  }
}
