#include "screenaim/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <utility>

namespace screenaim {

ExtentBox::ExtentBox(double x_min, double x_max, double y_min, double y_max)
    : x_min_(x_min), x_max_(x_max), y_min_(y_min), y_max_(y_max) {
  if (!(x_min <= x_max) || !(y_min <= y_max)) {
    throw std::invalid_argument("ExtentBox requires x_min <= x_max and y_min <= y_max");
  }
}

const char* to_string(Confidence c) {
  switch (c) {
    case Confidence::TwoColor:
      return "TwoColor";
    case Confidence::SingleColorFallback:
      return "SingleColorFallback";
  }
  return "?";
}

AimResult AimResult::make(double x_sr, double y_sr, Confidence confidence) {
  const bool on = x_sr >= 0 && x_sr <= 1 && y_sr >= 0 && y_sr <= 1;
  return {x_sr, y_sr, on, confidence};
}

namespace {

double cross(const NormPoint& o, const NormPoint& a, const NormPoint& b) {
  return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
}

}  // namespace

Quad::Quad(const std::array<NormPoint, 4>& corners) : corners_(corners) {
  for (const auto& c : corners_) {
    if (!std::isfinite(c.x) || !std::isfinite(c.y)) {
      throw std::invalid_argument("Quad corners must be finite");
    }
  }
  // TL -> TR -> BR -> BL is clockwise on screen, which is a positive turn
  // with y pointing down.
  for (std::size_t i = 0; i < 4; ++i) {
    const double turn = cross(corners_[i], corners_[(i + 1) % 4], corners_[(i + 2) % 4]);
    if (!(turn > 0)) {
      throw std::invalid_argument("Quad must be strictly convex and ordered TL, TR, BR, BL");
    }
  }
}

Homography::Homography(const Mat3& m) : m_(m) {
  if (std::abs(m[2][2]) < kGeomEpsilon) {
    throw SingularConfiguration("homography has m[2][2] ~ 0 and cannot be normalized");
  }
  const double s = m[2][2];
  for (auto& row : m_) {
    for (auto& v : row) v /= s;
  }
  if (!(std::abs(determinant()) > kGeomEpsilon)) {
    throw SingularConfiguration("homography is not invertible");
  }
}

double Homography::determinant() const {
  const auto& a = m_;
  return a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1]) -
         a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0]) +
         a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0]);
}

Homography Homography::inverse() const {
  const auto& a = m_;
  const double det = determinant();
  Mat3 inv{};
  inv[0][0] = (a[1][1] * a[2][2] - a[1][2] * a[2][1]) / det;
  inv[0][1] = (a[0][2] * a[2][1] - a[0][1] * a[2][2]) / det;
  inv[0][2] = (a[0][1] * a[1][2] - a[0][2] * a[1][1]) / det;
  inv[1][0] = (a[1][2] * a[2][0] - a[1][0] * a[2][2]) / det;
  inv[1][1] = (a[0][0] * a[2][2] - a[0][2] * a[2][0]) / det;
  inv[1][2] = (a[0][2] * a[1][0] - a[0][0] * a[1][2]) / det;
  inv[2][0] = (a[1][0] * a[2][1] - a[1][1] * a[2][0]) / det;
  inv[2][1] = (a[0][1] * a[2][0] - a[0][0] * a[2][1]) / det;
  inv[2][2] = (a[0][0] * a[1][1] - a[0][1] * a[1][0]) / det;
  return Homography(inv);
}

NormPoint Homography::map(const NormPoint& p) const {
  const auto& a = m_;
  const double w = a[2][0] * p.x + a[2][1] * p.y + a[2][2];
  if (std::abs(w) < kGeomEpsilon) {
    throw PerspectiveDivideByZero("point maps to infinity (|w| < epsilon)");
  }
  return {(a[0][0] * p.x + a[0][1] * p.y + a[0][2]) / w,
          (a[1][0] * p.x + a[1][1] * p.y + a[1][2]) / w};
}

AimResult aim_from_extents(const ExtentBox& box) {
  if (box.degenerate()) {
    throw DegenerateExtent("extent box has zero width or height");
  }
  const double x = (kAimCenter.x - box.x_min()) / box.width();
  const double y = (kAimCenter.y - box.y_min()) / box.height();
  return AimResult::make(x, y, Confidence::TwoColor);
}

ExtentBox reconcile_extents(const ExtentBox& a, const ExtentBox& b) {
  const double x_min = std::max(a.x_min(), b.x_min());
  const double x_max = std::min(a.x_max(), b.x_max());
  const double y_min = std::max(a.y_min(), b.y_min());
  const double y_max = std::min(a.y_max(), b.y_max());
  if (x_min > x_max || y_min > y_max) {
    throw ReconcileConflict("color extents are disjoint on at least one axis");
  }
  return ExtentBox(x_min, x_max, y_min, y_max);
}

bool validate_aspect(const ExtentBox& box, double expected_ratio, double tol) {
  if (box.degenerate()) {
    throw DegenerateExtent("aspect check on a degenerate extent box");
  }
  if (!(expected_ratio > 0) || tol < 0) {
    throw std::invalid_argument("expected_ratio must be positive and tol non-negative");
  }
  const double ratio = box.width() / box.height();
  // A few ulps of slack so exact ratios built from decimal extents still
  // compare equal at tol = 0.
  const double slack = 8 * std::numeric_limits<double>::epsilon() * expected_ratio;
  return std::abs(ratio - expected_ratio) <= tol * expected_ratio + slack;
}

Homography estimate_homography(const Quad& q) {
  static constexpr std::array<NormPoint, 4> kUnit{{{0, 0}, {1, 0}, {1, 1}, {0, 1}}};

  // Unknowns h0..h7 with h8 = 1:
  //   x = (h0 u + h1 v + h2) / (h6 u + h7 v + 1)
  //   y = (h3 u + h4 v + h5) / (h6 u + h7 v + 1)
  std::array<std::array<double, 9>, 8> a{};
  for (std::size_t i = 0; i < 4; ++i) {
    const double u = kUnit[i].x;
    const double v = kUnit[i].y;
    const double x = q[i].x;
    const double y = q[i].y;
    a[2 * i] = {u, v, 1, 0, 0, 0, -u * x, -v * x, x};
    a[2 * i + 1] = {0, 0, 0, u, v, 1, -u * y, -v * y, y};
  }

  // Gaussian elimination with partial pivoting.
  for (std::size_t col = 0; col < 8; ++col) {
    std::size_t pivot = col;
    for (std::size_t r = col + 1; r < 8; ++r) {
      if (std::abs(a[r][col]) > std::abs(a[pivot][col])) pivot = r;
    }
    if (std::abs(a[pivot][col]) < kGeomEpsilon) {
      throw SingularConfiguration("homography system is rank deficient");
    }
    std::swap(a[col], a[pivot]);
    for (std::size_t r = 0; r < 8; ++r) {
      if (r == col) continue;
      const double f = a[r][col] / a[col][col];
      if (f == 0) continue;
      for (std::size_t c = col; c < 9; ++c) a[r][c] -= f * a[col][c];
    }
  }
  std::array<double, 8> h{};
  for (std::size_t i = 0; i < 8; ++i) h[i] = a[i][8] / a[i][i];

  Homography result(Mat3{{{h[0], h[1], h[2]}, {h[3], h[4], h[5]}, {h[6], h[7], 1.0}}});
  for (std::size_t i = 0; i < 4; ++i) {
    const NormPoint p = result.map(kUnit[i]);
    if (std::abs(p.x - q[i].x) > kGeomEpsilon || std::abs(p.y - q[i].y) > kGeomEpsilon) {
      throw SingularConfiguration("homography does not reproduce the quad corners");
    }
  }
  return result;
}

AimResult aim_from_quad(const Quad& q) {
  const Homography h = estimate_homography(q);
  const NormPoint sr = h.inverse().map(kAimCenter);
  return AimResult::make(sr.x, sr.y, Confidence::TwoColor);
}

}  // namespace screenaim
