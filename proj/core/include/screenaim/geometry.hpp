#pragma once

#include <array>
#include <stdexcept>

namespace screenaim {

// Threshold for degeneracy and singularity tests, in normalized units.
inline constexpr double kGeomEpsilon = 1e-9;

// Camera-relative (CR) point: (0,0) is the frame's top-left, (1,1) its
// bottom-right. Any finite value is allowed.
struct NormPoint {
  double x = 0;
  double y = 0;

  bool in_frame() const { return x >= 0 && x <= 1 && y >= 0 && y <= 1; }

  friend bool operator==(const NormPoint&, const NormPoint&) = default;
};

// The camera's optical center always sits in the middle of the frame.
inline constexpr NormPoint kAimCenter{0.5, 0.5};

class GeometryError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};
class DegenerateExtent : public GeometryError {
 public:
  using GeometryError::GeometryError;
};
class ReconcileConflict : public GeometryError {
 public:
  using GeometryError::GeometryError;
};
class SingularConfiguration : public GeometryError {
 public:
  using GeometryError::GeometryError;
};
class PerspectiveDivideByZero : public GeometryError {
 public:
  using GeometryError::GeometryError;
};

// Extreme coordinates of the screen edge in CR units. x_min/x_max are the
// left/right bounds, y_min/y_max the top/bottom bounds.
class ExtentBox {
 public:
  // Throws std::invalid_argument unless x_min <= x_max and y_min <= y_max.
  ExtentBox(double x_min, double x_max, double y_min, double y_max);

  double x_min() const { return x_min_; }
  double x_max() const { return x_max_; }
  double y_min() const { return y_min_; }
  double y_max() const { return y_max_; }
  double width() const { return x_max_ - x_min_; }
  double height() const { return y_max_ - y_min_; }
  bool degenerate() const { return width() < kGeomEpsilon || height() < kGeomEpsilon; }

  friend bool operator==(const ExtentBox&, const ExtentBox&) = default;

 private:
  double x_min_;
  double x_max_;
  double y_min_;
  double y_max_;
};

enum class Confidence { TwoColor, SingleColorFallback };

const char* to_string(Confidence c);

// Server-relative (SR) aim point: (0,0) top-left of the screen, (1,1)
// bottom-right; values outside [0,1] mean the camera points off screen.
struct AimResult {
  double x_sr = 0;
  double y_sr = 0;
  bool on_screen = false;
  Confidence confidence = Confidence::TwoColor;

  static AimResult make(double x_sr, double y_sr, Confidence confidence);
};

// Four CR corners in order top-left, top-right, bottom-right, bottom-left.
// Must form a strictly convex quadrilateral with that winding.
class Quad {
 public:
  explicit Quad(const std::array<NormPoint, 4>& corners);

  const std::array<NormPoint, 4>& corners() const { return corners_; }
  const NormPoint& operator[](std::size_t i) const { return corners_[i]; }

 private:
  std::array<NormPoint, 4> corners_;
};

using Mat3 = std::array<std::array<double, 3>, 3>;

// Projective 3x3 map, normalized so m[2][2] == 1.
class Homography {
 public:
  // Throws SingularConfiguration if m is not invertible or m[2][2] ~ 0.
  explicit Homography(const Mat3& m);

  const Mat3& matrix() const { return m_; }
  double determinant() const;
  Homography inverse() const;
  // Throws PerspectiveDivideByZero when the homogeneous w vanishes.
  NormPoint map(const NormPoint& p) const;

 private:
  Mat3 m_;
};

// Signed form of the two-ratio aim transform:
//   x_sr = (0.5 - x_min) / (x_max - x_min), same for y.
// Inside the box this equals |0.5-x_min| / (|0.5-x_min| + |0.5-x_max|).
AimResult aim_from_extents(const ExtentBox& box);

// Per bound, keep the value closer to the screen interior.
ExtentBox reconcile_extents(const ExtentBox& a, const ExtentBox& b);

// True iff |width/height - expected_ratio| <= tol * expected_ratio.
bool validate_aspect(const ExtentBox& box, double expected_ratio, double tol);

// Maps the unit square (0,0),(1,0),(1,1),(0,1) onto q's corners.
Homography estimate_homography(const Quad& q);

// Keystone-corrected aim: AIM_CENTER pulled back through the quad's homography.
AimResult aim_from_quad(const Quad& q);

}  // namespace screenaim
