#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "screenaim/frame.hpp"
#include "screenaim/geometry.hpp"

namespace screenaim {

inline constexpr double kDefaultColorTolerance = 60.0;
// Largest possible Euclidean distance in RGB-8 space is sqrt(3)*255 ~ 441.7.
inline constexpr double kMaxColorTolerance = 442.0;

struct ColorTarget {
  Rgb reference;
  double tolerance = kDefaultColorTolerance;

  // Throws std::invalid_argument when tolerance is outside [0, 442).
  void validate() const;
};

// Inclusive pixel rectangle.
struct PixelRect {
  int left = 0;
  int top = 0;
  int right = 0;
  int bottom = 0;

  std::int64_t pixel_count() const {
    return static_cast<std::int64_t>(right - left + 1) * (bottom - top + 1);
  }
  friend bool operator==(const PixelRect&, const PixelRect&) = default;
};

struct Blob {
  std::size_t color_index = 0;
  PixelRect bbox;
  std::int64_t area = 0;

  friend bool operator==(const Blob&, const Blob&) = default;
};

struct DetectionConfig {
  std::vector<ColorTarget> targets{{kMagenta, kDefaultColorTolerance},
                                   {kCyan, kDefaultColorTolerance}};
  // Unset means ceil(width*height / 4096) for the frame being analysed.
  std::optional<std::int64_t> min_area;

  std::int64_t effective_min_area(int width, int height) const;
  void validate() const;

  // Keys: color.N.rgb, color.N.tol, min_area.
  static DetectionConfig load(const std::filesystem::path& path);
};

class NoScreenDetected : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct AimOptions {
  // Screen width/height in physical pixels; enables the aspect sanity check.
  std::optional<double> expected_ratio;
  double aspect_tolerance = 0.05;
  // Use only target 0, ignoring the second color.
  bool single_color = false;
};

bool classify_pixel(Rgb p, const ColorTarget& t);

// 4-connected components per target, filtered by min_area, sorted by
// (color_index, top, left, bottom, right, area).
std::vector<Blob> detect_blobs(const Frame& f, const DetectionConfig& cfg);

// Half-open normalization: x_min = left/width, x_max = (right+1)/width.
std::optional<ExtentBox> extents_of(std::span<const Blob> blobs, std::size_t color_index,
                                    int frame_width, int frame_height);

AimResult detect_aim(const Frame& f, const DetectionConfig& cfg, const AimOptions& options = {});

}  // namespace screenaim
