#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "screenaim/detection.hpp"
#include "screenaim/frame.hpp"
#include "screenaim/geometry.hpp"

namespace screenaim {

// World frame: the screen lies in the plane z = 0 and spans
// x in [0, aspect], y in [0, 1] (y down). Length unit is the screen height.
// Cameras sit at z < 0 and look towards +z.
struct Vec3 {
  double x = 0;
  double y = 0;
  double z = 0;
};

struct Interior {
  enum class Kind { Solid, Random, Image };
  Kind kind = Kind::Solid;
  Rgb solid{40, 40, 48};
  std::shared_ptr<const Frame> image;
};

struct ScreenModel {
  double aspect = 16.0 / 9.0;
  // Band thickness as a fraction of the screen height.
  double border_frac = 0.02;
  // Length of each alternating color segment as a fraction of the edge.
  double segment = 0.125;
  Rgb color_a = kMagenta;
  Rgb color_b = kCyan;
  Interior interior;

  double diagonal() const;
  void validate() const;
};

struct CameraPose {
  Vec3 position{0, 0, -2};
  // Camera-to-world rotation is R = Ry(yaw) * Rx(pitch) * Rz(roll); with all
  // three zero the camera looks along +z with image x = world x, y = world y.
  double yaw = 0;
  double pitch = 0;
  double roll = 0;
  double fov_h = 1.2217304763960306;  // 70 degrees
  int res_w = 640;
  int res_h = 480;

  void validate() const;
};

// Axis-aligned rectangle in the plane z = const, parallel to the screen.
struct Distractor {
  double x0 = 0;
  double y0 = 0;
  double x1 = 0;
  double y1 = 0;
  double z = 0;
  Rgb color = kMagenta;
};

struct SceneSpec {
  std::string name = "scene";
  ScreenModel screen;
  CameraPose camera;
  std::vector<Distractor> distractors;
  Rgb background{90, 80, 70};
  std::uint64_t seed = 0;
  double noise_sigma = 0;
  int blur_radius = 0;

  void validate() const;
};

struct GroundTruth {
  NormPoint aim_sr;
  // Screen corners TL, TR, BR, BL projected to CR.
  std::array<NormPoint, 4> corners_cr;
  // True when the whole screen (all four corners, in front of the camera)
  // lies inside the frame.
  bool visible = false;
  // Distance from the camera to the aimed point, in screen heights.
  double distance = 0;
  // Angle between the optical axis and the screen normal, radians.
  double view_angle = 0;
};

class CameraBehindScreen : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Rendered {
  Frame frame;
  GroundTruth truth;
};

GroundTruth ground_truth(const SceneSpec& scene);
Rendered render(const SceneSpec& scene);

// Pose whose optical axis hits `target_sr` from `distance` screen heights.
CameraPose look_at(const ScreenModel& screen, NormPoint target_sr, double distance, double yaw,
                   double pitch = 0, double roll = 0);

// Scene file: key=value, see README for keys.
SceneSpec parse_scene(std::istream& in, const std::string& source_name,
                      const std::filesystem::path& base_dir = {});
SceneSpec load_scene(const std::filesystem::path& path);
// One scene path per line, relative to the list file.
std::vector<SceneSpec> load_scene_list(const std::filesystem::path& path);

struct SweepRow {
  std::string scene;
  double dist_diag = 0;
  double angle_deg = 0;
  // Max per-axis SR error; empty when the method failed.
  std::optional<double> err_naive;
  std::optional<double> err_homog;
  std::string naive_failure;
  std::string homog_failure;
};

std::vector<SweepRow> sweep_report(const std::vector<SceneSpec>& scenes,
                                   const DetectionConfig& cfg);
void write_sweep_csv(std::ostream& out, const std::vector<SweepRow>& rows);

}  // namespace screenaim
