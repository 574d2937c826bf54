#include "screenaim/camera_sim.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <limits>
#include <numbers>
#include <ostream>
#include <random>

#include "screenaim/kv_config.hpp"

namespace screenaim {

namespace {

using Mat = std::array<std::array<double, 3>, 3>;

Mat mul(const Mat& a, const Mat& b) {
  Mat r{};
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      r[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j] + a[i][2] * b[2][j];
    }
  }
  return r;
}

Vec3 apply(const Mat& m, const Vec3& v) {
  return {m[0][0] * v.x + m[0][1] * v.y + m[0][2] * v.z,
          m[1][0] * v.x + m[1][1] * v.y + m[1][2] * v.z,
          m[2][0] * v.x + m[2][1] * v.y + m[2][2] * v.z};
}

Vec3 apply_transposed(const Mat& m, const Vec3& v) {
  return {m[0][0] * v.x + m[1][0] * v.y + m[2][0] * v.z,
          m[0][1] * v.x + m[1][1] * v.y + m[2][1] * v.z,
          m[0][2] * v.x + m[1][2] * v.y + m[2][2] * v.z};
}

Mat rotation(double yaw, double pitch, double roll) {
  const double cy = std::cos(yaw), sy = std::sin(yaw);
  const double cp = std::cos(pitch), sp = std::sin(pitch);
  const double cr = std::cos(roll), sr = std::sin(roll);
  const Mat ry{{{cy, 0, sy}, {0, 1, 0}, {-sy, 0, cy}}};
  const Mat rx{{{1, 0, 0}, {0, cp, -sp}, {0, sp, cp}}};
  const Mat rz{{{cr, -sr, 0}, {sr, cr, 0}, {0, 0, 1}}};
  return mul(ry, mul(rx, rz));
}

constexpr double kDeg = std::numbers::pi / 180.0;

// Tangent-plane extents of the image at unit depth.
struct Lens {
  double span_x;
  double span_y;
};

Lens lens_of(const CameraPose& cam) {
  const double span_x = 2.0 * std::tan(cam.fov_h / 2.0);
  return {span_x, span_x * cam.res_h / cam.res_w};
}

Rgb screen_color(const ScreenModel& s, double X, double Y, std::mt19937_64& rng) {
  const double b = s.border_frac;
  const bool horizontal_band = Y < b || Y > 1.0 - b;
  const bool vertical_band = X < b || X > s.aspect - b;
  if (horizontal_band || vertical_band) {
    const double along = horizontal_band ? X / s.aspect : Y;
    // Segments are counted from both ends so that every corner gets color A.
    const double from_end = std::min(along, 1.0 - along);
    const auto k = static_cast<long>(std::floor(from_end / s.segment));
    return (k % 2 == 0) ? s.color_a : s.color_b;
  }
  switch (s.interior.kind) {
    case Interior::Kind::Solid:
      return s.interior.solid;
    case Interior::Kind::Random: {
      const std::uint64_t v = rng();
      return {static_cast<std::uint8_t>(v), static_cast<std::uint8_t>(v >> 8),
              static_cast<std::uint8_t>(v >> 16)};
    }
    case Interior::Kind::Image: {
      const Frame& img = *s.interior.image;
      const int ix = std::clamp(static_cast<int>(X / s.aspect * img.width()), 0, img.width() - 1);
      const int iy = std::clamp(static_cast<int>(Y * img.height()), 0, img.height() - 1);
      return img.pixel(ix, iy);
    }
  }
  return s.interior.solid;
}

void box_blur(Frame& f, int radius) {
  if (radius <= 0) return;
  const int w = f.width();
  const int h = f.height();
  std::vector<std::uint8_t> tmp(f.data().begin(), f.data().end());
  auto src = f.data();
  const int window = 2 * radius + 1;
  // Horizontal pass into tmp, vertical pass back into the frame.
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < 3; ++c) {
        int sum = 0;
        for (int k = -radius; k <= radius; ++k) {
          const int xx = std::clamp(x + k, 0, w - 1);
          sum += src[3 * (static_cast<std::size_t>(y) * w + xx) + c];
        }
        tmp[3 * (static_cast<std::size_t>(y) * w + x) + c] =
            static_cast<std::uint8_t>((sum + window / 2) / window);
      }
    }
  }
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < 3; ++c) {
        int sum = 0;
        for (int k = -radius; k <= radius; ++k) {
          const int yy = std::clamp(y + k, 0, h - 1);
          sum += tmp[3 * (static_cast<std::size_t>(yy) * w + x) + c];
        }
        src[3 * (static_cast<std::size_t>(y) * w + x) + c] =
            static_cast<std::uint8_t>((sum + window / 2) / window);
      }
    }
  }
}

void add_noise(Frame& f, double sigma, std::uint64_t seed) {
  if (sigma <= 0) return;
  std::mt19937_64 rng(seed ^ 0x9E3779B97F4A7C15ULL);
  std::normal_distribution<double> noise(0.0, sigma);
  for (auto& v : f.data()) {
    const double n = std::round(v + noise(rng));
    v = static_cast<std::uint8_t>(std::clamp(n, 0.0, 255.0));
  }
}

}  // namespace

double ScreenModel::diagonal() const { return std::sqrt(aspect * aspect + 1.0); }

void ScreenModel::validate() const {
  if (!(aspect > 0)) throw std::invalid_argument("screen aspect must be positive");
  if (!(border_frac > 0 && border_frac < 0.5)) {
    throw std::invalid_argument("border_frac must be in (0, 0.5)");
  }
  if (!(segment > 0 && segment <= 1)) throw std::invalid_argument("segment must be in (0, 1]");
  if (interior.kind == Interior::Kind::Image && !interior.image) {
    throw std::invalid_argument("image interior needs an image");
  }
}

void CameraPose::validate() const {
  if (!(fov_h > 0 && fov_h < std::numbers::pi)) {
    throw std::invalid_argument("fov_h must be in (0, pi)");
  }
  if (res_w < 16 || res_h < 16) throw std::invalid_argument("resolution must be at least 16x16");
}

void SceneSpec::validate() const {
  screen.validate();
  camera.validate();
  if (noise_sigma < 0) throw std::invalid_argument("noise_sigma must be non-negative");
  if (blur_radius < 0) throw std::invalid_argument("blur_radius must be non-negative");
  for (const auto& d : distractors) {
    if (!(d.x0 < d.x1 && d.y0 < d.y1)) {
      throw std::invalid_argument("distractor needs x0 < x1 and y0 < y1");
    }
    const bool coplanar = std::abs(d.z) < kGeomEpsilon;
    const bool overlaps = d.x0 < screen.aspect && d.x1 > 0 && d.y0 < 1 && d.y1 > 0;
    if (coplanar && overlaps) {
      throw std::invalid_argument("distractor intersects the screen rectangle");
    }
  }
}

GroundTruth ground_truth(const SceneSpec& scene) {
  scene.validate();
  const CameraPose& cam = scene.camera;
  const Mat r = rotation(cam.yaw, cam.pitch, cam.roll);
  const Vec3 forward = apply(r, {0, 0, 1});
  if (!(cam.position.z < 0) || !(forward.z > 0)) {
    throw CameraBehindScreen("optical axis does not reach the screen plane from the front");
  }

  GroundTruth truth;
  const double t = -cam.position.z / forward.z;
  const double hit_x = cam.position.x + t * forward.x;
  const double hit_y = cam.position.y + t * forward.y;
  truth.aim_sr = {hit_x / scene.screen.aspect, hit_y};
  truth.distance = t;
  truth.view_angle = std::acos(std::clamp(forward.z, -1.0, 1.0));

  const Lens lens = lens_of(cam);
  const double a = scene.screen.aspect;
  const std::array<Vec3, 4> corners{{{0, 0, 0}, {a, 0, 0}, {a, 1, 0}, {0, 1, 0}}};
  truth.visible = true;
  for (std::size_t i = 0; i < 4; ++i) {
    const Vec3 rel{corners[i].x - cam.position.x, corners[i].y - cam.position.y,
                   corners[i].z - cam.position.z};
    const Vec3 c = apply_transposed(r, rel);
    if (c.z <= 0) {
      const double nan = std::numeric_limits<double>::quiet_NaN();
      truth.corners_cr[i] = {nan, nan};
      truth.visible = false;
      continue;
    }
    truth.corners_cr[i] = {0.5 + c.x / (c.z * lens.span_x), 0.5 + c.y / (c.z * lens.span_y)};
    if (!truth.corners_cr[i].in_frame()) truth.visible = false;
  }
  return truth;
}

Rendered render(const SceneSpec& scene) {
  GroundTruth truth = ground_truth(scene);
  const CameraPose& cam = scene.camera;
  const ScreenModel& screen = scene.screen;
  const Mat r = rotation(cam.yaw, cam.pitch, cam.roll);
  const Lens lens = lens_of(cam);
  const Vec3 p = cam.position;

  Frame frame(cam.res_w, cam.res_h, scene.background);
  std::mt19937_64 interior_rng(scene.seed);
  for (int j = 0; j < cam.res_h; ++j) {
    const double v = (j + 0.5) / cam.res_h - 0.5;
    for (int i = 0; i < cam.res_w; ++i) {
      const double u = (i + 0.5) / cam.res_w - 0.5;
      const Vec3 d = apply(r, {u * lens.span_x, v * lens.span_y, 1.0});
      if (d.z == 0) continue;

      double best_t = std::numeric_limits<double>::infinity();
      Rgb color = scene.background;
      bool hit_screen = false;
      double sx = 0;
      double sy = 0;

      const double ts = -p.z / d.z;
      if (ts > 0) {
        const double X = p.x + ts * d.x;
        const double Y = p.y + ts * d.y;
        if (X >= 0 && X <= screen.aspect && Y >= 0 && Y <= 1) {
          best_t = ts;
          hit_screen = true;
          sx = X;
          sy = Y;
        }
      }
      for (const auto& dis : scene.distractors) {
        const double td = (dis.z - p.z) / d.z;
        if (!(td > 0) || td >= best_t) continue;
        const double X = p.x + td * d.x;
        const double Y = p.y + td * d.y;
        if (X >= dis.x0 && X <= dis.x1 && Y >= dis.y0 && Y <= dis.y1) {
          best_t = td;
          hit_screen = false;
          color = dis.color;
        }
      }
      if (hit_screen) color = screen_color(screen, sx, sy, interior_rng);
      frame.set_pixel(i, j, color);
    }
  }
  box_blur(frame, scene.blur_radius);
  add_noise(frame, scene.noise_sigma, scene.seed);
  return {std::move(frame), truth};
}

CameraPose look_at(const ScreenModel& screen, NormPoint target_sr, double distance, double yaw,
                   double pitch, double roll) {
  CameraPose pose;
  pose.yaw = yaw;
  pose.pitch = pitch;
  pose.roll = roll;
  const Vec3 forward = apply(rotation(yaw, pitch, roll), {0, 0, 1});
  const Vec3 target{target_sr.x * screen.aspect, target_sr.y, 0};
  pose.position = {target.x - distance * forward.x, target.y - distance * forward.y,
                   target.z - distance * forward.z};
  return pose;
}

SceneSpec parse_scene(std::istream& in, const std::string& source_name,
                      const std::filesystem::path& base_dir) {
  const KvFile file = KvFile::parse(in, source_name);
  SceneSpec scene;
  std::optional<Vec3> position;
  std::optional<NormPoint> target;
  std::optional<double> distance;
  std::optional<double> distance_diag;
  const KvEntry* placement = nullptr;

  for (const auto& e : file.entries()) {
    const std::string& k = e.key;
    if (k == "name") {
      scene.name = e.value;
    } else if (k == "aspect") {
      scene.screen.aspect = parse_double(e, file);
    } else if (k == "border_frac") {
      scene.screen.border_frac = parse_double(e, file);
    } else if (k == "segment") {
      scene.screen.segment = parse_double(e, file);
    } else if (k == "color_a") {
      scene.screen.color_a = parse_rgb(e, file);
    } else if (k == "color_b") {
      scene.screen.color_b = parse_rgb(e, file);
    } else if (k == "interior") {
      if (e.value == "random") {
        scene.screen.interior.kind = Interior::Kind::Random;
      } else if (e.value.rfind("solid:", 0) == 0) {
        KvEntry sub{e.key, e.value.substr(6), e.line};
        scene.screen.interior.kind = Interior::Kind::Solid;
        scene.screen.interior.solid = parse_rgb(sub, file);
      } else if (e.value.rfind("image:", 0) == 0) {
        std::filesystem::path img = e.value.substr(6);
        if (img.is_relative()) img = base_dir / img;
        try {
          scene.screen.interior.image = std::make_shared<const Frame>(read_ppm(img));
        } catch (const FrameError& ex) {
          file.fail(e, ex.what());
        }
        scene.screen.interior.kind = Interior::Kind::Image;
      } else {
        file.fail(e, "expected random, solid:r,g,b or image:path");
      }
    } else if (k == "background") {
      scene.background = parse_rgb(e, file);
    } else if (k == "seed") {
      const auto v = parse_int(e, file);
      if (v < 0) file.fail(e, "seed must be non-negative");
      scene.seed = static_cast<std::uint64_t>(v);
    } else if (k == "noise_sigma") {
      scene.noise_sigma = parse_double(e, file);
    } else if (k == "blur_radius") {
      scene.blur_radius = static_cast<int>(parse_int(e, file));
    } else if (k == "position") {
      const auto v = parse_doubles(e, file, 3);
      position = Vec3{v[0], v[1], v[2]};
      placement = &e;
    } else if (k == "target_sr") {
      const auto v = parse_doubles(e, file, 2);
      target = NormPoint{v[0], v[1]};
      placement = &e;
    } else if (k == "distance") {
      distance = parse_double(e, file);
    } else if (k == "distance_diag") {
      distance_diag = parse_double(e, file);
    } else if (k == "yaw_deg") {
      scene.camera.yaw = parse_double(e, file) * kDeg;
    } else if (k == "pitch_deg") {
      scene.camera.pitch = parse_double(e, file) * kDeg;
    } else if (k == "roll_deg") {
      scene.camera.roll = parse_double(e, file) * kDeg;
    } else if (k == "fov_h_deg") {
      scene.camera.fov_h = parse_double(e, file) * kDeg;
    } else if (k == "res") {
      const auto parts = split(e.value, 'x');
      if (parts.size() != 2) file.fail(e, "expected WIDTHxHEIGHT");
      KvEntry w{e.key, parts[0], e.line};
      KvEntry h{e.key, parts[1], e.line};
      scene.camera.res_w = static_cast<int>(parse_int(w, file));
      scene.camera.res_h = static_cast<int>(parse_int(h, file));
    } else if (k == "distractor") {
      const auto v = parse_doubles(e, file, 8);
      Distractor d{v[0], v[1], v[2], v[3], v[4], {}};
      for (int c = 5; c < 8; ++c) {
        if (v[c] < 0 || v[c] > 255 || v[c] != std::floor(v[c])) {
          file.fail(e, "distractor color channels must be integers in [0,255]");
        }
      }
      d.color = {static_cast<std::uint8_t>(v[5]), static_cast<std::uint8_t>(v[6]),
                 static_cast<std::uint8_t>(v[7])};
      scene.distractors.push_back(d);
    } else {
      file.fail(e, "unknown key");
    }
  }

  if (position && target) {
    throw ConfigError(source_name + ": give either position or target_sr, not both");
  }
  if (position) {
    scene.camera.position = *position;
  } else if (target) {
    if (distance.has_value() == distance_diag.has_value()) {
      file.fail(*placement, "target_sr needs exactly one of distance or distance_diag");
    }
    const double d = distance ? *distance : *distance_diag * scene.screen.diagonal();
    const CameraPose aimed = look_at(scene.screen, *target, d, scene.camera.yaw,
                                     scene.camera.pitch, scene.camera.roll);
    scene.camera.position = aimed.position;
  } else {
    throw ConfigError(source_name + ": scene needs position or target_sr");
  }
  try {
    scene.validate();
  } catch (const std::invalid_argument& ex) {
    throw ConfigError(source_name + ": " + ex.what());
  }
  return scene;
}

SceneSpec load_scene(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path.string());
  SceneSpec scene = parse_scene(in, path.string(), path.parent_path());
  if (scene.name == "scene") scene.name = path.stem().string();
  return scene;
}

std::vector<SceneSpec> load_scene_list(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path.string());
  std::vector<SceneSpec> scenes;
  std::string line;
  while (std::getline(in, line)) {
    const std::string t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    std::filesystem::path p = t;
    if (p.is_relative()) p = path.parent_path() / p;
    scenes.push_back(load_scene(p));
  }
  return scenes;
}

std::vector<SweepRow> sweep_report(const std::vector<SceneSpec>& scenes,
                                   const DetectionConfig& cfg) {
  std::vector<SweepRow> rows;
  rows.reserve(scenes.size());
  for (const auto& scene : scenes) {
    SweepRow row;
    row.scene = scene.name;
    try {
      const Rendered r = render(scene);
      row.dist_diag = r.truth.distance / scene.screen.diagonal();
      row.angle_deg = r.truth.view_angle / kDeg;
      try {
        const AimResult aim = detect_aim(r.frame, cfg);
        row.err_naive = std::max(std::abs(aim.x_sr - r.truth.aim_sr.x),
                                 std::abs(aim.y_sr - r.truth.aim_sr.y));
      } catch (const NoScreenDetected&) {
        row.naive_failure = "NoScreenDetected";
      }
      try {
        const AimResult aim = aim_from_quad(Quad(r.truth.corners_cr));
        row.err_homog = std::max(std::abs(aim.x_sr - r.truth.aim_sr.x),
                                 std::abs(aim.y_sr - r.truth.aim_sr.y));
      } catch (const std::invalid_argument&) {
        row.homog_failure = "InvalidQuad";
      } catch (const GeometryError&) {
        row.homog_failure = "SingularConfiguration";
      }
    } catch (const CameraBehindScreen&) {
      row.dist_diag = std::numeric_limits<double>::quiet_NaN();
      row.angle_deg = std::numeric_limits<double>::quiet_NaN();
      row.naive_failure = "CameraBehindScreen";
      row.homog_failure = "CameraBehindScreen";
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

namespace {

std::string fmt_num(double v) {
  if (std::isnan(v)) return "";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

std::string fmt_err(const std::optional<double>& v, const std::string& failure) {
  return v ? fmt_num(*v) : failure;
}

}  // namespace

void write_sweep_csv(std::ostream& out, const std::vector<SweepRow>& rows) {
  out << "scene,dist_diag,angle_deg,err_naive,err_homog\n";
  for (const auto& r : rows) {
    out << r.scene << ',' << fmt_num(r.dist_diag) << ',' << fmt_num(r.angle_deg) << ','
        << fmt_err(r.err_naive, r.naive_failure) << ',' << fmt_err(r.err_homog, r.homog_failure)
        << '\n';
  }
}

}  // namespace screenaim
