#include "screenaim/detection.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <string>
#include <tuple>

#include "screenaim/kv_config.hpp"

namespace screenaim {

void ColorTarget::validate() const {
  if (!(tolerance >= 0) || !(tolerance < kMaxColorTolerance)) {
    throw std::invalid_argument("color tolerance must be in [0, 442)");
  }
}

std::int64_t DetectionConfig::effective_min_area(int width, int height) const {
  if (min_area) return *min_area;
  const std::int64_t pixels = static_cast<std::int64_t>(width) * height;
  return std::max<std::int64_t>(1, (pixels + 4095) / 4096);
}

void DetectionConfig::validate() const {
  if (targets.empty()) throw std::invalid_argument("detection needs at least one color target");
  if (targets.size() > 254) throw std::invalid_argument("at most 254 color targets");
  for (const auto& t : targets) t.validate();
  if (min_area && *min_area < 1) throw std::invalid_argument("min_area must be >= 1");
}

DetectionConfig DetectionConfig::load(const std::filesystem::path& path) {
  const KvFile file = KvFile::load(path);
  std::map<std::size_t, ColorTarget> targets;
  DetectionConfig cfg;
  for (const auto& e : file.entries()) {
    if (e.key == "min_area") {
      const auto v = parse_int(e, file);
      if (v < 1) file.fail(e, "must be >= 1");
      cfg.min_area = v;
      continue;
    }
    const auto parts = split(e.key, '.');
    if (parts.size() == 3 && parts[0] == "color" && (parts[2] == "rgb" || parts[2] == "tol")) {
      std::size_t idx = 0;
      try {
        std::size_t used = 0;
        idx = std::stoul(parts[1], &used);
        if (used != parts[1].size()) throw std::invalid_argument(parts[1]);
      } catch (const std::exception&) {
        file.fail(e, "color index must be a non-negative integer");
      }
      auto [it, inserted] = targets.try_emplace(idx, ColorTarget{{}, kDefaultColorTolerance});
      if (parts[2] == "rgb") {
        it->second.reference = parse_rgb(e, file);
      } else {
        it->second.tolerance = parse_double(e, file);
        try {
          it->second.validate();
        } catch (const std::invalid_argument& ex) {
          file.fail(e, ex.what());
        }
      }
      continue;
    }
    file.fail(e, "unknown key");
  }
  if (!targets.empty()) {
    cfg.targets.clear();
    std::size_t expect = 0;
    for (const auto& [idx, t] : targets) {
      if (idx != expect) {
        throw ConfigError(file.source() + ": color indices must be contiguous from 0");
      }
      cfg.targets.push_back(t);
      ++expect;
    }
  }
  cfg.validate();
  return cfg;
}

bool classify_pixel(Rgb p, const ColorTarget& t) {
  const int dr = int(p.r) - int(t.reference.r);
  const int dg = int(p.g) - int(t.reference.g);
  const int db = int(p.b) - int(t.reference.b);
  const double d2 = double(dr * dr + dg * dg + db * db);
  return d2 <= t.tolerance * t.tolerance;
}

namespace {

constexpr std::uint8_t kNoClass = 0xFF;

struct Accum {
  std::size_t color = 0;
  int left = std::numeric_limits<int>::max();
  int top = std::numeric_limits<int>::max();
  int right = -1;
  int bottom = -1;
  std::int64_t area = 0;
};

std::int32_t find_root(std::vector<std::int32_t>& parent, std::int32_t x) {
  while (parent[x] != x) {
    parent[x] = parent[parent[x]];
    x = parent[x];
  }
  return x;
}

void unite(std::vector<std::int32_t>& parent, std::int32_t a, std::int32_t b) {
  a = find_root(parent, a);
  b = find_root(parent, b);
  if (a == b) return;
  // Keep the smaller label as root so the structure is order-independent.
  if (a < b) {
    parent[b] = a;
  } else {
    parent[a] = b;
  }
}

}  // namespace

std::vector<Blob> detect_blobs(const Frame& f, const DetectionConfig& cfg) {
  cfg.validate();
  const int w = f.width();
  const int h = f.height();
  const std::size_t n = static_cast<std::size_t>(w) * static_cast<std::size_t>(h);

  // Squared integer thresholds; a pixel belongs to the first matching target.
  struct IntTarget {
    int r, g, b;
    double tol2;
  };
  std::vector<IntTarget> targets;
  targets.reserve(cfg.targets.size());
  for (const auto& t : cfg.targets) {
    targets.push_back({t.reference.r, t.reference.g, t.reference.b, t.tolerance * t.tolerance});
  }

  std::vector<std::uint8_t> cls(n, kNoClass);
  const auto px = f.data();
  for (std::size_t i = 0; i < n; ++i) {
    const int r = px[3 * i];
    const int g = px[3 * i + 1];
    const int b = px[3 * i + 2];
    for (std::size_t k = 0; k < targets.size(); ++k) {
      const int dr = r - targets[k].r;
      const int dg = g - targets[k].g;
      const int db = b - targets[k].b;
      if (double(dr * dr + dg * dg + db * db) <= targets[k].tol2) {
        cls[i] = static_cast<std::uint8_t>(k);
        break;
      }
    }
  }

  // First pass: provisional labels with union-find over left/up neighbours.
  std::vector<std::int32_t> label(n, -1);
  std::vector<std::int32_t> parent;
  parent.reserve(1024);
  for (int y = 0; y < h; ++y) {
    const std::size_t row = static_cast<std::size_t>(y) * w;
    for (int x = 0; x < w; ++x) {
      const std::size_t i = row + x;
      const std::uint8_t c = cls[i];
      if (c == kNoClass) continue;
      const bool join_left = x > 0 && cls[i - 1] == c;
      const bool join_up = y > 0 && cls[i - w] == c;
      if (join_left && join_up) {
        label[i] = label[i - 1];
        if (label[i - w] != label[i - 1]) unite(parent, label[i - 1], label[i - w]);
      } else if (join_left) {
        label[i] = label[i - 1];
      } else if (join_up) {
        label[i] = label[i - w];
      } else {
        label[i] = static_cast<std::int32_t>(parent.size());
        parent.push_back(label[i]);
      }
    }
  }

  // Second pass: accumulate per-root statistics.
  std::vector<std::int32_t> slot(parent.size(), -1);
  std::vector<Accum> acc;
  for (int y = 0; y < h; ++y) {
    const std::size_t row = static_cast<std::size_t>(y) * w;
    for (int x = 0; x < w; ++x) {
      const std::size_t i = row + x;
      if (label[i] < 0) continue;
      const std::int32_t root = find_root(parent, label[i]);
      if (slot[root] < 0) {
        slot[root] = static_cast<std::int32_t>(acc.size());
        acc.push_back({cls[i]});
      }
      Accum& a = acc[slot[root]];
      a.left = std::min(a.left, x);
      a.right = std::max(a.right, x);
      a.top = std::min(a.top, y);
      a.bottom = std::max(a.bottom, y);
      ++a.area;
    }
  }

  const std::int64_t min_area = cfg.effective_min_area(w, h);
  std::vector<Blob> blobs;
  for (const auto& a : acc) {
    if (a.area < min_area) continue;
    blobs.push_back({a.color, {a.left, a.top, a.right, a.bottom}, a.area});
  }
  std::sort(blobs.begin(), blobs.end(), [](const Blob& l, const Blob& r) {
    return std::tie(l.color_index, l.bbox.top, l.bbox.left, l.bbox.bottom, l.bbox.right, l.area) <
           std::tie(r.color_index, r.bbox.top, r.bbox.left, r.bbox.bottom, r.bbox.right, r.area);
  });
  return blobs;
}

std::optional<ExtentBox> extents_of(std::span<const Blob> blobs, std::size_t color_index,
                                    int frame_width, int frame_height) {
  int left = std::numeric_limits<int>::max();
  int top = std::numeric_limits<int>::max();
  int right = std::numeric_limits<int>::min();
  int bottom = std::numeric_limits<int>::min();
  bool any = false;
  for (const auto& b : blobs) {
    if (b.color_index != color_index) continue;
    any = true;
    left = std::min(left, b.bbox.left);
    top = std::min(top, b.bbox.top);
    right = std::max(right, b.bbox.right);
    bottom = std::max(bottom, b.bbox.bottom);
  }
  if (!any) return std::nullopt;
  const double w = frame_width;
  const double h = frame_height;
  return ExtentBox(left / w, (right + 1) / w, top / h, (bottom + 1) / h);
}

AimResult detect_aim(const Frame& f, const DetectionConfig& cfg, const AimOptions& options) {
  if (!options.single_color && cfg.targets.size() < 2) {
    throw std::invalid_argument("two-color detection needs at least two targets");
  }
  const auto blobs = detect_blobs(f, cfg);
  const auto first = extents_of(blobs, 0, f.width(), f.height());
  const auto second =
      options.single_color ? std::nullopt : extents_of(blobs, 1, f.width(), f.height());

  std::optional<ExtentBox> box;
  Confidence confidence = Confidence::SingleColorFallback;
  if (first && second) {
    try {
      box = reconcile_extents(*first, *second);
    } catch (const ReconcileConflict&) {
      throw NoScreenDetected("color extents conflict");
    }
    confidence = Confidence::TwoColor;
  } else if (first) {
    box = first;
  } else if (second) {
    box = second;
  } else {
    throw NoScreenDetected("no edge color found");
  }
  if (box->degenerate()) throw NoScreenDetected("detected screen extents are degenerate");

  if (options.expected_ratio) {
    // The box is in CR units, which are anisotropic for non-square frames.
    const double cr_ratio = *options.expected_ratio * f.height() / f.width();
    if (!validate_aspect(*box, cr_ratio, options.aspect_tolerance)) {
      confidence = Confidence::SingleColorFallback;
    }
  }
  AimResult aim = aim_from_extents(*box);
  aim.confidence = confidence;
  return aim;
}

}  // namespace screenaim
