#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <stdexcept>
#include <vector>

namespace screenaim {

struct Rgb {
  std::uint8_t r = 0;
  std::uint8_t g = 0;
  std::uint8_t b = 0;

  friend bool operator==(const Rgb&, const Rgb&) = default;
};

inline constexpr Rgb kMagenta{255, 0, 255};
inline constexpr Rgb kCyan{0, 255, 255};

class FrameError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Row-major 8-bit RGB image.
class Frame {
 public:
  Frame(int width, int height, Rgb fill = {});
  Frame(int width, int height, std::vector<std::uint8_t> pixels);

  int width() const { return width_; }
  int height() const { return height_; }

  Rgb pixel(int x, int y) const {
    const std::size_t i = index(x, y);
    return {pixels_[i], pixels_[i + 1], pixels_[i + 2]};
  }
  void set_pixel(int x, int y, Rgb c) {
    const std::size_t i = index(x, y);
    pixels_[i] = c.r;
    pixels_[i + 1] = c.g;
    pixels_[i + 2] = c.b;
  }

  std::span<const std::uint8_t> data() const { return pixels_; }
  std::span<std::uint8_t> data() { return pixels_; }

  friend bool operator==(const Frame&, const Frame&) = default;

 private:
  std::size_t index(int x, int y) const {
    return 3 * (static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) +
                static_cast<std::size_t>(x));
  }

  int width_;
  int height_;
  std::vector<std::uint8_t> pixels_;
};

// Binary PPM (P6, maxval 255).
Frame read_ppm(std::istream& in);
Frame read_ppm(const std::filesystem::path& path);
void write_ppm(std::ostream& out, const Frame& frame);
void write_ppm(const std::filesystem::path& path, const Frame& frame);

}  // namespace screenaim
