#include "screenaim/frame.hpp"

#include <cctype>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>

namespace screenaim {

Frame::Frame(int width, int height, Rgb fill) : width_(width), height_(height) {
  if (width < 1 || height < 1) {
    throw FrameError("frame dimensions must be at least 1x1");
  }
  pixels_.resize(3 * static_cast<std::size_t>(width) * static_cast<std::size_t>(height));
  for (std::size_t i = 0; i < pixels_.size(); i += 3) {
    pixels_[i] = fill.r;
    pixels_[i + 1] = fill.g;
    pixels_[i + 2] = fill.b;
  }
}

Frame::Frame(int width, int height, std::vector<std::uint8_t> pixels)
    : width_(width), height_(height), pixels_(std::move(pixels)) {
  if (width < 1 || height < 1) {
    throw FrameError("frame dimensions must be at least 1x1");
  }
  if (pixels_.size() != 3 * static_cast<std::size_t>(width) * static_cast<std::size_t>(height)) {
    throw FrameError("pixel buffer length must be 3*width*height");
  }
}

namespace {

// Reads the next header token, skipping whitespace and '#' comments.
std::string next_token(std::istream& in) {
  std::string token;
  while (true) {
    int c = in.peek();
    if (c == EOF) break;
    if (c == '#') {
      std::string ignored;
      std::getline(in, ignored);
      continue;
    }
    if (std::isspace(c)) {
      if (!token.empty()) break;
      in.get();
      continue;
    }
    token.push_back(static_cast<char>(in.get()));
  }
  return token;
}

int header_int(std::istream& in, const char* what) {
  const std::string tok = next_token(in);
  try {
    std::size_t used = 0;
    const int v = std::stoi(tok, &used);
    if (used != tok.size()) throw std::invalid_argument(tok);
    return v;
  } catch (const std::exception&) {
    throw FrameError(std::string("bad PPM header field ") + what + ": '" + tok + "'");
  }
}

}  // namespace

Frame read_ppm(std::istream& in) {
  if (next_token(in) != "P6") throw FrameError("not a binary PPM (expected P6)");
  const int w = header_int(in, "width");
  const int h = header_int(in, "height");
  const int maxval = header_int(in, "maxval");
  if (maxval != 255) throw FrameError("only maxval 255 is supported");
  if (w < 1 || h < 1) throw FrameError("PPM dimensions must be positive");
  // Exactly one whitespace byte separates the header from the raster.
  in.get();
  std::vector<std::uint8_t> pixels(3 * static_cast<std::size_t>(w) * static_cast<std::size_t>(h));
  in.read(reinterpret_cast<char*>(pixels.data()), static_cast<std::streamsize>(pixels.size()));
  if (in.gcount() != static_cast<std::streamsize>(pixels.size())) {
    throw FrameError("PPM raster truncated");
  }
  return Frame(w, h, std::move(pixels));
}

Frame read_ppm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FrameError("cannot open " + path.string());
  return read_ppm(in);
}

void write_ppm(std::ostream& out, const Frame& frame) {
  out << "P6\n" << frame.width() << ' ' << frame.height() << "\n255\n";
  const auto data = frame.data();
  out.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size()));
}

void write_ppm(const std::filesystem::path& path, const Frame& frame) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FrameError("cannot write " + path.string());
  write_ppm(out, frame);
  if (!out) throw FrameError("write failed for " + path.string());
}

}  // namespace screenaim
