#include "screenaim/kv_config.hpp"

#include <cctype>
#include <charconv>
#include <fstream>
#include <sstream>

namespace screenaim {

std::string trim(std::string_view s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = s.find(sep, start);
    out.push_back(trim(s.substr(start, pos == std::string_view::npos ? pos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

KvFile KvFile::parse(std::istream& in, std::string source_name) {
  KvFile file;
  file.source_ = std::move(source_name);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    const std::size_t eq = t.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(file.source_ + ":" + std::to_string(line_no) + ": expected key=value");
    }
    KvEntry entry{trim(std::string_view(t).substr(0, eq)), trim(std::string_view(t).substr(eq + 1)),
                  line_no};
    if (entry.key.empty()) {
      throw ConfigError(file.source_ + ":" + std::to_string(line_no) + ": empty key");
    }
    file.entries_.push_back(std::move(entry));
  }
  return file;
}

KvFile KvFile::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path.string());
  return parse(in, path.string());
}

void KvFile::fail(const KvEntry& entry, std::string_view message) const {
  throw ConfigError(source_ + ":" + std::to_string(entry.line) + ": " + entry.key + ": " +
                    std::string(message));
}

namespace {

double to_double(std::string_view text, const KvEntry& entry, const KvFile& file) {
  double v = 0;
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc{} || ptr != end || text.empty()) {
    file.fail(entry, "expected a number, got '" + std::string(text) + "'");
  }
  return v;
}

}  // namespace

double parse_double(const KvEntry& entry, const KvFile& file) {
  return to_double(entry.value, entry, file);
}

std::int64_t parse_int(const KvEntry& entry, const KvFile& file) {
  std::int64_t v = 0;
  const auto* end = entry.value.data() + entry.value.size();
  const auto [ptr, ec] = std::from_chars(entry.value.data(), end, v);
  if (ec != std::errc{} || ptr != end || entry.value.empty()) {
    file.fail(entry, "expected an integer, got '" + entry.value + "'");
  }
  return v;
}

bool parse_bool(const KvEntry& entry, const KvFile& file) {
  if (entry.value == "1" || entry.value == "true" || entry.value == "yes") return true;
  if (entry.value == "0" || entry.value == "false" || entry.value == "no") return false;
  file.fail(entry, "expected a boolean, got '" + entry.value + "'");
}

std::vector<double> parse_doubles(const KvEntry& entry, const KvFile& file, std::size_t count) {
  const auto parts = split(entry.value, ',');
  if (parts.size() != count) {
    file.fail(entry, "expected " + std::to_string(count) + " comma-separated values");
  }
  std::vector<double> out;
  out.reserve(count);
  for (const auto& p : parts) out.push_back(to_double(p, entry, file));
  return out;
}

Rgb parse_rgb(const KvEntry& entry, const KvFile& file) {
  const auto v = parse_doubles(entry, file, 3);
  std::uint8_t c[3];
  for (int i = 0; i < 3; ++i) {
    if (v[i] < 0 || v[i] > 255 || v[i] != static_cast<int>(v[i])) {
      file.fail(entry, "color channels must be integers in [0,255]");
    }
    c[i] = static_cast<std::uint8_t>(v[i]);
  }
  return {c[0], c[1], c[2]};
}

}  // namespace screenaim
