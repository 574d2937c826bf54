#pragma once

#include <cstdint>
#include <filesystem>
#include <istream>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "screenaim/frame.hpp"

namespace screenaim {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct KvEntry {
  std::string key;
  std::string value;
  int line = 0;
};

// Plain-text `key=value` file. Blank lines and lines starting with '#' are
// skipped; keys and values are trimmed. Keys may repeat (e.g. distractor).
class KvFile {
 public:
  static KvFile parse(std::istream& in, std::string source_name = "<input>");
  static KvFile load(const std::filesystem::path& path);

  const std::vector<KvEntry>& entries() const { return entries_; }
  const std::string& source() const { return source_; }

  [[noreturn]] void fail(const KvEntry& entry, std::string_view message) const;

 private:
  std::string source_;
  std::vector<KvEntry> entries_;
};

double parse_double(const KvEntry& entry, const KvFile& file);
std::int64_t parse_int(const KvEntry& entry, const KvFile& file);
bool parse_bool(const KvEntry& entry, const KvFile& file);
Rgb parse_rgb(const KvEntry& entry, const KvFile& file);
// Comma-separated list of exactly `count` reals.
std::vector<double> parse_doubles(const KvEntry& entry, const KvFile& file, std::size_t count);

std::string trim(std::string_view s);
std::vector<std::string> split(std::string_view s, char sep);

}  // namespace screenaim
