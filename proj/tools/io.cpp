#include "io.hpp"

#include <fstream>
#include <sstream>

#include "retoksync/errors.hpp"

namespace retoksync::cli {

PayloadFormat parse_payload_format(const std::string& name) {
  if (name == "ascii") return PayloadFormat::kAscii;
  if (name == "binary") return PayloadFormat::kBinary;
  throw ConfigError("payload format must be ascii or binary, got '" + name + "'");
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, const std::string& data) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << data;
  if (!out) throw IoError("write failed for " + path.string());
}

Bits read_payload(const std::filesystem::path& path, PayloadFormat format) {
  const std::string data = read_file(path);
  if (format == PayloadFormat::kAscii) return from_ascii(data);
  std::vector<std::uint8_t> bytes(data.begin(), data.end());
  return from_bytes(bytes);
}

void write_payload(const std::filesystem::path& path, const Bits& bits, PayloadFormat format) {
  if (format == PayloadFormat::kAscii) {
    write_file(path, to_ascii(bits) + "\n");
    return;
  }
  const std::vector<std::uint8_t> bytes = to_bytes(bits);
  write_file(path, std::string(bytes.begin(), bytes.end()));
}

}  // namespace retoksync::cli
