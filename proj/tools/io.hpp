#pragma once

#include <filesystem>
#include <string>

#include "retoksync/bits.hpp"

namespace retoksync::cli {

enum class PayloadFormat { kAscii, kBinary };

PayloadFormat parse_payload_format(const std::string& name);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const std::string& data);

Bits read_payload(const std::filesystem::path& path, PayloadFormat format);
void write_payload(const std::filesystem::path& path, const Bits& bits, PayloadFormat format);

}  // namespace retoksync::cli
