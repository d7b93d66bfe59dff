#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace grpoqa {

inline constexpr const char* kVersionString = "grpoqa 0.1.0";

std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t basis = 0xcbf29ce484222325ULL);
std::string to_hex(std::uint64_t v);

std::string read_file(const std::string& path);
// write via temp file + rename so readers never observe partial content
void write_file_atomic(const std::string& path, std::string_view content);

std::uint64_t hash_file(const std::string& path);

std::vector<std::string> split_lines(std::string_view text);
std::string trim(std::string_view s);

} // namespace grpoqa
