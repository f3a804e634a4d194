#pragma once

#include <bit>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace cyclone {

// Raw little-endian encodings used by the checkpoint and dataset files.
void write_f64_le(const std::filesystem::path& path, std::span<const double> values);
std::vector<double> read_f64_le(const std::filesystem::path& path);

void write_f32_le(const std::filesystem::path& path, std::span<const double> values);
std::vector<double> read_f32_le(const std::filesystem::path& path);

std::string read_text(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace cyclone
