#include "cyclone/binary_io.hpp"

#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

#include "cyclone/error.hpp"

namespace cyclone {

namespace {

template <typename Word>
Word to_little(Word w) {
  if constexpr (std::endian::native == std::endian::big) {
    Word out = 0;
    for (std::size_t i = 0; i < sizeof(Word); ++i) {
      out = (out << 8) | ((w >> (8 * i)) & 0xFF);
    }
    return out;
  }
  return w;
}

std::vector<char> read_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(Errc::io, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_bytes(const std::filesystem::path& path, const std::vector<char>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(Errc::io, "cannot write " + path.string());
  out.write(bytes.data(), std::streamsize(bytes.size()));
  if (!out) fail(Errc::io, "short write to " + path.string());
}

}  // namespace

void write_f64_le(const std::filesystem::path& path, std::span<const double> values) {
  std::vector<char> bytes(values.size() * 8);
  for (std::size_t i = 0; i < values.size(); ++i) {
    const auto word = to_little(std::bit_cast<std::uint64_t>(values[i]));
    std::memcpy(bytes.data() + i * 8, &word, 8);
  }
  write_bytes(path, bytes);
}

std::vector<double> read_f64_le(const std::filesystem::path& path) {
  const auto bytes = read_bytes(path);
  if (bytes.size() % 8 != 0) fail(Errc::io, path.string() + ": size is not a multiple of 8");
  std::vector<double> out(bytes.size() / 8);
  for (std::size_t i = 0; i < out.size(); ++i) {
    std::uint64_t word;
    std::memcpy(&word, bytes.data() + i * 8, 8);
    out[i] = std::bit_cast<double>(to_little(word));
  }
  return out;
}

void write_f32_le(const std::filesystem::path& path, std::span<const double> values) {
  std::vector<char> bytes(values.size() * 4);
  for (std::size_t i = 0; i < values.size(); ++i) {
    const auto word = to_little(std::bit_cast<std::uint32_t>(static_cast<float>(values[i])));
    std::memcpy(bytes.data() + i * 4, &word, 4);
  }
  write_bytes(path, bytes);
}

std::vector<double> read_f32_le(const std::filesystem::path& path) {
  const auto bytes = read_bytes(path);
  if (bytes.size() % 4 != 0) fail(Errc::io, path.string() + ": size is not a multiple of 4");
  std::vector<double> out(bytes.size() / 4);
  for (std::size_t i = 0; i < out.size(); ++i) {
    std::uint32_t word;
    std::memcpy(&word, bytes.data() + i * 4, 4);
    out[i] = std::bit_cast<float>(to_little(word));
  }
  return out;
}

std::string read_text(const std::filesystem::path& path) {
  const auto bytes = read_bytes(path);
  return {bytes.begin(), bytes.end()};
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  write_bytes(path, std::vector<char>(text.begin(), text.end()));
}

}  // namespace cyclone
