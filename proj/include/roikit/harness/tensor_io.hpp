#ifndef ROIKIT_HARNESS_TENSOR_IO_HPP
#define ROIKIT_HARNESS_TENSOR_IO_HPP

// Binary tensor file: "SPT1", then C, H, W as little-endian uint32, then
// C*H*W little-endian IEEE-754 float32 values in channel-major, row-major order.

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "roikit/error.hpp"
#include "roikit/tensor.hpp"

namespace roikit::io {

inline constexpr std::array<char, 4> kTensorMagic{'S', 'P', 'T', '1'};

namespace detail {

inline void put_u32(std::ostream& os, std::uint32_t v) {
  const char b[4] = {static_cast<char>(v & 0xFF), static_cast<char>((v >> 8) & 0xFF),
                     static_cast<char>((v >> 16) & 0xFF), static_cast<char>((v >> 24) & 0xFF)};
  os.write(b, 4);
}

inline std::uint32_t get_u32(std::istream& is) {
  unsigned char b[4];
  if (!is.read(reinterpret_cast<char*>(b), 4)) throw ParseError("truncated tensor file", 0);
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

}  // namespace detail

/// Values are narrowed to float32 on write.
template <typename T>
void write_tensor(std::ostream& os, const Tensor3<T>& t) {
  constexpr auto kMax = std::numeric_limits<std::uint32_t>::max();
  if (t.channels() > kMax || t.height() > kMax || t.width() > kMax)
    throw std::invalid_argument("tensor too large for the binary format");
  os.write(kTensorMagic.data(), kTensorMagic.size());
  detail::put_u32(os, static_cast<std::uint32_t>(t.channels()));
  detail::put_u32(os, static_cast<std::uint32_t>(t.height()));
  detail::put_u32(os, static_cast<std::uint32_t>(t.width()));
  for (T v : t.data()) detail::put_u32(os, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
  if (!os) throw std::runtime_error("failed writing tensor");
}

template <typename T = Real>
Tensor3<T> read_tensor(std::istream& is) {
  std::array<char, 4> magic{};
  if (!is.read(magic.data(), magic.size()) || magic != kTensorMagic) throw ParseError("bad tensor magic", 0);
  const std::uint32_t c = detail::get_u32(is), h = detail::get_u32(is), w = detail::get_u32(is);
  if (c == 0 || h == 0 || w == 0) throw ParseError("tensor header has a zero dimension", 0);
  std::vector<T> data(static_cast<std::size_t>(c) * h * w);
  for (auto& v : data) v = static_cast<T>(std::bit_cast<float>(detail::get_u32(is)));
  return Tensor3<T>(Shape3{c, h, w}, std::move(data));
}

template <typename T>
void write_tensor_file(const std::filesystem::path& path, const Tensor3<T>& t) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open " + path.string() + " for writing");
  write_tensor(os, t);
}

template <typename T = Real>
Tensor3<T> read_tensor_file(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open " + path.string());
  return read_tensor<T>(is);
}

}  // namespace roikit::io

#endif  // ROIKIT_HARNESS_TENSOR_IO_HPP
