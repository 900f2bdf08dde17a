#pragma once

#include <algorithm>
#include <array>
#include <bit>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <stdexcept>
#include <string>
#include <vector>

#include "fra/tensor.hpp"

namespace fra {

class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

inline std::vector<unsigned char> read_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_bytes(const std::filesystem::path& path, const std::vector<unsigned char>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw FormatError("write failed for " + path.string());
}

inline void put_u32(std::vector<unsigned char>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<unsigned char>(v >> (8 * i)));
}

inline void put_f64(std::vector<unsigned char>& out, double v) {
  const auto bits = std::bit_cast<std::uint64_t>(v);
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<unsigned char>(bits >> (8 * i)));
}

inline std::uint64_t get_le(const unsigned char* p, int bytes) {
  std::uint64_t v = 0;
  for (int i = bytes - 1; i >= 0; --i) v = (v << 8) | p[i];
  return v;
}

// PPM header token reader: skips whitespace and '#' comments.
class PpmHeader {
 public:
  explicit PpmHeader(const std::vector<unsigned char>& b) : b_(b) {}

  std::string token() {
    skip();
    std::string t;
    while (pos_ < b_.size() && !std::isspace(b_[pos_]) && b_[pos_] != '#') t.push_back(static_cast<char>(b_[pos_++]));
    if (t.empty()) throw FormatError("ppm: truncated header");
    return t;
  }

  std::size_t number(const char* what) {
    const std::string t = token();
    if (!std::all_of(t.begin(), t.end(), [](char c) { return c >= '0' && c <= '9'; }) || t.size() > 9)
      throw FormatError(std::string("ppm: bad ") + what + " '" + t + "'");
    return std::stoul(t);
  }

  // exactly one whitespace byte separates maxval from the raster
  std::size_t raster_start() {
    if (pos_ >= b_.size() || !std::isspace(b_[pos_])) throw FormatError("ppm: missing raster separator");
    return pos_ + 1;
  }

 private:
  void skip() {
    while (pos_ < b_.size()) {
      if (std::isspace(b_[pos_])) ++pos_;
      else if (b_[pos_] == '#')
        while (pos_ < b_.size() && b_[pos_] != '\n') ++pos_;
      else break;
    }
  }

  const std::vector<unsigned char>& b_;
  std::size_t pos_ = 0;
};

}  // namespace detail

/// v/255 for each 8-bit sample.
inline Image decode_ppm(const std::vector<unsigned char>& bytes) {
  detail::PpmHeader hdr(bytes);
  if (hdr.token() != "P6") throw FormatError("ppm: only binary P6 is supported");
  const std::size_t w = hdr.number("width"), h = hdr.number("height"), maxval = hdr.number("maxval");
  if (w == 0 || h == 0) throw FormatError("ppm: zero dimension");
  if (maxval != 255) throw FormatError("ppm: maxval must be 255, got " + std::to_string(maxval));
  const std::size_t start = hdr.raster_start();
  const std::size_t need = w * h * 3;
  if (bytes.size() < start + need) throw FormatError("ppm: truncated raster");
  Image img(h, w, 3);
  for (std::size_t i = 0; i < need; ++i) img.data()[i] = static_cast<double>(bytes[start + i]) / 255.0;
  return img;
}

/// Quantizes to 8 bits with round-half-to-even.
inline std::vector<unsigned char> encode_ppm(const Image& img) {
  if (img.channels() != 3) throw FormatError("ppm: image must have 3 channels");
  const std::string header = "P6\n" + std::to_string(img.width()) + " " + std::to_string(img.height()) + "\n255\n";
  std::vector<unsigned char> out(header.begin(), header.end());
  out.reserve(out.size() + img.size());
  for (double v : img.data()) {
    if (!std::isfinite(v)) throw FormatError("ppm: non-finite pixel");
    out.push_back(static_cast<unsigned char>(std::clamp(std::nearbyint(v * 255.0), 0.0, 255.0)));
  }
  return out;
}

inline Tensor decode_frat(const std::vector<unsigned char>& bytes) {
  if (bytes.size() < 8 || std::memcmp(bytes.data(), "FRAT", 4) != 0) throw FormatError("frat: bad magic");
  const auto rank = static_cast<std::size_t>(detail::get_le(bytes.data() + 4, 4));
  if (rank == 0 || rank > 8) throw FormatError("frat: unsupported rank " + std::to_string(rank));
  if (bytes.size() < 8 + 4 * rank) throw FormatError("frat: truncated header");
  std::vector<std::size_t> dims(rank);
  std::size_t count = 1;
  for (std::size_t i = 0; i < rank; ++i) {
    dims[i] = static_cast<std::size_t>(detail::get_le(bytes.data() + 8 + 4 * i, 4));
    count *= dims[i];
  }
  const std::size_t start = 8 + 4 * rank;
  if (bytes.size() != start + 8 * count)
    throw FormatError("frat: payload has " + std::to_string(bytes.size() - start) + " bytes, expected " +
                      std::to_string(8 * count));
  Tensor t(dims);
  for (std::size_t i = 0; i < count; ++i)
    t.data[i] = std::bit_cast<double>(detail::get_le(bytes.data() + start + 8 * i, 8));
  return t;
}

inline std::vector<unsigned char> encode_frat(const Tensor& t) {
  std::vector<unsigned char> out = {'F', 'R', 'A', 'T'};
  detail::put_u32(out, static_cast<std::uint32_t>(t.shape.size()));
  for (auto d : t.shape) detail::put_u32(out, static_cast<std::uint32_t>(d));
  for (double v : t.data) detail::put_f64(out, v);
  return out;
}

inline Tensor load_tensor(const std::filesystem::path& path) { return decode_frat(detail::read_bytes(path)); }
inline void save_tensor(const std::filesystem::path& path, const Tensor& t) { detail::write_bytes(path, encode_frat(t)); }

/// Reads P6 or FRAT (rank 3, H x W x C, or rank 2 as one channel), chosen by magic bytes.
inline Image load_image(const std::filesystem::path& path) {
  const auto bytes = detail::read_bytes(path);
  if (bytes.size() >= 2 && bytes[0] == 'P' && bytes[1] == '6') return decode_ppm(bytes);
  if (bytes.size() >= 4 && std::memcmp(bytes.data(), "FRAT", 4) == 0) {
    Tensor t = decode_frat(bytes);
    if (t.shape.size() == 2) t.shape.push_back(1);
    if (t.shape.size() != 3) throw FormatError("frat: image tensors must have rank 2 or 3");
    return to_image(t);
  }
  throw FormatError(path.string() + ": unrecognized image format (expected P6 or FRAT)");
}

/// Writes PPM for a .ppm extension, FRAT otherwise.
inline void save_image(const std::filesystem::path& path, const Image& img) {
  if (path.extension() == ".ppm") detail::write_bytes(path, encode_ppm(img));
  else detail::write_bytes(path, encode_frat(to_tensor(img)));
}

}  // namespace fra
