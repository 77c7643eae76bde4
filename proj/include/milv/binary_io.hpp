#pragma once

#include "milv/core.hpp"

#include <bit>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <string_view>

namespace milv::io {

/// Little-endian encoder into an in-memory buffer.
class ByteWriter {
 public:
  void bytes(std::string_view data) { buffer_.append(data); }

  void u8(std::uint8_t v) { buffer_.push_back(static_cast<char>(v)); }

  void u16(std::uint16_t v) { put_le(v, 2); }

  void u32(std::uint32_t v) { put_le(v, 4); }

  void u64(std::uint64_t v) { put_le(v, 8); }

  void f64(double v) { put_le(std::bit_cast<std::uint64_t>(v), 8); }

  void magic(std::string_view tag, std::uint32_t version) {
    bytes(tag);
    u32(version);
  }

  template <typename Derived>
  void f64_block(const Eigen::DenseBase<Derived>& m) {
    // Row-major element order regardless of the matrix storage order.
    for (Index r = 0; r < m.rows(); ++r)
      for (Index c = 0; c < m.cols(); ++c) f64(m(r, c));
  }

  const std::string& buffer() const noexcept { return buffer_; }

 private:
  void put_le(std::uint64_t v, int width) {
    for (int i = 0; i < width; ++i) buffer_.push_back(static_cast<char>((v >> (8 * i)) & 0xFFu));
  }

  std::string buffer_;
};

/// Little-endian decoder that reports the byte offset of every failure.
class ByteReader {
 public:
  explicit ByteReader(std::string data) : data_(std::move(data)) {}

  std::uint64_t offset() const noexcept { return pos_; }
  std::uint64_t remaining() const noexcept { return data_.size() - pos_; }
  bool at_end() const noexcept { return pos_ == data_.size(); }

  [[noreturn]] void fail(const std::string& what) const { throw FormatError(what, pos_); }

  std::string_view bytes(std::size_t n, const char* what) {
    need(n, what);
    std::string_view out(data_.data() + pos_, n);
    pos_ += n;
    return out;
  }

  std::uint8_t u8(const char* what) { return static_cast<std::uint8_t>(get_le(1, what)); }
  std::uint16_t u16(const char* what) { return static_cast<std::uint16_t>(get_le(2, what)); }
  std::uint32_t u32(const char* what) { return static_cast<std::uint32_t>(get_le(4, what)); }
  std::uint64_t u64(const char* what) { return get_le(8, what); }

  /// Reads one float64 and rejects NaN/Inf, reporting the value's own offset.
  double f64(const char* what) {
    const std::uint64_t at = pos_;
    const double v = std::bit_cast<double>(get_le(8, what));
    if (!std::isfinite(v)) throw FormatError(std::string("non-finite value in ") + what, at);
    return v;
  }

  void magic(std::string_view tag, std::uint32_t version) {
    const std::uint64_t at = pos_;
    if (bytes(tag.size(), "magic") != tag)
      throw FormatError("malformed header: expected magic \"" + std::string(tag) + "\"", at);
    const std::uint64_t version_at = pos_;
    const auto found = u32("version");
    if (found != version)
      throw FormatError("unsupported version " + std::to_string(found), version_at);
  }

  /// Checks that `count` records of `record_size` bytes can still be read.
  void expect_payload(std::uint64_t count, std::uint64_t record_size, const char* what) {
    if (record_size != 0 && count > remaining() / record_size)
      fail(std::string("truncated payload: ") + what + " declares more data than the file holds");
  }

  void f64_block(Matrix& m, const char* what) {
    expect_payload(static_cast<std::uint64_t>(m.rows()) * static_cast<std::uint64_t>(m.cols()), 8, what);
    for (Index r = 0; r < m.rows(); ++r)
      for (Index c = 0; c < m.cols(); ++c) m(r, c) = f64(what);
  }

  void f64_block(Vector& v, const char* what) {
    expect_payload(static_cast<std::uint64_t>(v.size()), 8, what);
    for (Index i = 0; i < v.size(); ++i) v(i) = f64(what);
  }

  void expect_end() {
    if (!at_end()) fail("trailing bytes after payload");
  }

 private:
  void need(std::size_t n, const char* what) {
    if (remaining() < n) fail(std::string("truncated payload while reading ") + what);
  }

  std::uint64_t get_le(int width, const char* what) {
    need(static_cast<std::size_t>(width), what);
    std::uint64_t v = 0;
    for (int i = 0; i < width; ++i)
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(data_[pos_ + i])) << (8 * i);
    pos_ += static_cast<std::size_t>(width);
    return v;
  }

  std::string data_;
  std::size_t pos_ = 0;
};

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError("read failed: " + path.string());
  return data;
}

inline void write_file(const std::filesystem::path& path, std::string_view data) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  out.write(data.data(), static_cast<std::streamsize>(data.size()));
  out.flush();
  if (!out) throw IoError("write failed: " + path.string());
}

inline std::uint32_t checked_u32(Index v, const char* what) {
  if (v < 0 || static_cast<std::uint64_t>(v) > UINT32_MAX)
    throw InvalidArgument(std::string(what) + " does not fit in u32");
  return static_cast<std::uint32_t>(v);
}

}  // namespace milv::io
