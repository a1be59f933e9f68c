#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <string_view>

#include "edgemesh/types.hpp"

namespace edgemesh {

// Canonical binary encoding primitives: little-endian fixed-width integers
// and length-prefixed byte strings. All wire messages, CRDT states and store
// dumps are built from these, so equal values always encode to equal bytes.

class Encoder {
 public:
  void u8(std::uint8_t v) { buf_.push_back(static_cast<char>(v)); }

  void u32(std::uint32_t v) {
    char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
    buf_.append(b, 4);
  }

  void u64(std::uint64_t v) {
    char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
    buf_.append(b, 8);
  }

  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }

  void bytes(std::string_view v) {
    u32(static_cast<std::uint32_t>(v.size()));
    buf_.append(v.data(), v.size());
  }

  void raw(std::string_view v) { buf_.append(v.data(), v.size()); }

  std::size_t size() const { return buf_.size(); }
  Bytes take() { return std::move(buf_); }
  const Bytes& view() const { return buf_; }

 private:
  Bytes buf_;
};

/// Bounds-checked reader for the same format. Never throws: any read past
/// the end flips ok() and returns zero values from then on.
class Decoder {
 public:
  explicit Decoder(std::string_view in) : in_(in) {}

  std::uint8_t u8() {
    if (!take(1)) return 0;
    return static_cast<std::uint8_t>(in_[pos_ - 1]);
  }

  std::uint32_t u32() {
    if (!take(4)) return 0;
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i)
      v |= static_cast<std::uint32_t>(static_cast<unsigned char>(in_[pos_ - 4 + i])) << (8 * i);
    return v;
  }

  std::uint64_t u64() {
    if (!take(8)) return 0;
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i)
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(in_[pos_ - 8 + i])) << (8 * i);
    return v;
  }

  double f64() { return std::bit_cast<double>(u64()); }

  Bytes bytes() {
    std::uint32_t n = u32();
    if (!take(n)) return {};
    return Bytes(in_.substr(pos_ - n, n));
  }

  std::string_view rest() {
    std::string_view r = in_.substr(pos_);
    pos_ = in_.size();
    return r;
  }

  bool ok() const { return ok_; }
  bool done() const { return ok_ && pos_ == in_.size(); }
  std::size_t pos() const { return pos_; }

 private:
  bool take(std::size_t n) {
    if (!ok_ || in_.size() - pos_ < n) {
      ok_ = false;
      return false;
    }
    pos_ += n;
    return true;
  }

  std::string_view in_;
  std::size_t pos_ = 0;
  bool ok_ = true;
};

}  // namespace edgemesh
