#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <span>
#include <string>
#include <type_traits>
#include <vector>

#include "specwave/error.hpp"

namespace specwave::binio
{

/// Appends little-endian scalars to a byte buffer.
class Writer
{
public:
  template <typename T>
  void put(T value)
  {
    static_assert(std::is_arithmetic_v<T>);
    using U = std::conditional_t<sizeof(T) == 1, std::uint8_t,
                                 std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>>;
    static_assert(sizeof(U) == sizeof(T));
    const U bits = std::bit_cast<U>(value);
    for (std::size_t b = 0; b < sizeof(U); ++b)
    {
      bytes_.push_back(static_cast<std::uint8_t>(bits >> (8 * b)));
    }
  }

  void put_bytes(std::span<const std::uint8_t> data) { bytes_.insert(bytes_.end(), data.begin(), data.end()); }
  void pad(std::size_t n) { bytes_.insert(bytes_.end(), n, 0); }

  std::vector<std::uint8_t> &bytes() { return bytes_; }
  std::size_t size() const { return bytes_.size(); }

private:
  std::vector<std::uint8_t> bytes_;
};

/// Reads little-endian scalars; running past the end raises TruncatedError.
class Reader
{
public:
  Reader(std::span<const std::uint8_t> data, std::string context) : data_(data), context_(std::move(context)) {}

  template <typename T>
  T get()
  {
    static_assert(std::is_arithmetic_v<T>);
    using U = std::conditional_t<sizeof(T) == 1, std::uint8_t,
                                 std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>>;
    require(sizeof(U));
    U bits = 0;
    for (std::size_t b = 0; b < sizeof(U); ++b)
    {
      bits |= static_cast<U>(data_[pos_ + b]) << (8 * b);
    }
    pos_ += sizeof(U);
    return std::bit_cast<T>(bits);
  }

  std::span<const std::uint8_t> take(std::size_t n)
  {
    require(n);
    auto out = data_.subspan(pos_, n);
    pos_ += n;
    return out;
  }

  void skip(std::size_t n) { take(n); }
  std::size_t position() const { return pos_; }
  std::size_t remaining() const { return data_.size() - pos_; }

private:
  void require(std::size_t n) const
  {
    if (data_.size() - pos_ < n)
    {
      throw TruncatedError(context_ + ": unexpected end of data (needed " + std::to_string(pos_ + n) +
                               " bytes, have " + std::to_string(data_.size()) + ")",
                           pos_ + n, data_.size());
    }
  }

  std::span<const std::uint8_t> data_;
  std::string context_;
  std::size_t pos_ = 0;
};

std::vector<std::uint8_t> read_file(const std::filesystem::path &path);

/// Writes through a temporary sibling and renames it into place.
void write_file(const std::filesystem::path &path, std::span<const std::uint8_t> bytes);

std::uint32_t crc32(std::span<const std::uint8_t> bytes);

}  // namespace specwave::binio
