#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace unoranic::npy {

enum class DType { u8, i8, u16, i16, u32, i32, u64, i64, f32, f64 };

std::size_t dtype_size(DType dtype) noexcept;
// NPY descr string, e.g. "|u1" or "<f4".
std::string dtype_descr(DType dtype);

// An NPY array held as raw little-endian bytes in C order.
struct Array {
  DType dtype = DType::u8;
  std::vector<std::int64_t> shape;
  std::vector<std::byte> data;

  std::int64_t element_count() const noexcept;

  // Element-wise conversion to T (any supported dtype to any arithmetic T).
  template <typename T>
  std::vector<T> to_vector() const;
};

template <typename T>
constexpr DType dtype_of();
template <> constexpr DType dtype_of<std::uint8_t>() { return DType::u8; }
template <> constexpr DType dtype_of<std::int8_t>() { return DType::i8; }
template <> constexpr DType dtype_of<std::uint16_t>() { return DType::u16; }
template <> constexpr DType dtype_of<std::int16_t>() { return DType::i16; }
template <> constexpr DType dtype_of<std::uint32_t>() { return DType::u32; }
template <> constexpr DType dtype_of<std::int32_t>() { return DType::i32; }
template <> constexpr DType dtype_of<std::uint64_t>() { return DType::u64; }
template <> constexpr DType dtype_of<std::int64_t>() { return DType::i64; }
template <> constexpr DType dtype_of<float>() { return DType::f32; }
template <> constexpr DType dtype_of<double>() { return DType::f64; }

template <typename T>
Array make_array(std::vector<std::int64_t> shape, std::span<const T> values);

// Parses an NPY (format 1.x/2.x/3.x) byte stream. Throws FormatError on
// big-endian or Fortran-ordered data and on malformed headers.
Array parse(std::span<const std::byte> bytes);

// Serializes as NPY format 1.0, C order, little-endian.
std::vector<std::byte> serialize(const Array& array);

}  // namespace unoranic::npy
