#include "unoranic/npy.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <cstring>
#include <numeric>

#include "unoranic/errors.hpp"

static_assert(std::endian::native == std::endian::little, "NPY I/O assumes a little-endian host");

namespace unoranic::npy {
namespace {

constexpr char kMagic[] = "\x93NUMPY";
constexpr std::size_t kMagicLen = 6;

struct DescrEntry {
  const char* code;
  DType dtype;
};

constexpr DescrEntry kDescrs[] = {
    {"u1", DType::u8},  {"i1", DType::i8},  {"u2", DType::u16}, {"i2", DType::i16},
    {"u4", DType::u32}, {"i4", DType::i32}, {"u8", DType::u64}, {"i8", DType::i64},
    {"f4", DType::f32}, {"f8", DType::f64}, {"b1", DType::u8},
};

DType parse_descr(const std::string& descr) {
  if (descr.size() != 3) throw FormatError("npy: unsupported dtype descr '" + descr + "'");
  const char order = descr[0];
  if (order == '>') throw FormatError("npy: big-endian data is not supported ('" + descr + "')");
  if (order != '<' && order != '|' && order != '=')
    throw FormatError("npy: bad byte-order mark in descr '" + descr + "'");
  const std::string code = descr.substr(1);
  for (const auto& d : kDescrs)
    if (code == d.code) return d.dtype;
  throw FormatError("npy: unsupported dtype descr '" + descr + "'");
}

// Returns the text following `'key':` in a Python dict literal.
std::string_view value_after(std::string_view header, std::string_view key) {
  const std::string quoted = "'" + std::string(key) + "'";
  auto pos = header.find(quoted);
  if (pos == std::string_view::npos) throw FormatError("npy: header lacks key " + quoted);
  pos = header.find(':', pos + quoted.size());
  if (pos == std::string_view::npos) throw FormatError("npy: malformed header near " + quoted);
  ++pos;
  while (pos < header.size() && std::isspace(static_cast<unsigned char>(header[pos]))) ++pos;
  return header.substr(pos);
}

std::vector<std::int64_t> parse_shape(std::string_view text) {
  if (text.empty() || text.front() != '(') throw FormatError("npy: malformed shape tuple");
  const auto close = text.find(')');
  if (close == std::string_view::npos) throw FormatError("npy: unterminated shape tuple");
  std::vector<std::int64_t> shape;
  std::int64_t current = -1;
  for (char c : text.substr(1, close - 1)) {
    if (std::isdigit(static_cast<unsigned char>(c))) {
      current = (current < 0 ? 0 : current * 10) + (c - '0');
    } else if (c == ',') {
      if (current >= 0) shape.push_back(current);
      current = -1;
    } else if (c != ' ' && c != 'L') {
      throw FormatError("npy: unexpected character in shape tuple");
    }
  }
  if (current >= 0) shape.push_back(current);
  return shape;
}

template <typename Src, typename T>
void convert_into(const std::byte* raw, std::size_t n, std::vector<T>& out) {
  out.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    Src v;
    std::memcpy(&v, raw + i * sizeof(Src), sizeof(Src));
    out[i] = static_cast<T>(v);
  }
}

}  // namespace

std::size_t dtype_size(DType dtype) noexcept {
  switch (dtype) {
    case DType::u8:
    case DType::i8: return 1;
    case DType::u16:
    case DType::i16: return 2;
    case DType::u32:
    case DType::i32:
    case DType::f32: return 4;
    case DType::u64:
    case DType::i64:
    case DType::f64: return 8;
  }
  return 0;
}

std::string dtype_descr(DType dtype) {
  for (const auto& d : kDescrs) {
    if (d.dtype == dtype) {
      const char order = dtype_size(dtype) == 1 ? '|' : '<';
      return std::string(1, order) + d.code;
    }
  }
  throw FormatError("npy: unknown dtype");
}

std::int64_t Array::element_count() const noexcept {
  return std::accumulate(shape.begin(), shape.end(), std::int64_t{1}, std::multiplies<>());
}

template <typename T>
std::vector<T> Array::to_vector() const {
  const auto n = static_cast<std::size_t>(element_count());
  std::vector<T> out;
  const std::byte* raw = data.data();
  switch (dtype) {
    case DType::u8: convert_into<std::uint8_t>(raw, n, out); break;
    case DType::i8: convert_into<std::int8_t>(raw, n, out); break;
    case DType::u16: convert_into<std::uint16_t>(raw, n, out); break;
    case DType::i16: convert_into<std::int16_t>(raw, n, out); break;
    case DType::u32: convert_into<std::uint32_t>(raw, n, out); break;
    case DType::i32: convert_into<std::int32_t>(raw, n, out); break;
    case DType::u64: convert_into<std::uint64_t>(raw, n, out); break;
    case DType::i64: convert_into<std::int64_t>(raw, n, out); break;
    case DType::f32: convert_into<float>(raw, n, out); break;
    case DType::f64: convert_into<double>(raw, n, out); break;
  }
  return out;
}

template <typename T>
Array make_array(std::vector<std::int64_t> shape, std::span<const T> values) {
  Array a;
  a.dtype = dtype_of<T>();
  a.shape = std::move(shape);
  if (a.element_count() != static_cast<std::int64_t>(values.size()))
    throw ShapeError("npy: value count does not match shape");
  a.data.resize(values.size_bytes());
  if (!values.empty()) std::memcpy(a.data.data(), values.data(), values.size_bytes());
  return a;
}

Array parse(std::span<const std::byte> bytes) {
  if (bytes.size() < kMagicLen + 4 || std::memcmp(bytes.data(), kMagic, kMagicLen) != 0)
    throw FormatError("npy: missing magic string");
  const auto major = static_cast<unsigned>(bytes[6]);
  std::size_t header_len = 0;
  std::size_t offset = 0;
  if (major == 1) {
    header_len = static_cast<std::size_t>(bytes[8]) | (static_cast<std::size_t>(bytes[9]) << 8);
    offset = 10;
  } else if (major == 2 || major == 3) {
    if (bytes.size() < 12) throw FormatError("npy: truncated header");
    for (int i = 0; i < 4; ++i) header_len |= static_cast<std::size_t>(bytes[8 + i]) << (8 * i);
    offset = 12;
  } else {
    throw FormatError("npy: unsupported format version " + std::to_string(major));
  }
  if (bytes.size() < offset + header_len) throw FormatError("npy: truncated header");
  const std::string header(reinterpret_cast<const char*>(bytes.data() + offset), header_len);

  Array a;
  auto descr_text = value_after(header, "descr");
  if (descr_text.empty() || descr_text.front() != '\'') throw FormatError("npy: malformed descr");
  const auto descr_end = descr_text.find('\'', 1);
  if (descr_end == std::string_view::npos) throw FormatError("npy: malformed descr");
  a.dtype = parse_descr(std::string(descr_text.substr(1, descr_end - 1)));
  if (value_after(header, "fortran_order").starts_with("True"))
    throw FormatError("npy: Fortran-ordered arrays are not supported");
  a.shape = parse_shape(value_after(header, "shape"));

  const auto payload = static_cast<std::size_t>(a.element_count()) * dtype_size(a.dtype);
  const std::size_t start = offset + header_len;
  if (bytes.size() - start < payload)
    throw FormatError("npy: payload shorter than shape implies");
  a.data.assign(bytes.begin() + static_cast<std::ptrdiff_t>(start),
                bytes.begin() + static_cast<std::ptrdiff_t>(start + payload));
  return a;
}

std::vector<std::byte> serialize(const Array& array) {
  std::string shape = "(";
  for (std::size_t i = 0; i < array.shape.size(); ++i) {
    shape += std::to_string(array.shape[i]);
    if (array.shape.size() == 1 || i + 1 < array.shape.size()) shape += ",";
    if (i + 1 < array.shape.size()) shape += " ";
  }
  shape += ")";
  std::string header = "{'descr': '" + dtype_descr(array.dtype) +
                       "', 'fortran_order': False, 'shape': " + shape + ", }";
  // Pad so the data starts on a 64-byte boundary; header ends with '\n'.
  const std::size_t unpadded = kMagicLen + 4 + header.size() + 1;
  header.append((64 - unpadded % 64) % 64, ' ');
  header.push_back('\n');

  std::vector<std::byte> out;
  out.reserve(kMagicLen + 4 + header.size() + array.data.size());
  for (std::size_t i = 0; i < kMagicLen; ++i) out.push_back(static_cast<std::byte>(kMagic[i]));
  out.push_back(std::byte{1});
  out.push_back(std::byte{0});
  out.push_back(static_cast<std::byte>(header.size() & 0xFF));
  out.push_back(static_cast<std::byte>((header.size() >> 8) & 0xFF));
  for (char c : header) out.push_back(static_cast<std::byte>(c));
  out.insert(out.end(), array.data.begin(), array.data.end());
  return out;
}

#define UNORANIC_NPY_INSTANTIATE(T)                                      \
  template std::vector<T> Array::to_vector<T>() const;                   \
  template Array make_array<T>(std::vector<std::int64_t>, std::span<const T>);

UNORANIC_NPY_INSTANTIATE(std::uint8_t)
UNORANIC_NPY_INSTANTIATE(std::int8_t)
UNORANIC_NPY_INSTANTIATE(std::uint16_t)
UNORANIC_NPY_INSTANTIATE(std::int16_t)
UNORANIC_NPY_INSTANTIATE(std::uint32_t)
UNORANIC_NPY_INSTANTIATE(std::int32_t)
UNORANIC_NPY_INSTANTIATE(std::uint64_t)
UNORANIC_NPY_INSTANTIATE(std::int64_t)
UNORANIC_NPY_INSTANTIATE(float)
UNORANIC_NPY_INSTANTIATE(double)

#undef UNORANIC_NPY_INSTANTIATE

}  // namespace unoranic::npy
