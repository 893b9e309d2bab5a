#include "unoranic/zip_archive.hpp"

#include <zlib.h>

#include <cstring>
#include <fstream>
#include <limits>

#include "unoranic/errors.hpp"

namespace unoranic::zip {
namespace {

constexpr std::uint32_t kLocalHeaderSig = 0x04034b50;
constexpr std::uint32_t kCentralHeaderSig = 0x02014b50;
constexpr std::uint32_t kEndOfCentralSig = 0x06054b50;
constexpr std::uint32_t kZip64EndSig = 0x06064b50;
constexpr std::uint32_t kZip64LocatorSig = 0x07064b50;
constexpr std::uint16_t kZip64ExtraId = 0x0001;
constexpr std::uint16_t kMethodStored = 0;
constexpr std::uint16_t kMethodDeflate = 8;
// 1980-01-01 00:00:00 in MS-DOS format.
constexpr std::uint16_t kDosTime = 0;
constexpr std::uint16_t kDosDate = (1 << 5) | 1;

class Cursor {
 public:
  Cursor(std::span<const std::byte> bytes, std::size_t pos, const std::string& origin)
      : bytes_(bytes), pos_(pos), origin_(origin) {}

  template <typename T>
  T get() {
    if (pos_ + sizeof(T) > bytes_.size())
      throw FormatError("zip: truncated structure in " + origin_);
    T v{};
    std::memcpy(&v, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  void skip(std::size_t n) {
    if (pos_ + n > bytes_.size()) throw FormatError("zip: truncated structure in " + origin_);
    pos_ += n;
  }
  std::size_t pos() const { return pos_; }

 private:
  std::span<const std::byte> bytes_;
  std::size_t pos_;
  const std::string& origin_;
};

template <typename T>
void put(std::vector<std::byte>& out, T value) {
  const auto* p = reinterpret_cast<const std::byte*>(&value);
  out.insert(out.end(), p, p + sizeof(T));
}

std::uint32_t crc_of(std::span<const std::byte> data) {
  uLong crc = crc32(0L, Z_NULL, 0);
  std::size_t done = 0;
  while (done < data.size()) {
    const auto chunk = static_cast<uInt>(
        std::min<std::size_t>(data.size() - done, std::numeric_limits<uInt>::max()));
    crc = crc32(crc, reinterpret_cast<const Bytef*>(data.data() + done), chunk);
    done += chunk;
  }
  return static_cast<std::uint32_t>(crc);
}

std::vector<std::byte> inflate_raw(std::span<const std::byte> in, std::uint64_t expected,
                                   const std::string& what) {
  std::vector<std::byte> out(expected);
  z_stream zs{};
  if (inflateInit2(&zs, -MAX_WBITS) != Z_OK) throw FormatError("zip: inflateInit failed");
  zs.next_in = reinterpret_cast<Bytef*>(const_cast<std::byte*>(in.data()));
  zs.avail_in = static_cast<uInt>(in.size());
  zs.next_out = reinterpret_cast<Bytef*>(out.data());
  zs.avail_out = static_cast<uInt>(out.size());
  const int rc = inflate(&zs, Z_FINISH);
  const auto produced = zs.total_out;
  inflateEnd(&zs);
  if (rc != Z_STREAM_END || produced != expected)
    throw IntegrityError("zip: corrupt deflate stream for entry " + what);
  return out;
}

std::vector<std::byte> deflate_raw(std::span<const std::byte> in) {
  z_stream zs{};
  if (deflateInit2(&zs, Z_DEFAULT_COMPRESSION, Z_DEFLATED, -MAX_WBITS, 8, Z_DEFAULT_STRATEGY) !=
      Z_OK)
    throw Error("zip: deflateInit failed");
  std::vector<std::byte> out(deflateBound(&zs, static_cast<uLong>(in.size())));
  zs.next_in = reinterpret_cast<Bytef*>(const_cast<std::byte*>(in.data()));
  zs.avail_in = static_cast<uInt>(in.size());
  zs.next_out = reinterpret_cast<Bytef*>(out.data());
  zs.avail_out = static_cast<uInt>(out.size());
  const int rc = deflate(&zs, Z_FINISH);
  out.resize(zs.total_out);
  deflateEnd(&zs);
  if (rc != Z_STREAM_END) throw Error("zip: deflate failed");
  return out;
}

}  // namespace

std::vector<std::byte> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open file " + path.string());
  in.seekg(0, std::ios::end);
  const auto size = static_cast<std::size_t>(in.tellg());
  in.seekg(0);
  std::vector<std::byte> bytes(size);
  in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(size));
  if (!in) throw FormatError("short read on " + path.string());
  return bytes;
}

void write_file_atomic(const std::filesystem::path& path, std::span<const std::byte> data) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot open " + tmp.string() + " for writing");
    out.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size()));
    if (!out) throw Error("write failed on " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

Reader::Reader(const std::filesystem::path& path) : Reader(read_file(path), path.string()) {}

Reader::Reader(std::vector<std::byte> bytes, std::string origin)
    : bytes_(std::move(bytes)), origin_(std::move(origin)) {
  index();
}

Reader Reader::from_bytes(std::vector<std::byte> bytes, std::string origin) {
  return Reader(std::move(bytes), std::move(origin));
}

void Reader::index() {
  constexpr std::size_t kEocdSize = 22;
  if (bytes_.size() < kEocdSize) throw FormatError("zip: file too small: " + origin_);
  std::size_t eocd = std::string::npos;
  const std::size_t lowest = bytes_.size() >= kEocdSize + 0xFFFF ? bytes_.size() - kEocdSize - 0xFFFF : 0;
  for (std::size_t pos = bytes_.size() - kEocdSize + 1; pos-- > lowest;) {
    std::uint32_t sig;
    std::memcpy(&sig, bytes_.data() + pos, 4);
    if (sig == kEndOfCentralSig) {
      eocd = pos;
      break;
    }
  }
  if (eocd == std::string::npos) throw FormatError("zip: no end-of-central-directory in " + origin_);

  Cursor c(bytes_, eocd + 4, origin_);
  c.skip(4);  // disk numbers
  c.skip(2);
  std::uint64_t total = c.get<std::uint16_t>();
  c.skip(4);  // cd size
  std::uint64_t cd_offset = c.get<std::uint32_t>();

  if ((total == 0xFFFF || cd_offset == 0xFFFFFFFF) && eocd >= 20) {
    Cursor loc(bytes_, eocd - 20, origin_);
    if (loc.get<std::uint32_t>() == kZip64LocatorSig) {
      loc.skip(4);
      const auto z64 = loc.get<std::uint64_t>();
      Cursor rec(bytes_, z64, origin_);
      if (rec.get<std::uint32_t>() != kZip64EndSig)
        throw FormatError("zip: bad ZIP64 end record in " + origin_);
      rec.skip(8 + 2 + 2 + 4 + 4 + 8);
      total = rec.get<std::uint64_t>();
      rec.skip(8);
      cd_offset = rec.get<std::uint64_t>();
    }
  }

  Cursor cd(bytes_, cd_offset, origin_);
  for (std::uint64_t i = 0; i < total; ++i) {
    if (cd.get<std::uint32_t>() != kCentralHeaderSig)
      throw FormatError("zip: bad central directory header in " + origin_);
    cd.skip(2 + 2 + 2);  // versions, flags
    Entry e;
    e.method = cd.get<std::uint16_t>();
    cd.skip(4);  // time, date
    e.crc32 = cd.get<std::uint32_t>();
    e.compressed_size = cd.get<std::uint32_t>();
    e.uncompressed_size = cd.get<std::uint32_t>();
    const auto name_len = cd.get<std::uint16_t>();
    const auto extra_len = cd.get<std::uint16_t>();
    const auto comment_len = cd.get<std::uint16_t>();
    cd.skip(2 + 2 + 4);  // disk, internal attr, external attr
    e.local_header_offset = cd.get<std::uint32_t>();
    if (cd.pos() + name_len > bytes_.size()) throw FormatError("zip: truncated entry name");
    std::string name(reinterpret_cast<const char*>(bytes_.data() + cd.pos()), name_len);
    cd.skip(name_len);

    const std::size_t extra_end = cd.pos() + extra_len;
    while (cd.pos() + 4 <= extra_end) {
      const auto id = cd.get<std::uint16_t>();
      const auto size = cd.get<std::uint16_t>();
      const std::size_t field_end = cd.pos() + size;
      if (id == kZip64ExtraId) {
        if (e.uncompressed_size == 0xFFFFFFFF && cd.pos() + 8 <= field_end)
          e.uncompressed_size = cd.get<std::uint64_t>();
        if (e.compressed_size == 0xFFFFFFFF && cd.pos() + 8 <= field_end)
          e.compressed_size = cd.get<std::uint64_t>();
        if (e.local_header_offset == 0xFFFFFFFF && cd.pos() + 8 <= field_end)
          e.local_header_offset = cd.get<std::uint64_t>();
      }
      cd.skip(field_end - cd.pos());
    }
    cd.skip(extra_end - cd.pos());
    cd.skip(comment_len);
    entries_.emplace(std::move(name), e);
  }
}

bool Reader::contains(const std::string& name) const { return entries_.contains(name); }

std::vector<std::string> Reader::names() const {
  std::vector<std::string> out;
  out.reserve(entries_.size());
  for (const auto& [name, _] : entries_) out.push_back(name);
  return out;
}

std::vector<std::byte> Reader::read(const std::string& name) const {
  const auto it = entries_.find(name);
  if (it == entries_.end()) throw FormatError("zip: entry '" + name + "' not found in " + origin_);
  const Entry& e = it->second;

  Cursor local(bytes_, e.local_header_offset, origin_);
  if (local.get<std::uint32_t>() != kLocalHeaderSig)
    throw FormatError("zip: bad local header for " + name);
  local.skip(22);
  const auto name_len = local.get<std::uint16_t>();
  const auto extra_len = local.get<std::uint16_t>();
  local.skip(name_len + extra_len);
  const std::size_t start = local.pos();
  if (start + e.compressed_size > bytes_.size())
    throw IntegrityError("zip: entry " + name + " extends past end of " + origin_);
  const std::span<const std::byte> payload(bytes_.data() + start, e.compressed_size);

  std::vector<std::byte> data;
  if (e.method == kMethodStored) {
    if (e.compressed_size != e.uncompressed_size)
      throw IntegrityError("zip: stored entry size mismatch for " + name);
    data.assign(payload.begin(), payload.end());
  } else if (e.method == kMethodDeflate) {
    data = inflate_raw(payload, e.uncompressed_size, name);
  } else {
    throw FormatError("zip: unsupported compression method " + std::to_string(e.method) +
                      " for " + name);
  }
  if (crc_of(data) != e.crc32) throw IntegrityError("zip: CRC mismatch for entry " + name);
  return data;
}

void Writer::add(const std::string& name, std::span<const std::byte> data, bool compress) {
  if (data.size() >= 0xFFFFFFFFULL) throw Error("zip: entries above 4 GiB are not supported");
  Entry e{name, compress ? kMethodDeflate : kMethodStored, crc_of(data), data.size(), {}};
  if (compress)
    e.payload = deflate_raw(data);
  else
    e.payload.assign(data.begin(), data.end());
  entries_.push_back(std::move(e));
}

std::vector<std::byte> Writer::finish() const {
  std::vector<std::byte> out;
  std::vector<std::uint32_t> offsets;
  for (const auto& e : entries_) {
    offsets.push_back(static_cast<std::uint32_t>(out.size()));
    put<std::uint32_t>(out, kLocalHeaderSig);
    put<std::uint16_t>(out, 20);
    put<std::uint16_t>(out, 0);
    put<std::uint16_t>(out, e.method);
    put<std::uint16_t>(out, kDosTime);
    put<std::uint16_t>(out, kDosDate);
    put<std::uint32_t>(out, e.crc32);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(e.payload.size()));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(e.uncompressed_size));
    put<std::uint16_t>(out, static_cast<std::uint16_t>(e.name.size()));
    put<std::uint16_t>(out, 0);
    for (char ch : e.name) out.push_back(static_cast<std::byte>(ch));
    out.insert(out.end(), e.payload.begin(), e.payload.end());
  }
  const auto cd_start = static_cast<std::uint32_t>(out.size());
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    const auto& e = entries_[i];
    put<std::uint32_t>(out, kCentralHeaderSig);
    put<std::uint16_t>(out, 20);
    put<std::uint16_t>(out, 20);
    put<std::uint16_t>(out, 0);
    put<std::uint16_t>(out, e.method);
    put<std::uint16_t>(out, kDosTime);
    put<std::uint16_t>(out, kDosDate);
    put<std::uint32_t>(out, e.crc32);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(e.payload.size()));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(e.uncompressed_size));
    put<std::uint16_t>(out, static_cast<std::uint16_t>(e.name.size()));
    put<std::uint16_t>(out, 0);
    put<std::uint16_t>(out, 0);
    put<std::uint16_t>(out, 0);
    put<std::uint16_t>(out, 0);
    put<std::uint32_t>(out, 0);
    put<std::uint32_t>(out, offsets[i]);
    for (char ch : e.name) out.push_back(static_cast<std::byte>(ch));
  }
  const auto cd_size = static_cast<std::uint32_t>(out.size() - cd_start);
  put<std::uint32_t>(out, kEndOfCentralSig);
  put<std::uint16_t>(out, 0);
  put<std::uint16_t>(out, 0);
  put<std::uint16_t>(out, static_cast<std::uint16_t>(entries_.size()));
  put<std::uint16_t>(out, static_cast<std::uint16_t>(entries_.size()));
  put<std::uint32_t>(out, cd_size);
  put<std::uint32_t>(out, cd_start);
  put<std::uint16_t>(out, 0);
  return out;
}

void Writer::write_to(const std::filesystem::path& path) const {
  const auto bytes = finish();
  write_file_atomic(path, bytes);
}

}  // namespace unoranic::zip
