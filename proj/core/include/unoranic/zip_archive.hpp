#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace unoranic::zip {

// Read-only view of a ZIP archive (stored and deflate entries, ZIP64 extras).
// The archive is loaded into memory on construction.
class Reader {
 public:
  explicit Reader(const std::filesystem::path& path);
  static Reader from_bytes(std::vector<std::byte> bytes, std::string origin = "<memory>");

  bool contains(const std::string& name) const;
  std::vector<std::string> names() const;
  // Decompresses and CRC-checks one entry. Throws FormatError if absent.
  std::vector<std::byte> read(const std::string& name) const;

 private:
  struct Entry {
    std::uint16_t method = 0;
    std::uint32_t crc32 = 0;
    std::uint64_t compressed_size = 0;
    std::uint64_t uncompressed_size = 0;
    std::uint64_t local_header_offset = 0;
  };

  Reader(std::vector<std::byte> bytes, std::string origin);
  void index();

  std::vector<std::byte> bytes_;
  std::string origin_;
  std::map<std::string, Entry> entries_;
};

// Writes a ZIP archive with fixed timestamps so identical content yields
// byte-identical files.
class Writer {
 public:
  void add(const std::string& name, std::span<const std::byte> data, bool compress = false);
  std::vector<std::byte> finish() const;
  // Writes to `path` through a sibling temporary file and a rename.
  void write_to(const std::filesystem::path& path) const;

 private:
  struct Entry {
    std::string name;
    std::uint16_t method;
    std::uint32_t crc32;
    std::uint64_t uncompressed_size;
    std::vector<std::byte> payload;
  };
  std::vector<Entry> entries_;
};

std::vector<std::byte> read_file(const std::filesystem::path& path);
void write_file_atomic(const std::filesystem::path& path, std::span<const std::byte> data);

}  // namespace unoranic::zip
