#include <gtest/gtest.h>

#include <cstring>
#include <fstream>

#include "helpers.hpp"
#include "unoranic/dataio.hpp"
#include "unoranic/errors.hpp"
#include "unoranic/npy.hpp"
#include "unoranic/zip_archive.hpp"

using namespace unoranic;
using unoranic::fixtures::data_dir;
using unoranic::fixtures::TempDir;

namespace {

// Same formula as tests/data/make_fixtures.py.
int fixture_pixel(int i, int y, int x, int channel) { return (i * 31 + y * 7 + x * 3 + 50 * channel) % 256; }

std::vector<std::byte> bytes_of(const std::string& s) {
  std::vector<std::byte> out(s.size());
  std::memcpy(out.data(), s.data(), s.size());
  return out;
}

}  // namespace

TEST(Npy, ParsesNumpyFloat64) {
  const auto a = npy::parse(zip::read_file(data_dir() / "float64_2x3.npy"));
  EXPECT_EQ(a.dtype, npy::DType::f64);
  EXPECT_EQ(a.shape, (std::vector<std::int64_t>{2, 3}));
  const auto v = a.to_vector<double>();
  for (int i = 0; i < 6; ++i) EXPECT_EQ(v[i], i / 4.0);
}

TEST(Npy, RejectsFortranOrderAndBigEndian) {
  EXPECT_THROW(npy::parse(zip::read_file(data_dir() / "int32_fortran.npy")), FormatError);
  EXPECT_THROW(npy::parse(zip::read_file(data_dir() / "big_endian.npy")), FormatError);
}

TEST(Npy, RoundTripsEveryDtype) {
  const std::vector<std::int32_t> values{-3, 0, 7, 1 << 20};
  const auto a = npy::make_array<std::int32_t>({2, 2}, values);
  const auto b = npy::parse(npy::serialize(a));
  EXPECT_EQ(b.shape, a.shape);
  EXPECT_EQ(b.to_vector<std::int32_t>(), values);
  const std::vector<float> f{0.25F, -1.5F};
  EXPECT_EQ(npy::parse(npy::serialize(npy::make_array<float>({2}, f))).to_vector<float>(), f);
}

TEST(Npy, SerializedHeaderIsAligned) {
  const std::vector<std::uint8_t> v{1, 2, 3};
  const auto bytes = npy::serialize(npy::make_array<std::uint8_t>({3}, v));
  std::uint16_t header_len = 0;
  std::memcpy(&header_len, bytes.data() + 8, 2);
  EXPECT_EQ((10 + header_len) % 64, 0);
  EXPECT_EQ(bytes.size(), 10u + header_len + 3);
}

TEST(Npy, RejectsTruncatedData) {
  auto bytes = npy::serialize(npy::make_array<double>({4}, std::vector<double>{1, 2, 3, 4}));
  bytes.resize(bytes.size() - 8);
  EXPECT_THROW(npy::parse(bytes), FormatError);
}

TEST(Zip, WriterOutputIsReadableAndDeterministic) {
  zip::Writer w;
  w.add("a.txt", bytes_of("hello"));
  w.add("b.bin", bytes_of(std::string(1000, 'x')), /*compress=*/true);
  const auto first = w.finish();
  EXPECT_EQ(first, w.finish());
  const auto r = zip::Reader::from_bytes(first);
  EXPECT_TRUE(r.contains("a.txt"));
  EXPECT_EQ(r.read("a.txt"), bytes_of("hello"));
  EXPECT_EQ(r.read("b.bin"), bytes_of(std::string(1000, 'x')));
  EXPECT_THROW(r.read("missing"), FormatError);
}

TEST(Zip, CorruptedPayloadFailsCrc) {
  zip::Writer w;
  w.add("a.txt", bytes_of("hello world"));
  auto bytes = w.finish();
  // Local header is 30 bytes + name; flip a payload byte.
  bytes[30 + 5 + 2] ^= std::byte{0x1};
  EXPECT_THROW(zip::Reader::from_bytes(bytes).read("a.txt"), IntegrityError);
}

TEST(Zip, RejectsNonZipInput) {
  EXPECT_THROW(zip::Reader::from_bytes(bytes_of("definitely not a zip archive")), FormatError);
}

TEST(Container, LoadsNumpyCompressedGrayscale) {
  const auto ds = data::load_container(data_dir() / "gray_compressed.npz", data::Split::train);
  ASSERT_EQ(ds.size(), 6u);
  EXPECT_EQ(ds.shape(), (data::ImageShape{1, 5, 7}));
  for (int i = 0; i < 6; ++i) {
    EXPECT_EQ(ds.samples[i].label, i % 3);
    for (int y = 0; y < 5; ++y)
      for (int x = 0; x < 7; ++x)
        EXPECT_FLOAT_EQ(ds.samples[i].at(0, y, x), fixture_pixel(i, y, x, 0) / 255.0F);
  }
  EXPECT_EQ(ds.class_count, 3);
}

TEST(Container, LoadsRgbAsChannelFirst) {
  const auto splits = data::load_container_splits(data_dir() / "rgb_stored.npz");
  EXPECT_EQ(splits.test.size(), 4u);
  EXPECT_EQ(splits.val.size(), 3u);
  const auto& s = splits.test.samples[2];
  EXPECT_EQ(s.shape, (data::ImageShape{3, 4, 4}));
  for (int c = 0; c < 3; ++c) EXPECT_FLOAT_EQ(s.at(c, 1, 3), fixture_pixel(2, 1, 3, c) / 255.0F);
}

TEST(Container, MissingKeyNamesTheKey) {
  try {
    data::load_container(data_dir() / "missing_labels.npz", data::Split::train);
    FAIL() << "expected FormatError";
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("train_labels"), std::string::npos) << e.what();
  }
}

TEST(Container, CountMismatchIsIntegrityError) {
  EXPECT_THROW(data::load_container(data_dir() / "count_mismatch.npz", data::Split::train), IntegrityError);
}

TEST(Container, EndpointPixelMapping) {
  TempDir dir("endpoints");
  zip::Writer w;
  const std::vector<std::uint8_t> px{0, 255, 128, 1};
  const std::vector<std::uint8_t> labels{0};
  for (const char* split : {"train", "val", "test"}) {
    w.add(std::string(split) + "_images.npy", npy::serialize(npy::make_array<std::uint8_t>({1, 2, 2}, px)));
    w.add(std::string(split) + "_labels.npy", npy::serialize(npy::make_array<std::uint8_t>({1, 1}, labels)));
  }
  w.write_to(dir / "c.npz");
  const auto ds = data::load_container(dir / "c.npz", data::Split::val);
  EXPECT_EQ(ds.samples[0].pixels[0], 0.0F);
  EXPECT_EQ(ds.samples[0].pixels[1], 1.0F);
}

TEST(Container, WriterRoundTripIsBitExactAfterQuantization) {
  TempDir dir("roundtrip");
  auto splits = unoranic::fixtures::small_synthetic(12, 4, 5);
  data::write_container(dir / "s.npz", splits);
  const auto back = data::load_container_splits(dir / "s.npz");
  for (auto split : {data::Split::train, data::Split::val, data::Split::test}) {
    const auto& a = splits.get(split);
    const auto& b = back.get(split);
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
      EXPECT_EQ(a.samples[i].label, b.samples[i].label);
      for (std::size_t p = 0; p < a.samples[i].pixels.size(); ++p)
        EXPECT_EQ(std::round(a.samples[i].pixels[p] * 255.0F) / 255.0F, b.samples[i].pixels[p]);
    }
  }
  // A second write of the reloaded data reproduces the file byte for byte.
  data::write_container(dir / "t.npz", back);
  EXPECT_EQ(zip::read_file(dir / "s.npz"), zip::read_file(dir / "t.npz"));
}

TEST(Container, RandomArchivesLoadIntoUnitRange) {
  TempDir dir("random");
  std::mt19937 gen(3);
  for (int trial = 0; trial < 5; ++trial) {
    const int n = 1 + trial, side = 3 + trial;
    std::vector<std::uint8_t> px(static_cast<std::size_t>(n) * side * side);
    for (auto& p : px) p = static_cast<std::uint8_t>(gen() & 0xff);
    std::vector<std::int64_t> labels(n, 0);
    zip::Writer w;
    w.add("test_images.npy", npy::serialize(npy::make_array<std::uint8_t>({n, side, side}, px)), true);
    w.add("test_labels.npy", npy::serialize(npy::make_array<std::int64_t>({n}, labels)), true);
    w.write_to(dir / "r.npz");
    const auto ds = data::load_container(dir / "r.npz", data::Split::test);
    for (const auto& s : ds.samples)
      for (float p : s.pixels) EXPECT_TRUE(p >= 0.0F && p <= 1.0F);
  }
}
