#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "doctest.h"
#include "nvc/data_io.hpp"
#include "nvc/error.hpp"
#include "nvc/synthetic.hpp"

using namespace nvc;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "nvc_test_data_io";
  fs::create_directories(dir);
  return dir / name;
}

void write_bytes(const fs::path& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

Frame random_rgb(int w, int h, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Frame f(w, h);
  for (auto& v : f.data) v = u(rng);
  return f;
}

Frame yuv_constant(std::uint8_t y, std::uint8_t u, std::uint8_t v) {
  Yuv420Planes p{4, 4, std::vector<std::uint8_t>(16, y), std::vector<std::uint8_t>(4, u),
                 std::vector<std::uint8_t>(4, v)};
  return frame_from_planes(p);
}

}  // namespace

TEST_CASE("zero yuv file") {
  const auto path = scratch("zeros.yuv");
  write_bytes(path, std::vector<std::uint8_t>(64 * 64 * 3 / 2 * 2, 0));
  const auto seq = read_yuv420(path, 64, 64, 2);
  REQUIRE(seq.frames.size() == 2);
  for (const auto& f : seq.frames) {
    for (std::size_t i = 0; i < f.plane_size(); ++i) CHECK(f.data[i] == 0.0);
    CHECK(f.native->y == std::vector<std::uint8_t>(64 * 64, 0));
  }
}

TEST_CASE("truncated and odd yuv files") {
  const auto path = scratch("short.yuv");
  write_bytes(path, std::vector<std::uint8_t>(64 * 64 * 3 / 2 * 2, 0));
  CHECK_THROWS_AS(read_yuv420(path, 64, 64, 3), Error);
  try {
    read_yuv420(path, 64, 64, 3);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kTruncatedFile);
  }
  try {
    read_yuv420(path, 63, 64, 1);
    FAIL("expected odd-dimensions");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kOddDimensions);
  }
}

TEST_CASE("ramp plane reads back as byte / 255") {
  const int w = 64, h = 64;
  std::vector<std::uint8_t> bytes(w * h * 3 / 2);
  for (int i = 0; i < w * h; ++i) bytes[i] = static_cast<std::uint8_t>((i * 7) % 256);
  for (std::size_t i = w * h; i < bytes.size(); ++i) bytes[i] = static_cast<std::uint8_t>(i % 251);
  const auto path = scratch("ramp.yuv");
  write_bytes(path, bytes);
  const auto seq = read_yuv420(path, w, h, 1);
  const Frame& f = seq.frames[0];
  for (int i = 0; i < w * h; ++i) CHECK(std::abs(f.data[i] - bytes[i] / 255.0) < 1e-9);
  // Native planes are kept losslessly and written back unchanged.
  const auto out = scratch("ramp_out.yuv");
  write_yuv420(out, seq.frames);
  std::ifstream in(out, std::ios::binary);
  std::vector<std::uint8_t> back((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  CHECK(back == bytes);
}

TEST_CASE("limited range gray and black") {
  // Y'=(128-16)/219 with zero chroma difference gives R=G=B=Y'.
  const Frame gray = yuv_to_rgb(yuv_constant(128, 128, 128));
  for (double v : gray.data) CHECK(v == doctest::Approx(112.0 / 219.0).epsilon(1e-12));
  const Frame black = yuv_to_rgb(yuv_constant(16, 128, 128));
  for (double v : black.data) CHECK(std::abs(v) < 1e-12);
  const Frame white = yuv_to_rgb(yuv_constant(235, 128, 128));
  for (double v : white.data) CHECK(std::abs(v - 1.0) < 1e-12);
}

TEST_CASE("primaries convert to the declared matrix") {
  Frame red(2, 2);
  for (int i = 0; i < 4; ++i) red.data[i] = 1.0;
  const Frame yuv = rgb_to_yuv(red);
  CHECK(yuv.data[0] * 255.0 == doctest::Approx(16.0 + 219.0 * 0.299));
  CHECK(yuv.data[4] * 255.0 == doctest::Approx(128.0 - 224.0 * 0.299 / 1.772));
  CHECK(yuv.data[8] * 255.0 == doctest::Approx(128.0 + 224.0 * 0.701 / 1.402));
}

TEST_CASE("rgb yuv round trip within 2/255") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Frame f = random_rgb(16, 12, seed);
    const Frame back = yuv_to_rgb(rgb_to_yuv(f));
    double worst = 0.0;
    for (std::size_t i = 0; i < f.data.size(); ++i) worst = std::max(worst, std::abs(f.data[i] - back.data[i]));
    CHECK(worst <= 2.0 / 255.0);
  }
  const Frame f = random_rgb(8, 8, 99);
  const Frame copy = f;
  (void)rgb_to_yuv(f);
  CHECK(f == copy);
}

TEST_CASE("native 420 round trip through the working copy") {
  std::mt19937 rng(5);
  std::uniform_int_distribution<int> byte(16, 235);
  Yuv420Planes p{8, 8, std::vector<std::uint8_t>(64), std::vector<std::uint8_t>(16),
                 std::vector<std::uint8_t>(16)};
  for (auto& v : p.y) v = static_cast<std::uint8_t>(byte(rng));
  for (auto& v : p.u) v = static_cast<std::uint8_t>(byte(rng));
  for (auto& v : p.v) v = static_cast<std::uint8_t>(byte(rng));
  const Frame f = frame_from_planes(p);
  CHECK(to_yuv420_planes(f) == p);
  // Constant chroma survives bilinear upsampling exactly.
  const Frame c = yuv_constant(100, 90, 200);
  for (std::size_t i = 16; i < 32; ++i) CHECK(c.data[i] == doctest::Approx(90.0 / 255.0));
}

TEST_CASE("padding") {
  const Frame f = random_rgb(100, 100, 1);
  const PaddedFrame p = pad_to_multiple(f, 64);
  CHECK(p.frame.width == 128);
  CHECK(p.frame.height == 128);
  CHECK(p.original_width == 100);
  CHECK(p.original_height == 100);
  CHECK(p.frame.at(1, 127, 127) == f.at(1, 99, 99));
  CHECK(p.frame.at(2, 5, 110) == f.at(2, 5, 99));
  CHECK(crop(p.frame, p.original_width, p.original_height) == f);

  const Frame g = random_rgb(128, 128, 2);
  const PaddedFrame q = pad_to_multiple(g, 64);
  CHECK(q.frame == g);
  CHECK(pad_to_multiple(random_rgb(7, 3, 3), 1).frame.width == 7);
}

TEST_CASE("png round trip") {
  Frame f(6, 4);
  for (std::size_t i = 0; i < f.data.size(); ++i) f.data[i] = static_cast<double>(i % 256) / 255.0;
  const auto path = scratch("f.png");
  write_png(f, path);
  const Frame back = read_png(path);
  REQUIRE(back.width == 6);
  for (std::size_t i = 0; i < f.data.size(); ++i) CHECK(back.data[i] == doctest::Approx(f.data[i]));
}

TEST_CASE("manifest round trip and sequence loading") {
  const fs::path dir = scratch("dataset");
  fs::remove_all(dir);
  auto seqs = make_toy_clips(3, 64, 64, 4, 17);
  write_dataset(dir, seqs);
  const auto m = load_manifest(dir / "manifest.json");
  REQUIRE(m.sequences.size() == 3);
  const auto loaded = load_sequence(m, m.sequences[1]);
  CHECK(loaded.frames.size() == 4);
  CHECK(loaded.frames[0].color_space == ColorSpace::kRgb);
  save_manifest(m, dir / "copy.json");
  const auto again = load_manifest(dir / "copy.json");
  CHECK(again.sequences[2].name == m.sequences[2].name);
  CHECK(again.sequences[2].frames == 4);
}

TEST_CASE("clip sampler determinism and bounds") {
  auto seqs = make_toy_clips(3, 80, 72, 7, 3);
  ClipSampler a(seqs, 7, 64, 7);
  ClipSampler b(seqs, 7, 64, 7);
  for (int i = 0; i < 20; ++i) {
    const ClipCrop ca = a.next_crop();
    CHECK(ca == b.next_crop());
    CHECK(ca.first_frame == 0);
    CHECK(ca.x + 64 <= 80);
    CHECK(ca.y + 64 <= 72);
  }
  const Clip clip = a.next();
  CHECK(clip.frames.size() == 7);
  CHECK(clip.frames[0].width == 64);

  auto small = make_toy_clips(2, 48, 48, 7, 3);
  try {
    ClipSampler bad(small, 7, 64, 1);
    FAIL("expected empty-dataset");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kEmptyDataset);
  }
}

TEST_CASE("sampler over a dataset directory") {
  const fs::path dir = scratch("dataset2");
  fs::remove_all(dir);
  write_dataset(dir, make_toy_clips(2, 64, 64, 3, 9));
  auto s1 = sample_training_clips(dir, 2, 32, 5);
  auto s2 = sample_training_clips(dir, 2, 32, 5);
  for (int i = 0; i < 5; ++i) CHECK(s1.next().frames[1] == s2.next().frames[1]);
}

TEST_CASE("synthetic translate is a sub-pixel exact pan") {
  const auto seq = make_synthetic_sequence(SyntheticKind::kStatic, 64, 64, 3, 1);
  CHECK(seq.frames[0] == seq.frames[2]);
  const auto pan = make_synthetic_sequence(SyntheticKind::kTranslate, 64, 64, 3, 1);
  CHECK_FALSE(pan.frames[0] == pan.frames[1]);
  for (const auto& f : pan.frames) {
    for (double v : f.data) CHECK((v >= 0.0 && v <= 1.0));
  }
}
