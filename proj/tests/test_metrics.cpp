#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>

#include "doctest.h"
#include "nvc/data_io.hpp"
#include "nvc/error.hpp"
#include "nvc/metrics.hpp"
#include "oracles.hpp"

using namespace nvc;
using namespace nvc::oracle;

namespace {

Frame filled(int w, int h, double v) {
  Frame f(w, h);
  std::fill(f.data.begin(), f.data.end(), v);
  return f;
}

ErrorCode bd_error(const RDCurve& a, const RDCurve& b) {
  try {
    bd_rate(a, b);
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return ErrorCode::kIoError;
}

}  // namespace

TEST_CASE("psnr basics") {
  const Frame a = filled(8, 8, 0.5);
  const Frame b = filled(8, 8, 0.6);
  CHECK(psnr_rgb(a, b).db == doctest::Approx(20.0).epsilon(1e-12));
  const Psnr same = psnr_rgb(a, a);
  CHECK(same.db == 100.0);
  CHECK(same.lossless);
  CHECK(psnr_from_mse(1e-12).lossless);
  try {
    psnr_rgb(a, filled(8, 6, 0.5));
    FAIL("expected dim-mismatch");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kDimMismatch);
  }
}

TEST_CASE("compound yuv psnr weights 6:1:1") {
  Yuv420Planes p{8, 8, std::vector<std::uint8_t>(64, 100), std::vector<std::uint8_t>(16, 120),
                 std::vector<std::uint8_t>(16, 130)};
  Yuv420Planes q = p;
  for (auto& v : q.y) v = 101;
  for (auto& v : q.u) v = 125;
  for (auto& v : q.v) v = 133;
  const YuvPsnr r = psnr_yuv_compound(frame_from_planes(p), frame_from_planes(q));
  const double py = 10 * std::log10(255.0 * 255.0 / 1.0);
  const double pu = 10 * std::log10(255.0 * 255.0 / 25.0);
  const double pv = 10 * std::log10(255.0 * 255.0 / 9.0);
  CHECK(r.y.db == doctest::Approx(py).epsilon(1e-12));
  CHECK(r.u.db == doctest::Approx(pu).epsilon(1e-12));
  CHECK(r.v.db == doctest::Approx(pv).epsilon(1e-12));
  CHECK(r.compound == doctest::Approx((6 * py + pu + pv) / 8).epsilon(1e-12));
  CHECK((6 * 40.0 + 30.0 + 30.0) / 8 == 37.5);
  const YuvPsnr same = psnr_yuv_compound(frame_from_planes(p), frame_from_planes(p));
  CHECK(same.compound == 100.0);
  CHECK(same.y.lossless);
}

TEST_CASE("pchip reproduces data and integrates exactly") {
  const Pchip p({0, 1, 2, 4}, {0, 1, 1.5, 4});
  CHECK(p(0) == 0);
  CHECK(p(2) == doctest::Approx(1.5));
  CHECK(p(4) == doctest::Approx(4));
  // Integral against a fine midpoint sum.
  double sum = 0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) sum += p(0.3 + (3.4 - 0.3) * (i + 0.5) / n);
  CHECK(p.integral(0.3, 3.4) == doctest::Approx(sum * (3.4 - 0.3) / n).epsilon(1e-9));
  const Pchip line({1, 3}, {2, 6});
  CHECK(line.integral(1, 3) == doctest::Approx(8.0));
}

TEST_CASE("bd-rate identity and half rate") {
  std::mt19937_64 rng(1);
  for (int i = 0; i < 20; ++i) {
    const RDCurve a = random_curve(rng, 4);
    CHECK(bd_rate(a, a) == 0.0);
    RDCurve half = a;
    for (auto& p : half.points) p.bpp /= 2;
    CHECK(std::abs(bd_rate(a, half) - (-50.0)) < 1e-10);
  }
}

TEST_CASE("bd-rate matches the dense integration oracle") {
  std::mt19937_64 rng(2024);
  for (int i = 0; i < 20; ++i) {
    const RDCurve a = random_curve(rng, 4);
    RDCurve t = random_curve(rng, 4);
    const double q0 = t.points.front().quality;
    for (auto& p : t.points) p.quality = a.points.front().quality + (p.quality - q0) * 0.9 + 0.2;
    const double got = bd_rate(a, t);
    const double want = oracle_bd_rate(a, t);
    CAPTURE(i);
    CHECK(std::abs(got - want) <= 1e-6 * std::max(1.0, std::abs(want)));
  }
}

TEST_CASE("bd-rate matches frozen reference values") {
  struct Case {
    RDCurve a, t;
    double expected;
  };
  const std::vector<Case> cases = {
      {curve({0.05, 0.1, 0.2, 0.4}, {30.1, 32.5, 34.6, 36.2}),
       curve({0.045, 0.09, 0.185, 0.36}, {30.3, 32.6, 34.9, 36.1}), -14.136717408391963},
      {curve({0.02, 0.05, 0.11, 0.3}, {28.0, 31.0, 33.2, 36.9}),
       curve({0.03, 0.06, 0.1, 0.25}, {28.5, 31.9, 33.0, 37.5}), -4.522534397718836},
      {curve({0.1, 0.2, 0.3, 0.5, 0.9}, {31, 33, 34, 35.5, 37}),
       curve({0.08, 0.15, 0.31, 0.6}, {30.5, 32.7, 34.8, 36.6}), -18.105354730947898},
  };
  for (const auto& c : cases) CHECK(bd_rate(c.a, c.t) == doctest::Approx(c.expected).epsilon(1e-9));
}

TEST_CASE("bd-rate antisymmetry within interpolation tolerance") {
  std::mt19937_64 rng(7);
  for (int i = 0; i < 20; ++i) {
    const RDCurve a = random_curve(rng, 4);
    RDCurve t = a;
    std::uniform_real_distribution<double> u(0.85, 1.1);
    const double f = u(rng);
    for (auto& p : t.points) p.bpp *= f;
    const double fwd = bd_rate(a, t);
    const double back = bd_rate(t, a);
    // In log-rate terms the two directions are exact negatives.
    CHECK(std::log10(1 + fwd / 100) == doctest::Approx(-std::log10(1 + back / 100)).epsilon(1e-9));
    CHECK(std::abs(fwd + back) < 0.1 * std::max(1.0, std::abs(fwd)) + 1.5);
  }
}

TEST_CASE("bd-rate errors and warnings") {
  const RDCurve a = curve({0.1, 0.2, 0.4, 0.8}, {30, 32, 34, 36});
  const RDCurve far = curve({0.1, 0.2, 0.4, 0.8}, {40, 42, 44, 46});
  CHECK(bd_error(a, far) == ErrorCode::kNoOverlap);
  const RDCurve bumpy = curve({0.1, 0.2, 0.4, 0.8}, {30, 33, 32, 36});
  CHECK(bd_error(a, bumpy) == ErrorCode::kDegenerateCurve);
  const RDCurve single = curve({0.1}, {30});
  CHECK(bd_error(a, single) == ErrorCode::kDegenerateCurve);
  const RDCurve two = curve({0.15, 0.5}, {31, 35});
  std::vector<std::string> warnings;
  CHECK(std::isfinite(bd_rate(a, two, &warnings)));
  CHECK(warnings.size() == 1);
}

TEST_CASE("channel bitrate ratios") {
  const auto two = channel_bitrate_ratio({{2.0, 1.0}, {1.0, 0.0}}, LatentKind::kContextual);
  CHECK(two.ratios == std::vector<double>{0.75, 0.25});
  CHECK(two.channels == std::vector<int>{0, 1});
  const auto one = channel_bitrate_ratio({{5.0}}, LatentKind::kMotion);
  CHECK(one.ratios == std::vector<double>{1.0});
  try {
    channel_bitrate_ratio({{0.0, 0.0}}, LatentKind::kMotion);
    FAIL("expected zero-total-bits");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kZeroTotalBits);
  }

  std::mt19937_64 rng(3);
  std::exponential_distribution<double> e(0.1);
  for (int trial = 0; trial < 50; ++trial) {
    const int c = 1 + trial * 7;
    std::vector<std::vector<double>> bits(5, std::vector<double>(c));
    for (auto& f : bits) for (auto& b : f) b = e(rng);
    const auto r = channel_bitrate_ratio(bits, LatentKind::kContextual);
    CHECK(std::abs(std::accumulate(r.ratios.begin(), r.ratios.end(), 0.0) - 1.0) < 1e-9);
    CHECK(std::is_sorted(r.ratios.rbegin(), r.ratios.rend()));
    // Relabelling channels permutes the report identically.
    std::vector<int> perm(c);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    auto permuted = bits;
    for (std::size_t t = 0; t < bits.size(); ++t) {
      for (int k = 0; k < c; ++k) permuted[t][perm[k]] = bits[t][k];
    }
    const auto rp = channel_bitrate_ratio(permuted, LatentKind::kContextual);
    for (int k = 0; k < c; ++k) {
      CHECK(rp.channels[k] == perm[r.channels[k]]);
      CHECK(rp.ratios[k] == doctest::Approx(r.ratios[k]).epsilon(1e-12));
    }
    CHECK(top_channels(r, 100).ratios.size() == static_cast<std::size_t>(std::min(c, 100)));
  }
}

TEST_CASE("averaged reports stay normalized") {
  const auto a = channel_bitrate_ratio({{3.0, 1.0}}, LatentKind::kContextual);
  const auto b = channel_bitrate_ratio({{1.0, 1.0}}, LatentKind::kContextual);
  const std::vector<ChannelBitrateReport> both = {a, b};
  const auto m = average_reports(both);
  CHECK(m.ratios[0] == doctest::Approx(0.625));
  CHECK(m.ratios[1] == doctest::Approx(0.375));
}

TEST_CASE("rd csv round trip and table bd-rate") {
  const auto dir = std::filesystem::temp_directory_path() / "nvc_test_metrics";
  std::filesystem::create_directories(dir);
  std::vector<RdRow> anchor, test;
  for (int s = 0; s < 3; ++s) {
    for (int l = 0; l < 4; ++l) {
      const double bpp = 0.05 * std::pow(2.0, l) * (1 + 0.1 * s);
      anchor.push_back({"seq" + std::to_string(s), l, bpp, 30.0 + 2 * l + s, 32.0 + 2 * l});
      test.push_back({"seq" + std::to_string(s), l, bpp / 2, 30.0 + 2 * l + s, 32.0 + 2 * l});
    }
  }
  write_rd_csv(dir / "a.csv", anchor);
  write_rd_csv(dir / "t.csv", test);
  const auto ra = read_rd_csv(dir / "a.csv");
  REQUIRE(ra.size() == anchor.size());
  CHECK(ra[5].bpp == doctest::Approx(anchor[5].bpp).epsilon(1e-9));
  const auto summary = bd_rate_tables(ra, read_rd_csv(dir / "t.csv"), QualityMetric::kRgb);
  CHECK(summary.per_sequence.size() == 3);
  CHECK(summary.average == doctest::Approx(-50.0).epsilon(1e-7));

  const auto curves = curves_from_rows(ra, QualityMetric::kYuv);
  std::vector<RDCurve> list;
  for (const auto& [_, c] : curves) list.push_back(c);
  write_rd_plot_svg(dir / "rd.svg", list, "RD", "YUV PSNR (dB)");
  CHECK(std::filesystem::file_size(dir / "rd.svg") > 100);
}
