#pragma once

#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "nvc/frame.hpp"

namespace nvc {

// ---------------------------------------------------------------------------
// Quality.

inline constexpr double kPsnrCap = 100.0;

struct Psnr {
  double db = 0.0;
  bool lossless = false;  // capped at kPsnrCap
};

// PSNR against a peak of 1.0 for an MSE on [0, 1] samples.
Psnr psnr_from_mse(double mse);

// Over the three RGB channels.
Psnr psnr_rgb(const Frame& a, const Frame& b);

struct YuvPsnr {
  Psnr y, u, v;
  double compound = 0.0;  // (6 Y + U + V) / 8
};

// Computed on the native 4:2:0 planes of both frames.
YuvPsnr psnr_yuv_compound(const Frame& a, const Frame& b);

// ---------------------------------------------------------------------------
// Rate-distortion curves and BD-rate.

struct RDPoint {
  double bpp = 0.0;
  double quality = 0.0;
  int lambda_index = 0;
  bool lossless = false;
};

struct RDCurve {
  std::string label;
  std::vector<RDPoint> points;
};

// Sorts by bpp and checks the curve is usable: at least two points, bpp > 0
// and strictly increasing, quality finite and strictly increasing.
// Throws kDegenerateCurve otherwise.
RDCurve normalized_curve(const RDCurve& curve);

// Monotone piecewise-cubic (Fritsch-Carlson / PCHIP) interpolant.
class Pchip {
 public:
  Pchip(std::vector<double> x, std::vector<double> y);

  double operator()(double x) const;
  // Exact integral over [a, b] within the knot range.
  double integral(double a, double b) const;

  double x_min() const { return x_.front(); }
  double x_max() const { return x_.back(); }

 private:
  std::size_t segment(double x) const;

  std::vector<double> x_, y_, d_;
};

// Bjontegaard delta rate in percent: the mean of test/anchor rate ratios
// (in log domain) over the common quality interval, minus one, times 100.
// Negative values mean the test saves bits. Curves with fewer than four
// points are accepted with a warning appended to *warnings.
double bd_rate(const RDCurve& anchor, const RDCurve& test,
               std::vector<std::string>* warnings = nullptr);

// ---------------------------------------------------------------------------
// Per-channel bitrate ratios (energy compaction analysis).

enum class LatentKind { kContextual, kMotion };

struct ChannelBitrateReport {
  LatentKind kind = LatentKind::kContextual;
  std::vector<double> ratios;  // descending
  std::vector<int> channels;   // original channel index of each ratio
};

// bits_per_frame[t][c] = sum over the positions of channel c of frame t of
// -log2 p. Throws kZeroTotalBits when nothing was spent.
ChannelBitrateReport channel_bitrate_ratio(const std::vector<std::vector<double>>& bits_per_frame,
                                           LatentKind kind);

// Averages per-channel ratios over sequences (by original channel index)
// and re-sorts.
ChannelBitrateReport average_reports(std::span<const ChannelBitrateReport> reports);

ChannelBitrateReport top_channels(const ChannelBitrateReport& report, std::size_t count = 100);

// ---------------------------------------------------------------------------
// CSV and plots.

struct RdRow {
  std::string sequence;
  int lambda_index = 0;
  double bpp = 0.0;
  double psnr_rgb = 0.0;
  double psnr_yuv = 0.0;
};

// Header: sequence,lambda_index,bpp,psnr_rgb,psnr_yuv
void write_rd_csv(const std::filesystem::path& path, std::span<const RdRow> rows);
std::vector<RdRow> read_rd_csv(const std::filesystem::path& path);

enum class QualityMetric { kRgb, kYuv };

// One curve per sequence name.
std::map<std::string, RDCurve> curves_from_rows(std::span<const RdRow> rows, QualityMetric metric);

struct BdRateSummary {
  std::map<std::string, double> per_sequence;
  double average = 0.0;
};

// Per-sequence BD-rate over the sequences present in both tables, averaged.
BdRateSummary bd_rate_tables(std::span<const RdRow> anchor, std::span<const RdRow> test,
                             QualityMetric metric);

// Static SVG plot of quality vs bpp.
void write_rd_plot_svg(const std::filesystem::path& path, std::span<const RDCurve> curves,
                       const std::string& title, const std::string& y_label);

void write_channel_plot_svg(const std::filesystem::path& path, const ChannelBitrateReport& report,
                            const std::string& title);

}  // namespace nvc
