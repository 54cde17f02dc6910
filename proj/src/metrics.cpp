#include "nvc/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include "nvc/data_io.hpp"
#include "nvc/error.hpp"

namespace nvc {

Psnr psnr_from_mse(double mse) {
  if (mse <= 0.0) return {kPsnrCap, true};
  const double db = 10.0 * std::log10(1.0 / mse);
  if (db >= kPsnrCap) return {kPsnrCap, true};
  return {db, false};
}

namespace {

void require_same_dims(int wa, int ha, int wb, int hb) {
  if (wa != wb || ha != hb) {
    throw Error(ErrorCode::kDimMismatch, std::to_string(wa) + "x" + std::to_string(ha) + " vs " +
                                             std::to_string(wb) + "x" + std::to_string(hb));
  }
}

double plane_mse(const std::vector<std::uint8_t>& a, const std::vector<std::uint8_t>& b) {
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = (static_cast<double>(a[i]) - b[i]) / 255.0;
    sum += d * d;
  }
  return sum / static_cast<double>(a.size());
}

}  // namespace

Psnr psnr_rgb(const Frame& a, const Frame& b) {
  require_same_dims(a.width, a.height, b.width, b.height);
  const Frame ra = yuv_to_rgb(a);
  const Frame rb = yuv_to_rgb(b);
  double sum = 0.0;
  for (std::size_t i = 0; i < ra.data.size(); ++i) {
    const double d = ra.data[i] - rb.data[i];
    sum += d * d;
  }
  return psnr_from_mse(sum / static_cast<double>(ra.data.size()));
}

YuvPsnr psnr_yuv_compound(const Frame& a, const Frame& b) {
  require_same_dims(a.width, a.height, b.width, b.height);
  const Yuv420Planes pa = to_yuv420_planes(a);
  const Yuv420Planes pb = to_yuv420_planes(b);
  YuvPsnr out;
  out.y = psnr_from_mse(plane_mse(pa.y, pb.y));
  out.u = psnr_from_mse(plane_mse(pa.u, pb.u));
  out.v = psnr_from_mse(plane_mse(pa.v, pb.v));
  out.compound = (6.0 * out.y.db + out.u.db + out.v.db) / 8.0;
  return out;
}

RDCurve normalized_curve(const RDCurve& curve) {
  RDCurve c = curve;
  if (c.points.size() < 2) {
    throw Error(ErrorCode::kDegenerateCurve, "curve '" + c.label + "' has fewer than two points");
  }
  std::sort(c.points.begin(), c.points.end(),
            [](const RDPoint& a, const RDPoint& b) { return a.bpp < b.bpp; });
  for (std::size_t i = 0; i < c.points.size(); ++i) {
    const auto& p = c.points[i];
    if (!(p.bpp > 0.0) || !std::isfinite(p.bpp) || !std::isfinite(p.quality)) {
      throw Error(ErrorCode::kDegenerateCurve, "curve '" + c.label + "' has a non-finite point");
    }
    if (i > 0 && (p.bpp <= c.points[i - 1].bpp || p.quality <= c.points[i - 1].quality)) {
      throw Error(ErrorCode::kDegenerateCurve,
                  "curve '" + c.label + "' is not strictly increasing in rate and quality");
    }
  }
  return c;
}

Pchip::Pchip(std::vector<double> x, std::vector<double> y) : x_(std::move(x)), y_(std::move(y)) {
  const std::size_t n = x_.size();
  if (n < 2 || y_.size() != n) throw Error(ErrorCode::kDegenerateCurve, "pchip needs >= 2 knots");
  std::vector<double> h(n - 1), delta(n - 1);
  for (std::size_t k = 0; k + 1 < n; ++k) {
    h[k] = x_[k + 1] - x_[k];
    if (!(h[k] > 0)) throw Error(ErrorCode::kDegenerateCurve, "pchip knots must increase");
    delta[k] = (y_[k + 1] - y_[k]) / h[k];
  }
  d_.assign(n, 0.0);
  if (n == 2) {
    d_[0] = d_[1] = delta[0];
    return;
  }
  for (std::size_t k = 1; k + 1 < n; ++k) {
    if (delta[k - 1] * delta[k] <= 0) continue;
    const double w1 = 2 * h[k] + h[k - 1];
    const double w2 = h[k] + 2 * h[k - 1];
    d_[k] = (w1 + w2) / (w1 / delta[k - 1] + w2 / delta[k]);
  }
  // Shape-preserving three-point end slopes.
  auto edge = [](double h0, double h1, double m0, double m1) {
    double d = ((2 * h0 + h1) * m0 - h0 * m1) / (h0 + h1);
    if (std::signbit(d) != std::signbit(m0) || d == 0.0 || m0 == 0.0) {
      d = 0.0;
    } else if (std::signbit(m0) != std::signbit(m1) && std::abs(d) > 3 * std::abs(m0)) {
      d = 3 * m0;
    }
    return d;
  };
  d_[0] = edge(h[0], h[1], delta[0], delta[1]);
  d_[n - 1] = edge(h[n - 2], h[n - 3], delta[n - 2], delta[n - 3]);
}

std::size_t Pchip::segment(double x) const {
  auto it = std::upper_bound(x_.begin(), x_.end(), x);
  std::size_t k = it == x_.begin() ? 0 : static_cast<std::size_t>(it - x_.begin()) - 1;
  return std::min(k, x_.size() - 2);
}

double Pchip::operator()(double x) const {
  const std::size_t k = segment(x);
  const double h = x_[k + 1] - x_[k];
  const double t = (x - x_[k]) / h;
  const double t2 = t * t;
  const double t3 = t2 * t;
  return (2 * t3 - 3 * t2 + 1) * y_[k] + (t3 - 2 * t2 + t) * h * d_[k] +
         (-2 * t3 + 3 * t2) * y_[k + 1] + (t3 - t2) * h * d_[k + 1];
}

double Pchip::integral(double a, double b) const {
  if (b < a) return -integral(b, a);
  // Antiderivative of the Hermite form in the local parameter t.
  auto primitive = [&](std::size_t k, double t) {
    const double h = x_[k + 1] - x_[k];
    const double t2 = t * t, t3 = t2 * t, t4 = t3 * t;
    return h * ((t4 / 2 - t3 + t) * y_[k] + (t4 / 4 - 2 * t3 / 3 + t2 / 2) * h * d_[k] +
                (-t4 / 2 + t3) * y_[k + 1] + (t4 / 4 - t3 / 3) * h * d_[k + 1]);
  };
  double total = 0.0;
  for (std::size_t k = segment(a); k + 1 < x_.size(); ++k) {
    const double lo = std::max(a, x_[k]);
    const double hi = std::min(b, x_[k + 1]);
    if (hi > lo) {
      const double h = x_[k + 1] - x_[k];
      total += primitive(k, (hi - x_[k]) / h) - primitive(k, (lo - x_[k]) / h);
    }
    if (x_[k + 1] >= b) break;
  }
  return total;
}

double bd_rate(const RDCurve& anchor, const RDCurve& test, std::vector<std::string>* warnings) {
  const RDCurve a = normalized_curve(anchor);
  const RDCurve t = normalized_curve(test);
  if (warnings) {
    for (const RDCurve* c : {&a, &t}) {
      if (c->points.size() < 4) {
        warnings->push_back("curve '" + c->label + "' has " + std::to_string(c->points.size()) +
                            " points; four or more recommended");
      }
    }
  }
  auto interpolant = [](const RDCurve& c) {
    std::vector<double> q, lr;
    for (const auto& p : c.points) {
      q.push_back(p.quality);
      lr.push_back(std::log10(p.bpp));
    }
    return Pchip(std::move(q), std::move(lr));
  };
  const Pchip pa = interpolant(a);
  const Pchip pt = interpolant(t);
  const double lo = std::max(pa.x_min(), pt.x_min());
  const double hi = std::min(pa.x_max(), pt.x_max());
  if (!(hi > lo)) {
    throw Error(ErrorCode::kNoOverlap, "quality ranges of '" + a.label + "' and '" + t.label +
                                           "' do not overlap");
  }
  const double avg = (pt.integral(lo, hi) - pa.integral(lo, hi)) / (hi - lo);
  return (std::pow(10.0, avg) - 1.0) * 100.0;
}

ChannelBitrateReport channel_bitrate_ratio(const std::vector<std::vector<double>>& bits_per_frame,
                                           LatentKind kind) {
  std::size_t channels = 0;
  for (const auto& f : bits_per_frame) channels = std::max(channels, f.size());
  std::vector<double> per_channel(channels, 0.0);
  for (const auto& f : bits_per_frame) {
    if (f.size() != channels) {
      throw Error(ErrorCode::kShapeMismatch, "frames report different channel counts");
    }
    for (std::size_t c = 0; c < channels; ++c) per_channel[c] += f[c];
  }
  const double total = std::accumulate(per_channel.begin(), per_channel.end(), 0.0);
  if (!(total > 0.0)) throw Error(ErrorCode::kZeroTotalBits, "no bits spent on the latent");

  ChannelBitrateReport report;
  report.kind = kind;
  report.channels.resize(channels);
  std::iota(report.channels.begin(), report.channels.end(), 0);
  std::stable_sort(report.channels.begin(), report.channels.end(),
                   [&](int a, int b) { return per_channel[a] > per_channel[b]; });
  for (int c : report.channels) report.ratios.push_back(per_channel[c] / total);
  return report;
}

ChannelBitrateReport average_reports(std::span<const ChannelBitrateReport> reports) {
  if (reports.empty()) throw Error(ErrorCode::kZeroTotalBits, "no reports to average");
  const std::size_t channels = reports.front().ratios.size();
  std::vector<double> mean(channels, 0.0);
  for (const auto& r : reports) {
    if (r.ratios.size() != channels) {
      throw Error(ErrorCode::kShapeMismatch, "reports have different channel counts");
    }
    for (std::size_t i = 0; i < channels; ++i) mean[r.channels[i]] += r.ratios[i];
  }
  std::vector<std::vector<double>> as_frame = {mean};
  return channel_bitrate_ratio(as_frame, reports.front().kind);
}

ChannelBitrateReport top_channels(const ChannelBitrateReport& report, std::size_t count) {
  ChannelBitrateReport out = report;
  if (out.ratios.size() > count) {
    out.ratios.resize(count);
    out.channels.resize(count);
  }
  return out;
}

void write_rd_csv(const std::filesystem::path& path, std::span<const RdRow> rows) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::kIoError, "cannot write " + path.string());
  out << "sequence,lambda_index,bpp,psnr_rgb,psnr_yuv\n";
  out.precision(10);
  for (const auto& r : rows) {
    out << r.sequence << ',' << r.lambda_index << ',' << r.bpp << ',' << r.psnr_rgb << ','
        << r.psnr_yuv << '\n';
  }
}

std::vector<RdRow> read_rd_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open " + path.string());
  std::string line;
  std::getline(in, line);
  if (line.rfind("sequence,lambda_index,bpp,psnr_rgb,psnr_yuv", 0) != 0) {
    throw Error(ErrorCode::kManifestError, path.string() + ": unexpected RD CSV header");
  }
  std::vector<RdRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string field;
    RdRow r;
    try {
      std::getline(ss, r.sequence, ',');
      std::getline(ss, field, ',');
      r.lambda_index = std::stoi(field);
      std::getline(ss, field, ',');
      r.bpp = std::stod(field);
      std::getline(ss, field, ',');
      r.psnr_rgb = std::stod(field);
      std::getline(ss, field, ',');
      r.psnr_yuv = std::stod(field);
    } catch (const std::exception&) {
      throw Error(ErrorCode::kManifestError, path.string() + ": bad row '" + line + "'");
    }
    rows.push_back(r);
  }
  return rows;
}

std::map<std::string, RDCurve> curves_from_rows(std::span<const RdRow> rows, QualityMetric metric) {
  std::map<std::string, RDCurve> curves;
  for (const auto& r : rows) {
    auto& c = curves[r.sequence];
    c.label = r.sequence;
    const double q = metric == QualityMetric::kRgb ? r.psnr_rgb : r.psnr_yuv;
    c.points.push_back({r.bpp, q, r.lambda_index, q >= kPsnrCap});
  }
  return curves;
}

BdRateSummary bd_rate_tables(std::span<const RdRow> anchor, std::span<const RdRow> test,
                             QualityMetric metric) {
  const auto ca = curves_from_rows(anchor, metric);
  const auto ct = curves_from_rows(test, metric);
  BdRateSummary s;
  for (const auto& [name, curve] : ca) {
    auto it = ct.find(name);
    if (it == ct.end()) continue;
    s.per_sequence[name] = bd_rate(curve, it->second);
  }
  if (s.per_sequence.empty()) {
    throw Error(ErrorCode::kNoOverlap, "anchor and test share no sequence");
  }
  double sum = 0.0;
  for (const auto& [_, v] : s.per_sequence) sum += v;
  s.average = sum / static_cast<double>(s.per_sequence.size());
  return s;
}

namespace {

constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                                    "#9467bd", "#8c564b", "#e377c2", "#17becf"};

struct Axes {
  double x0, x1, y0, y1;
  double left = 70, right = 20, top = 40, bottom = 50, width = 640, height = 420;

  double px(double x) const { return left + (x - x0) / (x1 - x0) * (width - left - right); }
  double py(double y) const { return height - bottom - (y - y0) / (y1 - y0) * (height - top - bottom); }
};

void svg_frame(std::ostream& out, const Axes& ax, const std::string& title, const std::string& xl,
               const std::string& yl) {
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << ax.width << "\" height=\""
      << ax.height << "\" font-family=\"sans-serif\" font-size=\"12\">\n"
      << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
      << "<text x=\"" << ax.width / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">"
      << title << "</text>\n"
      << "<rect x=\"" << ax.left << "\" y=\"" << ax.top << "\" width=\""
      << ax.width - ax.left - ax.right << "\" height=\"" << ax.height - ax.top - ax.bottom
      << "\" fill=\"none\" stroke=\"black\"/>\n"
      << "<text x=\"" << ax.width / 2 << "\" y=\"" << ax.height - 10
      << "\" text-anchor=\"middle\">" << xl << "</text>\n"
      << "<text x=\"15\" y=\"" << ax.height / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 15 "
      << ax.height / 2 << ")\">" << yl << "</text>\n";
  for (int i = 0; i <= 4; ++i) {
    const double xv = ax.x0 + (ax.x1 - ax.x0) * i / 4.0;
    const double yv = ax.y0 + (ax.y1 - ax.y0) * i / 4.0;
    out << "<text x=\"" << ax.px(xv) << "\" y=\"" << ax.height - ax.bottom + 16
        << "\" text-anchor=\"middle\">" << std::round(xv * 1000) / 1000 << "</text>\n";
    out << "<text x=\"" << ax.left - 6 << "\" y=\"" << ax.py(yv) + 4 << "\" text-anchor=\"end\">"
        << std::round(yv * 100) / 100 << "</text>\n";
  }
}

}  // namespace

void write_rd_plot_svg(const std::filesystem::path& path, std::span<const RDCurve> curves,
                       const std::string& title, const std::string& y_label) {
  double x0 = 1e300, x1 = -1e300, y0 = 1e300, y1 = -1e300;
  for (const auto& c : curves) {
    for (const auto& p : c.points) {
      x0 = std::min(x0, p.bpp);
      x1 = std::max(x1, p.bpp);
      y0 = std::min(y0, p.quality);
      y1 = std::max(y1, p.quality);
    }
  }
  if (x0 > x1) x0 = 0, x1 = 1, y0 = 0, y1 = 1;
  if (x1 - x0 < 1e-9) x1 = x0 + 1e-3;
  if (y1 - y0 < 1e-9) y1 = y0 + 1e-3;
  const double mx = 0.05 * (x1 - x0), my = 0.05 * (y1 - y0);
  Axes ax{x0 - mx, x1 + mx, y0 - my, y1 + my};

  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::kIoError, "cannot write " + path.string());
  svg_frame(out, ax, title, "bpp", y_label);
  std::size_t i = 0;
  for (const auto& c : curves) {
    const char* color = kPalette[i % std::size(kPalette)];
    RDCurve sorted = c;
    std::sort(sorted.points.begin(), sorted.points.end(),
              [](const RDPoint& a, const RDPoint& b) { return a.bpp < b.bpp; });
    out << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
    for (const auto& p : sorted.points) out << ax.px(p.bpp) << ',' << ax.py(p.quality) << ' ';
    out << "\"/>\n";
    for (const auto& p : sorted.points) {
      out << "<circle cx=\"" << ax.px(p.bpp) << "\" cy=\"" << ax.py(p.quality)
          << "\" r=\"3\" fill=\"" << color << "\"/>\n";
    }
    out << "<text x=\"" << ax.left + 10 << "\" y=\"" << ax.top + 16 + 14 * i << "\" fill=\"" << color
        << "\">" << c.label << "</text>\n";
    ++i;
  }
  out << "</svg>\n";
}

void write_channel_plot_svg(const std::filesystem::path& path, const ChannelBitrateReport& report,
                            const std::string& title) {
  const double ymax = report.ratios.empty() ? 1.0 : report.ratios.front();
  Axes ax{0.0, static_cast<double>(std::max<std::size_t>(report.ratios.size(), 1)), 0.0,
          ymax > 0 ? ymax * 1.05 : 1.0};
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::kIoError, "cannot write " + path.string());
  svg_frame(out, ax, title, "channel rank", "bitrate ratio");
  const double bar = (ax.px(1.0) - ax.px(0.0)) * 0.8;
  for (std::size_t i = 0; i < report.ratios.size(); ++i) {
    const double x = ax.px(static_cast<double>(i));
    const double y = ax.py(report.ratios[i]);
    out << "<rect x=\"" << x << "\" y=\"" << y << "\" width=\"" << bar << "\" height=\""
        << ax.py(0.0) - y << "\" fill=\"" << kPalette[0] << "\"/>\n";
  }
  out << "</svg>\n";
}

}  // namespace nvc
