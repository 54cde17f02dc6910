#include "nvc/model/eval.hpp"

#include <algorithm>
#include <fstream>

#include "json.hpp"
#include "nvc/error.hpp"
#include "nvc/model/train.hpp"

namespace nvc {

namespace {

std::vector<double> channel_sums(const torch::Tensor& bits) {
  auto sums = bits.sum({1, 2}).to(torch::kFloat64).contiguous();
  const double* p = sums.data_ptr<double>();
  return {p, p + sums.numel()};
}

std::string stream_name(const std::string& sequence, int lambda_index) {
  return sequence + "_l" + std::to_string(lambda_index) + ".nvc1";
}

nlohmann::json report_json(const ChannelBitrateReport& r) {
  return {{"ratios", r.ratios}, {"channels", r.channels}};
}

}  // namespace

SequenceEval evaluate_sequence(CodecModel& model, const VideoSequence& sequence, int lambda_index,
                               int intra_period, int max_frames) {
  std::vector<Frame> frames = sequence.frames;
  if (max_frames >= 0 && static_cast<int>(frames.size()) > max_frames) frames.resize(max_frames);
  if (frames.empty()) throw Error(ErrorCode::kEmptyDataset, "sequence '" + sequence.name + "' has no frames");

  SequenceEval out;
  auto coded = encode_sequence(model, frames, lambda_index, intra_period);
  auto decoded = decode_sequence(model, coded.units);
  out.decoded_exactly = decoded.padded.size() == coded.encoder_padded.size();
  std::size_t bytes = 0;
  double psnr_rgb_sum = 0.0, psnr_yuv_sum = 0.0;
  const int w = frames.front().width, h = frames.front().height;
  for (std::size_t i = 0; i < frames.size(); ++i) {
    out.decoded_exactly = out.decoded_exactly && torch::equal(decoded.padded[i], coded.encoder_padded[i]);
    bytes += coded.units[i].total_bytes();
    out.frame_bpp.push_back(coded.units[i].bpp());
    out.estimated_bits += coded.stats[i].estimated_bits;
    psnr_rgb_sum += psnr_rgb(frames[i], decoded.reconstructions[i]).db;
    psnr_yuv_sum += psnr_yuv_compound(frames[i], decoded.reconstructions[i]).compound;
    if (coded.units[i].frame_type == FrameType::kInter) {
      out.context_bits.push_back(channel_sums(coded.stats[i].context_bits));
      out.motion_bits.push_back(channel_sums(coded.stats[i].motion_bits));
    }
  }
  const double n = static_cast<double>(frames.size());
  out.row.sequence = sequence.name;
  out.row.lambda_index = lambda_index;
  out.row.bpp = 8.0 * static_cast<double>(bytes) / (static_cast<double>(w) * h * n);
  out.row.psnr_rgb = psnr_rgb_sum / n;
  out.row.psnr_yuv = psnr_yuv_sum / n;
  out.units = std::move(coded.units);
  return out;
}

double stream_file_bpp(const std::filesystem::path& path, int width, int height) {
  const auto units = read_stream(path);
  if (units.empty()) throw Error(ErrorCode::kMalformedStream, "empty stream " + path.string());
  const auto bytes = std::filesystem::file_size(path);
  return 8.0 * static_cast<double>(bytes) /
         (static_cast<double>(width) * height * static_cast<double>(units.size()));
}

EvalReport run_eval(const std::vector<std::filesystem::path>& checkpoints, const DatasetManifest& manifest,
                    const EvalOptions& options) {
  if (checkpoints.empty()) throw Error(ErrorCode::kMissingCheckpoint, "no checkpoints given");
  if (manifest.sequences.empty()) throw Error(ErrorCode::kEmptyDataset, "manifest lists no sequences");
  std::vector<VideoSequence> sequences;
  for (const auto& entry : manifest.sequences) sequences.push_back(load_sequence(manifest, entry, options.frames));
  std::sort(sequences.begin(), sequences.end(), [](const auto& a, const auto& b) { return a.name < b.name; });

  if (!options.out_dir.empty()) std::filesystem::create_directories(options.out_dir / "streams");
  EvalReport report;
  std::map<int, std::vector<ChannelBitrateReport>> ctx_reports, motion_reports;
  for (const auto& path : checkpoints) {
    auto [model, meta] = load_checkpoint(path);
    for (const auto& seq : sequences) {
      auto e = evaluate_sequence(model, seq, meta.lambda_index, options.intra_period, options.frames);
      report.decoded_exactly = report.decoded_exactly && e.decoded_exactly;
      if (!options.out_dir.empty()) {
        write_stream(options.out_dir / "streams" / stream_name(seq.name, meta.lambda_index), e.units);
      }
      if (!e.context_bits.empty()) {
        try {
          ctx_reports[meta.lambda_index].push_back(channel_bitrate_ratio(e.context_bits, LatentKind::kContextual));
          motion_reports[meta.lambda_index].push_back(channel_bitrate_ratio(e.motion_bits, LatentKind::kMotion));
        } catch (const Error& err) {
          if (err.code() != ErrorCode::kZeroTotalBits) throw;
          report.warnings.push_back(seq.name + ": " + err.what());
        }
      }
      report.rows.push_back(e.row);
    }
  }
  std::sort(report.rows.begin(), report.rows.end(), [](const RdRow& a, const RdRow& b) {
    return std::tie(a.sequence, a.lambda_index) < std::tie(b.sequence, b.lambda_index);
  });
  for (auto& [l, r] : ctx_reports) report.contextual[l] = average_reports(r);
  for (auto& [l, r] : motion_reports) report.motion[l] = average_reports(r);

  report.curves = curves_from_rows(report.rows, options.metric);
  std::map<int, std::pair<RDPoint, int>> acc;
  for (const auto& [name, curve] : report.curves) {
    for (const auto& p : curve.points) {
      auto& [sum, count] = acc[p.lambda_index];
      sum.bpp += p.bpp;
      sum.quality += p.quality;
      sum.lambda_index = p.lambda_index;
      ++count;
    }
  }
  report.average.label = "average";
  for (const auto& [l, entry] : acc) {
    RDPoint p = entry.first;
    p.bpp /= entry.second;
    p.quality /= entry.second;
    report.average.points.push_back(p);
  }

  if (!options.anchor_csv.empty()) {
    const auto anchor = read_rd_csv(options.anchor_csv);
    report.bd_rate = bd_rate_tables(anchor, report.rows, options.metric);
  }

  if (!options.out_dir.empty()) {
    write_rd_csv(options.out_dir / "rd.csv", report.rows);
    nlohmann::json j;
    for (const auto& r : report.rows) {
      j["rows"].push_back({{"sequence", r.sequence},
                           {"lambda_index", r.lambda_index},
                           {"bpp", r.bpp},
                           {"psnr_rgb", r.psnr_rgb},
                           {"psnr_yuv", r.psnr_yuv}});
    }
    for (const auto& p : report.average.points) {
      j["average"].push_back({{"lambda_index", p.lambda_index}, {"bpp", p.bpp}, {"quality", p.quality}});
    }
    for (const auto& [l, r] : report.contextual) j["contextual_channels"][std::to_string(l)] = report_json(top_channels(r));
    for (const auto& [l, r] : report.motion) j["motion_channels"][std::to_string(l)] = report_json(top_channels(r));
    if (report.bd_rate) {
      j["bd_rate"]["average"] = report.bd_rate->average;
      for (const auto& [name, v] : report.bd_rate->per_sequence) j["bd_rate"]["per_sequence"][name] = v;
    }
    j["decoded_exactly"] = report.decoded_exactly;
    j["warnings"] = report.warnings;
    std::ofstream(options.out_dir / "rd.json") << j.dump(2) << '\n';

    std::vector<RDCurve> curves;
    for (const auto& [name, c] : report.curves) curves.push_back(c);
    if (report.average.points.size() >= 2) curves.push_back(report.average);
    const char* label = options.metric == QualityMetric::kRgb ? "PSNR RGB (dB)" : "PSNR YUV 6:1:1 (dB)";
    write_rd_plot_svg(options.out_dir / "rd.svg", curves, "Rate-distortion", label);
    if (!report.contextual.empty()) {
      const auto& [l, r] = *report.contextual.rbegin();
      write_channel_plot_svg(options.out_dir / "channels_contextual.svg", top_channels(r),
                             "Contextual bitrate ratio, lambda index " + std::to_string(l));
      write_channel_plot_svg(options.out_dir / "channels_motion.svg", top_channels(report.motion.at(l)),
                             "Motion bitrate ratio, lambda index " + std::to_string(l));
    }
  }
  return report;
}

}  // namespace nvc
