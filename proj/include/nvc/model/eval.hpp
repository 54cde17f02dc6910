#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "nvc/bitstream.hpp"
#include "nvc/data_io.hpp"
#include "nvc/metrics.hpp"
#include "nvc/model/codec.hpp"
#include "nvc/model/session.hpp"

namespace nvc {

struct SequenceEval {
  RdRow row;
  std::vector<BitstreamUnit> units;
  std::vector<double> frame_bpp;
  double estimated_bits = 0.0;            // sum of -log2 p over the sequence
  std::vector<std::vector<double>> context_bits;  // [P-frame][channel]
  std::vector<std::vector<double>> motion_bits;
  bool decoded_exactly = false;           // decoder reconstructions equal the encoder's
};

// Encodes the first max_frames frames (all when negative), decodes the units
// and scores the decoded frames. bpp = 8 * stream bytes / (W * H * frames).
SequenceEval evaluate_sequence(CodecModel& model, const VideoSequence& sequence, int lambda_index,
                               int intra_period = kDefaultIntraPeriod, int max_frames = -1);

// bpp of a stream file over frames of width x height.
double stream_file_bpp(const std::filesystem::path& path, int width, int height);

struct EvalOptions {
  int intra_period = kDefaultIntraPeriod;
  int frames = 96;
  std::filesystem::path out_dir;     // rd.csv, rd.json, plots and streams; empty for none
  std::filesystem::path anchor_csv;  // BD-rate anchor; empty for none
  QualityMetric metric = QualityMetric::kRgb;
};

struct EvalReport {
  std::vector<RdRow> rows;                   // sorted by sequence, then lambda index
  std::map<std::string, RDCurve> curves;     // per sequence
  RDCurve average;                           // per lambda index, mean bpp and quality
  std::map<int, ChannelBitrateReport> contextual;  // averaged over sequences, by lambda index
  std::map<int, ChannelBitrateReport> motion;
  std::optional<BdRateSummary> bd_rate;
  std::vector<std::string> warnings;
  bool decoded_exactly = true;
};

// One checkpoint per lambda. Checkpoints and datasets are only read.
EvalReport run_eval(const std::vector<std::filesystem::path>& checkpoints, const DatasetManifest& manifest,
                    const EvalOptions& options);

}  // namespace nvc
