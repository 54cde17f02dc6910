#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include <torch/torch.h>

#include "CLI11.hpp"
#include "json.hpp"
#include "nvc/config.hpp"
#include "nvc/data_io.hpp"
#include "nvc/error.hpp"
#include "nvc/metrics.hpp"
#include "nvc/model/eval.hpp"
#include "nvc/model/experiment.hpp"
#include "nvc/model/session.hpp"
#include "nvc/model/train.hpp"
#include "nvc/synthetic.hpp"
#include "visualize.hpp"

namespace fs = std::filesystem;
using namespace nvc;

namespace {

// ---------------------------------------------------------------------------
// Shared argument groups.

struct ModelArgs {
  std::string checkpoint;
  std::string config;
  std::string preset = "toy";
  std::uint64_t seed = 0;
  int lambda_index = 3;
  bool lambda_set = false;

  void add(CLI::App* app) {
    app->add_option("--model", checkpoint, "Checkpoint file");
    app->add_option("--config", config, "Config JSON for an untrained model");
    app->add_option("--preset", preset, "Preset for an untrained model (tiny, toy, paper-pattern)");
    app->add_option("--seed", seed, "Initialisation seed for an untrained model");
    app->add_option_function<int>(
           "--lambda-index",
           [this](int v) {
             lambda_index = v;
             lambda_set = true;
           },
           "Lambda index 0..3 (defaults to the checkpoint's)")
        ->check(CLI::Range(0, 3));
  }

  CodecModel load() {
    if (!checkpoint.empty()) {
      auto [model, meta] = load_checkpoint(checkpoint);
      if (!lambda_set) lambda_index = meta.lambda_index;
      return model;
    }
    const ModelConfig cfg = config.empty() ? presets::by_name(preset) : load_config(config);
    return build_model(cfg, seed);
  }
};

struct InputArgs {
  std::string yuv;
  int width = 0;
  int height = 0;
  std::string manifest;
  std::string sequence;
  int frames = 96;

  void add(CLI::App* app) {
    app->add_option("--yuv", yuv, "Raw 8-bit 4:2:0 input");
    app->add_option("--width", width, "Width of the raw input");
    app->add_option("--height", height, "Height of the raw input");
    app->add_option("--data", manifest, "Dataset manifest.json");
    app->add_option("--sequence", sequence, "Sequence name in the manifest (default: first)");
    app->add_option("--frames", frames, "Frames to code")->check(CLI::PositiveNumber);
  }

  VideoSequence load() const {
    if (!yuv.empty()) {
      if (width <= 0 || height <= 0) throw Error(ErrorCode::kInvalidConfig, "--yuv needs --width and --height");
      const auto bytes = fs::file_size(yuv);
      const auto per_frame = static_cast<std::uintmax_t>(width) * height * 3 / 2;
      const int available = static_cast<int>(bytes / per_frame);
      auto seq = read_yuv420(yuv, width, height, std::min(frames, available));
      for (auto& f : seq.frames) f = yuv_to_rgb(f);
      seq.name = fs::path(yuv).stem().string();
      return seq;
    }
    if (manifest.empty()) throw Error(ErrorCode::kManifestError, "give --yuv or --data");
    const auto m = load_manifest(manifest);
    if (m.sequences.empty()) throw Error(ErrorCode::kEmptyDataset, "manifest lists no sequences");
    for (const auto& e : m.sequences) {
      if (sequence.empty() || e.name == sequence) return load_sequence(m, e, frames);
    }
    throw Error(ErrorCode::kManifestError, "no sequence named " + sequence);
  }
};

struct TrainArgs {
  std::string schedule = "schedules/table2_rgb.csv";
  std::string data;
  int synthetic = 100;
  int clip_size = 96;
  int clip_frames = 6;
  double epoch_scale = 0.1;
  int steps_per_epoch = 10;
  int batch = 4;
  int patch = 64;
  double lr_scale = 10.0;
  int intra_steps = 200;
  int flow_steps = 100;
  bool no_recompute = false;

  void add(CLI::App* app) {
    app->add_option("--schedule", schedule, "Schedule CSV (frames,scope,loss,lr,epochs)");
    app->add_option("--data-root", data, "Training dataset directory with manifest.json");
    app->add_option("--synthetic", synthetic, "Procedural training clips when no dataset is given");
    app->add_option("--clip-size", clip_size, "Procedural clip width and height");
    app->add_option("--clip-frames", clip_frames, "Procedural clip length");
    app->add_option("--epoch-scale", epoch_scale, "Multiplier on the schedule's epochs");
    app->add_option("--steps-per-epoch", steps_per_epoch, "Optimiser steps per scaled epoch");
    app->add_option("--batch", batch, "Clips per step");
    app->add_option("--patch", patch, "Crop size (multiple of 64)");
    app->add_option("--lr-scale", lr_scale, "Multiplier on the schedule's learning rates");
    app->add_option("--intra-steps", intra_steps, "Intra warm-up steps");
    app->add_option("--flow-steps", flow_steps, "Flow warm-up steps");
    app->add_flag("--no-recompute", no_recompute, "Keep the full cascaded graph in memory");
  }

  ExperimentOptions options(int lambda_index, std::uint64_t seed) const {
    ExperimentOptions o;
    o.train.lambda_index = lambda_index;
    o.train.batch_size = batch;
    o.train.epoch_scale = epoch_scale;
    o.train.steps_per_epoch = steps_per_epoch;
    o.train.lr_scale = lr_scale;
    o.train.recompute = !no_recompute;
    o.train.seed = seed;
    o.clips = synthetic;
    o.clip_width = o.clip_height = clip_size;
    o.clip_frames = clip_frames;
    o.patch = patch;
    o.intra_steps = intra_steps;
    o.flow_steps = flow_steps;
    return o;
  }
};

std::vector<double> parse_list(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(std::stod(item));
  return out;
}

nlohmann::json params_json(CodecModel& model) {
  auto r = count_parameters(model);
  nlohmann::json j;
  for (const auto& [name, n] : r.per_module) j["per_module"][name] = n;
  j["total"] = r.total;
  return j;
}

void print_params(CodecModel& model) {
  auto r = count_parameters(model);
  for (const auto& [name, n] : r.per_module) {
    std::printf("  %-20s %12lld  %6.2f%%\n", name.c_str(), static_cast<long long>(n), 100.0 * n / r.total);
  }
  std::printf("  %-20s %12lld\n", "total", static_cast<long long>(r.total));
}

// ---------------------------------------------------------------------------
// Verbs.

int config_validate(const std::string& path) {
  auto cfg = load_config(path);
  validate(cfg);
  auto model = build_model(cfg, 0);
  std::printf("%s: valid\n", path.c_str());
  print_params(model);
  return 0;
}

int config_show(const std::string& preset) {
  auto cfg = presets::by_name(preset);
  std::cout << to_json(cfg) << '\n';
  auto model = build_model(cfg, 0);
  print_params(model);
  return 0;
}

int config_sweep(const std::string& base, const std::string& axis, const std::string& scales, const fs::path& out) {
  const ModelConfig cfg = fs::exists(base) ? load_config(base) : presets::by_name(base);
  const auto s = parse_list(scales);
  const auto configs = enumerate_sweep(cfg, parse_sweep_axis(axis), s);
  fs::create_directories(out);
  nlohmann::json manifest;
  manifest["axis"] = axis;
  for (std::size_t i = 0; i < configs.size(); ++i) {
    const auto file = "config_" + std::to_string(i) + ".json";
    save_config(configs[i], out / file);
    auto model = build_model(configs[i], 0);
    manifest["configs"].push_back({{"file", file}, {"scale", s[i]}, {"parameters", params_json(model)}});
    std::printf("%s  scale %g  total %lld\n", file.c_str(), s[i],
                static_cast<long long>(count_parameters(model).total));
  }
  std::ofstream(out / "manifest.json") << manifest.dump(2) << '\n';
  return 0;
}

int synth(const fs::path& out, int count, int width, int height, int frames, std::uint64_t seed) {
  auto seqs = make_toy_clips(count, width, height, frames, seed);
  write_dataset(out, seqs);
  std::printf("wrote %d sequences to %s\n", count, out.string().c_str());
  return 0;
}

int train(ModelArgs& margs, const TrainArgs& targs, const std::string& out, const std::string& log,
          const std::string& resume) {
  auto stages = load_schedule(targs.schedule);
  CodecModel model{nullptr};
  int first_stage = 0;
  if (!resume.empty()) {
    auto [m, meta] = load_checkpoint(resume);
    model = m;
    first_stage = meta.stage_cursor;
    if (!margs.lambda_set) margs.lambda_index = meta.lambda_index;
  } else {
    model = margs.load();
  }
  auto opts = targs.options(margs.lambda_index, margs.seed);
  opts.train.first_stage = first_stage;
  opts.train.log_path = log;
  opts.train.checkpoint_path = out;
  int last_stage = -1;
  opts.train.on_step = [&](const StepRecord& r) {
    if (r.stage != last_stage) {
      const auto& s = stages[r.stage];
      std::printf("stage %2d  T=%d %-6s %-12s lr %.1e\n", r.stage + 1, s.frames, std::string(to_string(s.scope)).c_str(),
                  std::string(to_string(s.loss)).c_str(), s.learning_rate * targs.lr_scale);
      last_stage = r.stage;
    }
    if (r.step % 10 == 0) std::printf("  step %4d  loss %.4f\n", r.step, r.loss);
    std::fflush(stdout);
  };

  const auto t0 = std::chrono::steady_clock::now();
  if (!targs.data.empty()) {
    int clip_len = 2;
    for (const auto& s : stages) clip_len = std::max(clip_len, s.frames);
    auto sampler = sample_training_clips(targs.data, clip_len, targs.patch, margs.seed);
    if (first_stage == 0) {
      pretrain_intra(model, sampler, opts.train, targs.intra_steps, opts.warmup_lr);
      pretrain_flow(model, sampler, opts.train, targs.flow_steps, opts.warmup_lr);
    }
    auto result = run_schedule(model, stages, sampler, opts.train);
    for (const auto& s : result.stages) {
      if (!s.frozen_intact) std::printf("warning: frozen weights changed in stage %d\n", s.stage + 1);
    }
  } else {
    if (first_stage > 0) {
      opts.intra_steps = 0;
      opts.flow_steps = 0;
    }
    auto r = run_experiment(model, stages, opts);
    std::printf("validation L_all %.4f -> %.4f (%.1f%% lower)\n", r.initial_loss, r.final_loss,
                100.0 * (1.0 - r.final_loss / r.initial_loss));
  }
  if (first_stage >= static_cast<int>(stages.size()) && !out.empty()) {
    save_checkpoint(model, {model->config(), margs.lambda_index, first_stage}, out);
  }
  std::printf("done in %.1f s, checkpoint %s\n",
              std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count(), out.c_str());
  return 0;
}

int encode(ModelArgs& margs, const InputArgs& in, const std::string& output, int intra_period,
           const std::string& dump_dir) {
  auto model = margs.load();
  auto seq = in.load();
  StreamEncoder encoder(model, margs.lambda_index, intra_period);
  std::vector<BitstreamUnit> units;
  if (!dump_dir.empty()) fs::create_directories(dump_dir);
  double bits = 0.0, psnr = 0.0;
  for (std::size_t i = 0; i < seq.frames.size(); ++i) {
    auto coded = encoder.encode(seq.frames[i]);
    const double p = psnr_rgb(seq.frames[i], encoder.reconstruction()).db;
    std::printf("frame %3zu %s  %8.4f bpp  %6.2f dB  est %.0f bits  payload %zu bytes\n", i,
                coded.unit.frame_type == FrameType::kIntra ? "I" : "P", coded.stats.bpp, p,
                coded.stats.estimated_bits, coded.stats.payload_bytes);
    if (!dump_dir.empty() && coded.stats.decoded_motion.defined()) {
      char stem[64];
      std::snprintf(stem, sizeof(stem), "frame%03zu", i);
      const auto base = fs::path(dump_dir) / stem;
      tools::write_flow_png(coded.stats.decoded_motion[0].slice(0, 0, 2), base.string() + "_flow_structure.png");
      tools::write_flow_png(coded.stats.decoded_motion[0].slice(0, 2, 4), base.string() + "_flow_detail.png");
      tools::write_context_grids(coded.stats.contexts, base.string() + "_context");
    }
    bits += 8.0 * coded.unit.total_bytes();
    psnr += p;
    units.push_back(std::move(coded.unit));
  }
  write_stream(output, units);
  const double n = static_cast<double>(units.size());
  std::printf("%zu frames  %.4f bpp  %.2f dB  -> %s\n", units.size(),
              bits / (static_cast<double>(seq.frames[0].width) * seq.frames[0].height * n), psnr / n, output.c_str());
  return 0;
}

int decode(ModelArgs& margs, const std::string& input, const std::string& output) {
  auto model = margs.load();
  auto units = read_stream(input);
  auto decoded = decode_sequence(model, units);
  if (fs::path(output).extension() == ".yuv") {
    write_yuv420(output, decoded.reconstructions);
  } else {
    fs::create_directories(output);
    for (std::size_t i = 0; i < decoded.reconstructions.size(); ++i) {
      char name[32];
      std::snprintf(name, sizeof(name), "f%03zu.png", i);
      write_png(decoded.reconstructions[i], fs::path(output) / name);
    }
  }
  const auto& f = decoded.reconstructions.front();
  std::printf("decoded %zu frames %dx%d  %.4f bpp -> %s\n", units.size(), f.width, f.height,
              stream_file_bpp(input, f.width, f.height), output.c_str());
  return 0;
}

QualityMetric parse_metric(const std::string& m) {
  if (m == "rgb") return QualityMetric::kRgb;
  if (m == "yuv") return QualityMetric::kYuv;
  throw Error(ErrorCode::kInvalidConfig, "metric must be rgb or yuv");
}

int eval(const std::vector<std::string>& models, const std::string& data, const std::string& out,
         const std::string& anchor, int frames, int intra_period, const std::string& metric) {
  EvalOptions o;
  o.frames = frames;
  o.intra_period = intra_period;
  o.out_dir = out;
  o.anchor_csv = anchor;
  o.metric = parse_metric(metric);
  std::vector<fs::path> paths(models.begin(), models.end());
  auto report = run_eval(paths, load_manifest(data), o);
  for (const auto& r : report.rows) {
    std::printf("%-16s l%d  %.4f bpp  %.2f dB rgb  %.2f dB yuv\n", r.sequence.c_str(), r.lambda_index, r.bpp,
                r.psnr_rgb, r.psnr_yuv);
  }
  if (report.bd_rate) std::printf("BD-rate vs anchor: %.2f%%\n", report.bd_rate->average);
  for (const auto& w : report.warnings) std::printf("warning: %s\n", w.c_str());
  std::printf("decoder matched encoder: %s\n", report.decoded_exactly ? "yes" : "NO");
  return report.decoded_exactly ? 0 : 1;
}

int analyze_channels(ModelArgs& margs, const InputArgs& in, const std::string& out, int intra_period,
                     std::size_t top) {
  auto model = margs.load();
  auto seq = in.load();
  auto e = evaluate_sequence(model, seq, margs.lambda_index, intra_period, in.frames);
  if (e.context_bits.empty()) throw Error(ErrorCode::kZeroTotalBits, "no P-frames coded");
  auto ctx = top_channels(channel_bitrate_ratio(e.context_bits, LatentKind::kContextual), top);
  auto mot = top_channels(channel_bitrate_ratio(e.motion_bits, LatentKind::kMotion), top);
  for (const auto& [name, r] : {std::pair{"contextual", &ctx}, std::pair{"motion", &mot}}) {
    std::printf("%s:", name);
    for (std::size_t i = 0; i < std::min<std::size_t>(8, r->ratios.size()); ++i) {
      std::printf(" c%d=%.3f", r->channels[i], r->ratios[i]);
    }
    std::printf("\n");
  }
  if (!out.empty()) {
    fs::create_directories(out);
    nlohmann::json j;
    j["contextual"] = {{"ratios", ctx.ratios}, {"channels", ctx.channels}};
    j["motion"] = {{"ratios", mot.ratios}, {"channels", mot.channels}};
    std::ofstream(fs::path(out) / "channels.json") << j.dump(2) << '\n';
    write_channel_plot_svg(fs::path(out) / "channels_contextual.svg", ctx, "Contextual bitrate ratio");
    write_channel_plot_svg(fs::path(out) / "channels_motion.svg", mot, "Motion bitrate ratio");
  }
  return 0;
}

int bdrate(const std::string& anchor, const std::string& test, const std::string& metric) {
  auto s = bd_rate_tables(read_rd_csv(anchor), read_rd_csv(test), parse_metric(metric));
  for (const auto& [name, v] : s.per_sequence) std::printf("%-16s %8.3f%%\n", name.c_str(), v);
  std::printf("%-16s %8.3f%%\n", "average", s.average);
  return 0;
}

int sweep(const std::string& manifest_path, const std::vector<std::uint64_t>& seeds, ModelArgs& margs,
          const TrainArgs& targs, const fs::path& out) {
  std::ifstream in(manifest_path);
  if (!in) throw Error(ErrorCode::kManifestError, "cannot open " + manifest_path);
  auto manifest = nlohmann::json::parse(in);
  const auto dir = fs::path(manifest_path).parent_path();
  auto stages = load_schedule(targs.schedule);
  fs::create_directories(out);
  nlohmann::json results = manifest;
  for (auto& entry : results["configs"]) {
    const auto cfg = load_config(dir / entry["file"].get<std::string>());
    for (auto seed : seeds) {
      auto model = build_model(cfg, seed);
      auto r = run_experiment(model, stages, targs.options(margs.lambda_index, seed));
      const auto ckpt = fs::path(entry["file"].get<std::string>()).stem().string() + "_s" + std::to_string(seed) + ".pt";
      save_checkpoint(model, {cfg, margs.lambda_index, static_cast<int>(stages.size())}, out / ckpt);
      entry["runs"].push_back({{"seed", seed},
                               {"checkpoint", ckpt},
                               {"initial_loss", r.initial_loss},
                               {"final_loss", r.final_loss},
                               {"seconds", r.seconds}});
      std::printf("%s seed %llu: L_all %.4f -> %.4f (%.0f s)\n", entry["file"].get<std::string>().c_str(),
                  static_cast<unsigned long long>(seed), r.initial_loss, r.final_loss, r.seconds);
      std::fflush(stdout);
    }
  }
  std::ofstream(out / "sweep_results.json") << results.dump(2) << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  torch::set_num_threads(1);
  CLI::App app{"nvc: conditional neural video codec"};
  app.require_subcommand(1);

  auto* config = app.add_subcommand("config", "Inspect, validate and sweep model configs");
  config->require_subcommand(1);
  std::string config_file, preset = "toy", axis = "ctx_ed", scales = "1,2,4", base = "toy", sweep_out = "sweep";
  auto* c_validate = config->add_subcommand("validate", "Validate a config file and print its parameter report");
  c_validate->add_option("file", config_file)->required();
  auto* c_show = config->add_subcommand("show", "Print a preset and its parameter report");
  c_show->add_option("preset", preset);
  auto* c_sweep = config->add_subcommand("sweep", "Write one config per sweep point plus a manifest");
  c_sweep->add_option("--base", base, "Preset name or config file");
  c_sweep->add_option("--axis", axis, "motion_ed, motion_em, ctx_ed, ctx_em or tcm");
  c_sweep->add_option("--scales", scales, "Comma-separated channel multipliers");
  c_sweep->add_option("--out", sweep_out, "Output directory");

  ModelArgs margs;
  InputArgs input;
  TrainArgs targs;

  auto* train_cmd = app.add_subcommand("train", "Run the staged training schedule");
  margs.add(train_cmd);
  targs.add(train_cmd);
  std::string ckpt_out = "model.pt", log_path = "train_log.csv", resume;
  train_cmd->add_option("--out", ckpt_out, "Checkpoint written after every stage");
  train_cmd->add_option("--log", log_path, "CSV step log");
  train_cmd->add_option("--resume", resume, "Continue from a checkpoint's stage cursor");

  auto* encode_cmd = app.add_subcommand("encode", "Encode a sequence to a .nvc1 stream");
  margs.add(encode_cmd);
  input.add(encode_cmd);
  std::string stream_out = "out.nvc1", dump_dir;
  int intra_period = kDefaultIntraPeriod;
  encode_cmd->add_option("--output", stream_out, "Output stream");
  encode_cmd->add_option("--intra-period", intra_period)->check(CLI::PositiveNumber);
  encode_cmd->add_option("--dump-dir", dump_dir, "Write decoded flows and context grids as PNG");

  auto* decode_cmd = app.add_subcommand("decode", "Decode a .nvc1 stream to .yuv or a PNG directory");
  ModelArgs dargs;
  dargs.add(decode_cmd);
  std::string stream_in, decode_out = "decoded.yuv";
  decode_cmd->add_option("--input", stream_in)->required();
  decode_cmd->add_option("--output", decode_out);

  auto* eval_cmd = app.add_subcommand("eval", "Encode and decode a dataset with one checkpoint per lambda");
  std::vector<std::string> models;
  std::string eval_data, eval_out = "eval", anchor, metric = "rgb";
  int eval_frames = 96, eval_period = kDefaultIntraPeriod;
  eval_cmd->add_option("--models", models, "Checkpoints, one per lambda")->required()->delimiter(',');
  eval_cmd->add_option("--data", eval_data, "Dataset manifest.json")->required();
  eval_cmd->add_option("--out", eval_out);
  eval_cmd->add_option("--anchor", anchor, "Anchor RD CSV for BD-rate");
  eval_cmd->add_option("--frames", eval_frames);
  eval_cmd->add_option("--intra-period", eval_period);
  eval_cmd->add_option("--metric", metric, "rgb or yuv");

  auto* sweep_cmd = app.add_subcommand("sweep", "Train every config of a sweep manifest");
  ModelArgs sargs;
  sargs.add(sweep_cmd);
  TrainArgs strain;
  strain.add(sweep_cmd);
  std::string sweep_manifest, sweep_results = "sweep_results";
  std::vector<std::uint64_t> seeds{0};
  sweep_cmd->add_option("--manifest", sweep_manifest, "manifest.json from 'config sweep'")->required();
  sweep_cmd->add_option("--seeds", seeds)->delimiter(',');
  sweep_cmd->add_option("--out", sweep_results);

  auto* channels_cmd = app.add_subcommand("analyze-channels", "Per-channel bitrate ratios of a coded sequence");
  ModelArgs cargs;
  cargs.add(channels_cmd);
  InputArgs cinput;
  cinput.add(channels_cmd);
  std::string channels_out;
  std::size_t top = 100;
  int channels_period = kDefaultIntraPeriod;
  channels_cmd->add_option("--out", channels_out);
  channels_cmd->add_option("--top", top);
  channels_cmd->add_option("--intra-period", channels_period);

  auto* bd_cmd = app.add_subcommand("bdrate", "BD-rate between two RD CSV files");
  std::string bd_anchor, bd_test, bd_metric = "rgb";
  bd_cmd->add_option("anchor", bd_anchor)->required();
  bd_cmd->add_option("test", bd_test)->required();
  bd_cmd->add_option("--metric", bd_metric);

  auto* synth_cmd = app.add_subcommand("synth", "Write a procedural toy dataset");
  std::string synth_out = "toy_data";
  int count = 3, width = 96, height = 64, frames = 12;
  std::uint64_t synth_seed = 0;
  synth_cmd->add_option("--out", synth_out);
  synth_cmd->add_option("--count", count);
  synth_cmd->add_option("--width", width);
  synth_cmd->add_option("--height", height);
  synth_cmd->add_option("--frames", frames);
  synth_cmd->add_option("--seed", synth_seed);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*c_validate) return config_validate(config_file);
    if (*c_show) return config_show(preset);
    if (*c_sweep) return config_sweep(base, axis, scales, sweep_out);
    if (*train_cmd) return train(margs, targs, ckpt_out, log_path, resume);
    if (*encode_cmd) return encode(margs, input, stream_out, intra_period, dump_dir);
    if (*decode_cmd) return decode(dargs, stream_in, decode_out);
    if (*eval_cmd) return eval(models, eval_data, eval_out, anchor, eval_frames, eval_period, metric);
    if (*sweep_cmd) return sweep(sweep_manifest, seeds, sargs, strain, sweep_results);
    if (*channels_cmd) return analyze_channels(cargs, cinput, channels_out, channels_period, top);
    if (*bd_cmd) return bdrate(bd_anchor, bd_test, bd_metric);
    if (*synth_cmd) return synth(synth_out, count, width, height, frames, synth_seed);
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 0;
}
