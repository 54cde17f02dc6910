// Prints one PASS/FAIL line per acceptance criterion. Exit status is the
// number of failures.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <numeric>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <torch/torch.h>

#include "CLI11.hpp"
#include "nvc/bitstream.hpp"
#include "nvc/config.hpp"
#include "nvc/error.hpp"
#include "nvc/loss.hpp"
#include "nvc/metrics.hpp"
#include "nvc/model/codec.hpp"
#include "nvc/model/entropy.hpp"
#include "nvc/model/experiment.hpp"
#include "nvc/model/session.hpp"
#include "nvc/model/train.hpp"
#include "nvc/synthetic.hpp"
#include "oracles.hpp"
#include "test_paths.hpp"

namespace fs = std::filesystem;
using namespace nvc;

namespace {

struct Settings {
  bool quick = false;
  int seeds = 3;
  double smoke_epoch_scale = 1.0;
  double scaling_epoch_scale = 0.1;
  int steps_per_epoch = 10;
  double lr_scale = 10.0;
  int intra_steps = 200;
  int flow_steps = 100;
  int arch_steps = 200;
  int finetune_steps = 30;
  fs::path work;
};

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string format_line(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

std::vector<TrainingStage> desk_schedule() { return load_schedule(fs::path(NVC_SOURCE_DIR) / "schedules/table2_rgb.csv"); }

ExperimentOptions experiment_options(const Settings& s, std::uint64_t seed, double epoch_scale) {
  ExperimentOptions o;
  o.train.seed = seed;
  o.train.lambda_index = 3;
  o.train.batch_size = 4;
  o.train.epoch_scale = epoch_scale;
  o.train.steps_per_epoch = s.steps_per_epoch;
  o.train.lr_scale = s.lr_scale;
  o.clips = 100;
  o.intra_steps = s.intra_steps;
  o.flow_steps = s.flow_steps;
  return o;
}

// ---------------------------------------------------------------------------
// Trained models shared between criteria.

struct Shared {
  const Settings& settings;
  std::vector<ExperimentResult> smoke;
  std::optional<fs::path> base_checkpoint;

  fs::path base_model() {
    if (base_checkpoint) return *base_checkpoint;
    const auto path = settings.work / "base_quick.pt";
    auto model = build_model(presets::toy(), 0);
    const auto stages = desk_schedule();
    std::printf("  training a base model for the lambda set\n");
    run_experiment(model, stages, experiment_options(settings, 0, settings.scaling_epoch_scale));
    save_checkpoint(model, {presets::toy(), 3, static_cast<int>(stages.size())}, path);
    base_checkpoint = path;
    return path;
  }

  // One model per lambda: the base model fine-tuned at each lambda index.
  std::vector<CodecModel> lambda_models() {
    std::vector<CodecModel> models;
    const std::vector<TrainingStage> tune = {{4, TrainScope::kAll, LossKind::kAll, 5e-5, 1.0}};
    for (int li = 0; li < 4; ++li) {
      auto [model, meta] = load_checkpoint(base_model());
      if (li != meta.lambda_index) {
        TrainOptions o;
        o.seed = 100 + li;
        o.lambda_index = li;
        o.batch_size = 4;
        o.steps_per_epoch = settings.finetune_steps;
        o.lr_scale = settings.lr_scale;
        ClipSampler sampler(make_toy_clips(100, 96, 96, 6, 1), 4, 64, o.seed);
        run_schedule(model, tune, sampler, o);
      }
      model->eval();
      models.push_back(model);
    }
    return models;
  }
};

// ---------------------------------------------------------------------------

std::vector<VideoSequence> round_trip_sequences() {
  return {make_synthetic_sequence(SyntheticKind::kObjects, 96, 64, 10, 21),
          make_synthetic_sequence(SyntheticKind::kTranslate, 128, 128, 9, 22),
          make_synthetic_sequence(SyntheticKind::kOcclusion, 80, 72, 12, 23)};
}

struct CodingRun {
  bool exact = true;
  std::size_t frames = 0;
  double worst_margin = -1e300;  // max of |payload - estimate| - (2% + 256)
  double payload_bits = 0.0;
  double estimated_bits = 0.0;
  double seconds = 0.0;
};

CodingRun code_all(std::vector<CodecModel>& models) {
  CodingRun run;
  const auto t0 = std::chrono::steady_clock::now();
  for (int li = 0; li < 4; ++li) {
    for (const auto& seq : round_trip_sequences()) {
      auto coded = encode_sequence(models[li], seq.frames, li, 8);
      std::vector<std::uint8_t> bytes;
      for (const auto& u : coded.units) append_serialized(u, bytes);
      auto decoded = decode_sequence(models[li], parse_stream(bytes));
      for (std::size_t i = 0; i < coded.units.size(); ++i) {
        run.exact = run.exact && torch::equal(decoded.padded[i], coded.encoder_padded[i]) &&
                    decoded.reconstructions[i] == coded.encoder_reconstructions[i];
        const double payload = 8.0 * static_cast<double>(coded.stats[i].payload_bytes);
        const double est = coded.stats[i].estimated_bits;
        run.worst_margin = std::max(run.worst_margin, std::abs(payload - est) - (0.02 * est + 256.0));
        run.payload_bits += payload;
        run.estimated_bits += est;
        ++run.frames;
      }
    }
  }
  run.seconds = seconds_since(t0);
  return run;
}

std::optional<CodingRun> coding_cache;

CodingRun& coding(Shared& shared) {
  if (!coding_cache) {
    auto models = shared.lambda_models();
    coding_cache = code_all(models);
  }
  return *coding_cache;
}

Outcome round_trip(Shared& shared) {
  const auto& r = coding(shared);
  return {r.exact && r.seconds < 600.0,
          format_line("%zu frames over 3 sequences x 4 lambdas, decoder %s encoder, coding time %.1f s", r.frames,
              r.exact ? "matches" : "DIFFERS from", r.seconds)};
}

Outcome rate_fidelity(Shared& shared) {
  const auto& r = coding(shared);
  return {r.worst_margin <= 0.0,
          format_line("payload %.0f bits vs estimate %.0f bits (%.3f%%), worst frame margin %.1f bits", r.payload_bits,
              r.estimated_bits, 100.0 * (r.payload_bits / r.estimated_bits - 1.0), r.worst_margin)};
}

// ---------------------------------------------------------------------------

Outcome entropy_gradients(Shared&) {
  auto scalar = [](double v) { return torch::tensor({v}, torch::kFloat64); };
  auto bits = [&](double q, double mu, double sigma) {
    return laplace_bits(scalar(q), scalar(mu), scalar(sigma)).item<double>();
  };
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> mu_d(-3.0, 3.0), sigma_d(0.05, 5.0);
  std::uniform_int_distribution<int> q_d(-6, 6);
  const double h = 1e-4;
  int checked = 0;
  double worst = 0.0;
  while (checked < 100) {
    const double q = q_d(rng), mu = mu_d(rng), sigma = sigma_d(rng);
    if (std::abs(std::abs(q - mu) - 0.5) < 1e-2 || bits(q, mu, sigma) > 15.0) continue;
    auto m = scalar(mu).requires_grad_(true);
    auto s = scalar(sigma).requires_grad_(true);
    laplace_bits(scalar(q), m, s).sum().backward();
    const double fm = (bits(q, mu + h, sigma) - bits(q, mu - h, sigma)) / (2 * h);
    const double fs = (bits(q, mu, sigma + h) - bits(q, mu, sigma - h)) / (2 * h);
    auto rel = [](double g, double f) { return std::abs(g - f) / std::max({std::abs(g), std::abs(f), 1e-6}); };
    worst = std::max({worst, rel(m.grad().item<double>(), fm), rel(s.grad().item<double>(), fs)});
    ++checked;
  }
  return {worst < 1e-4, format_line("100 points, worst relative error %.2e", worst)};
}

Outcome quadtree_causality(Shared&) {
  std::mt19937_64 rng(11);
  const ArchKind kinds[] = {ArchKind::kCnn, ArchKind::kMixed, ArchKind::kTransformer};
  int violations = 0;
  torch::NoGradGuard guard;
  for (int trial = 0; trial < 20; ++trial) {
    const int c = 4 * (1 + static_cast<int>(rng() % 4));
    const int ch = 8 * (1 + static_cast<int>(rng() % 3));
    const int h = 4 * (1 + static_cast<int>(rng() % 3)), w = 4 * (1 + static_cast<int>(rng() % 3));
    const bool temporal = rng() % 2 == 0;
    const auto kind = kinds[rng() % 3];
    torch::manual_seed(trial);
    LatentEntropyModel model(c, ch, 4, temporal ? 8 : 0, true, kind, AttentionConfig{8, 4, 1});
    model->eval();
    EntropyPriors priors{torch::randn({1, c, h, w}),
                         temporal ? torch::randn({1, 8, 4 * h, 4 * w}) : torch::Tensor()};
    auto hyper = torch::randn({1, ch, h, w});
    auto decoded = torch::randn({1, c, h, w});
    for (int k = 0; k < kQuadtreeSteps; ++k) {
      auto base = model->step_params(k, hyper, decoded, priors);
      auto undecoded = 1.0 - quadtree_decoded_mask(h, w, k, decoded.options());
      auto again = model->step_params(k, hyper, decoded + undecoded * torch::randn_like(decoded) * 10.0, priors);
      if (!torch::equal(base.mean, again.mean) || !torch::equal(base.scale, again.scale)) ++violations;
    }
  }
  return {violations == 0, format_line("20 configs x %d steps, %d violations", kQuadtreeSteps, violations)};
}

Outcome loss_arithmetic(Shared&) {
  std::vector<std::string> bad;
  auto near = [](double a, double b) { return std::abs(a - b) <= 1e-12; };
  if (!near(compute_loss(LossKind::kMeRD, 1.0, 85, {0.01, 0, 0.2, 0}), 1.05)) bad.push_back("meRD");
  if (!near(compute_loss(LossKind::kAll, 1.2, 170, {0, 0.005, 0.1, 0.3}), 1.42)) bad.push_back("all");
  const std::vector<WeightedFrame> frames = {{1.2, {0, 0.005, 0.1, 0.3}}, {1.2, {0, 0.005, 0.1, 0.3}}};
  if (!near(cascaded_loss(170, frames), 1.42)) bad.push_back("cascaded");
  const LossBreakdown b{0.02, 0.003, 0.15, 0.4};
  if (compute_loss(LossKind::kMeD, 0.9, 380, b) != 0.9 * 380 * 0.02) bad.push_back("meD");
  if (compute_loss(LossKind::kRecD, 0.9, 380, b) != 0.9 * 380 * 0.003) bad.push_back("recD");
  if (compute_loss(LossKind::kRecRD, 0.9, 380, b) != 0.9 * 380 * 0.003 + 0.4) bad.push_back("recRD");
  const double w[4] = {0.5, 1.2, 0.5, 0.9};
  for (int p = 1; p <= 64; ++p) {
    if (frame_weight(p) != w[(p - 1) % 4]) {
      bad.push_back("frame_weight(" + std::to_string(p) + ")");
      break;
    }
  }
  if (kLambdas != std::array<double, 4>{85, 170, 380, 840}) bad.push_back("lambda set");
  for (int i = 0; i < 4; ++i) {
    if (lambda_for_index(i) != kLambdas[i]) bad.push_back("lambda_for_index");
  }
  std::string detail = "meRD 1.05, all 1.42, cascaded 1.42, weights 0.5/1.2/0.5/0.9, lambdas 85/170/380/840";
  for (const auto& s : bad) detail += " [mismatch " + s + "]";
  return {bad.empty(), detail};
}

Outcome bd_rate_oracle(Shared&) {
  std::mt19937_64 rng(2024);
  double worst = 0.0, worst_identity = 0.0, worst_half = 0.0;
  for (int i = 0; i < 20; ++i) {
    const RDCurve a = oracle::random_curve(rng, 4);
    RDCurve t = oracle::random_curve(rng, 4);
    const double q0 = t.points.front().quality;
    for (auto& p : t.points) p.quality = a.points.front().quality + (p.quality - q0) * 0.9 + 0.2;
    const double want = oracle::oracle_bd_rate(a, t);
    worst = std::max(worst, std::abs(bd_rate(a, t) - want) / std::max(1.0, std::abs(want)));
    worst_identity = std::max(worst_identity, std::abs(bd_rate(a, a)));
    RDCurve half = a;
    for (auto& p : half.points) p.bpp /= 2;
    worst_half = std::max(worst_half, std::abs(bd_rate(a, half) + 50.0));
  }
  return {worst <= 1e-6 && worst_identity == 0.0 && worst_half < 1e-10,
          format_line("20 pairs, worst relative deviation %.2e; identity %.1e; half rate off by %.1e", worst,
              worst_identity, worst_half)};
}

Outcome channel_ratios(Shared&) {
  const auto two = channel_bitrate_ratio({{2.0, 1.0}, {1.0, 0.0}}, LatentKind::kContextual);
  const bool hand = two.ratios == std::vector<double>{0.75, 0.25} && two.channels == std::vector<int>{0, 1};
  std::mt19937_64 rng(3);
  std::exponential_distribution<double> e(0.1);
  double worst = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    const int c = 1 + trial * 7;
    std::vector<std::vector<double>> bits(5, std::vector<double>(c));
    for (auto& f : bits) for (auto& b : f) b = e(rng);
    for (auto kind : {LatentKind::kContextual, LatentKind::kMotion}) {
      const auto r = channel_bitrate_ratio(bits, kind);
      worst = std::max(worst, std::abs(std::accumulate(r.ratios.begin(), r.ratios.end(), 0.0) - 1.0));
    }
  }
  return {hand && worst <= 1e-9,
          format_line("hand case (%.2f, %.2f); 100 reports, worst |sum - 1| = %.1e", two.ratios[0], two.ratios[1], worst)};
}

// ---------------------------------------------------------------------------

Outcome training_smoke(Shared& shared) {
  const auto& s = shared.settings;
  const auto stages = desk_schedule();
  double drop_sum = 0.0, total_seconds = 0.0;
  bool intact = true;
  std::string per_seed;
  for (int seed = 0; seed < s.seeds; ++seed) {
    auto model = build_model(presets::toy(), seed);
    auto r = run_experiment(model, stages, experiment_options(s, seed, s.smoke_epoch_scale));
    for (const auto& st : r.train.stages) intact = intact && st.frozen_intact;
    const double drop = 1.0 - r.final_loss / r.initial_loss;
    drop_sum += drop;
    total_seconds += r.seconds;
    per_seed += format_line(" seed %d: %.1f -> %.1f -> %.1f (%.1f%%, %zu steps, %.0f s);", seed, r.untrained_loss,
                    r.initial_loss, r.final_loss, 100.0 * drop, r.train.log.size(), r.seconds);
    std::printf("  smoke%s\n", per_seed.substr(per_seed.rfind(" seed")).c_str());
    std::fflush(stdout);
    if (seed == 0) {
      const auto path = s.work / "smoke_s0.pt";
      save_checkpoint(model, {presets::toy(), 3, static_cast<int>(stages.size())}, path);
      shared.base_checkpoint = path;
    }
    shared.smoke.push_back(r);
  }
  const double mean_drop = drop_sum / s.seeds;
  return {mean_drop >= 0.20 && intact,
          format_line("mean L_all drop %.1f%% over %d seeds, frozen checksums %s, %.0f s total;", 100.0 * mean_drop,
              s.seeds, intact ? "intact" : "CHANGED", total_seconds) +
              per_seed};
}

Outcome scaling_direction(Shared& shared) {
  const auto& s = shared.settings;
  const auto stages = desk_schedule();
  const std::vector<double> scales = {4.0};
  const auto ctx = enumerate_sweep(presets::toy(), SweepAxis::kContextualEncDec, scales).front();
  const auto tcm = enumerate_sweep(presets::toy(), SweepAxis::kTcm, scales).front();
  int ctx_wins = 0, tcm_wins = 0;
  std::string detail;
  for (int seed = 0; seed < s.seeds; ++seed) {
    double loss[3];
    const ModelConfig* cfgs[3] = {nullptr, &ctx, &tcm};
    const auto base = presets::toy();
    cfgs[0] = &base;
    for (int k = 0; k < 3; ++k) {
      auto model = build_model(*cfgs[k], seed);
      loss[k] = run_experiment(model, stages, experiment_options(s, seed, s.scaling_epoch_scale)).final_loss;
    }
    ctx_wins += loss[1] < loss[0];
    tcm_wins += loss[2] < loss[0];
    detail += format_line(" seed %d: base %.2f, ctx x4 %.2f, tcm x4 %.2f;", seed, loss[0], loss[1], loss[2]);
    std::printf("  scaling%s\n", detail.substr(detail.rfind(" seed")).c_str());
    std::fflush(stdout);
  }
  const int need = (2 * s.seeds + 2) / 3;
  return {ctx_wins >= need && tcm_wins >= need,
          format_line("contextual x4 wins %d/%d, tcm x4 wins %d/%d;", ctx_wins, s.seeds, tcm_wins, s.seeds) + detail};
}

bool shape_contract(CodecModel& model) {
  const auto& cfg = model->config();
  torch::NoGradGuard guard;
  auto x0 = torch::rand({2, 3, 64, 64});
  auto x1 = torch::rand({2, 3, 64, 64});
  auto intra = model->intra_forward(x0);
  auto inter = model->inter_forward(x1, intra.state);
  bool ok = intra.recon.frame.sizes() == x0.sizes() && intra.rate.sizes() == torch::IntArrayRef{2} &&
            intra.recon.feature.sizes() == torch::IntArrayRef{2, cfg.tcm.feature_channels, 64, 64} &&
            inter.recon.frame.sizes() == x1.sizes() && inter.warped.sizes() == x1.sizes() &&
            inter.motion_latent_bits.sizes() ==
                torch::IntArrayRef{2, cfg.motion_entropy.latent_channels, 4, 4} &&
            inter.context_latent_bits.sizes() ==
                torch::IntArrayRef{2, cfg.contextual_enc_dec.latent_channels, 4, 4} &&
            inter.state.long_term.hidden.sizes() == torch::IntArrayRef{2, cfg.tcm.feature_channels, 64, 64} &&
            inter.state.p_index == 1 && torch::isfinite(inter.r_y).all().item<bool>() &&
            inter.recon.frame.min().item<float>() >= 0.0f && inter.recon.frame.max().item<float>() <= 1.0f;
  try {
    model->inter_forward(torch::rand({2, 3, 48, 64}), intra.state);
    ok = false;
  } catch (const Error&) {
  }
  return ok;
}

Outcome architecture_variants(Shared& shared) {
  const auto& s = shared.settings;
  bool all_ok = true;
  std::string detail;
  const std::vector<TrainingStage> stage = {{2, TrainScope::kAll, LossKind::kAll, 1e-4, 1.0}};
  for (auto kind : {ArchKind::kCnn, ArchKind::kMixed, ArchKind::kTransformer}) {
    auto cfg = presets::toy();
    cfg.arch_kind = kind;
    std::string status;
    bool ok = true;
    try {
      auto model = build_model(cfg, 0);
      const auto params = count_parameters(model).total;
      TrainOptions o;
      o.seed = 0;
      o.batch_size = 2;
      o.steps_per_epoch = s.arch_steps;
      o.lr_scale = s.lr_scale;
      ClipSampler sampler(make_toy_clips(16, 96, 96, 2, 5), 2, 64, 0);
      auto r = run_schedule(model, stage, sampler, o);
      for (const auto& rec : r.log) ok = ok && std::isfinite(rec.loss);
      ok = ok && static_cast<int>(r.log.size()) == s.arch_steps && shape_contract(model);
      status = format_line("%lld params, %zu steps, last loss %.2f", static_cast<long long>(params), r.log.size(),
                   r.log.empty() ? 0.0 : r.log.back().loss);
    } catch (const Error& e) {
      ok = false;
      status = e.what();
    }
    all_ok = all_ok && ok;
    detail += format_line(" %s: %s%s;", std::string(to_string(kind)).c_str(), status.c_str(), ok ? "" : " FAILED");
  }
  return {all_ok, "built, trained and shape-checked;" + detail};
}

struct Criterion {
  int id;
  const char* name;
  std::function<Outcome(Shared&)> run;
};

}  // namespace

int main(int argc, char** argv) {
  torch::set_num_threads(1);
  Settings s;
  std::string only;
  CLI::App app{"acceptance criteria"};
  app.add_flag("--quick", s.quick, "short training runs for development");
  app.add_option("--only", only, "comma-separated criterion numbers");
  app.add_option("--seeds", s.seeds, "seeds for the training experiments");
  app.add_option("--work", s.work, "directory for checkpoints")->default_val("acceptance_work");
  app.add_option("--smoke-epoch-scale", s.smoke_epoch_scale);
  app.add_option("--scaling-epoch-scale", s.scaling_epoch_scale);
  app.add_option("--lr-scale", s.lr_scale);
  CLI11_PARSE(app, argc, argv);
  if (s.quick) {
    s.smoke_epoch_scale = s.scaling_epoch_scale = 0.02;
    s.intra_steps = 20;
    s.flow_steps = 10;
    s.arch_steps = 10;
    s.finetune_steps = 3;
  }
  fs::create_directories(s.work);

  std::set<int> selected;
  std::stringstream ss(only);
  for (std::string tok; std::getline(ss, tok, ',');) {
    if (!tok.empty()) selected.insert(std::stoi(tok));
  }

  // Training criteria run first so the lambda models start from the smoke run.
  const std::vector<Criterion> criteria = {
      {8, "training smoke", training_smoke},
      {1, "bitstream round-trip", round_trip},
      {2, "rate fidelity", rate_fidelity},
      {3, "entropy-model gradients", entropy_gradients},
      {4, "quadtree causality", quadtree_causality},
      {5, "loss arithmetic", loss_arithmetic},
      {6, "bd-rate oracle", bd_rate_oracle},
      {7, "channel bitrate ratios", channel_ratios},
      {9, "scaling direction", scaling_direction},
      {10, "architecture variants", architecture_variants},
  };
  Shared shared{s, {}, {}};
  std::vector<std::pair<int, std::string>> lines;
  int failures = 0;
  for (const auto& c : criteria) {
    if (!selected.empty() && !selected.contains(c.id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run(shared);
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    failures += !o.pass;
    auto line = format_line("%s [%d] %s (%.0f s): ", o.pass ? "PASS" : "FAIL", c.id, c.name, seconds_since(t0)) + o.detail;
    std::printf("%s\n", line.c_str());
    std::fflush(stdout);
    lines.emplace_back(c.id, line);
  }
  std::sort(lines.begin(), lines.end());
  std::printf("\nsummary%s\n", s.quick ? " (quick settings, not an acceptance run)" : "");
  for (const auto& [id, line] : lines) std::printf("%s\n", line.c_str());
  return failures;
}
