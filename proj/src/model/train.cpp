#include "nvc/model/train.hpp"

#include <ATen/CPUGeneratorImpl.h>

#include <cmath>
#include <fstream>
#include <set>

#include "nvc/error.hpp"

namespace nvc {

namespace {

double lambda_of(int index) { return lambda_for_index(index); }

torch::Tensor intra_loss(const IntraForward& f, double lambda) { return lambda * f.distortion + f.rate.mean(); }

void check_finite(double v, const std::string& where) {
  if (!std::isfinite(v)) throw Error(ErrorCode::kNanLoss, "non-finite loss at " + where);
}

std::vector<torch::Tensor*> state_tensors(FrameState& s) {
  return {&s.frame, &s.feature, &s.long_term.hidden, &s.long_term.cell, &s.motion_prior, &s.context_prior};
}

// Leaves standing in for the previous state during a recomputed frame.
FrameState leaf_state(const FrameState& s) {
  FrameState out = s;
  for (auto* t : state_tensors(out)) {
    if (t->defined()) *t = t->detach().requires_grad_(true);
  }
  return out;
}

std::vector<torch::Tensor> leaf_grads(FrameState& leaves) {
  std::vector<torch::Tensor> g;
  for (auto* t : state_tensors(leaves)) g.push_back(t->defined() ? t->grad() : torch::Tensor());
  return g;
}

// <state, g> over the entries that carry both a graph and an incoming gradient.
torch::Tensor state_dot(FrameState& s, const std::vector<torch::Tensor>& g) {
  torch::Tensor acc;
  auto tensors = state_tensors(s);
  for (std::size_t i = 0; i < g.size(); ++i) {
    const auto& t = *tensors[i];
    if (!g[i].defined() || !t.defined() || !t.requires_grad()) continue;
    auto term = (t * g[i]).sum();
    acc = acc.defined() ? acc + term : term;
  }
  return acc;
}

void backward_if_connected(const torch::Tensor& objective) {
  if (objective.defined() && objective.requires_grad()) objective.backward();
}

void set_trainable(CodecModel& model, const std::vector<std::string>& names) {
  for (auto& p : model->parameters()) p.set_requires_grad(false);
  for (auto& p : model->group_parameters(names)) p.set_requires_grad(true);
}

void add_breakdown(LossBreakdown& acc, const LossBreakdown& b, double scale) {
  acc.d_m += b.d_m * scale;
  acc.d_y += b.d_y * scale;
  acc.r_m += b.r_m * scale;
  acc.r_y += b.r_y * scale;
}

bool motion_only(LossKind kind) { return kind == LossKind::kMeD || kind == LossKind::kMeRD; }

// Non-cascaded step: decoded state detached between frames, one backward per
// P-frame. Motion-only stages reference the ground-truth previous frame.
double detached_step(CodecModel& model, const std::vector<torch::Tensor>& frames, const TrainingStage& stage,
                     double lambda, LossBreakdown& mean, const std::string& where) {
  const auto p_frames = static_cast<double>(frames.size() - 1);
  const bool me = motion_only(stage.loss);
  FrameState state;
  if (me) {
    state.frame = frames[0];
  } else {
    torch::NoGradGuard guard;
    state = model->intra_forward(frames[0]).state;
  }
  double total = 0.0;
  for (std::size_t t = 1; t < frames.size(); ++t) {
    if (me) state.frame = frames[t - 1];
    auto f = model->inter_forward(frames[t], state, me);
    auto loss = frame_loss(stage.loss, frame_weight(f.state.p_index), lambda, f) / p_frames;
    const double v = loss.item<double>();
    check_finite(v, where);
    loss.backward();
    total += v;
    add_breakdown(mean, breakdown_of(f), 1.0 / p_frames);
    state = f.state.detached();
  }
  return total;
}

std::uint64_t fnv1a(const std::uint8_t* data, std::size_t n, std::uint64_t h) {
  for (std::size_t i = 0; i < n; ++i) {
    h ^= data[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::ofstream open_log(const std::filesystem::path& path, bool append) {
  std::ofstream out;
  if (path.empty()) return out;
  const bool fresh = !append || !std::filesystem::exists(path);
  out.open(path, append ? std::ios::app : std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIoError, "cannot open " + path.string());
  if (fresh) out << "stage,step,loss_kind,loss,d_m,d_y,r_m,r_y\n";
  return out;
}

}  // namespace

torch::Tensor frame_loss(LossKind kind, double w, double lambda, const InterForward& f) {
  switch (kind) {
    case LossKind::kMeD: return w * lambda * f.d_m;
    case LossKind::kMeRD: return w * lambda * f.d_m + f.r_m.mean();
    case LossKind::kRecD: return w * lambda * f.d_y;
    case LossKind::kRecRD: return w * lambda * f.d_y + f.r_y.mean();
    case LossKind::kAll:
    case LossKind::kCascadedAll: return w * lambda * f.d_y + f.r_m.mean() + f.r_y.mean();
  }
  throw Error(ErrorCode::kInvalidKind, "unknown loss kind");
}

LossBreakdown breakdown_of(const InterForward& f) {
  auto v = [](const torch::Tensor& t) { return t.defined() ? t.detach().mean().item<double>() : 0.0; };
  return {v(f.d_m), v(f.d_y), v(f.r_m), v(f.r_y)};
}

Rollout cascaded_rollout(CodecModel& model, const std::vector<torch::Tensor>& frames, int lambda_index) {
  if (frames.size() < 2) throw Error(ErrorCode::kInvalidConfig, "cascaded rollout needs at least two frames");
  const double lambda = lambda_of(lambda_index);
  Rollout r;
  r.intra = model->intra_forward(frames[0]);
  r.loss = intra_loss(r.intra, lambda);
  FrameState state = r.intra.state;
  for (std::size_t t = 1; t < frames.size(); ++t) {
    auto f = model->inter_forward(frames[t], state);
    r.loss = r.loss + frame_loss(LossKind::kAll, frame_weight(f.state.p_index), lambda, f);
    state = f.state;
    r.inter.push_back(std::move(f));
  }
  r.loss = r.loss / static_cast<double>(frames.size());
  return r;
}

double cascaded_backward(CodecModel& model, const std::vector<torch::Tensor>& frames, int lambda_index,
                         bool recompute, LossBreakdown* mean) {
  LossBreakdown sum;
  auto add = [&sum](const InterForward& f) {
    const auto b = breakdown_of(f);
    sum.d_m += b.d_m;
    sum.d_y += b.d_y;
    sum.r_m += b.r_m;
    sum.r_y += b.r_y;
  };
  auto finish = [&sum, mean, &frames] {
    if (mean == nullptr) return;
    const auto n = static_cast<double>(frames.size() - 1);
    *mean = {sum.d_m / n, sum.d_y / n, sum.r_m / n, sum.r_y / n};
  };
  if (!recompute) {
    auto r = cascaded_rollout(model, frames, lambda_index);
    for (const auto& f : r.inter) add(f);
    finish();
    const double v = r.loss.item<double>();
    check_finite(v, "cascaded rollout");
    backward_if_connected(r.loss);
    return v;
  }
  if (frames.size() < 2) throw Error(ErrorCode::kInvalidConfig, "cascaded rollout needs at least two frames");
  const double lambda = lambda_of(lambda_index);
  const auto count = static_cast<double>(frames.size());
  auto gen = at::detail::getDefaultCPUGenerator();

  std::vector<torch::Tensor> rng(frames.size());
  std::vector<FrameState> states(frames.size());
  double total = 0.0;
  {
    torch::NoGradGuard guard;
    rng[0] = gen.get_state();
    auto intra = model->intra_forward(frames[0]);
    total += intra_loss(intra, lambda).item<double>();
    states[0] = intra.state;
    for (std::size_t t = 1; t < frames.size(); ++t) {
      rng[t] = gen.get_state();
      auto f = model->inter_forward(frames[t], states[t - 1]);
      total += frame_loss(LossKind::kAll, frame_weight(f.state.p_index), lambda, f).item<double>();
      add(f);
      states[t] = f.state;
    }
  }
  finish();
  total /= count;
  check_finite(total, "cascaded rollout");
  auto end_state = gen.get_state();

  std::vector<torch::Tensor> grads;
  for (std::size_t t = frames.size() - 1; t >= 1; --t) {
    gen.set_state(rng[t]);
    auto leaves = leaf_state(states[t - 1]);
    auto f = model->inter_forward(frames[t], leaves);
    auto objective = frame_loss(LossKind::kAll, frame_weight(f.state.p_index), lambda, f) / count;
    auto carried = state_dot(f.state, grads);
    if (carried.defined()) objective = objective + carried;
    backward_if_connected(objective);
    grads = leaf_grads(leaves);
  }
  gen.set_state(rng[0]);
  auto intra = model->intra_forward(frames[0]);
  auto objective = intra_loss(intra, lambda) / count;
  auto carried = state_dot(intra.state, grads);
  if (carried.defined()) objective = objective + carried;
  backward_if_connected(objective);
  gen.set_state(end_state);
  return total;
}

double evaluate_all_loss(CodecModel& model, const std::vector<torch::Tensor>& frames, int lambda_index) {
  if (frames.size() < 2) throw Error(ErrorCode::kInvalidConfig, "evaluation needs at least two frames");
  const bool was_training = model->is_training();
  model->eval();
  torch::NoGradGuard guard;
  const double lambda = lambda_of(lambda_index);
  FrameState state = model->intra_forward(frames[0]).state;
  double total = 0.0;
  for (std::size_t t = 1; t < frames.size(); ++t) {
    auto f = model->inter_forward(frames[t], state);
    total += frame_loss(LossKind::kAll, frame_weight(f.state.p_index), lambda, f).item<double>();
    state = f.state;
  }
  model->train(was_training);
  return total / static_cast<double>(frames.size() - 1);
}

std::map<std::string, std::uint64_t> group_checksums(CodecModel& model) {
  std::map<std::string, std::uint64_t> out;
  for (const auto& name : module_names()) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const auto& p : model->group_parameters({name})) {
      auto c = p.detach().contiguous();
      h = fnv1a(static_cast<const std::uint8_t*>(c.data_ptr()), c.numel() * c.element_size(), h);
    }
    out[name] = h;
  }
  return out;
}

std::vector<torch::Tensor> next_batch_tensors(ClipSampler& sampler, int batch_size, int frames) {
  if (frames > sampler.clip_len()) {
    throw Error(ErrorCode::kInvalidConfig, "stage needs " + std::to_string(frames) + " frames, clips hold " +
                                               std::to_string(sampler.clip_len()));
  }
  std::vector<std::vector<Frame>> clips;
  for (auto& c : sampler.next_batch(batch_size)) {
    c.frames.resize(static_cast<std::size_t>(frames));
    clips.push_back(std::move(c.frames));
  }
  return stack_clips(clips);
}

TrainResult run_schedule(CodecModel& model, std::span<const TrainingStage> stages, ClipSampler& sampler,
                         const TrainOptions& options) {
  for (const auto& s : stages) validate_stage(s);
  torch::manual_seed(options.seed);
  model->train();
  const double lambda = lambda_of(options.lambda_index);
  auto log = open_log(options.log_path, options.first_stage > 0);
  TrainResult result;

  for (int s = options.first_stage; s < static_cast<int>(stages.size()); ++s) {
    const auto& stage = stages[s];
    const bool cascaded = stage.loss == LossKind::kCascadedAll;
    StageReport report;
    report.stage = s;
    report.trained = scope_modules(stage.scope, cascaded);
    set_trainable(model, report.trained);
    auto params = model->group_parameters(report.trained);
    torch::optim::AdamW opt(params, torch::optim::AdamWOptions(stage.learning_rate * options.lr_scale).weight_decay(0));
    const auto before = group_checksums(model);
    report.steps = stage_steps(stage, options.epoch_scale, options.steps_per_epoch);

    for (int k = 0; k < report.steps; ++k) {
      const std::string where = "stage " + std::to_string(s) + " step " + std::to_string(k);
      auto frames = next_batch_tensors(sampler, options.batch_size, stage.frames);
      opt.zero_grad();
      StepRecord rec;
      rec.stage = s;
      rec.step = k;
      rec.kind = stage.loss;
      if (cascaded) {
        rec.loss = cascaded_backward(model, frames, options.lambda_index, options.recompute, &rec.mean);
      } else {
        rec.loss = detached_step(model, frames, stage, lambda, rec.mean, where);
      }
      check_finite(rec.loss, where);
      torch::nn::utils::clip_grad_norm_(params, options.grad_clip);
      opt.step();
      if (log.is_open()) {
        log << s << ',' << k << ',' << to_string(stage.loss) << ',' << rec.loss << ',' << rec.mean.d_m << ','
            << rec.mean.d_y << ',' << rec.mean.r_m << ',' << rec.mean.r_y << '\n';
      }
      if (options.on_step) options.on_step(rec);
      result.log.push_back(rec);
    }

    const auto after = group_checksums(model);
    const std::set<std::string> trained(report.trained.begin(), report.trained.end());
    for (const auto& [name, sum] : before) {
      if (!trained.count(name) && after.at(name) != sum) report.frozen_intact = false;
    }
    result.stages.push_back(std::move(report));
    if (!options.checkpoint_path.empty()) {
      save_checkpoint(model, {model->config(), options.lambda_index, s + 1}, options.checkpoint_path);
    }
  }
  for (auto& p : model->parameters()) p.set_requires_grad(true);
  return result;
}

double pretrain_intra(CodecModel& model, ClipSampler& sampler, const TrainOptions& options, int steps,
                      double learning_rate) {
  model->train();
  set_trainable(model, {"intra"});
  auto params = model->group_parameters({"intra"});
  torch::optim::AdamW opt(params, torch::optim::AdamWOptions(learning_rate).weight_decay(0));
  const double lambda = lambda_of(options.lambda_index);
  double last = 0.0;
  for (int k = 0; k < steps; ++k) {
    auto frames = next_batch_tensors(sampler, options.batch_size, 1);
    opt.zero_grad();
    auto loss = intra_loss(model->intra_forward(frames[0]), lambda);
    last = loss.item<double>();
    check_finite(last, "intra pretraining step " + std::to_string(k));
    loss.backward();
    torch::nn::utils::clip_grad_norm_(params, options.grad_clip);
    opt.step();
  }
  for (auto& p : model->parameters()) p.set_requires_grad(true);
  return last;
}

double pretrain_flow(CodecModel& model, ClipSampler& sampler, const TrainOptions& options, int steps,
                     double learning_rate) {
  model->train();
  set_trainable(model, {"motion_estimation"});
  auto params = model->group_parameters({"motion_estimation"});
  torch::optim::AdamW opt(params, torch::optim::AdamWOptions(learning_rate).weight_decay(0));
  double last = 0.0;
  for (int k = 0; k < steps; ++k) {
    auto frames = next_batch_tensors(sampler, options.batch_size, 2);
    opt.zero_grad();
    auto motion = model->motion_estimation(frames[1], frames[0]);
    auto loss = torch::mse_loss(motion_compensate(frames[0], motion), frames[1]);
    last = loss.item<double>();
    check_finite(last, "flow pretraining step " + std::to_string(k));
    loss.backward();
    torch::nn::utils::clip_grad_norm_(params, options.grad_clip);
    opt.step();
  }
  for (auto& p : model->parameters()) p.set_requires_grad(true);
  return last;
}

void save_checkpoint(CodecModel& model, const Checkpoint& meta, const std::filesystem::path& path) {
  torch::serialize::OutputArchive archive;
  model->save(archive);
  archive.write("nvc_config", c10::IValue(to_json(meta.config)));
  archive.write("nvc_lambda_index", c10::IValue(static_cast<int64_t>(meta.lambda_index)));
  archive.write("nvc_stage_cursor", c10::IValue(static_cast<int64_t>(meta.stage_cursor)));
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  archive.save_to(path.string());
}

std::pair<CodecModel, Checkpoint> load_checkpoint(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw Error(ErrorCode::kMissingCheckpoint, "no checkpoint at " + path.string());
  torch::serialize::InputArchive archive;
  archive.load_from(path.string());
  c10::IValue config, lambda_index, cursor;
  archive.read("nvc_config", config);
  archive.read("nvc_lambda_index", lambda_index);
  archive.read("nvc_stage_cursor", cursor);
  Checkpoint meta;
  meta.config = config_from_json(config.toStringRef());
  meta.lambda_index = static_cast<int>(lambda_index.toInt());
  meta.stage_cursor = static_cast<int>(cursor.toInt());
  auto model = build_model(meta.config, 0);
  model->load(archive);
  return {model, meta};
}

}  // namespace nvc
