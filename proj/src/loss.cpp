#include "nvc/loss.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string>

#include "nvc/error.hpp"

namespace nvc {

double lambda_for_index(int index) {
  if (index < 0 || index >= static_cast<int>(kLambdas.size())) {
    throw Error(ErrorCode::kIndexOutOfRange, "lambda index " + std::to_string(index));
  }
  return kLambdas[static_cast<std::size_t>(index)];
}

double frame_weight(int p_index) {
  if (p_index < 1) {
    throw Error(ErrorCode::kIndexOutOfRange, "P-frame index must be >= 1, got " + std::to_string(p_index));
  }
  return kFrameWeights[static_cast<std::size_t>((p_index - 1) % 4)];
}

std::string_view to_string(TrainScope scope) {
  switch (scope) {
    case TrainScope::kInter: return "inter";
    case TrainScope::kRecon: return "recon";
    case TrainScope::kAll: return "all";
  }
  return "?";
}

std::string_view to_string(LossKind kind) {
  switch (kind) {
    case LossKind::kMeD: return "meD";
    case LossKind::kMeRD: return "meRD";
    case LossKind::kRecD: return "recD";
    case LossKind::kRecRD: return "recRD";
    case LossKind::kAll: return "all";
    case LossKind::kCascadedAll: return "cascaded_all";
  }
  return "?";
}

TrainScope parse_scope(std::string_view name) {
  if (name == "inter") return TrainScope::kInter;
  if (name == "recon") return TrainScope::kRecon;
  if (name == "all") return TrainScope::kAll;
  throw Error(ErrorCode::kInvalidKind, "unknown scope '" + std::string(name) + "'");
}

LossKind parse_loss_kind(std::string_view name) {
  for (LossKind k : {LossKind::kMeD, LossKind::kMeRD, LossKind::kRecD, LossKind::kRecRD,
                     LossKind::kAll, LossKind::kCascadedAll}) {
    if (name == to_string(k)) return k;
  }
  throw Error(ErrorCode::kInvalidKind, "unknown loss kind '" + std::string(name) + "'");
}

double compute_loss(LossKind kind, double w, double lambda, const LossBreakdown& b) {
  switch (kind) {
    case LossKind::kMeD: return w * lambda * b.d_m;
    case LossKind::kMeRD: return w * lambda * b.d_m + b.r_m;
    case LossKind::kRecD: return w * lambda * b.d_y;
    case LossKind::kRecRD: return w * lambda * b.d_y + b.r_y;
    case LossKind::kAll:
    case LossKind::kCascadedAll: return w * lambda * b.d_y + b.r_m + b.r_y;
  }
  throw Error(ErrorCode::kInvalidKind, "loss kind " + std::to_string(static_cast<int>(kind)));
}

double cascaded_loss(double lambda, std::span<const WeightedFrame> frames) {
  if (frames.empty()) throw Error(ErrorCode::kInvalidKind, "cascaded loss over zero frames");
  double sum = 0.0;
  for (const auto& f : frames) sum += compute_loss(LossKind::kAll, f.w, lambda, f.breakdown);
  return sum / static_cast<double>(frames.size());
}

void validate_stage(const TrainingStage& s) {
  const bool inter_loss = s.loss == LossKind::kMeD || s.loss == LossKind::kMeRD;
  const bool recon_loss = s.loss == LossKind::kRecD || s.loss == LossKind::kRecRD;
  if (inter_loss && s.scope != TrainScope::kInter) {
    throw Error(ErrorCode::kInvalidConfig, std::string(to_string(s.loss)) + " requires scope inter");
  }
  if (recon_loss && s.scope != TrainScope::kRecon) {
    throw Error(ErrorCode::kInvalidConfig, std::string(to_string(s.loss)) + " requires scope recon");
  }
  if (s.frames < 2) throw Error(ErrorCode::kInvalidConfig, "stage frames must be >= 2");
  if (!(s.learning_rate > 0) || !std::isfinite(s.learning_rate)) {
    throw Error(ErrorCode::kInvalidConfig, "stage learning rate must be positive");
  }
  if (!(s.epochs > 0) || !std::isfinite(s.epochs)) {
    throw Error(ErrorCode::kInvalidConfig, "stage epochs must be positive");
  }
}

std::vector<TrainingStage> load_schedule(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open " + path.string());
  std::string line;
  std::getline(in, line);
  if (line.rfind("frames,scope,loss,lr,epochs", 0) != 0) {
    throw Error(ErrorCode::kInvalidConfig, path.string() + ": unexpected schedule header");
  }
  std::vector<TrainingStage> stages;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::stringstream ss(line);
    std::string f, scope, loss, lr, epochs;
    std::getline(ss, f, ',');
    std::getline(ss, scope, ',');
    std::getline(ss, loss, ',');
    std::getline(ss, lr, ',');
    std::getline(ss, epochs, ',');
    TrainingStage s;
    try {
      s.frames = std::stoi(f);
      s.learning_rate = std::stod(lr);
      s.epochs = std::stod(epochs);
    } catch (const std::exception&) {
      throw Error(ErrorCode::kInvalidConfig, path.string() + ": bad row '" + line + "'");
    }
    s.scope = parse_scope(scope);
    s.loss = parse_loss_kind(loss);
    validate_stage(s);
    stages.push_back(s);
  }
  return stages;
}

void save_schedule(const std::filesystem::path& path, std::span<const TrainingStage> stages) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::kIoError, "cannot write " + path.string());
  out << "frames,scope,loss,lr,epochs\n";
  for (const auto& s : stages) {
    out << s.frames << ',' << to_string(s.scope) << ',' << to_string(s.loss) << ','
        << s.learning_rate << ',' << s.epochs << '\n';
  }
}

int stage_steps(const TrainingStage& stage, double epoch_scale, int steps_per_epoch) {
  const double steps = std::round(stage.epochs * epoch_scale * steps_per_epoch);
  return std::max(1, static_cast<int>(steps));
}

}  // namespace nvc
