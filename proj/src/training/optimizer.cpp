#include <algorithm>
#include <cmath>

#include "inmt/error.hpp"
#include "inmt/training.hpp"

namespace inmt {

namespace {

constexpr double kAdamBeta1 = 0.9;
constexpr double kAdamBeta2 = 0.999;
constexpr double kAdamEps = 1e-8;
constexpr double kAdadeltaRho = 0.95;
constexpr double kAdadeltaEps = 1e-6;

std::vector<Tensor*> tensors(ModelParams& p) {
  std::vector<Tensor*> out;
  p.for_each([&](std::string_view, Tensor& t) { out.push_back(&t); });
  return out;
}

std::vector<const Tensor*> tensors(const ModelParams& p) {
  std::vector<const Tensor*> out;
  p.for_each([&](std::string_view, const Tensor& t) { out.push_back(&t); });
  return out;
}

}  // namespace

std::string_view to_string(OptimizerKind kind) {
  switch (kind) {
    case OptimizerKind::sgd: return "sgd";
    case OptimizerKind::adam: return "adam";
    case OptimizerKind::adadelta: return "adadelta";
  }
  return "?";
}

std::string_view to_string(ScheduleKind kind) {
  switch (kind) {
    case ScheduleKind::constant: return "constant";
    case ScheduleKind::linear: return "linear";
    case ScheduleKind::exponential: return "exponential";
    case ScheduleKind::noam: return "noam";
  }
  return "?";
}

OptimizerKind parse_optimizer(std::string_view name) {
  if (name == "sgd") return OptimizerKind::sgd;
  if (name == "adam") return OptimizerKind::adam;
  if (name == "adadelta") return OptimizerKind::adadelta;
  throw ConfigError("unknown optimizer '" + std::string(name) + "'");
}

ScheduleKind parse_schedule(std::string_view name) {
  if (name == "constant") return ScheduleKind::constant;
  if (name == "linear") return ScheduleKind::linear;
  if (name == "exponential") return ScheduleKind::exponential;
  if (name == "noam") return ScheduleKind::noam;
  throw ConfigError("unknown schedule '" + std::string(name) + "'");
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw ConfigError("learning rate must be positive");
  if (!(label_smoothing >= 0.0 && label_smoothing < 1.0)) {
    throw ConfigError("label smoothing must lie in [0, 1)");
  }
  if (weight_decay < 0.0) throw ConfigError("weight decay must be non-negative");
  if (coverage_penalty < 0.0) throw ConfigError("coverage penalty must be non-negative");
  if (!(clip_norm > 0.0)) throw ConfigError("clip norm must be positive");
  if (batch_size == 0) throw ConfigError("batch size must be positive");
  if (max_epochs == 0) throw ConfigError("max epochs must be positive");
  if (schedule == ScheduleKind::exponential && !(decay > 0.0)) {
    throw ConfigError("exponential decay must be positive");
  }
  if (schedule == ScheduleKind::linear && total_steps == 0) {
    throw ConfigError("linear schedule needs total steps");
  }
  if (schedule == ScheduleKind::noam && (warmup_steps == 0 || model_dim == 0)) {
    throw ConfigError("noam schedule needs warmup steps and model dim");
  }
}

double schedule_lr(double base_lr, std::size_t step, const TrainConfig& config) {
  if (step == 0) throw ConfigError("schedule steps are 1-based");
  const double s = static_cast<double>(step);
  switch (config.schedule) {
    case ScheduleKind::constant:
      return base_lr;
    case ScheduleKind::linear:
      return base_lr * std::max(0.0, 1.0 - s / static_cast<double>(config.total_steps));
    case ScheduleKind::exponential:
      return base_lr * std::pow(config.decay, s);
    case ScheduleKind::noam: {
      const double w = static_cast<double>(config.warmup_steps);
      return std::pow(static_cast<double>(config.model_dim), -0.5) *
             std::min(std::pow(s, -0.5), s * std::pow(w, -1.5));
    }
  }
  return base_lr;
}

void optimizer_step(ModelParams& params, const Gradients& grads, OptimizerState& state,
                    const TrainConfig& config) {
  auto ps = tensors(params);
  auto gs = tensors(grads);
  if (ps.size() != gs.size()) throw ShapeError("optimizer_step: parameter count mismatch");
  for (std::size_t i = 0; i < ps.size(); ++i) {
    if (ps[i]->shape != gs[i]->shape) throw ShapeError("optimizer_step: gradient shape mismatch");
  }
  ++state.step;
  const double lr = schedule_lr(config.learning_rate, state.step, config);

  if (config.weight_decay > 0.0) {
    for (auto* p : ps)
      for (double& x : p->data) x -= lr * config.weight_decay * x;
  }

  switch (config.optimizer) {
    case OptimizerKind::sgd:
      for (std::size_t i = 0; i < ps.size(); ++i) {
        auto& w = ps[i]->data;
        const auto& g = gs[i]->data;
        for (std::size_t k = 0; k < w.size(); ++k) w[k] -= lr * g[k];
      }
      break;
    case OptimizerKind::adam: {
      if (!state.first) state.first = Gradients::zeros(params.dims, params.attention);
      if (!state.second) state.second = Gradients::zeros(params.dims, params.attention);
      auto ms = tensors(*state.first);
      auto vs = tensors(*state.second);
      const double t = static_cast<double>(state.step);
      const double c1 = 1.0 - std::pow(kAdamBeta1, t);
      const double c2 = 1.0 - std::pow(kAdamBeta2, t);
      for (std::size_t i = 0; i < ps.size(); ++i) {
        auto& w = ps[i]->data;
        auto& m = ms[i]->data;
        auto& v = vs[i]->data;
        const auto& g = gs[i]->data;
        for (std::size_t k = 0; k < w.size(); ++k) {
          m[k] = kAdamBeta1 * m[k] + (1.0 - kAdamBeta1) * g[k];
          v[k] = kAdamBeta2 * v[k] + (1.0 - kAdamBeta2) * g[k] * g[k];
          w[k] -= lr * (m[k] / c1) / (std::sqrt(v[k] / c2) + kAdamEps);
        }
      }
      break;
    }
    case OptimizerKind::adadelta: {
      if (!state.first) state.first = Gradients::zeros(params.dims, params.attention);
      if (!state.second) state.second = Gradients::zeros(params.dims, params.attention);
      auto eg = tensors(*state.first);
      auto ex = tensors(*state.second);
      for (std::size_t i = 0; i < ps.size(); ++i) {
        auto& w = ps[i]->data;
        auto& a = eg[i]->data;
        auto& b = ex[i]->data;
        const auto& g = gs[i]->data;
        for (std::size_t k = 0; k < w.size(); ++k) {
          a[k] = kAdadeltaRho * a[k] + (1.0 - kAdadeltaRho) * g[k] * g[k];
          const double dx = std::sqrt(b[k] + kAdadeltaEps) / std::sqrt(a[k] + kAdadeltaEps) * g[k];
          b[k] = kAdadeltaRho * b[k] + (1.0 - kAdadeltaRho) * dx * dx;
          w[k] -= lr * dx;
        }
      }
      break;
    }
  }
}

}  // namespace inmt
