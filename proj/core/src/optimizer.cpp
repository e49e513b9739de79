#include "patchwork/optimizer.hpp"

#include <cmath>
#include <sstream>

#include "patchwork/error.hpp"

namespace patchwork {

using nlohmann::json;

LrSchedule parse_lr_schedule(const std::string& s) {
  if (s == "linear") return LrSchedule::Linear;
  if (s == "geometric") return LrSchedule::Geometric;
  if (s == "uniform") return LrSchedule::Uniform;
  throw ConfigError("unknown lr_schedule '" + s + "'");
}

std::string to_string(LrSchedule s) {
  switch (s) {
    case LrSchedule::Linear:
      return "linear";
    case LrSchedule::Geometric:
      return "geometric";
    case LrSchedule::Uniform:
      return "uniform";
  }
  return "linear";
}

void OptimizerConfig::validate() const {
  if (!(beta1 > 0.0 && beta1 < 1.0) || !(beta2 > 0.0 && beta2 < 1.0)) {
    throw ConfigError("beta1 and beta2 must lie in (0, 1)");
  }
  if (!(eps > 0.0)) throw ConfigError("eps must be positive");
  if (weight_decay < 0.0) throw ConfigError("weight_decay must be >= 0");
  if (!(lr_first > 0.0) || !(lr_last > 0.0)) throw ConfigError("learning rates must be positive");
  if (!(step_decay_gamma > 0.0)) throw ConfigError("step_decay_gamma must be positive");
  if (step_decay_every < 1) throw ConfigError("step_decay_every must be >= 1");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (epochs < 0) throw ConfigError("epochs must be >= 0");
}

OptimizerConfig OptimizerConfig::from_json(const json& j) {
  OptimizerConfig c;
  c.beta1 = j.value("beta1", c.beta1);
  c.beta2 = j.value("beta2", c.beta2);
  c.eps = j.value("eps", c.eps);
  c.weight_decay = j.value("weight_decay", c.weight_decay);
  c.lr_first = j.value("lr_first", c.lr_first);
  c.lr_last = j.value("lr_last", c.lr_last);
  if (j.contains("lr_schedule")) c.lr_schedule = parse_lr_schedule(j["lr_schedule"].get<std::string>());
  c.step_decay_gamma = j.value("step_decay_gamma", c.step_decay_gamma);
  c.step_decay_every = j.value("step_decay_every", c.step_decay_every);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.epochs = j.value("epochs", c.epochs);
  if (j.contains("frozen_layers")) {
    c.frozen_groups = j["frozen_layers"].get<std::set<std::size_t>>();
  }
  c.validate();
  return c;
}

json OptimizerConfig::to_json() const {
  return {{"beta1", beta1},
          {"beta2", beta2},
          {"eps", eps},
          {"weight_decay", weight_decay},
          {"lr_first", lr_first},
          {"lr_last", lr_last},
          {"lr_schedule", to_string(lr_schedule)},
          {"step_decay_gamma", step_decay_gamma},
          {"step_decay_every", step_decay_every},
          {"batch_size", batch_size},
          {"epochs", epochs},
          {"frozen_layers", frozen_groups}};
}

std::vector<double> layerwise_lrs(std::size_t n_groups, const OptimizerConfig& cfg) {
  if (n_groups == 0) throw ConfigError("layer-wise learning rates need at least one group");
  std::vector<double> lrs(n_groups, cfg.lr_last);
  if (n_groups > 1) {
    const double denom = static_cast<double>(n_groups - 1);
    for (std::size_t i = 0; i < n_groups; ++i) {
      const double frac = static_cast<double>(i) / denom;
      switch (cfg.lr_schedule) {
        case LrSchedule::Linear:
          lrs[i] = cfg.lr_first + static_cast<double>(i) * (cfg.lr_last - cfg.lr_first) / denom;
          break;
        case LrSchedule::Geometric:
          lrs[i] = cfg.lr_first * std::pow(cfg.lr_last / cfg.lr_first, frac);
          break;
        case LrSchedule::Uniform:
          lrs[i] = cfg.lr_last;
          break;
      }
    }
  }
  for (auto g : cfg.frozen_groups) {
    if (g < n_groups) lrs[g] = 0.0;
  }
  return lrs;
}

double step_decay_factor(const OptimizerConfig& cfg, int epoch) {
  double f = 1.0;
  for (int k = 0; k < epoch / cfg.step_decay_every; ++k) f *= cfg.step_decay_gamma;
  return f;
}

std::vector<double> scheduled_lrs(const std::vector<double>& base, const OptimizerConfig& cfg,
                                  int epoch) {
  // Repeated multiplication so each boundary scales the previous rate by exactly gamma.
  const int steps = epoch / cfg.step_decay_every;
  std::vector<double> out(base);
  for (auto& lr : out) {
    for (int k = 0; k < steps; ++k) lr *= cfg.step_decay_gamma;
  }
  return out;
}

AdamW::AdamW(const OptimizerConfig& cfg) : cfg_(cfg) { cfg_.validate(); }

void AdamW::step(const std::vector<ParamGroup>& groups, std::span<const double> lrs) {
  if (lrs.size() != groups.size()) {
    throw ConfigError("got " + std::to_string(lrs.size()) + " learning rates for " +
                      std::to_string(groups.size()) + " parameter groups");
  }
  ++t_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));

  std::size_t slot = 0;
  for (std::size_t gi = 0; gi < groups.size(); ++gi) {
    const auto& group = groups[gi];
    for (const auto& tensor : group.tensors) {
      if (m_.size() <= slot) {
        m_.emplace_back(tensor.value.size(), 0.0);
        v_.emplace_back(tensor.value.size(), 0.0);
      }
      const double lr = lrs[gi];
      if (lr == 0.0) {
        ++slot;
        continue;
      }
      auto& m = m_[slot];
      auto& v = v_[slot];
      for (std::size_t i = 0; i < tensor.value.size(); ++i) {
        const double g = tensor.grad[i];
        if (!std::isfinite(g)) {
          std::ostringstream os;
          os << "non-finite gradient in group '" << group.name << "' (" << tensor.name
             << "[" << i << "]) at step " << t_;
          throw TrainingError(os.str());
        }
        m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * g;
        v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * g * g;
        const double m_hat = m[i] / bc1;
        const double v_hat = v[i] / bc2;
        const double theta = tensor.value[i];
        tensor.value[i] =
            theta - lr * m_hat / (std::sqrt(v_hat) + cfg_.eps) - lr * cfg_.weight_decay * theta;
      }
      ++slot;
    }
  }
}

}  // namespace patchwork
