#pragma once

#include <cstdint>
#include <set>
#include <span>
#include <vector>

#include <json.hpp>

#include "patchwork/classifier.hpp"

namespace patchwork {

enum class LrSchedule { Linear, Geometric, Uniform };

LrSchedule parse_lr_schedule(const std::string& s);
std::string to_string(LrSchedule s);

struct OptimizerConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
  double lr_first = 1e-4;
  double lr_last = 1e-3;
  LrSchedule lr_schedule = LrSchedule::Linear;
  double step_decay_gamma = 0.1;
  int step_decay_every = 5;
  int batch_size = 32;
  int epochs = 30;
  std::set<std::size_t> frozen_groups;

  void validate() const;
  static OptimizerConfig from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
};

/// Base learning rate per parameter group, input-nearest first.
/// linear:    lr_first + i (lr_last - lr_first) / (n - 1)
/// geometric: lr_first (lr_last / lr_first)^(i / (n - 1))
/// uniform:   lr_last everywhere
/// A single group gets lr_last; frozen groups get 0.
std::vector<double> layerwise_lrs(std::size_t n_groups, const OptimizerConfig& cfg);

/// gamma^floor(epoch / every), epochs counted from 0.
double step_decay_factor(const OptimizerConfig& cfg, int epoch);

/// Learning rates in effect during `epoch`.
std::vector<double> scheduled_lrs(const std::vector<double>& base, const OptimizerConfig& cfg,
                                  int epoch);

/// AdamW with decoupled weight decay:
///   m <- b1 m + (1 - b1) g,  v <- b2 v + (1 - b2) g^2
///   theta <- theta - lr m_hat / (sqrt(v_hat) + eps) - lr wd theta
/// Groups whose learning rate is 0 are skipped entirely (frozen).
class AdamW {
 public:
  explicit AdamW(const OptimizerConfig& cfg);

  /// Throws TrainingError naming the group and step on a non-finite gradient.
  void step(const std::vector<ParamGroup>& groups, std::span<const double> lrs);

  std::uint64_t steps() const { return t_; }
  const std::vector<std::vector<double>>& first_moments() const { return m_; }
  const std::vector<std::vector<double>>& second_moments() const { return v_; }

 private:
  OptimizerConfig cfg_;
  std::uint64_t t_ = 0;
  // Indexed by flattened (group, tensor) position.
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
};

}  // namespace patchwork
