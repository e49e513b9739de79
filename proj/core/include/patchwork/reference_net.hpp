#pragma once

#include <cstdint>
#include <vector>

#include "patchwork/classifier.hpp"

namespace patchwork {

struct ReferenceNetConfig {
  std::size_t input_size = 50 * 50;
  std::vector<std::size_t> hidden = {256, 64};
  std::size_t num_labels = 4;
  std::uint64_t seed = 0;

  nlohmann::json to_json() const;
  static ReferenceNetConfig from_json(const nlohmann::json& j);
};

/// Fully connected ReLU network; one parameter group (weight + bias) per layer.
/// Weights start He-uniform (bound sqrt(6 / fan_in)), biases at zero.
class ReferenceNet final : public Classifier {
 public:
  explicit ReferenceNet(const ReferenceNetConfig& cfg);

  std::size_t input_size() const override { return cfg_.input_size; }
  std::size_t num_labels() const override { return cfg_.num_labels; }
  std::size_t embedding_size() const override;

  Eigen::MatrixXd forward(const Eigen::MatrixXd& inputs) const override;
  Eigen::MatrixXd feature_vector(const Eigen::MatrixXd& inputs) const override;
  Eigen::MatrixXd forward_train(const Eigen::MatrixXd& inputs) override;
  Eigen::MatrixXd forward_train_features(const Eigen::MatrixXd& inputs) override;
  Eigen::MatrixXd backward(const Eigen::MatrixXd& grad_logits) override;
  Eigen::MatrixXd backward_features(const Eigen::MatrixXd& grad_features) override;

  void zero_grad() override;
  std::vector<ParamGroup> parameter_groups() override;
  std::unique_ptr<Classifier> clone() const override;
  nlohmann::json architecture() const override;

  const ReferenceNetConfig& config() const { return cfg_; }

  /// Pre-activation of every hidden layer (before the ReLU), one matrix per layer.
  std::vector<Eigen::MatrixXd> hidden_pre_activations(const Eigen::MatrixXd& inputs) const;

 private:
  struct Dense {
    Eigen::MatrixXd weight;  // out x in
    Eigen::VectorXd bias;
    Eigen::MatrixXd grad_weight;
    Eigen::VectorXd grad_bias;
  };

  Eigen::MatrixXd run(const Eigen::MatrixXd& inputs, std::size_t n_layers) const;
  Eigen::MatrixXd run_train(const Eigen::MatrixXd& inputs, std::size_t n_layers);
  Eigen::MatrixXd backprop(const Eigen::MatrixXd& grad, std::size_t n_layers);

  ReferenceNetConfig cfg_;
  std::vector<Dense> layers_;
  // Activations entering each layer, and pre-activations leaving it.
  std::vector<Eigen::MatrixXd> layer_inputs_;
  std::vector<Eigen::MatrixXd> pre_activations_;
};

}  // namespace patchwork
