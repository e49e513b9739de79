#pragma once

#include <cstdint>
#include <memory>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "patchwork/classifier.hpp"
#include "patchwork/learner.hpp"
#include "patchwork/reference_net.hpp"

namespace patchwork {

struct EnsembleConfig {
  int context_k = 3;
  std::size_t v1_dim = 64;
  std::size_t v2_dim = 64;
  std::vector<std::size_t> head_hidden = {32};
  /// When false the two extractors are frozen and only the head learns.
  bool train_extractors = true;

  void validate() const;
  static EnsembleConfig from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
};

/// Context model (V1) and patch model (V2) feeding a head on concat(V1, V2).
/// Inputs are stacked column-wise as [context ; patch].
class EnsembleClassifier final : public Classifier {
 public:
  EnsembleClassifier(EnsembleConfig cfg, std::unique_ptr<Classifier> context_model,
                     std::unique_ptr<Classifier> patch_model, std::uint64_t head_seed);

  static std::unique_ptr<EnsembleClassifier> from_architecture(const nlohmann::json& arch);

  std::size_t input_size() const override;
  std::size_t num_labels() const override { return head_->num_labels(); }
  std::size_t embedding_size() const override { return head_->embedding_size(); }

  Eigen::MatrixXd forward(const Eigen::MatrixXd& inputs) const override;
  Eigen::MatrixXd feature_vector(const Eigen::MatrixXd& inputs) const override;
  Eigen::MatrixXd forward_train(const Eigen::MatrixXd& inputs) override;
  Eigen::MatrixXd forward_train_features(const Eigen::MatrixXd& inputs) override;
  Eigen::MatrixXd backward(const Eigen::MatrixXd& grad_logits) override;
  Eigen::MatrixXd backward_features(const Eigen::MatrixXd& grad_features) override;

  void zero_grad() override;
  /// context/..., patch/..., head/... in that order.
  std::vector<ParamGroup> parameter_groups() override;
  std::unique_ptr<Classifier> clone() const override;
  nlohmann::json architecture() const override;

  const EnsembleConfig& config() const { return cfg_; }
  Classifier& context_model() { return *context_; }
  Classifier& patch_model() { return *patch_; }
  Classifier& head() { return *head_; }
  /// Indices of the context and patch model groups within parameter_groups().
  std::vector<std::size_t> extractor_group_indices();

  /// concat(V1, V2) for a batch.
  Eigen::MatrixXd combined_features(const Eigen::MatrixXd& inputs) const;

 private:
  EnsembleClassifier(const EnsembleClassifier& other);
  Eigen::MatrixXd combine_train(const Eigen::MatrixXd& inputs);
  Eigen::MatrixXd split_backward(const Eigen::MatrixXd& grad_combined);

  EnsembleConfig cfg_;
  std::uint64_t head_seed_;
  std::unique_ptr<Classifier> context_;
  std::unique_ptr<Classifier> patch_;
  std::unique_ptr<ReferenceNet> head_;
};

/// Encodes [context image ; patch] where the context is the k x k patch
/// neighbourhood resized to the model input size. Both views share one random
/// draw sequence, so flips and blur agree between them.
class EnsembleEncoder final : public SampleEncoder {
 public:
  EnsembleEncoder(SheetCache& sheets, const std::vector<Patch>& patches, int context_k,
                  AugmentConfig augment, NormStats norm);

  std::size_t input_size() const override;
  Eigen::VectorXd encode(const std::string& patch_id, Rng* rng) const override;

 private:
  SheetCache& sheets_;
  std::unordered_map<std::string, Patch> patches_;
  std::unordered_map<std::string, int> grid_side_;
  int context_k_;
  AugmentConfig augment_;
  NormStats norm_;
};

/// train() with the extractors frozen when !train_extractors.
TrainResult train_ensemble(EnsembleClassifier& model, const SampleEncoder& encoder,
                           const Splits& splits, TrainConfig cfg, const TrainHooks& hooks = {});

}  // namespace patchwork
