#pragma once

#include <memory>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

namespace patchwork {

/// A contiguous parameter tensor and its gradient buffer.
struct ParamTensor {
  std::string name;
  std::span<double> value;
  std::span<double> grad;
};

/// Unit of layer-wise learning rates and freezing.
struct ParamGroup {
  std::string name;
  std::vector<ParamTensor> tensors;
};

/// Patch classifier. Batches are stored column-wise (one sample per column).
/// Parameter groups are ordered input-nearest first and are stable across calls.
class Classifier {
 public:
  virtual ~Classifier() = default;

  virtual std::size_t input_size() const = 0;
  virtual std::size_t num_labels() const = 0;
  virtual std::size_t embedding_size() const = 0;

  /// Logits, num_labels() x batch.
  virtual Eigen::MatrixXd forward(const Eigen::MatrixXd& inputs) const = 0;
  /// Penultimate representation, embedding_size() x batch.
  virtual Eigen::MatrixXd feature_vector(const Eigen::MatrixXd& inputs) const = 0;

  /// Forward passes that record activations for the matching backward call.
  virtual Eigen::MatrixXd forward_train(const Eigen::MatrixXd& inputs) = 0;
  virtual Eigen::MatrixXd forward_train_features(const Eigen::MatrixXd& inputs) = 0;
  /// Accumulate parameter gradients; return the gradient w.r.t. the inputs.
  virtual Eigen::MatrixXd backward(const Eigen::MatrixXd& grad_logits) = 0;
  virtual Eigen::MatrixXd backward_features(const Eigen::MatrixXd& grad_features) = 0;

  virtual void zero_grad() = 0;
  virtual std::vector<ParamGroup> parameter_groups() = 0;
  virtual std::unique_ptr<Classifier> clone() const = 0;

  /// Enough to rebuild an untrained instance with make_classifier().
  virtual nlohmann::json architecture() const = 0;

  std::size_t parameter_count();
};

/// Rebuilds a classifier (reference network or ensemble) from architecture().
std::unique_ptr<Classifier> make_classifier(const nlohmann::json& architecture);

}  // namespace patchwork
