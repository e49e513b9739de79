#include "patchwork/reference_net.hpp"

#include <cmath>

#include "patchwork/error.hpp"
#include "patchwork/rng.hpp"

namespace patchwork {

using Eigen::MatrixXd;
using nlohmann::json;

std::size_t Classifier::parameter_count() {
  std::size_t n = 0;
  for (const auto& g : parameter_groups()) {
    for (const auto& t : g.tensors) n += t.value.size();
  }
  return n;
}

json ReferenceNetConfig::to_json() const {
  return {{"type", "reference_net"},
          {"input_size", input_size},
          {"hidden", hidden},
          {"num_labels", num_labels},
          {"seed", seed}};
}

ReferenceNetConfig ReferenceNetConfig::from_json(const json& j) {
  ReferenceNetConfig c;
  c.input_size = j.value("input_size", c.input_size);
  c.hidden = j.value("hidden", c.hidden);
  c.num_labels = j.value("num_labels", c.num_labels);
  c.seed = j.value("seed", c.seed);
  return c;
}

ReferenceNet::ReferenceNet(const ReferenceNetConfig& cfg) : cfg_(cfg) {
  if (cfg_.input_size == 0 || cfg_.num_labels == 0) {
    throw ConfigError("reference net needs non-zero input size and label count");
  }
  std::vector<std::size_t> widths = {cfg_.input_size};
  for (auto h : cfg_.hidden) {
    if (h == 0) throw ConfigError("hidden layer width must be >= 1");
    widths.push_back(h);
  }
  widths.push_back(cfg_.num_labels);

  Rng rng(cfg_.seed);
  for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
    const auto fan_in = static_cast<Eigen::Index>(widths[i]);
    const auto fan_out = static_cast<Eigen::Index>(widths[i + 1]);
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
    Dense d;
    d.weight.resize(fan_out, fan_in);
    for (Eigen::Index c = 0; c < fan_in; ++c) {
      for (Eigen::Index r = 0; r < fan_out; ++r) d.weight(r, c) = uniform_real(rng, -bound, bound);
    }
    d.bias = Eigen::VectorXd::Zero(fan_out);
    d.grad_weight = MatrixXd::Zero(fan_out, fan_in);
    d.grad_bias = Eigen::VectorXd::Zero(fan_out);
    layers_.push_back(std::move(d));
  }
}

std::size_t ReferenceNet::embedding_size() const {
  return cfg_.hidden.empty() ? cfg_.input_size : cfg_.hidden.back();
}

MatrixXd ReferenceNet::run(const MatrixXd& inputs, std::size_t n_layers) const {
  if (static_cast<std::size_t>(inputs.rows()) != cfg_.input_size) {
    throw ConfigError("input has " + std::to_string(inputs.rows()) + " rows, network expects " +
                      std::to_string(cfg_.input_size));
  }
  MatrixXd h = inputs;
  for (std::size_t i = 0; i < n_layers; ++i) {
    MatrixXd z = layers_[i].weight * h;
    z.colwise() += layers_[i].bias;
    h = i + 1 < layers_.size() ? MatrixXd(z.cwiseMax(0.0)) : z;
  }
  return h;
}

MatrixXd ReferenceNet::run_train(const MatrixXd& inputs, std::size_t n_layers) {
  if (static_cast<std::size_t>(inputs.rows()) != cfg_.input_size) {
    throw ConfigError("input has " + std::to_string(inputs.rows()) + " rows, network expects " +
                      std::to_string(cfg_.input_size));
  }
  layer_inputs_.assign(n_layers, MatrixXd());
  pre_activations_.assign(n_layers, MatrixXd());
  MatrixXd h = inputs;
  for (std::size_t i = 0; i < n_layers; ++i) {
    layer_inputs_[i] = h;
    MatrixXd z = layers_[i].weight * h;
    z.colwise() += layers_[i].bias;
    h = i + 1 < layers_.size() ? MatrixXd(z.cwiseMax(0.0)) : z;
    pre_activations_[i] = std::move(z);
  }
  return h;
}

MatrixXd ReferenceNet::backprop(const MatrixXd& grad, std::size_t n_layers) {
  if (layer_inputs_.size() != n_layers) {
    throw ConfigError("backward called without a matching training forward pass");
  }
  MatrixXd g = grad;
  for (std::size_t k = n_layers; k-- > 0;) {
    if (k + 1 < layers_.size()) {
      g = g.cwiseProduct((pre_activations_[k].array() > 0.0).cast<double>().matrix());
    }
    layers_[k].grad_weight.noalias() += g * layer_inputs_[k].transpose();
    layers_[k].grad_bias += g.rowwise().sum();
    g = layers_[k].weight.transpose() * g;
  }
  return g;
}

std::vector<MatrixXd> ReferenceNet::hidden_pre_activations(const MatrixXd& inputs) const {
  std::vector<MatrixXd> out;
  MatrixXd h = run(inputs, 0);
  for (std::size_t i = 0; i + 1 < layers_.size(); ++i) {
    MatrixXd z = layers_[i].weight * h;
    z.colwise() += layers_[i].bias;
    h = z.cwiseMax(0.0);
    out.push_back(std::move(z));
  }
  return out;
}

MatrixXd ReferenceNet::forward(const MatrixXd& inputs) const { return run(inputs, layers_.size()); }

MatrixXd ReferenceNet::feature_vector(const MatrixXd& inputs) const {
  return run(inputs, layers_.size() - 1);
}

MatrixXd ReferenceNet::forward_train(const MatrixXd& inputs) {
  return run_train(inputs, layers_.size());
}

MatrixXd ReferenceNet::forward_train_features(const MatrixXd& inputs) {
  return run_train(inputs, layers_.size() - 1);
}

MatrixXd ReferenceNet::backward(const MatrixXd& grad_logits) {
  return backprop(grad_logits, layers_.size());
}

MatrixXd ReferenceNet::backward_features(const MatrixXd& grad_features) {
  return backprop(grad_features, layers_.size() - 1);
}

void ReferenceNet::zero_grad() {
  for (auto& l : layers_) {
    l.grad_weight.setZero();
    l.grad_bias.setZero();
  }
}

std::vector<ParamGroup> ReferenceNet::parameter_groups() {
  std::vector<ParamGroup> groups;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    auto& l = layers_[i];
    const std::string name = "layer" + std::to_string(i);
    groups.push_back(
        {name,
         {{name + ".weight", {l.weight.data(), static_cast<std::size_t>(l.weight.size())},
           {l.grad_weight.data(), static_cast<std::size_t>(l.grad_weight.size())}},
          {name + ".bias", {l.bias.data(), static_cast<std::size_t>(l.bias.size())},
           {l.grad_bias.data(), static_cast<std::size_t>(l.grad_bias.size())}}}});
  }
  return groups;
}

std::unique_ptr<Classifier> ReferenceNet::clone() const {
  auto copy = std::make_unique<ReferenceNet>(*this);
  copy->layer_inputs_.clear();
  copy->pre_activations_.clear();
  return copy;
}

json ReferenceNet::architecture() const { return cfg_.to_json(); }

}  // namespace patchwork
