#include "patchwork/ensemble.hpp"

#include <algorithm>

#include "patchwork/annotation.hpp"
#include "patchwork/error.hpp"

namespace patchwork {

using Eigen::MatrixXd;
using Eigen::VectorXd;
using nlohmann::json;

void EnsembleConfig::validate() const {
  if (context_k < 1 || context_k % 2 == 0) {
    throw ConfigError("context_k must be a positive odd integer, got " + std::to_string(context_k));
  }
  if (v1_dim == 0 || v2_dim == 0) throw ConfigError("v1_dim and v2_dim must be >= 1");
}

EnsembleConfig EnsembleConfig::from_json(const json& j) {
  EnsembleConfig c;
  c.context_k = j.value("context_k", c.context_k);
  c.v1_dim = j.value("v1_dim", c.v1_dim);
  c.v2_dim = j.value("v2_dim", c.v2_dim);
  c.head_hidden = j.value("head_hidden", c.head_hidden);
  c.train_extractors = j.value("train_extractors", c.train_extractors);
  c.validate();
  return c;
}

json EnsembleConfig::to_json() const {
  return {{"context_k", context_k},
          {"v1_dim", v1_dim},
          {"v2_dim", v2_dim},
          {"head_hidden", head_hidden},
          {"train_extractors", train_extractors}};
}

EnsembleClassifier::EnsembleClassifier(EnsembleConfig cfg, std::unique_ptr<Classifier> context_model,
                                       std::unique_ptr<Classifier> patch_model,
                                       std::uint64_t head_seed)
    : cfg_(std::move(cfg)),
      head_seed_(head_seed),
      context_(std::move(context_model)),
      patch_(std::move(patch_model)) {
  cfg_.validate();
  if (!context_ || !patch_) throw ConfigError("ensemble needs both a context and a patch model");
  if (context_->embedding_size() != cfg_.v1_dim) {
    throw ConfigError("context model embedding is " + std::to_string(context_->embedding_size()) +
                      ", v1_dim is " + std::to_string(cfg_.v1_dim));
  }
  if (patch_->embedding_size() != cfg_.v2_dim) {
    throw ConfigError("patch model embedding is " + std::to_string(patch_->embedding_size()) +
                      ", v2_dim is " + std::to_string(cfg_.v2_dim));
  }
  ReferenceNetConfig head_cfg;
  head_cfg.input_size = cfg_.v1_dim + cfg_.v2_dim;
  head_cfg.hidden = cfg_.head_hidden;
  head_cfg.num_labels = patch_->num_labels();
  head_cfg.seed = head_seed_;
  head_ = std::make_unique<ReferenceNet>(head_cfg);
}

EnsembleClassifier::EnsembleClassifier(const EnsembleClassifier& other)
    : Classifier(),
      cfg_(other.cfg_),
      head_seed_(other.head_seed_),
      context_(other.context_->clone()),
      patch_(other.patch_->clone()),
      head_(std::make_unique<ReferenceNet>(*other.head_)) {}

std::unique_ptr<EnsembleClassifier> EnsembleClassifier::from_architecture(const json& arch) {
  auto cfg = EnsembleConfig::from_json(arch.at("config"));
  return std::make_unique<EnsembleClassifier>(cfg, make_classifier(arch.at("context")),
                                              make_classifier(arch.at("patch")),
                                              arch.value("head_seed", std::uint64_t{0}));
}

std::size_t EnsembleClassifier::input_size() const {
  return context_->input_size() + patch_->input_size();
}

MatrixXd EnsembleClassifier::combined_features(const MatrixXd& inputs) const {
  if (static_cast<std::size_t>(inputs.rows()) != input_size()) {
    throw ConfigError("ensemble input has " + std::to_string(inputs.rows()) + " rows, expected " +
                      std::to_string(input_size()));
  }
  const auto n1 = static_cast<Eigen::Index>(context_->input_size());
  const auto n2 = static_cast<Eigen::Index>(patch_->input_size());
  MatrixXd combined(static_cast<Eigen::Index>(cfg_.v1_dim + cfg_.v2_dim), inputs.cols());
  combined.topRows(static_cast<Eigen::Index>(cfg_.v1_dim)) =
      context_->feature_vector(inputs.topRows(n1));
  combined.bottomRows(static_cast<Eigen::Index>(cfg_.v2_dim)) =
      patch_->feature_vector(inputs.bottomRows(n2));
  return combined;
}

MatrixXd EnsembleClassifier::combine_train(const MatrixXd& inputs) {
  if (!cfg_.train_extractors) return combined_features(inputs);
  if (static_cast<std::size_t>(inputs.rows()) != input_size()) {
    throw ConfigError("ensemble input has " + std::to_string(inputs.rows()) + " rows, expected " +
                      std::to_string(input_size()));
  }
  const auto n1 = static_cast<Eigen::Index>(context_->input_size());
  const auto n2 = static_cast<Eigen::Index>(patch_->input_size());
  MatrixXd combined(static_cast<Eigen::Index>(cfg_.v1_dim + cfg_.v2_dim), inputs.cols());
  combined.topRows(static_cast<Eigen::Index>(cfg_.v1_dim)) =
      context_->forward_train_features(inputs.topRows(n1));
  combined.bottomRows(static_cast<Eigen::Index>(cfg_.v2_dim)) =
      patch_->forward_train_features(inputs.bottomRows(n2));
  return combined;
}

MatrixXd EnsembleClassifier::split_backward(const MatrixXd& grad_combined) {
  MatrixXd grad_in = MatrixXd::Zero(static_cast<Eigen::Index>(input_size()), grad_combined.cols());
  if (!cfg_.train_extractors) return grad_in;
  const auto n1 = static_cast<Eigen::Index>(context_->input_size());
  const auto n2 = static_cast<Eigen::Index>(patch_->input_size());
  grad_in.topRows(n1) =
      context_->backward_features(grad_combined.topRows(static_cast<Eigen::Index>(cfg_.v1_dim)));
  grad_in.bottomRows(n2) =
      patch_->backward_features(grad_combined.bottomRows(static_cast<Eigen::Index>(cfg_.v2_dim)));
  return grad_in;
}

MatrixXd EnsembleClassifier::forward(const MatrixXd& inputs) const {
  return head_->forward(combined_features(inputs));
}

MatrixXd EnsembleClassifier::feature_vector(const MatrixXd& inputs) const {
  return head_->feature_vector(combined_features(inputs));
}

MatrixXd EnsembleClassifier::forward_train(const MatrixXd& inputs) {
  return head_->forward_train(combine_train(inputs));
}

MatrixXd EnsembleClassifier::forward_train_features(const MatrixXd& inputs) {
  return head_->forward_train_features(combine_train(inputs));
}

MatrixXd EnsembleClassifier::backward(const MatrixXd& grad_logits) {
  return split_backward(head_->backward(grad_logits));
}

MatrixXd EnsembleClassifier::backward_features(const MatrixXd& grad_features) {
  return split_backward(head_->backward_features(grad_features));
}

void EnsembleClassifier::zero_grad() {
  context_->zero_grad();
  patch_->zero_grad();
  head_->zero_grad();
}

std::vector<ParamGroup> EnsembleClassifier::parameter_groups() {
  std::vector<ParamGroup> out;
  auto append = [&](Classifier& m, const std::string& prefix) {
    for (auto& g : m.parameter_groups()) {
      g.name = prefix + g.name;
      out.push_back(std::move(g));
    }
  };
  append(*context_, "context/");
  append(*patch_, "patch/");
  append(*head_, "head/");
  return out;
}

std::vector<std::size_t> EnsembleClassifier::extractor_group_indices() {
  const auto n = context_->parameter_groups().size() + patch_->parameter_groups().size();
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  return idx;
}

std::unique_ptr<Classifier> EnsembleClassifier::clone() const {
  return std::unique_ptr<Classifier>(new EnsembleClassifier(*this));
}

json EnsembleClassifier::architecture() const {
  return {{"type", "ensemble"},
          {"config", cfg_.to_json()},
          {"head_seed", head_seed_},
          {"context", context_->architecture()},
          {"patch", patch_->architecture()}};
}

EnsembleEncoder::EnsembleEncoder(SheetCache& sheets, const std::vector<Patch>& patches,
                                 int context_k, AugmentConfig augment, NormStats norm)
    : sheets_(sheets), context_k_(context_k), augment_(std::move(augment)), norm_(std::move(norm)) {
  if (context_k_ < 1 || context_k_ % 2 == 0) {
    throw ConfigError("context_k must be a positive odd integer, got " + std::to_string(context_k_));
  }
  augment_.validate();
  for (const auto& p : patches) {
    patches_.emplace(p.patch_id, p);
    auto& side = grid_side_[p.sheet_id];
    side = std::max({side, p.rect.w, p.rect.h});
  }
}

std::size_t EnsembleEncoder::input_size() const {
  return 2 * static_cast<std::size_t>(augment_.model_input_px) * augment_.model_input_px *
         augment_.channels;
}

VectorXd EnsembleEncoder::encode(const std::string& patch_id, Rng* rng) const {
  auto it = patches_.find(patch_id);
  if (it == patches_.end()) throw DataError("unknown patch '" + patch_id + "'");
  const Patch& p = it->second;
  const auto sheet = sheets_.get(p.sheet_id);
  const Raster context = context_image(sheet->image, p, grid_side_.at(p.sheet_id), context_k_);

  VectorXd ctx_vec;
  if (rng != nullptr) {
    Rng shared = *rng;
    ctx_vec = augment(context, augment_, norm_, &shared);
  } else {
    ctx_vec = augment(context, augment_, norm_, nullptr);
  }
  const VectorXd patch_vec = augment(sheet->image.crop(p.rect), augment_, norm_, rng);
  VectorXd out(ctx_vec.size() + patch_vec.size());
  out << ctx_vec, patch_vec;
  return out;
}

TrainResult train_ensemble(EnsembleClassifier& model, const SampleEncoder& encoder,
                           const Splits& splits, TrainConfig cfg, const TrainHooks& hooks) {
  if (!model.config().train_extractors) {
    for (auto i : model.extractor_group_indices()) cfg.optimizer.frozen_groups.insert(i);
  }
  return train(model, encoder, splits, cfg, hooks);
}

}  // namespace patchwork
