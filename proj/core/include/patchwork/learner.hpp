#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "patchwork/classifier.hpp"
#include "patchwork/dataset.hpp"
#include "patchwork/ingest.hpp"
#include "patchwork/metrics.hpp"
#include "patchwork/optimizer.hpp"
#include "patchwork/patchify.hpp"
#include "patchwork/predictions.hpp"

namespace patchwork {

/// -log softmax(logits)[label], stabilised with log-sum-exp.
double cross_entropy(const Eigen::VectorXd& logits, int label);

/// Column-wise softmax.
Eigen::MatrixXd softmax(const Eigen::MatrixXd& logits);

struct LossGrad {
  double loss = 0.0;     // mean over the batch
  Eigen::MatrixXd grad;  // d loss / d logits
};

LossGrad softmax_cross_entropy(const Eigen::MatrixXd& logits, const std::vector<int>& labels);

/// Turns a patch id into a model input vector. rng = nullptr selects the
/// deterministic evaluation pipeline. Implementations must be thread-safe.
class SampleEncoder {
 public:
  virtual ~SampleEncoder() = default;
  virtual std::size_t input_size() const = 0;
  /// Throws DataError when the patch cannot be read.
  virtual Eigen::VectorXd encode(const std::string& patch_id, Rng* rng) const = 0;
};

/// Crops patches out of catalog sheets and runs augment().
class PatchEncoder final : public SampleEncoder {
 public:
  PatchEncoder(SheetCache& sheets, const std::vector<Patch>& patches, AugmentConfig augment,
               NormStats norm);

  std::size_t input_size() const override;
  Eigen::VectorXd encode(const std::string& patch_id, Rng* rng) const override;

  const Patch& patch(const std::string& patch_id) const;
  Raster patch_raster(const std::string& patch_id) const;

 private:
  SheetCache& sheets_;
  std::unordered_map<std::string, Patch> patches_;
  AugmentConfig augment_;
  NormStats norm_;
};

/// In-memory rasters keyed by id; used by tests and small experiments.
class RasterMapEncoder final : public SampleEncoder {
 public:
  RasterMapEncoder(std::unordered_map<std::string, Raster> rasters, AugmentConfig augment,
                   NormStats norm);

  std::size_t input_size() const override;
  Eigen::VectorXd encode(const std::string& patch_id, Rng* rng) const override;

 private:
  std::unordered_map<std::string, Raster> rasters_;
  AugmentConfig augment_;
  NormStats norm_;
};

/// Per-channel intensity statistics over the given patches (training set only).
NormStats compute_patch_norm_stats(SheetCache& sheets, const std::vector<const Patch*>& patches,
                                   int channels);

struct TrainConfig {
  OptimizerConfig optimizer;
  AugmentConfig augment;
  double sampler_c = 10.0;
  std::uint64_t seed = 0;
  /// Samples drawn from the weighted stream per epoch; 0 means the train size.
  std::size_t samples_per_epoch = 0;
  /// Threads used for batch preparation and validation.
  int workers = 1;

  static TrainConfig from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
};

struct EpochLog {
  int epoch = 0;
  std::vector<double> lrs;
  double train_loss = 0.0;
  double val_loss = 0.0;
  MetricsReport val_metrics;
  bool best = false;

  nlohmann::json to_json() const;
};

struct TrainResult {
  int best_epoch = -1;
  double best_val_loss = 0.0;
  std::vector<EpochLog> epochs;
};

struct TrainHooks {
  /// Called whenever a new best validation loss is reached.
  std::function<void(const Classifier&, const EpochLog&)> on_best;
  /// JSON-lines training log, one object per epoch.
  std::optional<std::filesystem::path> log_path;
};

/// Trains on splits.train and selects by splits.val loss (ties keep the
/// earlier epoch). On return `model` holds the best weights. A NaN loss
/// throws TrainingError after the best-so-far checkpoint was reported.
TrainResult train(Classifier& model, const SampleEncoder& encoder, const Splits& splits,
                  const TrainConfig& cfg, const TrainHooks& hooks = {});

struct EvalResult {
  MetricsReport metrics;
  double loss = 0.0;
};

/// One deterministic pass over `items`.
EvalResult evaluate(const Classifier& model, const SampleEncoder& encoder,
                    const std::vector<LabelledPatch>& items, int batch_size = 64, int workers = 1);

struct InferOptions {
  int batch_size = 64;
  int workers = 1;
  std::function<void(std::size_t done, std::size_t total)> progress;
};

/// argmax label + softmax confidence per patch, sorted by patch_id. Unreadable
/// patches yield failed records (label -1) instead of aborting.
std::vector<PredictionRecord> infer(const Classifier& model, const SampleEncoder& encoder,
                                    const std::vector<Patch>& patches,
                                    const InferOptions& opts = {});

/// Copies parameter values between two classifiers of identical architecture.
void copy_parameters(Classifier& from, Classifier& to);

struct Checkpoint {
  nlohmann::json header;
  std::unique_ptr<Classifier> model;

  NormStats norm() const;
  AugmentConfig augment() const;
  bool ensemble() const { return header.value("ensemble", false); }
};

/// Versioned binary container: magic, version, JSON header (architecture plus
/// `meta`), then named float64 tensors.
void save_checkpoint(const std::filesystem::path& path, Classifier& model,
                     const nlohmann::json& meta);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace patchwork
