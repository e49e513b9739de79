#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "patchwork/annotation.hpp"
#include "patchwork/image_ops.hpp"
#include "patchwork/raster.hpp"
#include "patchwork/rng.hpp"

namespace patchwork {

struct LabelledPatch {
  std::string patch_id;
  int label_id = 0;

  friend bool operator==(const LabelledPatch&, const LabelledPatch&) = default;
};

/// Gold-standard rows usable for training; conflicting rows are dropped.
std::vector<LabelledPatch> labelled_from_gold(const std::vector<GoldRow>& rows);

enum class SplitPart : std::size_t { Train = 0, Val = 1, Test = 2 };

struct SplitSpec {
  std::array<double, 3> fractions = {0.6, 0.2, 0.2};
  std::uint64_t seed = 0;

  void validate() const;
};

struct Splits {
  std::vector<LabelledPatch> train;
  std::vector<LabelledPatch> val;
  std::vector<LabelledPatch> test;

  const std::vector<LabelledPatch>& part(SplitPart p) const;
  std::vector<LabelledPatch>& part(SplitPart p);
};

/// Per-class (train, val, test) counts. Split totals equal the largest-remainder
/// rounding of N * fraction, and every cell is within 1 of count * fraction.
std::vector<std::array<std::size_t, 3>> allocate_split_counts(
    const std::vector<std::size_t>& class_counts, const SplitSpec& spec);

/// Shuffles each class by seed and partitions it with allocate_split_counts.
/// Every class needs at least 3 members. Each split is returned sorted by id.
Splits stratified_split(const std::vector<LabelledPatch>& items, const SplitSpec& spec);

/// Manifest CSV: patch_id, split, label_id.
void write_split_manifest(const std::filesystem::path& path, const Splits& splits);
Splits read_split_manifest(const std::filesystem::path& path);

/// With-replacement sampler: item weight c / count(class), so classes are
/// drawn with probability proportional to count * weight.
class WeightedSampler {
 public:
  WeightedSampler(std::vector<LabelledPatch> items, double c, std::uint64_t seed);

  const LabelledPatch& next();
  double class_weight(int label) const { return weights_.at(label); }
  /// Probability of drawing each class.
  std::map<int, double> class_probabilities() const;

 private:
  std::vector<LabelledPatch> items_;
  std::map<int, double> weights_;
  std::vector<int> class_order_;
  std::vector<double> cumulative_;  // cumulative class mass
  std::vector<std::vector<std::size_t>> members_;
  Rng rng_;
};

struct AugmentConfig {
  double p_hflip = 0.25;
  double p_vflip = 0.25;
  double p_blur = 0.25;
  double p_downres = 0.25;
  int downres_size = 50;
  std::pair<double, double> blur_sigma_range = {0.1, 2.0};
  int model_input_px = 50;
  int channels = 1;

  void validate() const;
  static AugmentConfig from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
};

/// Per-channel normalisation statistics.
struct NormStats {
  std::vector<double> mean = {0.5};
  std::vector<double> std = {0.25};

  static NormStats from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
};

/// Mean/std per channel over every pixel of `images`.
NormStats compute_norm_stats(const std::vector<Image>& images);

/// Training pipeline: hflip?, vflip?, blur?, downres?, resize to
/// model_input_px, normalise. Each stochastic step fires independently.
/// Passing rng = nullptr gives the deterministic evaluation pipeline.
Eigen::VectorXd augment(const Raster& patch, const AugmentConfig& cfg, const NormStats& norm,
                        Rng* rng);

/// Stochastic steps only (no resize or normalisation).
Image apply_random_steps(Image img, const AugmentConfig& cfg, Rng& rng);

Eigen::VectorXd normalize(const Image& img, const NormStats& norm);
Image denormalize(const Eigen::VectorXd& v, int rows, int cols, const NormStats& norm);

}  // namespace patchwork
