#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "patchwork/patchify.hpp"
#include "patchwork/predictions.hpp"
#include "patchwork/raster.hpp"

namespace patchwork {

struct Label {
  int id = 0;
  std::string name;
};

/// Ordered labels with ids 0..n-1 and unique names.
class LabelSchema {
 public:
  LabelSchema() = default;
  explicit LabelSchema(std::vector<std::string> names);

  /// no / railspace / building / railspace & building.
  static LabelSchema railspace_default();
  static LabelSchema from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;

  std::size_t size() const { return labels_.size(); }
  bool contains(int id) const { return id >= 0 && static_cast<std::size_t>(id) < labels_.size(); }
  const std::string& name(int id) const;
  const std::vector<Label>& labels() const { return labels_; }

 private:
  std::vector<Label> labels_;
};

enum class AnnotationSource { Fresh, ReviewConfirmed, ReviewCorrected };

std::string to_string(AnnotationSource s);
AnnotationSource parse_annotation_source(const std::string& s);

struct AnnotationRecord {
  std::uint64_t seq = 0;
  std::string patch_id;
  int label_id = 0;
  std::string annotator;
  std::int64_t timestamp_ms = 0;
  AnnotationSource source = AnnotationSource::Fresh;
  std::optional<int> prior_prediction;
};

/// A labelling action. Setting prior_prediction marks it as a review of a
/// model prediction; the source is derived from whether the label agrees.
struct LabelEvent {
  std::string patch_id;
  int label_id = 0;
  std::string annotator;
  std::optional<int> prior_prediction;
  std::optional<std::int64_t> timestamp_ms;
};

/// One row of the gold-standard export.
struct GoldRow {
  std::string patch_id;
  int label_id = 0;
  std::string annotator;
  AnnotationSource source = AnnotationSource::Fresh;
  bool conflict = false;
};

class RejectedLabel : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Append-only JSON-lines event log with latest-wins resolution per
/// (patch, annotator). One serialised writer; readers take snapshots.
class AnnotationStore {
 public:
  using Clock = std::function<std::int64_t()>;

  AnnotationStore(std::filesystem::path log_path, LabelSchema schema,
                  std::unordered_set<std::string> known_patches, Clock clock = {});

  /// Validates and durably appends. Throws RejectedLabel with the reason.
  AnnotationRecord record(const LabelEvent& event);

  std::shared_ptr<const std::vector<AnnotationRecord>> snapshot() const;
  std::size_t event_count() const { return snapshot()->size(); }
  const LabelSchema& schema() const { return schema_; }

  std::unordered_set<std::string> annotated_ids() const;

  /// One row per patch; when annotators disagree, one row per annotator with
  /// conflict = true. Sorted by (patch_id, annotator).
  std::vector<GoldRow> gold_standard() const;
  /// Throws DataError("nothing to export") on an empty store.
  void export_gold_standard(const std::filesystem::path& path) const;

  /// Resolved (non-conflicting) patches per label.
  std::map<int, std::size_t> label_counts() const;

 private:
  void load_existing();

  std::filesystem::path log_path_;
  LabelSchema schema_;
  std::unordered_set<std::string> known_patches_;
  Clock clock_;

  mutable std::mutex write_mutex_;
  std::ofstream log_;
  std::uint64_t next_seq_ = 0;
  mutable std::mutex snapshot_mutex_;
  std::shared_ptr<const std::vector<AnnotationRecord>> records_;
};

/// Resolves an event history into gold-standard rows.
std::vector<GoldRow> resolve_gold_standard(const std::vector<AnnotationRecord>& history);

void write_gold_standard(const std::filesystem::path& path, const std::vector<GoldRow>& rows);
std::vector<GoldRow> read_gold_standard(const std::filesystem::path& path);

enum class StrategyKind { Random, ByMean, ByStd, ReviewQueue };

StrategyKind parse_strategy(const std::string& s);
std::string to_string(StrategyKind k);

struct SamplingStrategy {
  StrategyKind kind = StrategyKind::Random;
  bool descending = false;
  std::uint64_t seed = 0;
};

struct BatchItem {
  const Patch* patch = nullptr;
  std::optional<PredictionRecord> prediction;
};

/// Serves unannotated patches per sampling strategy.
class PatchSampler {
 public:
  explicit PatchSampler(std::vector<Patch> patches, std::vector<PredictionRecord> predictions = {});

  /// At most n patches not in `exclude`; empty when none remain.
  std::vector<BatchItem> next_batch(const SamplingStrategy& strategy, std::size_t n,
                                    const std::unordered_set<std::string>& exclude) const;

  const Patch* find(const std::string& patch_id) const;
  const PredictionRecord* prediction(const std::string& patch_id) const;
  const std::vector<Patch>& patches() const { return patches_; }
  bool has_predictions() const { return !predictions_.empty(); }
  /// Nominal grid side of a sheet (largest patch edge on it).
  int grid_side(const std::string& sheet_id) const;

 private:
  std::vector<Patch> patches_;
  std::unordered_map<std::string, std::size_t> by_id_;
  std::unordered_map<std::string, PredictionRecord> predictions_;
  std::unordered_map<std::string, int> grid_side_;
};

/// Sentinel gray used for context regions outside the sheet.
inline constexpr std::uint8_t kContextPadValue = 128;

/// k x k patch neighbourhood around `patch` (k odd), padded outside the sheet.
/// k = 1 returns the patch pixels themselves.
Raster context_image(const Raster& sheet, const Patch& patch, int grid_side, int k);

}  // namespace patchwork
