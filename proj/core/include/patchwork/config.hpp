#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include <json.hpp>

#include "patchwork/annotation.hpp"
#include "patchwork/dataset.hpp"
#include "patchwork/ensemble.hpp"
#include "patchwork/ingest.hpp"
#include "patchwork/learner.hpp"
#include "patchwork/patchify.hpp"

namespace patchwork {

/// Artifact locations. Relative entries in the config file resolve against
/// the config file's directory.
struct ProjectPaths {
  std::filesystem::path catalog = "catalog.csv";
  std::filesystem::path sheet_dir = "sheets";
  std::filesystem::path tile_requests = "tile_requests.csv";
  std::filesystem::path patch_index = "patches.csv";
  std::filesystem::path annotations = "annotations.jsonl";
  std::filesystem::path gold = "gold.csv";
  std::filesystem::path splits = "splits.csv";
  std::filesystem::path checkpoint = "model.ckpt";
  std::filesystem::path train_log = "train_log.jsonl";
  std::filesystem::path metrics = "metrics.json";
  std::filesystem::path predictions = "predictions.csv";
  std::filesystem::path filtered = "predictions_filtered.csv";
  std::filesystem::path filter_report = "filter_report.json";
  std::filesystem::path points = "stations.csv";
  std::filesystem::path link_report = "link_report.json";
  std::filesystem::path density = "density.csv";
  std::filesystem::path density_report = "density_report.json";
  std::filesystem::path geojson = "predictions.geojson";
};

struct Thresholds {
  double isolation_m = 250.0;
  double link_m = 150.0;
  double density_radius_m = 500.0;
  double density_min_percent = 20.0;
  int density_bins = 7;
};

/// Label ids each spatial stage works on.
struct StageLabels {
  int filter = 1;
  int link = 1;
  int density_subject = 2;
  int density_target = 1;
};

SliceMode parse_slice_mode(const std::string& s);
std::string to_string(SliceMode m);

struct ProjectConfig {
  std::filesystem::path base_dir = ".";
  ProjectPaths paths;
  LabelSchema schema = LabelSchema::railspace_default();
  std::optional<TileSource> tile_source;
  SliceSpec slice;
  SplitSpec split;
  TrainConfig train;
  std::vector<std::size_t> hidden = {256, 64};
  /// Set to train the context-aware ensemble instead of a single network.
  std::optional<EnsembleConfig> ensemble;
  Thresholds thresholds;
  StageLabels labels;
  std::uint64_t seed = 0;
  /// 0 selects the number of logical cores.
  int workers = 0;

  /// Copies the global seed into every stochastic stage.
  void apply_seed(std::uint64_t s);
  int effective_workers() const;
  void validate() const;

  static ProjectConfig from_json(const nlohmann::json& j, const std::filesystem::path& base_dir);
  static ProjectConfig load(const std::filesystem::path& path);
  /// Paths are written relative to base_dir where possible.
  nlohmann::json to_json() const;
};

}  // namespace patchwork
