#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "patchwork/geo.hpp"

namespace patchwork {

/// One model prediction for one patch. Failed records carry label_id = -1.
struct PredictionRecord {
  std::string patch_id;
  int label_id = -1;
  double confidence = 0.0;
  geo::GeoPoint center;

  bool failed() const { return label_id < 0; }
  friend bool operator==(const PredictionRecord&, const PredictionRecord&) = default;
};

/// CSV columns: patch_id, label_id, confidence, center_lon, center_lat.
void write_predictions(const std::filesystem::path& path,
                       const std::vector<PredictionRecord>& records);
std::vector<PredictionRecord> read_predictions(const std::filesystem::path& path);

}  // namespace patchwork
