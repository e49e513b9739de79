#pragma once

#include <cstdint>
#include <vector>

#include <json.hpp>

namespace patchwork {

/// counts[gold][pred]. Partial matrices from parallel workers can be merged.
class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(std::size_t n_labels = 0);

  void add(int gold, int pred, std::uint64_t count = 1);
  void merge(const ConfusionMatrix& other);

  std::size_t size() const { return n_; }
  std::uint64_t count(int gold, int pred) const;
  std::uint64_t total() const;
  const std::vector<std::uint64_t>& raw() const { return counts_; }

 private:
  std::size_t n_;
  std::vector<std::uint64_t> counts_;
};

struct ClassMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::uint64_t support = 0;
};

/// All scores in percent.
struct MetricsReport {
  std::vector<ClassMetrics> per_class;
  double f1_macro = 0.0;
  double f1_micro = 0.0;
  double precision_macro = 0.0;
  double recall_macro = 0.0;
  double accuracy = 0.0;
  ConfusionMatrix confusion;

  nlohmann::json to_json() const;
};

/// Per-class F1 = 2PR / (P + R), 0 when P + R = 0. Macro averages run over
/// labels that occur in the gold or predicted labels; micro uses pooled counts.
MetricsReport compute_metrics(const ConfusionMatrix& cm);

MetricsReport compute_metrics(const std::vector<int>& gold, const std::vector<int>& pred,
                              std::size_t n_labels);

}  // namespace patchwork
