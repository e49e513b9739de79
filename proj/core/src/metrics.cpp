#include "patchwork/metrics.hpp"

#include "patchwork/error.hpp"

namespace patchwork {

using nlohmann::json;

ConfusionMatrix::ConfusionMatrix(std::size_t n_labels) : n_(n_labels), counts_(n_labels * n_labels, 0) {}

void ConfusionMatrix::add(int gold, int pred, std::uint64_t count) {
  if (gold < 0 || pred < 0 || static_cast<std::size_t>(gold) >= n_ ||
      static_cast<std::size_t>(pred) >= n_) {
    throw DataError("label out of range for confusion matrix: gold " + std::to_string(gold) +
                    ", pred " + std::to_string(pred));
  }
  counts_[static_cast<std::size_t>(gold) * n_ + static_cast<std::size_t>(pred)] += count;
}

void ConfusionMatrix::merge(const ConfusionMatrix& other) {
  if (other.n_ != n_) throw ConfigError("cannot merge confusion matrices of different sizes");
  for (std::size_t i = 0; i < counts_.size(); ++i) counts_[i] += other.counts_[i];
}

std::uint64_t ConfusionMatrix::count(int gold, int pred) const {
  return counts_.at(static_cast<std::size_t>(gold) * n_ + static_cast<std::size_t>(pred));
}

std::uint64_t ConfusionMatrix::total() const {
  std::uint64_t t = 0;
  for (auto c : counts_) t += c;
  return t;
}

MetricsReport compute_metrics(const ConfusionMatrix& cm) {
  const auto n = cm.size();
  MetricsReport r;
  r.confusion = cm;
  r.per_class.resize(n);
  const auto total = cm.total();

  std::uint64_t correct = 0;
  std::size_t present = 0;
  for (std::size_t k = 0; k < n; ++k) {
    const int ki = static_cast<int>(k);
    std::uint64_t tp = cm.count(ki, ki);
    std::uint64_t gold_k = 0;
    std::uint64_t pred_k = 0;
    for (std::size_t j = 0; j < n; ++j) {
      gold_k += cm.count(ki, static_cast<int>(j));
      pred_k += cm.count(static_cast<int>(j), ki);
    }
    correct += tp;
    auto& c = r.per_class[k];
    c.support = gold_k;
    const double p = pred_k ? static_cast<double>(tp) / static_cast<double>(pred_k) : 0.0;
    const double rec = gold_k ? static_cast<double>(tp) / static_cast<double>(gold_k) : 0.0;
    c.precision = 100.0 * p;
    c.recall = 100.0 * rec;
    c.f1 = p + rec > 0.0 ? 100.0 * 2.0 * p * rec / (p + rec) : 0.0;
    if (gold_k > 0 || pred_k > 0) {
      ++present;
      r.f1_macro += c.f1;
      r.precision_macro += c.precision;
      r.recall_macro += c.recall;
    }
  }
  if (present > 0) {
    r.f1_macro /= static_cast<double>(present);
    r.precision_macro /= static_cast<double>(present);
    r.recall_macro /= static_cast<double>(present);
  }
  // Single-label multiclass: pooled TP = correct, pooled FP = pooled FN = total - correct.
  r.accuracy = total ? 100.0 * static_cast<double>(correct) / static_cast<double>(total) : 0.0;
  r.f1_micro = total ? 100.0 * 2.0 * static_cast<double>(correct) /
                           (2.0 * static_cast<double>(correct) +
                            2.0 * static_cast<double>(total - correct))
                     : 0.0;
  return r;
}

MetricsReport compute_metrics(const std::vector<int>& gold, const std::vector<int>& pred,
                              std::size_t n_labels) {
  if (gold.size() != pred.size()) throw DataError("gold and prediction lengths differ");
  ConfusionMatrix cm(n_labels);
  for (std::size_t i = 0; i < gold.size(); ++i) cm.add(gold[i], pred[i]);
  return compute_metrics(cm);
}

json MetricsReport::to_json() const {
  json j;
  for (std::size_t k = 0; k < per_class.size(); ++k) {
    const auto s = std::to_string(k);
    j["f1_" + s] = per_class[k].f1;
    j["precision_" + s] = per_class[k].precision;
    j["recall_" + s] = per_class[k].recall;
    j["support_" + s] = per_class[k].support;
  }
  j["f1_macro"] = f1_macro;
  j["f1_micro"] = f1_micro;
  j["precision_macro"] = precision_macro;
  j["recall_macro"] = recall_macro;
  j["accuracy"] = accuracy;
  json rows = json::array();
  for (std::size_t g = 0; g < confusion.size(); ++g) {
    json row = json::array();
    for (std::size_t p = 0; p < confusion.size(); ++p) {
      row.push_back(confusion.count(static_cast<int>(g), static_cast<int>(p)));
    }
    rows.push_back(row);
  }
  j["confusion"] = rows;
  return j;
}

}  // namespace patchwork
