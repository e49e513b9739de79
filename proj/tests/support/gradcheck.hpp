#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "patchwork/classifier.hpp"

namespace patchwork::testutil {

// Mean softmax cross-entropy recomputed from the logits, independent of the
// library loss.
inline double reference_loss(const Eigen::MatrixXd& logits, const std::vector<int>& labels) {
  double total = 0.0;
  for (Eigen::Index j = 0; j < logits.cols(); ++j) {
    const double mx = logits.col(j).maxCoeff();
    double z = 0.0;
    for (Eigen::Index i = 0; i < logits.rows(); ++i) z += std::exp(logits(i, j) - mx);
    total += -(logits(labels[j], j) - mx - std::log(z));
  }
  return total / static_cast<double>(logits.cols());
}

inline Eigen::MatrixXd reference_loss_grad(const Eigen::MatrixXd& logits,
                                           const std::vector<int>& labels) {
  Eigen::MatrixXd g(logits.rows(), logits.cols());
  for (Eigen::Index j = 0; j < logits.cols(); ++j) {
    const double mx = logits.col(j).maxCoeff();
    Eigen::VectorXd e = (logits.col(j).array() - mx).exp();
    g.col(j) = e / e.sum();
    g(labels[j], j) -= 1.0;
  }
  return g / static_cast<double>(logits.cols());
}

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t checked = 0;
  std::size_t kinks_skipped = 0;
};

// Returns the hidden pre-activations; used to spot a ReLU switching sign
// between theta - h and theta + h.
using KinkProbe = std::function<std::vector<Eigen::MatrixXd>(const Eigen::MatrixXd&)>;

/// Compares backward() against central differences with step h on
/// `coords` parameter coordinates drawn uniformly from all tensors.
/// With a probe, a coordinate whose perturbation flips any ReLU is redrawn:
/// the central difference straddles a kink there and is not a valid oracle.
inline GradCheckResult gradcheck(Classifier& model, const Eigen::MatrixXd& x,
                                 const std::vector<int>& labels, std::size_t coords,
                                 std::uint64_t seed, double h = 1e-4,
                                 const KinkProbe& probe = {}) {
  model.zero_grad();
  const Eigen::MatrixXd logits = model.forward_train(x);
  model.backward(reference_loss_grad(logits, labels));

  struct Coord {
    double* value;
    double grad;
  };
  std::vector<Coord> all;
  for (auto& g : model.parameter_groups())
    for (auto& t : g.tensors)
      for (std::size_t i = 0; i < t.value.size(); ++i) all.push_back({&t.value[i], t.grad[i]});

  std::mt19937_64 rng(seed);
  GradCheckResult out;
  auto pattern = [&] {
    std::vector<bool> bits;
    for (const auto& z : probe(x))
      for (Eigen::Index i = 0; i < z.size(); ++i) bits.push_back(z.data()[i] > 0.0);
    return bits;
  };
  while (out.checked < coords && out.kinks_skipped < 10 * coords) {
    auto& c = all[rng() % all.size()];
    const double saved = *c.value;
    *c.value = saved + h;
    const double up = reference_loss(model.forward(x), labels);
    std::vector<bool> up_bits;
    if (probe) up_bits = pattern();
    *c.value = saved - h;
    const double down = reference_loss(model.forward(x), labels);
    const bool kink = probe && pattern() != up_bits;
    *c.value = saved;
    if (kink) {
      ++out.kinks_skipped;
      continue;
    }
    const double numeric = (up - down) / (2 * h);
    const double denom = std::max({std::abs(numeric), std::abs(c.grad), 1e-6});
    out.max_rel_error = std::max(out.max_rel_error, std::abs(numeric - c.grad) / denom);
    ++out.checked;
  }
  return out;
}

}  // namespace patchwork::testutil
