#include "patchwork/dataset.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "patchwork/csv.hpp"
#include "patchwork/error.hpp"
#include "patchwork/fsutil.hpp"

namespace patchwork {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr std::array<const char*, 3> kPartNames = {"train", "val", "test"};

/// Largest-remainder rounding of total * fractions; ties go to the lower index.
std::array<std::size_t, 3> largest_remainder(std::size_t total, const std::array<double, 3>& f) {
  std::array<std::size_t, 3> out{};
  std::array<double, 3> rem{};
  std::size_t assigned = 0;
  for (std::size_t s = 0; s < 3; ++s) {
    const double exact = static_cast<double>(total) * f[s];
    out[s] = static_cast<std::size_t>(std::floor(exact + 1e-9));
    rem[s] = exact - static_cast<double>(out[s]);
    assigned += out[s];
  }
  std::array<std::size_t, 3> order = {0, 1, 2};
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return rem[a] > rem[b]; });
  for (std::size_t i = 0; assigned < total; ++i, ++assigned) ++out[order[i % 3]];
  return out;
}

}  // namespace

std::vector<LabelledPatch> labelled_from_gold(const std::vector<GoldRow>& rows) {
  std::vector<LabelledPatch> out;
  std::size_t conflicts = 0;
  for (const auto& r : rows) {
    if (r.conflict) {
      ++conflicts;
      continue;
    }
    out.push_back({r.patch_id, r.label_id});
  }
  if (conflicts > 0) spdlog::warn("dropped {} conflicting gold-standard rows", conflicts);
  return out;
}

void SplitSpec::validate() const {
  double sum = 0.0;
  for (double f : fractions) {
    if (!(f > 0.0 && f < 1.0)) throw ConfigError("split fractions must lie in (0, 1)");
    sum += f;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw ConfigError("split fractions must sum to 1");
}

const std::vector<LabelledPatch>& Splits::part(SplitPart p) const {
  switch (p) {
    case SplitPart::Train:
      return train;
    case SplitPart::Val:
      return val;
    case SplitPart::Test:
      return test;
  }
  return train;
}

std::vector<LabelledPatch>& Splits::part(SplitPart p) {
  return const_cast<std::vector<LabelledPatch>&>(std::as_const(*this).part(p));
}

std::vector<std::array<std::size_t, 3>> allocate_split_counts(
    const std::vector<std::size_t>& class_counts, const SplitSpec& spec) {
  spec.validate();
  const std::size_t n_classes = class_counts.size();
  const std::size_t total = std::accumulate(class_counts.begin(), class_counts.end(), std::size_t{0});

  std::vector<std::array<std::size_t, 3>> counts(n_classes);
  std::vector<std::array<double, 3>> frac(n_classes);
  std::vector<std::size_t> supply(n_classes, 0);
  std::array<std::size_t, 3> floors{};
  for (std::size_t c = 0; c < n_classes; ++c) {
    std::size_t used = 0;
    for (std::size_t s = 0; s < 3; ++s) {
      const double exact = static_cast<double>(class_counts[c]) * spec.fractions[s];
      counts[c][s] = static_cast<std::size_t>(std::floor(exact + 1e-9));
      frac[c][s] = exact - static_cast<double>(counts[c][s]);
      used += counts[c][s];
      floors[s] += counts[c][s];
    }
    supply[c] = class_counts[c] - used;
  }

  const auto targets = largest_remainder(total, spec.fractions);
  std::array<std::size_t, 3> demand{};
  for (std::size_t s = 0; s < 3; ++s) demand[s] = targets[s] - floors[s];

  // extra[c][s] = 1 when class c gives its leftover unit to split s.
  std::vector<std::array<bool, 3>> extra(n_classes, {false, false, false});

  // Greedy pass in order of descending fractional remainder.
  struct Cand {
    double frac;
    std::size_t c;
    std::size_t s;
  };
  std::vector<Cand> cands;
  for (std::size_t c = 0; c < n_classes; ++c) {
    for (std::size_t s = 0; s < 3; ++s) cands.push_back({frac[c][s], c, s});
  }
  std::stable_sort(cands.begin(), cands.end(),
                   [](const Cand& a, const Cand& b) { return a.frac > b.frac; });
  for (const auto& cand : cands) {
    if (supply[cand.c] > 0 && demand[cand.s] > 0 && !extra[cand.c][cand.s]) {
      extra[cand.c][cand.s] = true;
      --supply[cand.c];
      --demand[cand.s];
    }
  }

  // Augmenting paths for whatever the greedy pass could not place:
  // class -> split (unused edge) -> class (used edge) -> ... -> split with demand.
  for (std::size_t c0 = 0; c0 < n_classes; ++c0) {
    while (supply[c0] > 0) {
      std::vector<int> class_prev(n_classes, -1);   // split that reached this class
      std::array<int, 3> split_prev = {-1, -1, -1};  // class that reached this split
      std::vector<std::size_t> queue = {c0};
      std::vector<bool> seen(n_classes, false);
      seen[c0] = true;
      int found = -1;
      for (std::size_t qi = 0; qi < queue.size() && found < 0; ++qi) {
        const std::size_t c = queue[qi];
        for (std::size_t s = 0; s < 3 && found < 0; ++s) {
          if (extra[c][s] || split_prev[s] >= 0) continue;
          split_prev[s] = static_cast<int>(c);
          if (demand[s] > 0) {
            found = static_cast<int>(s);
            break;
          }
          for (std::size_t c2 = 0; c2 < n_classes; ++c2) {
            if (!seen[c2] && extra[c2][s]) {
              seen[c2] = true;
              class_prev[c2] = static_cast<int>(s);
              queue.push_back(c2);
            }
          }
        }
      }
      if (found < 0) throw DataError("split allocation is infeasible for these class counts");
      auto s = static_cast<std::size_t>(found);
      --demand[s];
      while (true) {
        const auto c = static_cast<std::size_t>(split_prev[s]);
        extra[c][s] = true;
        if (c == c0) break;
        const auto s_prev = static_cast<std::size_t>(class_prev[c]);
        extra[c][s_prev] = false;
        s = s_prev;
      }
      --supply[c0];
    }
  }

  for (std::size_t c = 0; c < n_classes; ++c) {
    for (std::size_t s = 0; s < 3; ++s) counts[c][s] += extra[c][s] ? 1 : 0;
  }
  return counts;
}

Splits stratified_split(const std::vector<LabelledPatch>& items, const SplitSpec& spec) {
  spec.validate();
  std::map<int, std::vector<LabelledPatch>> by_class;
  for (const auto& it : items) by_class[it.label_id].push_back(it);

  std::vector<std::size_t> class_counts;
  for (auto& [label, members] : by_class) {
    if (members.size() < 3) {
      throw DataError("class " + std::to_string(label) + " has " +
                      std::to_string(members.size()) + " members; stratified split needs >= 3");
    }
    class_counts.push_back(members.size());
  }
  const auto counts = allocate_split_counts(class_counts, spec);

  Splits out;
  std::size_t ci = 0;
  for (auto& [label, members] : by_class) {
    std::sort(members.begin(), members.end(),
              [](const auto& a, const auto& b) { return a.patch_id < b.patch_id; });
    Rng rng(derive_seed({spec.seed, static_cast<std::uint64_t>(label)}));
    shuffle(members, rng);
    std::size_t pos = 0;
    for (std::size_t s = 0; s < 3; ++s) {
      auto& dst = out.part(static_cast<SplitPart>(s));
      for (std::size_t k = 0; k < counts[ci][s]; ++k) dst.push_back(members[pos++]);
    }
    ++ci;
  }
  for (std::size_t s = 0; s < 3; ++s) {
    auto& part = out.part(static_cast<SplitPart>(s));
    std::sort(part.begin(), part.end(),
              [](const auto& a, const auto& b) { return a.patch_id < b.patch_id; });
  }
  return out;
}

void write_split_manifest(const fs::path& path, const Splits& splits) {
  atomic_write(path, [&](std::ostream& out) {
    CsvWriter w(out);
    w.row({"patch_id", "split", "label_id"});
    for (std::size_t s = 0; s < 3; ++s) {
      for (const auto& it : splits.part(static_cast<SplitPart>(s))) {
        w.row({it.patch_id, kPartNames[s], std::to_string(it.label_id)});
      }
    }
  });
}

Splits read_split_manifest(const fs::path& path) {
  const CsvTable t = CsvTable::read(path);
  const auto id = t.require_column("patch_id");
  const auto split = t.require_column("split");
  const auto label = t.require_column("label_id");
  Splits out;
  for (const auto& row : t.rows()) {
    const auto pos = std::find(kPartNames.begin(), kPartNames.end(), row[split]);
    if (pos == kPartNames.end()) throw DataError("unknown split name '" + row[split] + "'");
    out.part(static_cast<SplitPart>(pos - kPartNames.begin()))
        .push_back({row[id], static_cast<int>(parse_int(row[label], "label_id"))});
  }
  return out;
}

WeightedSampler::WeightedSampler(std::vector<LabelledPatch> items, double c, std::uint64_t seed)
    : items_(std::move(items)), rng_(seed) {
  if (items_.empty()) throw DataError("weighted sampler needs a non-empty training set");
  if (!(c > 0.0)) throw ConfigError("sampler weight constant must be positive");
  std::map<int, std::vector<std::size_t>> members;
  for (std::size_t i = 0; i < items_.size(); ++i) members[items_[i].label_id].push_back(i);
  double mass = 0.0;
  for (auto& [label, idx] : members) {
    const double w = c / static_cast<double>(idx.size());
    weights_[label] = w;
    mass += w * static_cast<double>(idx.size());
    class_order_.push_back(label);
    cumulative_.push_back(mass);
    members_.push_back(std::move(idx));
  }
}

const LabelledPatch& WeightedSampler::next() {
  const double u = uniform01(rng_) * cumulative_.back();
  auto k = static_cast<std::size_t>(std::upper_bound(cumulative_.begin(), cumulative_.end(), u) -
                                    cumulative_.begin());
  k = std::min(k, members_.size() - 1);
  const auto& idx = members_[k];
  return items_[idx[uniform_index(rng_, idx.size())]];
}

std::map<int, double> WeightedSampler::class_probabilities() const {
  std::map<int, double> out;
  double prev = 0.0;
  for (std::size_t k = 0; k < class_order_.size(); ++k) {
    out[class_order_[k]] = (cumulative_[k] - prev) / cumulative_.back();
    prev = cumulative_[k];
  }
  return out;
}

void AugmentConfig::validate() const {
  for (double p : {p_hflip, p_vflip, p_blur, p_downres}) {
    if (!(p >= 0.0 && p <= 1.0)) throw ConfigError("augmentation probabilities must be in [0, 1]");
  }
  if (downres_size < 1 || model_input_px < 1) throw ConfigError("augmentation sizes must be >= 1");
  if (channels != 1 && channels != 3) throw ConfigError("channels must be 1 or 3");
  if (!(blur_sigma_range.first > 0.0) || blur_sigma_range.second < blur_sigma_range.first) {
    throw ConfigError("blur sigma range must be positive and ordered");
  }
}

AugmentConfig AugmentConfig::from_json(const json& j) {
  AugmentConfig c;
  c.p_hflip = j.value("p_hflip", c.p_hflip);
  c.p_vflip = j.value("p_vflip", c.p_vflip);
  c.p_blur = j.value("p_blur", c.p_blur);
  c.p_downres = j.value("p_downres", c.p_downres);
  c.downres_size = j.value("downres_size", c.downres_size);
  if (j.contains("blur_sigma_range")) {
    c.blur_sigma_range = {j["blur_sigma_range"].at(0).get<double>(),
                          j["blur_sigma_range"].at(1).get<double>()};
  }
  c.model_input_px = j.value("model_input_px", c.model_input_px);
  c.channels = j.value("channels", c.channels);
  c.validate();
  return c;
}

json AugmentConfig::to_json() const {
  return {{"p_hflip", p_hflip},
          {"p_vflip", p_vflip},
          {"p_blur", p_blur},
          {"p_downres", p_downres},
          {"downres_size", downres_size},
          {"blur_sigma_range", {blur_sigma_range.first, blur_sigma_range.second}},
          {"model_input_px", model_input_px},
          {"channels", channels}};
}

NormStats NormStats::from_json(const json& j) {
  NormStats n;
  n.mean = j.at("mean").get<std::vector<double>>();
  n.std = j.at("std").get<std::vector<double>>();
  if (n.mean.size() != n.std.size() || n.mean.empty()) throw DataError("malformed norm stats");
  return n;
}

json NormStats::to_json() const { return {{"mean", mean}, {"std", std}}; }

NormStats compute_norm_stats(const std::vector<Image>& images) {
  if (images.empty()) throw DataError("cannot compute normalisation over zero images");
  const int ch = images.front().channels;
  std::vector<double> sum(static_cast<std::size_t>(ch), 0.0);
  std::vector<double> count(static_cast<std::size_t>(ch), 0.0);
  for (const auto& img : images) {
    for (std::size_t i = 0; i < img.data.size(); ++i) {
      sum[i % static_cast<std::size_t>(ch)] += img.data[i];
      count[i % static_cast<std::size_t>(ch)] += 1.0;
    }
  }
  NormStats out;
  out.mean.assign(static_cast<std::size_t>(ch), 0.0);
  out.std.assign(static_cast<std::size_t>(ch), 0.0);
  for (std::size_t c = 0; c < sum.size(); ++c) out.mean[c] = sum[c] / count[c];
  std::vector<double> sq(static_cast<std::size_t>(ch), 0.0);
  for (const auto& img : images) {
    for (std::size_t i = 0; i < img.data.size(); ++i) {
      const double d = img.data[i] - out.mean[i % static_cast<std::size_t>(ch)];
      sq[i % static_cast<std::size_t>(ch)] += d * d;
    }
  }
  for (std::size_t c = 0; c < sq.size(); ++c) {
    // Guard against blank corpora producing zero variance.
    out.std[c] = std::max(std::sqrt(sq[c] / count[c]), 1e-6);
  }
  return out;
}

Image apply_random_steps(Image img, const AugmentConfig& cfg, Rng& rng) {
  if (bernoulli(rng, cfg.p_hflip)) flip_horizontal(img);
  if (bernoulli(rng, cfg.p_vflip)) flip_vertical(img);
  if (bernoulli(rng, cfg.p_blur)) {
    img = gaussian_blur(img, uniform_real(rng, cfg.blur_sigma_range.first,
                                          cfg.blur_sigma_range.second));
  }
  if (bernoulli(rng, cfg.p_downres)) {
    img = resize_bilinear(img, cfg.downres_size, cfg.downres_size);
  }
  return img;
}

Eigen::VectorXd normalize(const Image& img, const NormStats& norm) {
  if (norm.mean.size() != static_cast<std::size_t>(img.channels)) {
    throw ConfigError("normalisation stats have " + std::to_string(norm.mean.size()) +
                      " channels, image has " + std::to_string(img.channels));
  }
  Eigen::VectorXd v(static_cast<Eigen::Index>(img.data.size()));
  for (std::size_t i = 0; i < img.data.size(); ++i) {
    const std::size_t c = i % static_cast<std::size_t>(img.channels);
    v[static_cast<Eigen::Index>(i)] = (img.data[i] - norm.mean[c]) / norm.std[c];
  }
  return v;
}

Image denormalize(const Eigen::VectorXd& v, int rows, int cols, const NormStats& norm) {
  const int ch = static_cast<int>(norm.mean.size());
  Image img(rows, cols, ch);
  if (static_cast<std::size_t>(v.size()) != img.data.size()) {
    throw ConfigError("denormalize: vector size does not match image shape");
  }
  for (std::size_t i = 0; i < img.data.size(); ++i) {
    const std::size_t c = i % static_cast<std::size_t>(ch);
    img.data[i] = v[static_cast<Eigen::Index>(i)] * norm.std[c] + norm.mean[c];
  }
  return img;
}

Eigen::VectorXd augment(const Raster& patch, const AugmentConfig& cfg, const NormStats& norm,
                        Rng* rng) {
  Image img = to_image(patch, cfg.channels);
  if (rng != nullptr) img = apply_random_steps(std::move(img), cfg, *rng);
  img = resize_bilinear(img, cfg.model_input_px, cfg.model_input_px);
  return normalize(img, norm);
}

}  // namespace patchwork
