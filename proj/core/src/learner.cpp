#include "patchwork/learner.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <mutex>
#include <sstream>

#include "patchwork/ensemble.hpp"
#include "patchwork/error.hpp"
#include "patchwork/fsutil.hpp"
#include "patchwork/parallel.hpp"
#include "patchwork/reference_net.hpp"

namespace patchwork {

using Eigen::MatrixXd;
using Eigen::VectorXd;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr char kMagic[8] = {'P', 'W', 'C', 'K', 'P', 'T', '0', '1'};
constexpr std::uint32_t kCheckpointVersion = 1;

std::size_t check_label(int label, std::size_t n) {
  if (label < 0 || static_cast<std::size_t>(label) >= n) {
    throw DataError("label " + std::to_string(label) + " outside model range 0.." +
                    std::to_string(n - 1));
  }
  return static_cast<std::size_t>(label);
}

}  // namespace

double cross_entropy(const VectorXd& logits, int label) {
  const auto k = check_label(label, static_cast<std::size_t>(logits.size()));
  const double mx = logits.maxCoeff();
  const double lse = mx + std::log((logits.array() - mx).exp().sum());
  return lse - logits[static_cast<Eigen::Index>(k)];
}

MatrixXd softmax(const MatrixXd& logits) {
  MatrixXd out(logits.rows(), logits.cols());
  for (Eigen::Index c = 0; c < logits.cols(); ++c) {
    const double mx = logits.col(c).maxCoeff();
    auto e = (logits.col(c).array() - mx).exp();
    out.col(c) = e / e.sum();
  }
  return out;
}

LossGrad softmax_cross_entropy(const MatrixXd& logits, const std::vector<int>& labels) {
  if (static_cast<std::size_t>(logits.cols()) != labels.size()) {
    throw ConfigError("logit columns and label count differ");
  }
  LossGrad out;
  out.grad = softmax(logits);
  const double inv_b = 1.0 / static_cast<double>(labels.size());
  double total = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const auto c = static_cast<Eigen::Index>(i);
    total += cross_entropy(logits.col(c), labels[i]);
    out.grad(labels[i], c) -= 1.0;
  }
  out.grad *= inv_b;
  out.loss = total * inv_b;
  return out;
}

PatchEncoder::PatchEncoder(SheetCache& sheets, const std::vector<Patch>& patches,
                           AugmentConfig augment, NormStats norm)
    : sheets_(sheets), augment_(std::move(augment)), norm_(std::move(norm)) {
  augment_.validate();
  for (const auto& p : patches) patches_.emplace(p.patch_id, p);
}

std::size_t PatchEncoder::input_size() const {
  return static_cast<std::size_t>(augment_.model_input_px) * augment_.model_input_px *
         augment_.channels;
}

const Patch& PatchEncoder::patch(const std::string& patch_id) const {
  auto it = patches_.find(patch_id);
  if (it == patches_.end()) throw DataError("unknown patch '" + patch_id + "'");
  return it->second;
}

Raster PatchEncoder::patch_raster(const std::string& patch_id) const {
  const auto& p = patch(patch_id);
  const auto sheet = sheets_.get(p.sheet_id);
  return sheet->image.crop(p.rect);
}

VectorXd PatchEncoder::encode(const std::string& patch_id, Rng* rng) const {
  return augment(patch_raster(patch_id), augment_, norm_, rng);
}

RasterMapEncoder::RasterMapEncoder(std::unordered_map<std::string, Raster> rasters,
                                   AugmentConfig augment, NormStats norm)
    : rasters_(std::move(rasters)), augment_(std::move(augment)), norm_(std::move(norm)) {
  augment_.validate();
}

std::size_t RasterMapEncoder::input_size() const {
  return static_cast<std::size_t>(augment_.model_input_px) * augment_.model_input_px *
         augment_.channels;
}

VectorXd RasterMapEncoder::encode(const std::string& patch_id, Rng* rng) const {
  auto it = rasters_.find(patch_id);
  if (it == rasters_.end()) throw DataError("unknown patch '" + patch_id + "'");
  return augment(it->second, augment_, norm_, rng);
}

NormStats compute_patch_norm_stats(SheetCache& sheets, const std::vector<const Patch*>& patches,
                                   int channels) {
  if (patches.empty()) throw DataError("cannot compute normalisation over zero patches");
  const auto ch = static_cast<std::size_t>(channels);
  std::vector<double> sum(ch, 0.0), sq(ch, 0.0);
  double count = 0.0;
  for (const auto* p : patches) {
    const auto sheet = sheets.get(p->sheet_id);
    const Image img = to_image(sheet->image.crop(p->rect), channels);
    for (std::size_t i = 0; i < img.data.size(); ++i) {
      sum[i % ch] += img.data[i];
      sq[i % ch] += img.data[i] * img.data[i];
    }
    count += static_cast<double>(img.data.size() / ch);
  }
  NormStats out;
  out.mean.resize(ch);
  out.std.resize(ch);
  for (std::size_t c = 0; c < ch; ++c) {
    out.mean[c] = sum[c] / count;
    const double var = std::max(sq[c] / count - out.mean[c] * out.mean[c], 0.0);
    out.std[c] = std::max(std::sqrt(var), 1e-6);
  }
  return out;
}

TrainConfig TrainConfig::from_json(const json& j) {
  TrainConfig c;
  if (j.contains("optimizer")) c.optimizer = OptimizerConfig::from_json(j["optimizer"]);
  if (j.contains("augment")) c.augment = AugmentConfig::from_json(j["augment"]);
  c.sampler_c = j.value("sampler_c", c.sampler_c);
  c.seed = j.value("seed", c.seed);
  c.samples_per_epoch = j.value("samples_per_epoch", c.samples_per_epoch);
  c.workers = j.value("workers", c.workers);
  if (!(c.sampler_c > 0.0)) throw ConfigError("sampler_c must be positive");
  return c;
}

json TrainConfig::to_json() const {
  return {{"optimizer", optimizer.to_json()},
          {"augment", augment.to_json()},
          {"sampler_c", sampler_c},
          {"seed", seed},
          {"samples_per_epoch", samples_per_epoch},
          {"workers", workers}};
}

json EpochLog::to_json() const {
  json j = {{"epoch", epoch}, {"lrs", lrs}, {"train_loss", train_loss}, {"val_loss", val_loss},
            {"best", best}};
  j["val"] = val_metrics.to_json();
  return j;
}

void copy_parameters(Classifier& from, Classifier& to) {
  auto src = from.parameter_groups();
  auto dst = to.parameter_groups();
  if (src.size() != dst.size()) throw ConfigError("parameter group count mismatch");
  for (std::size_t g = 0; g < src.size(); ++g) {
    if (src[g].tensors.size() != dst[g].tensors.size()) {
      throw ConfigError("tensor count mismatch in group " + src[g].name);
    }
    for (std::size_t t = 0; t < src[g].tensors.size(); ++t) {
      const auto& a = src[g].tensors[t];
      const auto& b = dst[g].tensors[t];
      if (a.value.size() != b.value.size()) throw ConfigError("shape mismatch in " + a.name);
      std::copy(a.value.begin(), a.value.end(), b.value.begin());
    }
  }
}

namespace {

MatrixXd encode_batch(const SampleEncoder& encoder, const std::vector<std::string>& ids,
                      const std::vector<std::uint64_t>* seeds, int workers) {
  MatrixXd x(static_cast<Eigen::Index>(encoder.input_size()),
             static_cast<Eigen::Index>(ids.size()));
  parallel_for(ids.size(), workers, [&](std::size_t i) {
    VectorXd v;
    if (seeds != nullptr) {
      Rng rng((*seeds)[i]);
      v = encoder.encode(ids[i], &rng);
    } else {
      v = encoder.encode(ids[i], nullptr);
    }
    if (static_cast<std::size_t>(v.size()) != encoder.input_size()) {
      throw ConfigError("encoder produced a vector of the wrong length");
    }
    x.col(static_cast<Eigen::Index>(i)) = v;
  });
  return x;
}

void write_log(const fs::path& path, const std::vector<EpochLog>& epochs) {
  atomic_write(path, [&](std::ostream& out) {
    for (const auto& e : epochs) out << e.to_json().dump() << '\n';
  });
}

}  // namespace

EvalResult evaluate(const Classifier& model, const SampleEncoder& encoder,
                    const std::vector<LabelledPatch>& items, int batch_size, int workers) {
  if (items.empty()) throw DataError("cannot evaluate on an empty set");
  if (encoder.input_size() != model.input_size()) {
    throw ConfigError("encoder and model input sizes differ");
  }
  const auto bs = static_cast<std::size_t>(std::max(batch_size, 1));
  const std::size_t n_chunks = (items.size() + bs - 1) / bs;
  std::vector<ConfusionMatrix> partial(n_chunks, ConfusionMatrix(model.num_labels()));
  std::vector<double> loss_sum(n_chunks, 0.0);

  parallel_for(n_chunks, workers, [&](std::size_t c) {
    const std::size_t lo = c * bs;
    const std::size_t hi = std::min(items.size(), lo + bs);
    std::vector<std::string> ids;
    std::vector<int> labels;
    for (std::size_t i = lo; i < hi; ++i) {
      ids.push_back(items[i].patch_id);
      labels.push_back(items[i].label_id);
    }
    const MatrixXd logits = model.forward(encode_batch(encoder, ids, nullptr, 1));
    for (std::size_t i = 0; i < ids.size(); ++i) {
      const auto col = static_cast<Eigen::Index>(i);
      Eigen::Index arg = 0;
      logits.col(col).maxCoeff(&arg);
      loss_sum[c] += cross_entropy(logits.col(col), labels[i]);
      partial[c].add(labels[i], static_cast<int>(arg));
    }
  });

  ConfusionMatrix cm(model.num_labels());
  double loss = 0.0;
  for (std::size_t c = 0; c < n_chunks; ++c) {
    cm.merge(partial[c]);
    loss += loss_sum[c];
  }
  return {compute_metrics(cm), loss / static_cast<double>(items.size())};
}

TrainResult train(Classifier& model, const SampleEncoder& encoder, const Splits& splits,
                  const TrainConfig& cfg, const TrainHooks& hooks) {
  cfg.optimizer.validate();
  cfg.augment.validate();
  if (cfg.optimizer.epochs == 0) throw TrainingError("no training performed: epochs is 0");
  if (splits.train.empty()) throw DataError("training split is empty");
  if (splits.val.empty()) throw DataError("validation split is empty");
  if (encoder.input_size() != model.input_size()) {
    throw ConfigError("encoder produces " + std::to_string(encoder.input_size()) +
                      " inputs, model expects " + std::to_string(model.input_size()));
  }

  const auto base_lrs = layerwise_lrs(model.parameter_groups().size(), cfg.optimizer);
  AdamW optimizer(cfg.optimizer);
  WeightedSampler sampler(splits.train, cfg.sampler_c, derive_seed({cfg.seed, 0x73616d70ULL}));
  const std::size_t per_epoch = cfg.samples_per_epoch ? cfg.samples_per_epoch : splits.train.size();
  const auto batch = static_cast<std::size_t>(cfg.optimizer.batch_size);

  TrainResult result;
  std::unique_ptr<Classifier> best;

  for (int epoch = 0; epoch < cfg.optimizer.epochs; ++epoch) {
    EpochLog entry;
    entry.epoch = epoch;
    entry.lrs = scheduled_lrs(base_lrs, cfg.optimizer, epoch);
    double loss_total = 0.0;

    for (std::size_t start = 0; start < per_epoch; start += batch) {
      const std::size_t bs = std::min(batch, per_epoch - start);
      std::vector<std::string> ids;
      std::vector<int> labels;
      std::vector<std::uint64_t> seeds;
      for (std::size_t i = 0; i < bs; ++i) {
        const auto& item = sampler.next();
        ids.push_back(item.patch_id);
        labels.push_back(item.label_id);
        seeds.push_back(derive_seed({cfg.seed, static_cast<std::uint64_t>(epoch), start + i}));
      }
      const MatrixXd x = encode_batch(encoder, ids, &seeds, cfg.workers);
      const MatrixXd logits = model.forward_train(x);
      const LossGrad lg = softmax_cross_entropy(logits, labels);
      if (!std::isfinite(lg.loss)) {
        if (hooks.log_path) write_log(*hooks.log_path, result.epochs);
        std::ostringstream os;
        os << "loss diverged at epoch " << epoch << ", sample " << start;
        if (result.best_epoch >= 0) os << "; best checkpoint from epoch " << result.best_epoch << " kept";
        throw TrainingError(os.str());
      }
      model.zero_grad();
      model.backward(lg.grad);
      optimizer.step(model.parameter_groups(), entry.lrs);
      loss_total += lg.loss * static_cast<double>(bs);
    }
    entry.train_loss = loss_total / static_cast<double>(per_epoch);

    auto ev = evaluate(model, encoder, splits.val, static_cast<int>(batch), cfg.workers);
    entry.val_loss = ev.loss;
    entry.val_metrics = std::move(ev.metrics);
    if (result.best_epoch < 0 || entry.val_loss < result.best_val_loss) {
      entry.best = true;
      result.best_epoch = epoch;
      result.best_val_loss = entry.val_loss;
      best = model.clone();
      if (hooks.on_best) hooks.on_best(model, entry);
    }
    spdlog::debug("epoch {} train_loss {:.5f} val_loss {:.5f} val_f1_macro {:.2f}", epoch,
                  entry.train_loss, entry.val_loss, entry.val_metrics.f1_macro);
    result.epochs.push_back(std::move(entry));
    if (hooks.log_path) write_log(*hooks.log_path, result.epochs);
  }

  copy_parameters(*best, model);
  return result;
}

std::vector<PredictionRecord> infer(const Classifier& model, const SampleEncoder& encoder,
                                    const std::vector<Patch>& patches, const InferOptions& opts) {
  if (encoder.input_size() != model.input_size()) {
    throw ConfigError("encoder and model input sizes differ");
  }
  std::vector<const Patch*> order;
  order.reserve(patches.size());
  for (const auto& p : patches) order.push_back(&p);
  std::sort(order.begin(), order.end(),
            [](const Patch* a, const Patch* b) { return a->patch_id < b->patch_id; });

  std::vector<PredictionRecord> out(order.size());
  // Chunk boundaries are fixed by batch size alone, so each chunk runs the
  // same matrix products whatever the worker count.
  const auto bs = static_cast<std::size_t>(std::max(opts.batch_size, 1));
  const std::size_t n_chunks = (order.size() + bs - 1) / bs;
  std::mutex progress_mutex;
  std::size_t done = 0;

  parallel_for(n_chunks, opts.workers, [&](std::size_t c) {
    const std::size_t lo = c * bs;
    const std::size_t hi = std::min(order.size(), lo + bs);
    std::vector<std::size_t> ok;
    std::vector<VectorXd> cols;
    for (std::size_t i = lo; i < hi; ++i) {
      out[i].patch_id = order[i]->patch_id;
      out[i].center = order[i]->center;
      try {
        cols.push_back(encoder.encode(order[i]->patch_id, nullptr));
        ok.push_back(i);
      } catch (const std::exception& e) {
        spdlog::warn("patch {} failed: {}", order[i]->patch_id, e.what());
        out[i].label_id = -1;
        out[i].confidence = 0.0;
      }
    }
    if (!ok.empty()) {
      MatrixXd x(static_cast<Eigen::Index>(encoder.input_size()),
                 static_cast<Eigen::Index>(ok.size()));
      for (std::size_t k = 0; k < ok.size(); ++k) x.col(static_cast<Eigen::Index>(k)) = cols[k];
      const MatrixXd probs = softmax(model.forward(x));
      for (std::size_t k = 0; k < ok.size(); ++k) {
        Eigen::Index arg = 0;
        const double conf = probs.col(static_cast<Eigen::Index>(k)).maxCoeff(&arg);
        out[ok[k]].label_id = static_cast<int>(arg);
        out[ok[k]].confidence = conf;
      }
    }
    if (opts.progress) {
      std::lock_guard lock(progress_mutex);
      done += hi - lo;
      opts.progress(done, order.size());
    }
  });
  return out;
}

NormStats Checkpoint::norm() const {
  return header.contains("norm") ? NormStats::from_json(header["norm"]) : NormStats{};
}

AugmentConfig Checkpoint::augment() const {
  return header.contains("augment") ? AugmentConfig::from_json(header["augment"]) : AugmentConfig{};
}

void save_checkpoint(const fs::path& path, Classifier& model, const json& meta) {
  json header = meta.is_object() ? meta : json::object();
  header["architecture"] = model.architecture();
  header["ensemble"] = model.architecture().value("type", "") == "ensemble";
  const std::string header_text = header.dump();
  const auto groups = model.parameter_groups();

  atomic_write(path, [&](std::ostream& out) {
    auto put_u64 = [&](std::uint64_t v) { out.write(reinterpret_cast<const char*>(&v), sizeof v); };
    out.write(kMagic, sizeof kMagic);
    out.write(reinterpret_cast<const char*>(&kCheckpointVersion), sizeof kCheckpointVersion);
    put_u64(header_text.size());
    out.write(header_text.data(), static_cast<std::streamsize>(header_text.size()));
    std::uint64_t n_tensors = 0;
    for (const auto& g : groups) n_tensors += g.tensors.size();
    put_u64(n_tensors);
    for (const auto& g : groups) {
      for (const auto& t : g.tensors) {
        const std::string name = g.name + "/" + t.name;
        put_u64(name.size());
        out.write(name.data(), static_cast<std::streamsize>(name.size()));
        put_u64(t.value.size());
        out.write(reinterpret_cast<const char*>(t.value.data()),
                  static_cast<std::streamsize>(t.value.size() * sizeof(double)));
      }
    }
  });
}

Checkpoint load_checkpoint(const fs::path& path) {
  const auto bytes = read_file_bytes(path);
  std::size_t pos = 0;
  auto take = [&](void* dst, std::size_t n) {
    if (pos + n > bytes.size()) throw DataError("checkpoint " + path.string() + " is truncated");
    std::memcpy(dst, bytes.data() + pos, n);
    pos += n;
  };
  auto get_u64 = [&] {
    std::uint64_t v = 0;
    take(&v, sizeof v);
    return v;
  };
  char magic[8];
  take(magic, sizeof magic);
  if (std::memcmp(magic, kMagic, sizeof kMagic) != 0) {
    throw DataError(path.string() + " is not a checkpoint file");
  }
  std::uint32_t version = 0;
  take(&version, sizeof version);
  if (version != kCheckpointVersion) {
    throw DataError("unsupported checkpoint version " + std::to_string(version));
  }
  std::string header_text(get_u64(), '\0');
  take(header_text.data(), header_text.size());

  Checkpoint ck;
  try {
    ck.header = json::parse(header_text);
  } catch (const json::exception& e) {
    throw DataError("checkpoint header is not valid JSON: " + std::string(e.what()));
  }
  ck.model = make_classifier(ck.header.at("architecture"));

  const auto groups = ck.model->parameter_groups();
  std::uint64_t expected = 0;
  for (const auto& g : groups) expected += g.tensors.size();
  if (get_u64() != expected) throw DataError("checkpoint tensor count does not match architecture");
  for (const auto& g : groups) {
    for (const auto& t : g.tensors) {
      std::string name(get_u64(), '\0');
      take(name.data(), name.size());
      if (name != g.name + "/" + t.name) {
        throw DataError("checkpoint tensor '" + name + "' where '" + g.name + "/" + t.name +
                        "' was expected");
      }
      if (get_u64() != t.value.size()) throw DataError("checkpoint tensor " + name + " has wrong size");
      take(t.value.data(), t.value.size() * sizeof(double));
    }
  }
  if (pos != bytes.size()) throw DataError("trailing bytes after checkpoint tensors");
  return ck;
}

std::unique_ptr<Classifier> make_classifier(const json& arch) {
  const auto type = arch.value("type", std::string{});
  if (type == "reference_net") return std::make_unique<ReferenceNet>(ReferenceNetConfig::from_json(arch));
  if (type == "ensemble") return EnsembleClassifier::from_architecture(arch);
  throw ConfigError("unknown classifier type '" + type + "'");
}

}  // namespace patchwork
