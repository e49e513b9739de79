#include "patchwork/annotation.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <chrono>
#include <set>
#include <sstream>

#include "patchwork/csv.hpp"
#include "patchwork/error.hpp"
#include "patchwork/fsutil.hpp"
#include "patchwork/rng.hpp"

namespace patchwork {

namespace fs = std::filesystem;
using nlohmann::json;

LabelSchema::LabelSchema(std::vector<std::string> names) {
  if (names.empty()) throw ConfigError("label schema needs at least one label");
  std::set<std::string> seen;
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (!seen.insert(names[i]).second) throw ConfigError("duplicate label name: " + names[i]);
    labels_.push_back({static_cast<int>(i), std::move(names[i])});
  }
}

LabelSchema LabelSchema::railspace_default() {
  return LabelSchema({"no", "railspace", "building", "railspace&non_railspace_building"});
}

LabelSchema LabelSchema::from_json(const json& j) {
  const auto& arr = j.contains("labels") ? j.at("labels") : j;
  std::vector<std::pair<int, std::string>> items;
  for (const auto& item : arr) {
    if (item.is_string()) {
      items.emplace_back(static_cast<int>(items.size()), item.get<std::string>());
    } else {
      items.emplace_back(item.at("id").get<int>(), item.at("name").get<std::string>());
    }
  }
  std::sort(items.begin(), items.end());
  std::vector<std::string> names;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (items[i].first != static_cast<int>(i)) {
      throw ConfigError("label ids must be contiguous from 0");
    }
    names.push_back(items[i].second);
  }
  return LabelSchema(std::move(names));
}

json LabelSchema::to_json() const {
  json arr = json::array();
  for (const auto& l : labels_) arr.push_back({{"id", l.id}, {"name", l.name}});
  return {{"labels", arr}};
}

const std::string& LabelSchema::name(int id) const {
  if (!contains(id)) throw ConfigError("label id " + std::to_string(id) + " not in schema");
  return labels_[static_cast<std::size_t>(id)].name;
}

std::string to_string(AnnotationSource s) {
  switch (s) {
    case AnnotationSource::Fresh:
      return "fresh";
    case AnnotationSource::ReviewConfirmed:
      return "review_confirmed";
    case AnnotationSource::ReviewCorrected:
      return "review_corrected";
  }
  return "fresh";
}

AnnotationSource parse_annotation_source(const std::string& s) {
  if (s == "fresh") return AnnotationSource::Fresh;
  if (s == "review_confirmed") return AnnotationSource::ReviewConfirmed;
  if (s == "review_corrected") return AnnotationSource::ReviewCorrected;
  throw DataError("unknown annotation source '" + s + "'");
}

namespace {

json record_to_json(const AnnotationRecord& r) {
  json j = {{"seq", r.seq},
            {"patch_id", r.patch_id},
            {"label_id", r.label_id},
            {"annotator", r.annotator},
            {"timestamp_ms", r.timestamp_ms},
            {"source", to_string(r.source)}};
  j["prior_prediction"] = r.prior_prediction ? json(*r.prior_prediction) : json(nullptr);
  return j;
}

AnnotationRecord record_from_json(const json& j) {
  AnnotationRecord r;
  r.seq = j.at("seq").get<std::uint64_t>();
  r.patch_id = j.at("patch_id").get<std::string>();
  r.label_id = j.at("label_id").get<int>();
  r.annotator = j.at("annotator").get<std::string>();
  r.timestamp_ms = j.at("timestamp_ms").get<std::int64_t>();
  r.source = parse_annotation_source(j.at("source").get<std::string>());
  if (j.contains("prior_prediction") && !j.at("prior_prediction").is_null()) {
    r.prior_prediction = j.at("prior_prediction").get<int>();
  }
  return r;
}

std::int64_t system_clock_ms() {
  return std::chrono::duration_cast<std::chrono::milliseconds>(
             std::chrono::system_clock::now().time_since_epoch())
      .count();
}

bool later(const AnnotationRecord& a, const AnnotationRecord& b) {
  return std::tie(a.timestamp_ms, a.seq) > std::tie(b.timestamp_ms, b.seq);
}

}  // namespace

AnnotationStore::AnnotationStore(fs::path log_path, LabelSchema schema,
                                 std::unordered_set<std::string> known_patches, Clock clock)
    : log_path_(std::move(log_path)),
      schema_(std::move(schema)),
      known_patches_(std::move(known_patches)),
      clock_(clock ? std::move(clock) : Clock(system_clock_ms)),
      records_(std::make_shared<const std::vector<AnnotationRecord>>()) {
  if (log_path_.has_parent_path()) fs::create_directories(log_path_.parent_path());
  load_existing();
  log_.open(log_path_, std::ios::binary | std::ios::app);
  if (!log_) throw DataError("cannot open annotation log " + log_path_.string());
}

void AnnotationStore::load_existing() {
  if (!fs::exists(log_path_)) return;
  const std::string text = read_file_text(log_path_);
  std::vector<AnnotationRecord> records;
  std::size_t pos = 0;
  std::size_t line_no = 0;
  std::size_t good_bytes = 0;
  while (pos < text.size()) {
    const auto nl = text.find('\n', pos);
    ++line_no;
    const bool terminated = nl != std::string::npos;
    const std::string line = text.substr(pos, terminated ? nl - pos : std::string::npos);
    const std::size_t next = terminated ? nl + 1 : text.size();
    if (line.empty()) {
      pos = next;
      good_bytes = next;
      continue;
    }
    try {
      if (!terminated) throw std::runtime_error("unterminated");
      records.push_back(record_from_json(json::parse(line)));
      good_bytes = next;
    } catch (const std::exception& e) {
      if (next < text.size()) {
        throw DataError(log_path_.string() + ": corrupt event on line " +
                        std::to_string(line_no) + ": " + e.what());
      }
      spdlog::warn("{}: ignoring partial trailing event on line {}", log_path_.string(), line_no);
    }
    pos = next;
  }
  if (good_bytes < text.size()) fs::resize_file(log_path_, good_bytes);
  for (const auto& r : records) next_seq_ = std::max(next_seq_, r.seq + 1);
  records_ = std::make_shared<const std::vector<AnnotationRecord>>(std::move(records));
}

AnnotationRecord AnnotationStore::record(const LabelEvent& event) {
  if (!known_patches_.contains(event.patch_id)) {
    throw RejectedLabel("unknown patch '" + event.patch_id + "'");
  }
  if (!schema_.contains(event.label_id)) {
    throw RejectedLabel("label " + std::to_string(event.label_id) + " not in schema of " +
                        std::to_string(schema_.size()) + " labels");
  }
  if (event.annotator.empty()) throw RejectedLabel("annotator name is required");
  if (event.prior_prediction && !schema_.contains(*event.prior_prediction)) {
    throw RejectedLabel("prior prediction not in schema");
  }

  std::lock_guard lock(write_mutex_);
  AnnotationRecord r;
  r.seq = next_seq_;
  r.patch_id = event.patch_id;
  r.label_id = event.label_id;
  r.annotator = event.annotator;
  r.timestamp_ms = event.timestamp_ms.value_or(clock_());
  r.prior_prediction = event.prior_prediction;
  if (event.prior_prediction) {
    r.source = *event.prior_prediction == event.label_id ? AnnotationSource::ReviewConfirmed
                                                         : AnnotationSource::ReviewCorrected;
  }

  log_ << record_to_json(r).dump() << '\n';
  log_.flush();
  if (!log_) throw DataError("failed to append to " + log_path_.string());
  ++next_seq_;

  auto updated = std::make_shared<std::vector<AnnotationRecord>>(*snapshot());
  updated->push_back(r);
  std::lock_guard snap_lock(snapshot_mutex_);
  records_ = std::move(updated);
  return r;
}

std::shared_ptr<const std::vector<AnnotationRecord>> AnnotationStore::snapshot() const {
  std::lock_guard lock(snapshot_mutex_);
  return records_;
}

std::unordered_set<std::string> AnnotationStore::annotated_ids() const {
  std::unordered_set<std::string> ids;
  for (const auto& r : *snapshot()) ids.insert(r.patch_id);
  return ids;
}

std::vector<GoldRow> resolve_gold_standard(const std::vector<AnnotationRecord>& history) {
  // patch -> annotator -> latest record
  std::map<std::string, std::map<std::string, const AnnotationRecord*>> latest;
  for (const auto& r : history) {
    auto& slot = latest[r.patch_id][r.annotator];
    if (slot == nullptr || later(r, *slot)) slot = &r;
  }
  std::vector<GoldRow> rows;
  for (const auto& [patch_id, by_annotator] : latest) {
    std::set<int> labels;
    const AnnotationRecord* newest = nullptr;
    for (const auto& [annotator, rec] : by_annotator) {
      labels.insert(rec->label_id);
      if (newest == nullptr || later(*rec, *newest)) newest = rec;
    }
    if (labels.size() == 1) {
      rows.push_back({patch_id, newest->label_id, newest->annotator, newest->source, false});
      continue;
    }
    for (const auto& [annotator, rec] : by_annotator) {
      rows.push_back({patch_id, rec->label_id, annotator, rec->source, true});
    }
  }
  return rows;
}

std::vector<GoldRow> AnnotationStore::gold_standard() const {
  return resolve_gold_standard(*snapshot());
}

void AnnotationStore::export_gold_standard(const fs::path& path) const {
  const auto rows = gold_standard();
  if (rows.empty()) throw DataError("nothing to export");
  write_gold_standard(path, rows);
}

std::map<int, std::size_t> AnnotationStore::label_counts() const {
  std::map<int, std::size_t> counts;
  for (const auto& l : schema_.labels()) counts[l.id] = 0;
  for (const auto& row : gold_standard()) {
    if (!row.conflict) ++counts[row.label_id];
  }
  return counts;
}

void write_gold_standard(const fs::path& path, const std::vector<GoldRow>& rows) {
  atomic_write(path, [&](std::ostream& out) {
    CsvWriter w(out);
    w.row({"patch_id", "label_id", "annotator", "source", "conflict"});
    for (const auto& r : rows) {
      w.row({r.patch_id, std::to_string(r.label_id), r.annotator, to_string(r.source),
             r.conflict ? "1" : "0"});
    }
  });
}

std::vector<GoldRow> read_gold_standard(const fs::path& path) {
  const CsvTable t = CsvTable::read(path);
  const auto id = t.require_column("patch_id");
  const auto label = t.require_column("label_id");
  const auto annotator = t.column("annotator");
  const auto source = t.column("source");
  const auto conflict = t.column("conflict");
  std::vector<GoldRow> rows;
  rows.reserve(t.size());
  for (const auto& row : t.rows()) {
    GoldRow g;
    g.patch_id = row[id];
    g.label_id = static_cast<int>(parse_int(row[label], "label_id"));
    if (annotator) g.annotator = row[*annotator];
    if (source && !row[*source].empty()) g.source = parse_annotation_source(row[*source]);
    if (conflict) g.conflict = row[*conflict] == "1" || row[*conflict] == "true";
    rows.push_back(std::move(g));
  }
  return rows;
}

StrategyKind parse_strategy(const std::string& s) {
  if (s == "random") return StrategyKind::Random;
  if (s == "by_mean") return StrategyKind::ByMean;
  if (s == "by_std") return StrategyKind::ByStd;
  if (s == "review_queue") return StrategyKind::ReviewQueue;
  throw ConfigError("unknown sampling strategy '" + s + "'");
}

std::string to_string(StrategyKind k) {
  switch (k) {
    case StrategyKind::Random:
      return "random";
    case StrategyKind::ByMean:
      return "by_mean";
    case StrategyKind::ByStd:
      return "by_std";
    case StrategyKind::ReviewQueue:
      return "review_queue";
  }
  return "random";
}

PatchSampler::PatchSampler(std::vector<Patch> patches, std::vector<PredictionRecord> predictions)
    : patches_(std::move(patches)) {
  std::sort(patches_.begin(), patches_.end(),
            [](const Patch& a, const Patch& b) { return a.patch_id < b.patch_id; });
  for (std::size_t i = 0; i < patches_.size(); ++i) {
    by_id_[patches_[i].patch_id] = i;
    auto& side = grid_side_[patches_[i].sheet_id];
    side = std::max({side, patches_[i].rect.w, patches_[i].rect.h});
  }
  for (auto& p : predictions) {
    if (!p.failed()) predictions_[p.patch_id] = std::move(p);
  }
}

const Patch* PatchSampler::find(const std::string& patch_id) const {
  auto it = by_id_.find(patch_id);
  return it == by_id_.end() ? nullptr : &patches_[it->second];
}

const PredictionRecord* PatchSampler::prediction(const std::string& patch_id) const {
  auto it = predictions_.find(patch_id);
  return it == predictions_.end() ? nullptr : &it->second;
}

int PatchSampler::grid_side(const std::string& sheet_id) const {
  auto it = grid_side_.find(sheet_id);
  if (it == grid_side_.end()) throw DataError("no patches for sheet '" + sheet_id + "'");
  return it->second;
}

std::vector<BatchItem> PatchSampler::next_batch(const SamplingStrategy& strategy, std::size_t n,
                                                const std::unordered_set<std::string>& exclude) const {
  std::vector<const Patch*> order;
  order.reserve(patches_.size());

  switch (strategy.kind) {
    case StrategyKind::Random: {
      // A fixed permutation of the full (id-sorted) index per seed, so the
      // sequence does not depend on what has been excluded.
      std::vector<std::size_t> perm(patches_.size());
      for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
      Rng rng(strategy.seed);
      shuffle(perm, rng);
      for (auto i : perm) order.push_back(&patches_[i]);
      break;
    }
    case StrategyKind::ByMean:
    case StrategyKind::ByStd: {
      for (const auto& p : patches_) order.push_back(&p);
      const bool by_mean = strategy.kind == StrategyKind::ByMean;
      std::stable_sort(order.begin(), order.end(), [&](const Patch* a, const Patch* b) {
        const double va = by_mean ? a->mean : a->std;
        const double vb = by_mean ? b->mean : b->std;
        if (va != vb) return strategy.descending ? va > vb : va < vb;
        return a->patch_id < b->patch_id;
      });
      break;
    }
    case StrategyKind::ReviewQueue: {
      if (predictions_.empty()) throw ConfigError("review_queue strategy needs a predictions file");
      for (const auto& p : patches_) {
        if (predictions_.contains(p.patch_id)) order.push_back(&p);
      }
      std::stable_sort(order.begin(), order.end(), [&](const Patch* a, const Patch* b) {
        const double ca = predictions_.at(a->patch_id).confidence;
        const double cb = predictions_.at(b->patch_id).confidence;
        if (ca != cb) return ca < cb;
        return a->patch_id < b->patch_id;
      });
      break;
    }
  }

  std::vector<BatchItem> out;
  for (const Patch* p : order) {
    if (out.size() >= n) break;
    if (exclude.contains(p->patch_id)) continue;
    BatchItem item{p, std::nullopt};
    if (auto* pred = prediction(p->patch_id)) item.prediction = *pred;
    out.push_back(std::move(item));
  }
  return out;
}

Raster context_image(const Raster& sheet, const Patch& patch, int grid_side, int k) {
  if (k < 1 || k % 2 == 0) throw ConfigError("context size must be an odd integer >= 1");
  if (k == 1) return sheet.crop(patch.rect);

  const int half = k / 2;
  const int size = k * grid_side;
  Raster out(size, size, sheet.channels(), kContextPadValue);
  const int origin_x = patch.col * grid_side - half * grid_side;
  const int origin_y = patch.row * grid_side - half * grid_side;

  const int x0 = std::max(origin_x, 0);
  const int y0 = std::max(origin_y, 0);
  const int x1 = std::min(origin_x + size, sheet.cols());
  const int y1 = std::min(origin_y + size, sheet.rows());
  if (x0 < x1 && y0 < y1) {
    out.paste(sheet.crop({x0, y0, x1 - x0, y1 - y0}), x0 - origin_x, y0 - origin_y);
  }
  return out;
}

}  // namespace patchwork
