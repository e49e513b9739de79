#include "commands.hpp"

#include <spdlog/spdlog.h>

#include <chrono>
#include <iostream>
#include <map>
#include <memory>
#include <unordered_set>

#include "patchwork/annotation.hpp"
#include "patchwork/annotation_service.hpp"
#include "patchwork/csv.hpp"
#include "patchwork/dataset.hpp"
#include "patchwork/ensemble.hpp"
#include "patchwork/fsutil.hpp"
#include "patchwork/ingest.hpp"
#include "patchwork/learner.hpp"
#include "patchwork/patchify.hpp"
#include "patchwork/postprocess.hpp"
#include "patchwork/predictions.hpp"
#include "patchwork/reference_net.hpp"
#include "patchwork/spatial.hpp"
#include "patchwork/synth.hpp"

namespace patchwork::cli {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

void require(const fs::path& p, const std::string& producer) {
  if (!fs::exists(p)) throw MissingArtifact(p, producer);
}

bool dry_run(const GlobalOptions& g, const std::string& command, const Plan& plan) {
  if (!g.dry_run) return false;
  json j = {{"command", command}, {"reads", json::array()}, {"writes", json::array()}};
  for (const auto& p : plan.reads) j["reads"].push_back(p.string());
  for (const auto& p : plan.writes) j["writes"].push_back(p.string());
  std::cout << j.dump(2) << '\n';
  return true;
}

void write_json(const fs::path& path, const json& j) { atomic_write_text(path, j.dump(2) + "\n"); }

std::vector<const Patch*> lookup(const std::vector<Patch>& patches,
                                 const std::vector<LabelledPatch>& items) {
  std::unordered_map<std::string, const Patch*> by_id;
  for (const auto& p : patches) by_id.emplace(p.patch_id, &p);
  std::vector<const Patch*> out;
  for (const auto& it : items) {
    auto f = by_id.find(it.patch_id);
    if (f == by_id.end()) throw DataError("patch " + it.patch_id + " is not in the patch index");
    out.push_back(f->second);
  }
  return out;
}

std::unique_ptr<SampleEncoder> make_encoder(SheetCache& sheets, const std::vector<Patch>& patches,
                                            const json& architecture, const AugmentConfig& augment,
                                            const NormStats& norm) {
  if (architecture.value("type", "") == "ensemble") {
    const auto ecfg = EnsembleConfig::from_json(architecture.at("config"));
    return std::make_unique<EnsembleEncoder>(sheets, patches, ecfg.context_k, augment, norm);
  }
  return std::make_unique<PatchEncoder>(sheets, patches, augment, norm);
}

const fs::path& prediction_input(const ProjectConfig& cfg, bool raw) {
  if (raw) {
    require(cfg.paths.predictions, "infer");
    return cfg.paths.predictions;
  }
  require(cfg.paths.filtered, "filter");
  return cfg.paths.filtered;
}

}  // namespace

ProjectConfig load_project(const GlobalOptions& g) {
  auto cfg = ProjectConfig::load(g.config);
  if (g.seed) cfg.apply_seed(*g.seed);
  if (g.workers) {
    if (*g.workers < 0) throw ConfigError("--workers must be >= 0");
    cfg.workers = *g.workers;
  }
  return cfg;
}

int run_synth(const GlobalOptions& g, const SynthArgs& a) {
  const std::uint64_t seed = g.seed.value_or(0);
  const fs::path out = fs::absolute(a.out);
  Plan plan{{}, {out / "sheets", out / "catalog.csv", out / "gold.csv", out / "project.json"}};
  if (!a.context) plan.writes.push_back(out / "stations.csv");
  if (dry_run(g, "synth", plan)) return 0;

  fs::create_directories(out);
  ProjectConfig cfg;
  cfg.base_dir = out;
  for (auto* p : {&cfg.paths.catalog, &cfg.paths.sheet_dir, &cfg.paths.tile_requests,
                  &cfg.paths.patch_index, &cfg.paths.annotations, &cfg.paths.gold,
                  &cfg.paths.splits, &cfg.paths.checkpoint, &cfg.paths.train_log,
                  &cfg.paths.metrics, &cfg.paths.predictions, &cfg.paths.filtered,
                  &cfg.paths.filter_report, &cfg.paths.points, &cfg.paths.link_report,
                  &cfg.paths.density, &cfg.paths.density_report, &cfg.paths.geojson}) {
    *p = out / *p;
  }
  cfg.slice.mode = SliceMode::Pixels;
  cfg.slice.size = 100;
  cfg.train.optimizer.epochs = 10;
  cfg.apply_seed(seed);

  std::size_t labels = 0;
  if (a.context) {
    ContextSynthConfig sc;
    sc.sheets = a.sheets;
    sc.seed = seed;
    labels = generate_context_corpus(out, sc).labels.size();
    cfg.schema = LabelSchema({"clear", "marker_adjacent"});
    cfg.labels = {1, 1, 0, 1};
    EnsembleConfig ec;
    cfg.ensemble = ec;
  } else {
    SynthConfig sc;
    sc.sheets = a.sheets;
    sc.seed = seed;
    labels = generate_corpus(out, sc).labels.size();
  }
  write_json(out / "project.json", cfg.to_json());
  std::cout << json{{"sheets", a.sheets}, {"labelled_patches", labels},
                    {"config", (out / "project.json").string()}}
                   .dump()
            << '\n';
  return 0;
}

int run_fetch(const GlobalOptions& g, const FetchArgs& a) {
  const auto cfg = load_project(g);
  if (!cfg.tile_source) throw ConfigError("config has no tile_source section");
  if (a.bbox.size() != 4) throw ConfigError("--bbox needs min_lon,min_lat,max_lon,max_lat");
  if (a.sheet_id.empty()) throw ConfigError("--sheet-id is required");
  if (a.zoom > cfg.tile_source->max_zoom) {
    throw ConfigError("zoom " + std::to_string(a.zoom) + " exceeds the source's max_zoom " +
                      std::to_string(cfg.tile_source->max_zoom));
  }
  const geo::GeoBBox bbox(geo::GeoPoint(a.bbox[0], a.bbox[1]), geo::GeoPoint(a.bbox[2], a.bbox[3]));
  Plan plan{{}, {cfg.paths.sheet_dir / (a.sheet_id + ".png"), cfg.paths.catalog}};
  if (a.metadata) plan.reads.push_back(*a.metadata);
  if (dry_run(g, "fetch", plan)) return 0;

  TileFetcher fetcher(*cfg.tile_source, std::make_shared<HttpTransport>());
  MapSheet sheet = fetcher.fetch_sheet(bbox, a.zoom, a.sheet_id);
  if (a.metadata) {
    const auto meta = load_metadata(*a.metadata);
    if (auto it = meta.find(a.sheet_id); it != meta.end()) {
      for (const auto& [k, v] : it->second) sheet.metadata[k] = v;
    }
  }
  std::vector<CatalogEntry> catalog;
  if (fs::exists(cfg.paths.catalog)) catalog = read_catalog(cfg.paths.catalog);
  std::erase_if(catalog, [&](const CatalogEntry& e) { return e.sheet_id == a.sheet_id; });
  catalog.push_back(save_sheet(cfg.paths.sheet_dir, sheet));
  write_catalog(cfg.paths.catalog, catalog);
  std::cout << json{{"sheet_id", a.sheet_id},
                    {"rows", sheet.image.rows()},
                    {"cols", sheet.image.cols()},
                    {"network_requests", fetcher.network_requests()}}
                   .dump()
            << '\n';
  return 0;
}

int run_slice(const GlobalOptions& g) {
  const auto cfg = load_project(g);
  if (dry_run(g, "slice", {{cfg.paths.catalog}, {cfg.paths.patch_index}})) return 0;
  require(cfg.paths.catalog, "fetch or synth");
  const auto catalog = read_catalog(cfg.paths.catalog);
  const auto patches = slice_catalog(catalog, cfg.slice, cfg.effective_workers());
  write_patch_index(cfg.paths.patch_index, patches);
  std::cout << json{{"sheets", catalog.size()}, {"patches", patches.size()}}.dump() << '\n';
  return 0;
}

int run_annotate_serve(const GlobalOptions& g, const ServeArgs& a) {
  const auto cfg = load_project(g);
  Plan plan{{cfg.paths.catalog, cfg.paths.patch_index}, {cfg.paths.annotations}};
  if (fs::exists(cfg.paths.predictions)) plan.reads.push_back(cfg.paths.predictions);
  if (dry_run(g, "annotate-serve", plan)) return 0;
  require(cfg.paths.patch_index, "slice");
  require(cfg.paths.catalog, "fetch or synth");

  auto patches = read_patch_index(cfg.paths.patch_index);
  std::unordered_set<std::string> known;
  for (const auto& p : patches) known.insert(p.patch_id);
  std::vector<PredictionRecord> predictions;
  if (fs::exists(cfg.paths.predictions)) predictions = read_predictions(cfg.paths.predictions);

  AnnotationStore store(cfg.paths.annotations, cfg.schema, std::move(known));
  PatchSampler sampler(std::move(patches), std::move(predictions));
  SheetCache sheets(read_catalog(cfg.paths.catalog));
  AnnotationService::Options opts;
  opts.default_context = a.context;
  AnnotationService service(store, sampler, sheets, opts);
  const int port = service.bind(a.host, a.port);
  std::cout << json{{"host", a.host}, {"port", port}}.dump() << std::endl;
  service.serve();
  return 0;
}

int run_export_gold(const GlobalOptions& g) {
  const auto cfg = load_project(g);
  if (dry_run(g, "export-gold", {{cfg.paths.annotations, cfg.paths.patch_index}, {cfg.paths.gold}})) {
    return 0;
  }
  require(cfg.paths.annotations, "annotate-serve");
  require(cfg.paths.patch_index, "slice");
  std::unordered_set<std::string> known;
  for (const auto& p : read_patch_index(cfg.paths.patch_index)) known.insert(p.patch_id);
  AnnotationStore store(cfg.paths.annotations, cfg.schema, std::move(known));
  store.export_gold_standard(cfg.paths.gold);
  const auto rows = store.gold_standard();
  std::cout << json{{"rows", rows.size()}, {"events", store.event_count()}}.dump() << '\n';
  return 0;
}

int run_split(const GlobalOptions& g) {
  const auto cfg = load_project(g);
  if (dry_run(g, "split", {{cfg.paths.gold, cfg.paths.patch_index}, {cfg.paths.splits}})) return 0;
  require(cfg.paths.patch_index, "slice");
  require(cfg.paths.gold, "export-gold");
  const auto patches = read_patch_index(cfg.paths.patch_index);
  const auto items = labelled_from_gold(read_gold_standard(cfg.paths.gold));
  lookup(patches, items);
  for (const auto& it : items) {
    if (!cfg.schema.contains(it.label_id)) {
      throw DataError("gold label " + std::to_string(it.label_id) + " for " + it.patch_id +
                      " is not in the schema");
    }
  }
  const auto splits = stratified_split(items, cfg.split);
  write_split_manifest(cfg.paths.splits, splits);
  std::cout << json{{"train", splits.train.size()}, {"val", splits.val.size()}, {"test", splits.test.size()}}
                   .dump()
            << '\n';
  return 0;
}

int run_train(const GlobalOptions& g) {
  const auto cfg = load_project(g);
  Plan plan{{cfg.paths.splits, cfg.paths.patch_index, cfg.paths.catalog},
            {cfg.paths.checkpoint, cfg.paths.train_log, cfg.paths.metrics}};
  if (dry_run(g, "train", plan)) return 0;
  require(cfg.paths.splits, "split");
  require(cfg.paths.patch_index, "slice");
  require(cfg.paths.catalog, "fetch or synth");

  const auto splits = read_split_manifest(cfg.paths.splits);
  const auto patches = read_patch_index(cfg.paths.patch_index);
  SheetCache sheets(read_catalog(cfg.paths.catalog));
  TrainConfig tc = cfg.train;
  tc.workers = cfg.effective_workers();

  const NormStats norm =
      compute_patch_norm_stats(sheets, lookup(patches, splits.train), tc.augment.channels);
  const std::size_t input = static_cast<std::size_t>(tc.augment.model_input_px) *
                            tc.augment.model_input_px * tc.augment.channels;
  auto net_cfg = [&](std::uint64_t salt) {
    ReferenceNetConfig rc;
    rc.input_size = input;
    rc.hidden = cfg.hidden;
    rc.num_labels = cfg.schema.size();
    rc.seed = derive_seed({cfg.seed, salt});
    return rc;
  };

  std::unique_ptr<Classifier> model;
  if (cfg.ensemble) {
    auto ecfg = *cfg.ensemble;
    const auto emb = cfg.hidden.empty() ? input : cfg.hidden.back();
    ecfg.v1_dim = ecfg.v2_dim = emb;
    model = std::make_unique<EnsembleClassifier>(ecfg, std::make_unique<ReferenceNet>(net_cfg(1)),
                                                 std::make_unique<ReferenceNet>(net_cfg(2)),
                                                 derive_seed({cfg.seed, 3}));
  } else {
    model = std::make_unique<ReferenceNet>(net_cfg(1));
  }
  const auto encoder = make_encoder(sheets, patches, model->architecture(), tc.augment, norm);

  const json meta = {{"norm", norm.to_json()},
                     {"augment", tc.augment.to_json()},
                     {"schema", cfg.schema.to_json()},
                     {"seed", cfg.seed}};
  TrainHooks hooks;
  hooks.log_path = cfg.paths.train_log;
  hooks.on_best = [&](const Classifier& m, const EpochLog& e) {
    auto snapshot = m.clone();
    json header = meta;
    header["epoch"] = e.epoch;
    header["val_loss"] = e.val_loss;
    save_checkpoint(cfg.paths.checkpoint, *snapshot, header);
  };

  TrainResult result;
  if (auto* ens = dynamic_cast<EnsembleClassifier*>(model.get())) {
    result = train_ensemble(*ens, *encoder, splits, tc, hooks);
  } else {
    result = train(*model, *encoder, splits, tc, hooks);
  }

  json metrics = {{"best_epoch", result.best_epoch},
                  {"best_val_loss", result.best_val_loss},
                  {"parameters", model->parameter_count()}};
  const auto val = evaluate(*model, *encoder, splits.val, tc.optimizer.batch_size, tc.workers);
  metrics["val"] = val.metrics.to_json();
  metrics["val"]["loss"] = val.loss;
  if (!splits.test.empty()) {
    const auto test = evaluate(*model, *encoder, splits.test, tc.optimizer.batch_size, tc.workers);
    metrics["test"] = test.metrics.to_json();
    metrics["test"]["loss"] = test.loss;
  }
  write_json(cfg.paths.metrics, metrics);
  std::cout << json{{"best_epoch", result.best_epoch},
                    {"val_f1_macro", val.metrics.f1_macro},
                    {"test_f1_macro", metrics.contains("test") ? metrics["test"]["f1_macro"] : json(nullptr)}}
                   .dump()
            << '\n';
  return 0;
}

int run_infer(const GlobalOptions& g) {
  const auto cfg = load_project(g);
  Plan plan{{cfg.paths.checkpoint, cfg.paths.patch_index, cfg.paths.catalog}, {cfg.paths.predictions}};
  if (dry_run(g, "infer", plan)) return 0;
  require(cfg.paths.checkpoint, "train");
  require(cfg.paths.patch_index, "slice");
  require(cfg.paths.catalog, "fetch or synth");

  const auto ck = load_checkpoint(cfg.paths.checkpoint);
  const auto patches = read_patch_index(cfg.paths.patch_index);
  SheetCache sheets(read_catalog(cfg.paths.catalog));
  const auto encoder =
      make_encoder(sheets, patches, ck.header.at("architecture"), ck.augment(), ck.norm());

  InferOptions opts;
  opts.workers = cfg.effective_workers();
  std::size_t last_decile = 0;
  opts.progress = [&](std::size_t done, std::size_t total) {
    const std::size_t decile = total ? done * 10 / total : 10;
    if (decile != last_decile) {
      last_decile = decile;
      spdlog::info("infer: {}/{} patches", done, total);
    }
  };
  const auto start = std::chrono::steady_clock::now();
  const auto records = infer(*ck.model, *encoder, patches, opts);
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  write_predictions(cfg.paths.predictions, records);

  std::size_t failed = 0;
  for (const auto& r : records) failed += r.failed() ? 1 : 0;
  spdlog::info("infer: {:.1f} patches/s", secs > 0 ? static_cast<double>(records.size()) / secs : 0.0);
  std::cout << json{{"patches", records.size()}, {"failed", failed}}.dump() << '\n';
  return 0;
}

int run_filter(const GlobalOptions& g, const FilterArgs& a) {
  const auto cfg = load_project(g);
  Plan plan{{cfg.paths.predictions}, {cfg.paths.filtered, cfg.paths.filter_report}};
  if (dry_run(g, "filter", plan)) return 0;
  require(cfg.paths.predictions, "infer");
  const auto preds = read_predictions(cfg.paths.predictions);
  const auto result = remove_isolated(preds, cfg.labels.filter, cfg.thresholds.isolation_m, a.cascade);
  write_predictions(cfg.paths.filtered, result.kept);
  write_json(cfg.paths.filter_report, result.report.to_json());
  std::cout << json{{"removed", result.report.removed}, {"kept", result.report.kept}}.dump() << '\n';
  return 0;
}

int run_link(const GlobalOptions& g, const LinkArgs& a) {
  const auto cfg = load_project(g);
  const fs::path input = a.raw ? cfg.paths.predictions : cfg.paths.filtered;
  Plan plan{{input, cfg.paths.points, cfg.paths.catalog}, {cfg.paths.link_report}};
  if (dry_run(g, "link", plan)) return 0;
  const auto preds = read_predictions(prediction_input(cfg, a.raw));
  if (!fs::exists(cfg.paths.points)) throw DataError("point dataset " + cfg.paths.points.string() + " not found");
  const auto points = read_points(cfg.paths.points);
  std::optional<DateFilter> filter;
  if (!a.no_date_filter && fs::exists(cfg.paths.catalog)) {
    filter = DateFilter::from_catalog(read_catalog(cfg.paths.catalog));
  }
  const auto report = link_points(points, preds, cfg.labels.link, cfg.thresholds.link_m,
                                  filter ? &*filter : nullptr);
  write_json(cfg.paths.link_report, report.to_json());
  std::cout << json{{"points", report.points},
                    {"within", report.within},
                    {"fraction", report.fraction ? json(*report.fraction) : json(nullptr)}}
                   .dump()
            << '\n';
  return 0;
}

int run_density(const GlobalOptions& g, const DensityArgs& a) {
  const auto cfg = load_project(g);
  const fs::path input = a.raw ? cfg.paths.predictions : cfg.paths.filtered;
  Plan plan{{input}, {cfg.paths.density, cfg.paths.density_report}};
  if (dry_run(g, "density", plan)) return 0;
  const auto preds = read_predictions(prediction_input(cfg, a.raw));
  const auto& t = cfg.thresholds;
  const auto result = neighbor_density(preds, cfg.labels.density_subject, cfg.labels.density_target,
                                       t.density_radius_m, t.density_min_percent, t.density_bins,
                                       cfg.effective_workers());
  write_density(cfg.paths.density, result.records);
  write_json(cfg.paths.density_report, result.summary_json());
  std::cout << result.summary_json().dump() << '\n';
  return 0;
}

int run_export_geojson(const GlobalOptions& g) {
  const auto cfg = load_project(g);
  Plan plan{{cfg.paths.patch_index, cfg.paths.filtered}, {cfg.paths.geojson}};
  if (fs::exists(cfg.paths.density)) plan.reads.push_back(cfg.paths.density);
  if (dry_run(g, "export-geojson", plan)) return 0;
  require(cfg.paths.patch_index, "slice");
  const auto preds = read_predictions(prediction_input(cfg, false));
  const auto patches = read_patch_index(cfg.paths.patch_index);
  std::optional<std::vector<DensityRecord>> density;
  if (fs::exists(cfg.paths.density)) density = read_density(cfg.paths.density);
  const auto gj = predictions_geojson(patches, preds, &cfg.schema, density ? &*density : nullptr);
  atomic_write_text(cfg.paths.geojson, gj.dump() + "\n");
  std::cout << json{{"features", gj["features"].size()}}.dump() << '\n';
  return 0;
}

int run_stats(const GlobalOptions& g) {
  const auto cfg = load_project(g);
  if (dry_run(g, "stats", {{cfg.paths.patch_index}, {}})) return 0;
  require(cfg.paths.patch_index, "slice");
  const auto patches = read_patch_index(cfg.paths.patch_index);
  std::map<std::string, std::size_t> per_sheet;
  std::size_t partial = 0;
  for (const auto& p : patches) {
    ++per_sheet[p.sheet_id];
    partial += p.partial ? 1 : 0;
  }
  json out = {{"sheets", per_sheet.size()},
              {"patches", patches.size()},
              {"partial", partial},
              {"per_sheet", per_sheet}};
  if (fs::exists(cfg.paths.gold)) {
    std::map<std::string, std::size_t> counts;
    for (const auto& row : read_gold_standard(cfg.paths.gold)) {
      if (row.conflict) continue;
      counts[cfg.schema.contains(row.label_id) ? cfg.schema.name(row.label_id)
                                               : std::to_string(row.label_id)]++;
    }
    out["gold"] = counts;
  }
  if (fs::exists(cfg.paths.predictions)) {
    std::map<std::string, std::size_t> counts;
    for (const auto& r : read_predictions(cfg.paths.predictions)) {
      counts[r.failed() ? "failed" : cfg.schema.name(r.label_id)]++;
    }
    out["predictions"] = counts;
  }
  std::cout << out.dump(2) << '\n';
  return 0;
}

}  // namespace patchwork::cli
