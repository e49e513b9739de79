#include "patchwork/config.hpp"

#include "patchwork/error.hpp"
#include "patchwork/fsutil.hpp"
#include "patchwork/parallel.hpp"

namespace patchwork {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

// Name/member table shared by the reader and writer.
template <typename Fn>
void for_each_path(ProjectPaths& p, Fn&& fn) {
  fn("catalog", p.catalog);
  fn("sheet_dir", p.sheet_dir);
  fn("tile_requests", p.tile_requests);
  fn("patch_index", p.patch_index);
  fn("annotations", p.annotations);
  fn("gold", p.gold);
  fn("splits", p.splits);
  fn("checkpoint", p.checkpoint);
  fn("train_log", p.train_log);
  fn("metrics", p.metrics);
  fn("predictions", p.predictions);
  fn("filtered", p.filtered);
  fn("filter_report", p.filter_report);
  fn("points", p.points);
  fn("link_report", p.link_report);
  fn("density", p.density);
  fn("density_report", p.density_report);
  fn("geojson", p.geojson);
}

fs::path resolve(const fs::path& base, const fs::path& p) {
  return p.is_absolute() ? p : (base / p).lexically_normal();
}

}  // namespace

SliceMode parse_slice_mode(const std::string& s) {
  if (s == "pixels") return SliceMode::Pixels;
  if (s == "meters") return SliceMode::Meters;
  throw ConfigError("unknown slice mode '" + s + "' (expected pixels or meters)");
}

std::string to_string(SliceMode m) { return m == SliceMode::Pixels ? "pixels" : "meters"; }

void ProjectConfig::apply_seed(std::uint64_t s) {
  seed = s;
  split.seed = s;
  train.seed = s;
}

int ProjectConfig::effective_workers() const { return workers > 0 ? workers : default_workers(); }

void ProjectConfig::validate() const {
  slice.validate();
  split.validate();
  train.optimizer.validate();
  train.augment.validate();
  if (tile_source) tile_source->validate();
  if (ensemble) ensemble->validate();
  const auto& t = thresholds;
  if (!(t.isolation_m > 0.0) || !(t.link_m > 0.0) || !(t.density_radius_m > 0.0) ||
      !(t.density_min_percent > 0.0) || t.density_bins < 1) {
    throw ConfigError("every threshold must be positive");
  }
  for (int l : {labels.filter, labels.link, labels.density_subject, labels.density_target}) {
    if (!schema.contains(l)) throw ConfigError("stage label " + std::to_string(l) + " not in schema");
  }
  if (workers < 0) throw ConfigError("workers must be >= 0");
}

ProjectConfig ProjectConfig::from_json(const json& j, const fs::path& base_dir) {
  if (!j.is_object()) throw ConfigError("project config must be a JSON object");
  ProjectConfig c;
  c.base_dir = base_dir;
  try {
    if (j.contains("paths")) {
      const auto& jp = j["paths"];
      for_each_path(c.paths, [&](const char* name, fs::path& p) {
        if (jp.contains(name)) p = jp[name].get<std::string>();
      });
    }
    for_each_path(c.paths, [&](const char*, fs::path& p) { p = resolve(base_dir, p); });

    if (j.contains("schema")) c.schema = LabelSchema::from_json(j["schema"]);
    if (j.contains("tile_source")) {
      auto ts = TileSource::from_json(j["tile_source"]);
      if (!ts.cache_dir.empty()) ts.cache_dir = resolve(base_dir, ts.cache_dir);
      c.tile_source = ts;
    }
    if (j.contains("slice")) {
      const auto& js = j["slice"];
      if (js.contains("mode")) c.slice.mode = parse_slice_mode(js["mode"].get<std::string>());
      c.slice.size = js.value("size", c.slice.size);
      c.slice.keep_partial = js.value("keep_partial", c.slice.keep_partial);
    }
    if (j.contains("split") && j["split"].contains("fractions")) {
      c.split.fractions = j["split"]["fractions"].get<std::array<double, 3>>();
    }
    if (j.contains("train")) c.train = TrainConfig::from_json(j["train"]);
    if (j.contains("model")) c.hidden = j["model"].value("hidden", c.hidden);
    if (j.contains("ensemble")) c.ensemble = EnsembleConfig::from_json(j["ensemble"]);
    if (j.contains("thresholds")) {
      const auto& jt = j["thresholds"];
      auto& t = c.thresholds;
      t.isolation_m = jt.value("isolation_m", t.isolation_m);
      t.link_m = jt.value("link_m", t.link_m);
      t.density_radius_m = jt.value("density_radius_m", t.density_radius_m);
      t.density_min_percent = jt.value("density_min_percent", t.density_min_percent);
      t.density_bins = jt.value("density_bins", t.density_bins);
    }
    if (j.contains("labels")) {
      const auto& jl = j["labels"];
      auto& l = c.labels;
      l.filter = jl.value("filter", l.filter);
      l.link = jl.value("link", l.link);
      l.density_subject = jl.value("density_subject", l.density_subject);
      l.density_target = jl.value("density_target", l.density_target);
    }
    c.workers = j.value("workers", c.workers);
    c.apply_seed(j.value("seed", std::uint64_t{0}));
  } catch (const json::exception& e) {
    throw ConfigError(std::string("invalid project config: ") + e.what());
  }
  c.validate();
  return c;
}

ProjectConfig ProjectConfig::load(const fs::path& path) {
  if (!fs::exists(path)) throw ConfigError("config file " + path.string() + " does not exist");
  json j;
  try {
    j = json::parse(read_file_text(path));
  } catch (const json::parse_error& e) {
    throw ConfigError("config file " + path.string() + " is not valid JSON: " + e.what());
  }
  return from_json(j, fs::absolute(path).parent_path());
}

json ProjectConfig::to_json() const {
  json jp = json::object();
  auto paths_copy = paths;
  for_each_path(paths_copy, [&](const char* name, fs::path& p) {
    const auto rel = p.lexically_relative(base_dir);
    jp[name] = (!rel.empty() && *rel.begin() != "..") ? rel.generic_string() : p.generic_string();
  });
  json j = {{"paths", jp},
            {"schema", schema.to_json()},
            {"slice",
             {{"mode", to_string(slice.mode)}, {"size", slice.size}, {"keep_partial", slice.keep_partial}}},
            {"split", {{"fractions", split.fractions}}},
            {"train", train.to_json()},
            {"model", {{"hidden", hidden}}},
            {"thresholds",
             {{"isolation_m", thresholds.isolation_m},
              {"link_m", thresholds.link_m},
              {"density_radius_m", thresholds.density_radius_m},
              {"density_min_percent", thresholds.density_min_percent},
              {"density_bins", thresholds.density_bins}}},
            {"labels",
             {{"filter", labels.filter},
              {"link", labels.link},
              {"density_subject", labels.density_subject},
              {"density_target", labels.density_target}}},
            {"seed", seed},
            {"workers", workers}};
  if (tile_source) j["tile_source"] = tile_source->to_json();
  if (ensemble) j["ensemble"] = ensemble->to_json();
  return j;
}

}  // namespace patchwork
