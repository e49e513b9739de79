#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <CLI11.hpp>
#include <iostream>
#include <json.hpp>

#include "commands.hpp"

namespace {

enum ExitCode { kOk = 0, kUsage = 1, kData = 2, kInternal = 3 };

int report(const std::string& stage, const std::string& message, const std::string& hint, int code) {
  std::cerr << nlohmann::json{{"stage", stage}, {"message", message}, {"hint", hint}}.dump() << '\n';
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  using namespace patchwork;
  using namespace patchwork::cli;

  CLI::App app{"patchwork: slice, label, classify and analyse scanned map sheets"};
  app.require_subcommand(1);
  app.fallthrough();

  GlobalOptions g;
  std::uint64_t seed = 0;
  int workers = 0;
  std::string log_level = "warn";
  app.add_option("-c,--config", g.config, "Project config file (JSON)");
  auto* seed_opt = app.add_option("--seed", seed, "Seed for every stochastic stage");
  auto* workers_opt = app.add_option("--workers", workers, "Worker threads (0 = all cores)");
  app.add_flag("--dry-run", g.dry_run, "Print the artifact plan without writing");
  app.add_option("--log-level", log_level, "trace|debug|info|warn|error")
      ->check(CLI::IsMember({"trace", "debug", "info", "warn", "error"}));

  SynthArgs synth;
  auto* synth_cmd = app.add_subcommand("synth", "Generate the synthetic map corpus and a project config");
  synth_cmd->add_option("--out", synth.out, "Output directory")->required();
  synth_cmd->add_option("--sheets", synth.sheets, "Number of sheets")->check(CLI::PositiveNumber);
  synth_cmd->add_flag("--context", synth.context, "Generate the neighbourhood-dependent task instead");

  FetchArgs fetch;
  std::string fetch_meta;
  auto* fetch_cmd = app.add_subcommand("fetch", "Download and mosaic tiles into a catalog sheet");
  fetch_cmd->add_option("--bbox", fetch.bbox, "min_lon min_lat max_lon max_lat")->expected(4)->required();
  fetch_cmd->add_option("--zoom", fetch.zoom, "Tile zoom level");
  fetch_cmd->add_option("--sheet-id", fetch.sheet_id, "Identifier of the new sheet")->required();
  fetch_cmd->add_option("--metadata", fetch_meta, "Sheet metadata CSV keyed by sheet_id");

  auto* slice_cmd = app.add_subcommand("slice", "Slice catalog sheets into patches");

  ServeArgs serve;
  auto* serve_cmd = app.add_subcommand("annotate-serve", "Run the annotation HTTP service");
  serve_cmd->add_option("--host", serve.host);
  serve_cmd->add_option("--port", serve.port);
  serve_cmd->add_option("--context", serve.context, "Default context size (odd)");

  auto* gold_cmd = app.add_subcommand("export-gold", "Resolve the annotation log into the gold standard");
  auto* split_cmd = app.add_subcommand("split", "Stratified train/val/test split of the gold standard");
  auto* train_cmd = app.add_subcommand("train", "Train and select a classifier");
  auto* infer_cmd = app.add_subcommand("infer", "Predict a label for every patch");

  FilterArgs filter;
  auto* filter_cmd = app.add_subcommand("filter", "Remove spatially isolated predictions");
  filter_cmd->add_flag("--cascade", filter.cascade, "Repeat until no patch is removed");

  LinkArgs link;
  auto* link_cmd = app.add_subcommand("link", "Distance from external points to predicted patches");
  link_cmd->add_flag("--raw", link.raw, "Use unfiltered predictions");
  link_cmd->add_flag("--no-date-filter", link.no_date_filter, "Keep points opened after the survey");

  DensityArgs density;
  auto* density_cmd = app.add_subcommand("density", "Neighbourhood label density");
  density_cmd->add_flag("--raw", density.raw, "Use unfiltered predictions");

  auto* geojson_cmd = app.add_subcommand("export-geojson", "Write predictions as GeoJSON");
  auto* stats_cmd = app.add_subcommand("stats", "Summarise patches, labels and predictions");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    return report("usage", e.what(), "see --help", kUsage);
  }

  // Library warnings go to stderr so stdout stays machine-readable.
  spdlog::set_default_logger(spdlog::stderr_color_mt("patchwork"));
  spdlog::set_level(spdlog::level::from_str(log_level));
  if (*seed_opt) g.seed = seed;
  if (*workers_opt) g.workers = workers;
  if (!fetch_meta.empty()) fetch.metadata = fetch_meta;

  const std::string stage = app.get_subcommands().front()->get_name();
  try {
    if (*synth_cmd) return run_synth(g, synth);
    if (*fetch_cmd) return run_fetch(g, fetch);
    if (*slice_cmd) return run_slice(g);
    if (*serve_cmd) return run_annotate_serve(g, serve);
    if (*gold_cmd) return run_export_gold(g);
    if (*split_cmd) return run_split(g);
    if (*train_cmd) return run_train(g);
    if (*infer_cmd) return run_infer(g);
    if (*filter_cmd) return run_filter(g, filter);
    if (*link_cmd) return run_link(g, link);
    if (*density_cmd) return run_density(g, density);
    if (*geojson_cmd) return run_export_geojson(g);
    if (*stats_cmd) return run_stats(g);
  } catch (const MissingArtifact& e) {
    return report(stage, e.what(), "run " + e.producer() + " first", kData);
  } catch (const ConfigError& e) {
    return report(stage, e.what(), "check the config file and flags", kUsage);
  } catch (const DataError& e) {
    return report(stage, e.what(), "check the input artifacts", kData);
  } catch (const TrainingError& e) {
    return report(stage, e.what(), "lower the learning rates or inspect the training log", kInternal);
  } catch (const std::exception& e) {
    return report(stage, e.what(), "unexpected failure", kInternal);
  }
  return kUsage;
}
