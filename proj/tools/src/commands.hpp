#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "patchwork/config.hpp"
#include "patchwork/error.hpp"

namespace patchwork::cli {

struct GlobalOptions {
  std::filesystem::path config = "project.json";
  std::optional<std::uint64_t> seed;
  std::optional<int> workers;
  bool dry_run = false;
};

/// A prior stage's artifact is missing.
class MissingArtifact : public DataError {
 public:
  MissingArtifact(const std::filesystem::path& path, const std::string& producer)
      : DataError("missing " + path.string() + ": run " + producer + " first"),
        producer_(producer) {}
  const std::string& producer() const { return producer_; }

 private:
  std::string producer_;
};

/// Artifacts a command reads and writes, printed by --dry-run.
struct Plan {
  std::vector<std::filesystem::path> reads;
  std::vector<std::filesystem::path> writes;
};

ProjectConfig load_project(const GlobalOptions& g);

struct SynthArgs {
  std::filesystem::path out;
  int sheets = 20;
  bool context = false;
};
int run_synth(const GlobalOptions& g, const SynthArgs& a);

struct FetchArgs {
  std::vector<double> bbox;  // min_lon, min_lat, max_lon, max_lat
  int zoom = 17;
  std::string sheet_id;
  std::optional<std::filesystem::path> metadata;
};
int run_fetch(const GlobalOptions& g, const FetchArgs& a);

int run_slice(const GlobalOptions& g);

struct ServeArgs {
  std::string host = "127.0.0.1";
  int port = 8080;
  int context = 3;
};
int run_annotate_serve(const GlobalOptions& g, const ServeArgs& a);

int run_export_gold(const GlobalOptions& g);
int run_split(const GlobalOptions& g);
int run_train(const GlobalOptions& g);
int run_infer(const GlobalOptions& g);

struct FilterArgs {
  bool cascade = false;
};
int run_filter(const GlobalOptions& g, const FilterArgs& a);

struct LinkArgs {
  bool raw = false;
  bool no_date_filter = false;
};
int run_link(const GlobalOptions& g, const LinkArgs& a);

struct DensityArgs {
  bool raw = false;
};
int run_density(const GlobalOptions& g, const DensityArgs& a);

int run_export_geojson(const GlobalOptions& g);
int run_stats(const GlobalOptions& g);

}  // namespace patchwork::cli
