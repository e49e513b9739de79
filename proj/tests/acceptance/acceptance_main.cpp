// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fail.

#include <sys/wait.h>

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include <json.hpp>

#include "gradcheck.hpp"
#include "patchwork/dataset.hpp"
#include "patchwork/fsutil.hpp"
#include "patchwork/metrics.hpp"
#include "patchwork/optimizer.hpp"
#include "patchwork/postprocess.hpp"
#include "patchwork/reference_net.hpp"
#include "patchwork/spatial.hpp"
#include "spatial_oracle.hpp"
#include "test_support.hpp"

using namespace patchwork;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

int failures = 0;

void report(int id, const std::string& name, const std::function<Outcome()>& check) {
  Outcome o;
  testutil::Stopwatch sw;
  try {
    o = check();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  if (!o.pass) ++failures;
  std::printf("%s [%d] %s: %s (%.2f s)\n", o.pass ? "PASS" : "FAIL", id, name.c_str(),
              o.detail.c_str(), sw.seconds());
  std::fflush(stdout);
}

std::string fmt(double v, int digits = 6) {
  std::ostringstream os;
  os.precision(digits);
  os << v;
  return os.str();
}

// ---------------------------------------------------------------------------

Outcome split_counts() {
  const std::vector<std::size_t> counts = {56372, 1041, 3634, 973};
  std::vector<LabelledPatch> items;
  for (std::size_t l = 0; l < counts.size(); ++l)
    for (std::size_t i = 0; i < counts[l]; ++i)
      items.push_back({"p" + std::to_string(l) + "-" + std::to_string(i), static_cast<int>(l)});
  SplitSpec spec;
  spec.seed = 2024;
  testutil::Stopwatch sw;
  auto s = stratified_split(items, spec);
  const double secs = sw.seconds();
  bool ok = s.train.size() == 37212 && s.val.size() == 12404 && s.test.size() == 12404;
  const double frac[3] = {0.6, 0.2, 0.2};
  double worst = 0;
  for (std::size_t part = 0; part < 3; ++part) {
    std::map<int, std::size_t> per;
    for (const auto& x : s.part(static_cast<SplitPart>(part))) ++per[x.label_id];
    for (std::size_t l = 0; l < counts.size(); ++l) {
      worst = std::max(worst, std::abs(static_cast<double>(per[static_cast<int>(l)]) -
                                       frac[part] * static_cast<double>(counts[l])));
    }
  }
  ok = ok && worst <= 1.0 && secs < 1.0;
  return {ok, "totals " + std::to_string(s.train.size()) + "/" + std::to_string(s.val.size()) + "/" +
                  std::to_string(s.test.size()) + ", worst per-class deviation " + fmt(worst) +
                  ", split time " + fmt(secs, 3) + " s"};
}

Outcome filter_vs_brute_force() {
  double slowest = 0;
  std::size_t removed_total = 0;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    auto preds = testutil::random_predictions(10000, 1000 + seed, 20000);
    testutil::Stopwatch sw;
    auto got = remove_isolated(preds, 1, 250.0);
    slowest = std::max(slowest, sw.seconds());
    std::set<std::string> got_set(got.report.removed_ids.begin(), got.report.removed_ids.end());
    if (got_set != testutil::brute_force_isolated(preds, 1, 250.0)) {
      return {false, "removed set differs from brute force for seed " + std::to_string(seed)};
    }
    removed_total += got_set.size();
  }
  return {slowest < 1.0, "identical removed sets over 5 seeds (" + std::to_string(removed_total) +
                             " removals), slowest run " + fmt(slowest, 3) + " s"};
}

Outcome optimizer_traces() {
  // Scalar AdamW oracle over three steps.
  OptimizerConfig cfg;
  double value = 1.0, grad = 0.0;
  std::vector<ParamGroup> groups = {{"w", {{"w", {&value, 1}, {&grad, 1}}}}};
  AdamW opt(cfg);
  const double grads[3] = {1.0, -0.5, 0.25};
  const double lr = 1e-3;
  double theta = 1.0, m = 0, v = 0, worst = 0;
  for (int t = 1; t <= 3; ++t) {
    grad = grads[t - 1];
    opt.step(groups, std::vector<double>{lr});
    m = cfg.beta1 * m + (1 - cfg.beta1) * grad;
    v = cfg.beta2 * v + (1 - cfg.beta2) * grad * grad;
    const double mh = m / (1 - std::pow(cfg.beta1, t));
    const double vh = v / (1 - std::pow(cfg.beta2, t));
    theta = theta - lr * mh / (std::sqrt(vh) + cfg.eps) - lr * cfg.weight_decay * theta;
    worst = std::max(worst, std::abs(theta - value));
  }
  bool ok = worst <= 1e-12;

  // Layer-wise rates against closed forms.
  double lr_worst = 0;
  for (auto sched : {LrSchedule::Linear, LrSchedule::Geometric}) {
    for (std::size_t n = 2; n <= 8; ++n) {
      OptimizerConfig c;
      c.lr_schedule = sched;
      c.lr_first = 1e-5;
      auto lrs = layerwise_lrs(n, c);
      for (std::size_t i = 0; i < n; ++i) {
        const double t = static_cast<double>(i) / static_cast<double>(n - 1);
        const double want = sched == LrSchedule::Linear ? 1e-5 + t * (1e-3 - 1e-5)
                                                        : 1e-5 * std::pow(100.0, t);
        lr_worst = std::max(lr_worst, std::abs(lrs[i] - want));
      }
    }
  }
  ok = ok && lr_worst <= 1e-12 && layerwise_lrs(1, cfg) == std::vector<double>{1e-3};

  // Step decay: exactly x0.1 at epochs 5, 10, ... and unchanged elsewhere.
  const auto base = layerwise_lrs(5, cfg);
  bool decay_ok = true;
  for (int e = 1; e < 40; ++e) {
    const auto prev = scheduled_lrs(base, cfg, e - 1);
    const auto cur = scheduled_lrs(base, cfg, e);
    for (std::size_t g = 0; g < base.size(); ++g) {
      const double want = e % 5 == 0 ? prev[g] * 0.1 : prev[g];
      decay_ok = decay_ok && cur[g] == want;
    }
  }
  ok = ok && decay_ok;
  return {ok, "AdamW trace error " + fmt(worst, 3) + ", LR closed-form error " + fmt(lr_worst, 3) +
                  ", step decay " + (decay_ok ? "exact" : "wrong")};
}

Outcome gradcheck_reference_net() {
  double worst = 0;
  std::size_t skipped = 0;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    ReferenceNet net({64, {32, 16}, 4, seed});
    std::mt19937_64 rng(500 + seed);
    std::normal_distribution<double> d;
    Eigen::MatrixXd x(64, 8);
    for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = d(rng);
    std::vector<int> labels(8);
    for (auto& l : labels) l = static_cast<int>(rng() % 4);
    auto r = testutil::gradcheck(net, x, labels, 100, seed, 1e-4,
                                 [&net](const Eigen::MatrixXd& in) { return net.hidden_pre_activations(in); });
    if (r.checked != 100) return {false, "only " + std::to_string(r.checked) + " usable coordinates"};
    worst = std::max(worst, r.max_rel_error);
    skipped += r.kinks_skipped;
  }
  return {worst < 1e-4, "max relative error " + fmt(worst, 3) + " over 5 seeds x 100 coordinates (" +
                            std::to_string(skipped) + " kink-straddling draws redrawn)"};
}

// --- CLI driven criteria ----------------------------------------------------

struct CliRun {
  int code = -1;
  std::string out;
  std::string err;
};

CliRun cli(const fs::path& cwd, const std::string& args) {
  const auto out = cwd / ".stdout";
  const auto err = cwd / ".stderr";
  const std::string cmd = "cd '" + cwd.string() + "' && '" PATCHWORK_CLI_PATH "' " + args + " >'" +
                          out.string() + "' 2>'" + err.string() + "'";
  const int status = std::system(cmd.c_str());
  CliRun r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = read_file_text(out);
  r.err = read_file_text(err);
  return r;
}

void cli_ok(const fs::path& cwd, const std::string& args) {
  auto r = cli(cwd, args);
  if (r.code != 0) throw std::runtime_error("'" + args + "' exited " + std::to_string(r.code) + ": " + r.err);
}

const std::vector<std::string> kPipeline = {"slice",  "split",  "train",   "infer",
                                            "filter", "link",   "density", "export-geojson"};
const std::vector<std::string> kArtifacts = {
    "patches.csv",  "splits.csv",     "model.ckpt",         "train_log.jsonl",
    "metrics.json", "predictions.csv", "predictions_filtered.csv", "filter_report.json",
    "link_report.json", "density.csv", "density_report.json", "predictions.geojson"};

Outcome end_to_end() {
  testutil::TempDir a("pw-e2e-a"), b("pw-e2e-b");
  testutil::Stopwatch sw;
  cli_ok(a.path(), "--seed 7 synth --out . --sheets 20");
  for (const auto& stage : kPipeline) cli_ok(a.path(), "--seed 7 " + stage);
  const double first_run = sw.seconds();
  cli_ok(b.path(), "--seed 7 synth --out . --sheets 20");
  for (const auto& stage : kPipeline) cli_ok(b.path(), "--seed 7 " + stage);

  const auto metrics = json::parse(read_file_text(a / "metrics.json"));
  const double f1 = metrics["test"]["f1_macro"].get<double>() / 100.0;
  std::vector<std::string> differing;
  for (const auto& name : kArtifacts) {
    if (read_file_bytes(a / name) != read_file_bytes(b / name)) differing.push_back(name);
  }
  for (const auto& e : fs::directory_iterator(a / "sheets")) {
    if (read_file_bytes(e.path()) != read_file_bytes(b / "sheets" / e.path().filename()))
      differing.push_back("sheets/" + e.path().filename().string());
  }
  const bool ok = f1 >= 0.95 && first_run < 300.0 && differing.empty();
  std::string detail = "test F1-macro " + fmt(f1, 4) + ", full pipeline " + fmt(first_run, 3) +
                       " s, rerun " + (differing.empty() ? "byte-identical" : "differs in");
  for (const auto& d : differing) detail += " " + d;
  return {ok, detail};
}

Outcome metrics_example() {
  auto m = compute_metrics({0, 1, 1, 1}, {0, 0, 1, 1}, 2);
  auto r2 = [](double v) { return std::round(v * 100.0) / 100.0; };
  bool ok = r2(m.per_class[0].f1) == 66.67 && r2(m.per_class[1].f1) == 80.00 &&
            r2(m.f1_macro) == 73.33 && r2(m.f1_micro) == 75.00;
  std::mt19937_64 rng(77);
  double worst = 0;
  for (int t = 0; t < 1000; ++t) {
    const std::size_t n = 2 + rng() % 8;
    ConfusionMatrix cm(n);
    for (std::size_t g = 0; g < n; ++g)
      for (std::size_t p = 0; p < n; ++p) cm.add(static_cast<int>(g), static_cast<int>(p), 1 + rng() % 100);
    auto rep = compute_metrics(cm);
    worst = std::max(worst, std::abs(rep.f1_micro - rep.accuracy));
  }
  ok = ok && worst <= 1e-9;
  return {ok, "F1 " + fmt(m.per_class[0].f1, 4) + "/" + fmt(m.per_class[1].f1, 4) + ", macro " +
                  fmt(m.f1_macro, 4) + ", micro " + fmt(m.f1_micro, 4) +
                  "; max |micro F1 - accuracy| over 1000 matrices " + fmt(worst, 3)};
}

Outcome linking_fraction() {
  const geo::GeoPoint origin(-3.2, 55.9);
  std::vector<PredictionRecord> preds;
  std::vector<PointRecord> points;
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> jitter(-70.0, 70.0);  // at most ~99 m
  for (int i = 0; i < 100; ++i) {
    const auto centre = testutil::offset_m(origin, 5000.0 * (i % 10), 5000.0 * (i / 10));
    preds.push_back({"r" + std::to_string(i), 1, 0.9, centre});
    const auto at = i < 90 ? testutil::offset_m(centre, jitter(rng), jitter(rng))
                           : testutil::offset_m(centre, 1000.0, 0.0);
    points.push_back({"s" + std::to_string(i), "station", at, {}});
  }
  auto r = link_points(points, preds, 1, 150.0);
  const bool ok = r.fraction && *r.fraction == 0.9;
  return {ok, "fraction " + (r.fraction ? fmt(*r.fraction, 6) : std::string("undefined")) + " (" +
                  std::to_string(r.within) + "/" + std::to_string(r.points) + ")"};
}

Outcome mercator_and_stream() {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> lon(-180, 180), lat(-85.05, 85.05);
  double worst = 0;
  for (int i = 0; i < 10000; ++i) {
    const double x = lon(rng), y = lat(rng);
    worst = std::max(worst, std::abs(geo::mercator_x_to_lon(geo::lon_to_mercator_x(x)) - x));
    worst = std::max(worst, std::abs(geo::mercator_y_to_lat(geo::lat_to_mercator_y(y)) - y));
  }
  std::vector<LabelledPatch> items;
  const std::size_t counts[4] = {9000, 500, 400, 100};
  for (int l = 0; l < 4; ++l)
    for (std::size_t i = 0; i < counts[l]; ++i) items.push_back({std::to_string(l) + "-" + std::to_string(i), l});
  WeightedSampler sampler(items, 10.0, 99);
  std::vector<double> observed(4, 0.0);
  const int draws = 100000;
  for (int i = 0; i < draws; ++i) observed[sampler.next().label_id] += 1;
  double chi2 = 0;
  for (double o : observed) chi2 += (o - draws / 4.0) * (o - draws / 4.0) / (draws / 4.0);
  const double critical = 16.266;  // chi-square, 3 dof, alpha = 0.001
  return {worst < 1e-9 && chi2 < critical,
          "round-trip error " + fmt(worst, 3) + " deg, chi2 " + fmt(chi2, 4) + " < " + fmt(critical)};
}

Outcome ensemble_gap() {
  testutil::TempDir ens("pw-ctx-ens"), solo("pw-ctx-solo");
  cli_ok(ens.path(), "--seed 5 synth --out . --context");
  cli_ok(ens.path(), "--seed 5 slice");
  cli_ok(ens.path(), "--seed 5 split");
  cli_ok(ens.path(), "--seed 5 train");

  // Same corpus and split, single patch model.
  auto project = json::parse(read_file_text(ens / "project.json"));
  project.erase("ensemble");
  atomic_write_text(solo / "project.json", project.dump(2));
  fs::copy(ens / "sheets", solo / "sheets", fs::copy_options::recursive);
  for (const char* f : {"catalog.csv", "gold.csv", "patches.csv", "splits.csv"}) {
    fs::copy_file(ens / f, solo / f);
  }
  cli_ok(solo.path(), "--seed 5 train");

  const auto me = json::parse(read_file_text(ens / "metrics.json"));
  const auto ms = json::parse(read_file_text(solo / "metrics.json"));
  const double acc_e = me["test"]["accuracy"].get<double>();
  const double acc_s = ms["test"]["accuracy"].get<double>();
  return {acc_e - acc_s >= 10.0, "ensemble accuracy " + fmt(acc_e, 4) + " vs patch-only " +
                                     fmt(acc_s, 4) + " (gap " + fmt(acc_e - acc_s, 4) + " points)"};
}

}  // namespace

int main() {
  report(1, "stratified split totals", split_counts);
  report(2, "k-d tree isolation filter equals brute force", filter_vs_brute_force);
  report(3, "AdamW trace, layer-wise rates, step decay", optimizer_traces);
  report(4, "reference network gradient check", gradcheck_reference_net);
  report(5, "end-to-end synthetic pipeline", end_to_end);
  report(6, "metrics example and micro F1 identity", metrics_example);
  report(7, "synthetic point linking", linking_fraction);
  report(8, "mercator round trip and weighted stream", mercator_and_stream);
  report(9, "context ensemble beats patch-only", ensemble_gap);
  std::printf("%s: %d failing\n", failures == 0 ? "ALL PASS" : "SOME FAIL", failures);
  return failures == 0 ? 0 : 1;
}
