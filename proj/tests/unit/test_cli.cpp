#include <gtest/gtest.h>

#include <cstdlib>
#include <sys/wait.h>

#include <json.hpp>

#include "patchwork/fsutil.hpp"
#include "test_support.hpp"

using namespace patchwork;
using nlohmann::json;

namespace {

struct Run {
  int code = -1;
  std::string out;
  std::string err;
};

Run run_cli(const std::filesystem::path& cwd, const std::string& args) {
  const auto out = cwd / ".stdout";
  const auto err = cwd / ".stderr";
  const std::string cmd = "cd '" + cwd.string() + "' && '" PATCHWORK_CLI_PATH "' " + args + " >'" +
                          out.string() + "' 2>'" + err.string() + "'";
  const int status = std::system(cmd.c_str());
  Run r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = read_file_text(out);
  r.err = read_file_text(err);
  return r;
}

}  // namespace

TEST(Cli, TrainWithoutSplitNamesProducer) {
  testutil::TempDir dir;
  ASSERT_EQ(run_cli(dir.path(), "synth --out . --sheets 1").code, 0);
  auto r = run_cli(dir.path(), "train");
  EXPECT_EQ(r.code, 2);
  auto err = json::parse(r.err.substr(r.err.find('{')));
  EXPECT_EQ(err["stage"], "train");
  EXPECT_NE(err["message"].get<std::string>().find("run split first"), std::string::npos);
}

TEST(Cli, SliceThenStatsMatchesGrid) {
  testutil::TempDir dir;
  ASSERT_EQ(run_cli(dir.path(), "synth --out . --sheets 1").code, 0);
  ASSERT_EQ(run_cli(dir.path(), "slice").code, 0);
  auto r = run_cli(dir.path(), "stats");
  ASSERT_EQ(r.code, 0) << r.err;
  auto j = json::parse(r.out);
  // One 1000 px sheet cut into 100 px patches.
  EXPECT_EQ(j["patches"], 100);
  EXPECT_EQ(j["sheets"], 1);
  EXPECT_EQ(j["partial"], 0);
}

TEST(Cli, DryRunWritesNothing) {
  testutil::TempDir dir;
  ASSERT_EQ(run_cli(dir.path(), "synth --out . --sheets 1").code, 0);
  auto r = run_cli(dir.path(), "--dry-run slice");
  ASSERT_EQ(r.code, 0);
  auto j = json::parse(r.out);
  EXPECT_EQ(j["command"], "slice");
  EXPECT_FALSE(j["writes"].empty());
  EXPECT_FALSE(std::filesystem::exists(dir / "patches.csv"));
}

TEST(Cli, UsageAndConfigErrors) {
  testutil::TempDir dir;
  EXPECT_EQ(run_cli(dir.path(), "--no-such-flag").code, 1);
  auto r = run_cli(dir.path(), "slice");
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("\"hint\""), std::string::npos);
}
