#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "patchwork/error.hpp"
#include "patchwork/optimizer.hpp"

using namespace patchwork;

namespace {

struct Scalars {
  std::vector<double> value;
  std::vector<double> grad;
  std::vector<ParamGroup> groups() {
    std::vector<ParamGroup> g;
    for (std::size_t i = 0; i < value.size(); ++i) {
      g.push_back({"g" + std::to_string(i),
                   {{"t", std::span<double>(&value[i], 1), std::span<double>(&grad[i], 1)}}});
    }
    return g;
  }
};

}  // namespace

TEST(Lr, LinearFiveGroups) {
  OptimizerConfig c;
  auto lrs = layerwise_lrs(5, c);
  const double want[] = {1.0e-4, 3.25e-4, 5.5e-4, 7.75e-4, 1.0e-3};
  for (int i = 0; i < 5; ++i) EXPECT_NEAR(lrs[i], want[i], 1e-12);
}

TEST(Lr, GeometricFiveGroups) {
  OptimizerConfig c;
  c.lr_schedule = LrSchedule::Geometric;
  c.lr_first = 1e-5;
  auto lrs = layerwise_lrs(5, c);
  for (int i = 0; i < 5; ++i) EXPECT_NEAR(lrs[i], 1e-5 * std::pow(10.0, i / 2.0), 1e-12);
  EXPECT_NEAR(lrs[1], 3.162e-5, 1e-8);
}

TEST(Lr, SingleGroupAndFrozen) {
  OptimizerConfig c;
  EXPECT_EQ(layerwise_lrs(1, c), std::vector<double>{1e-3});
  c.frozen_groups = {0, 2};
  auto lrs = layerwise_lrs(3, c);
  EXPECT_EQ(lrs[0], 0.0);
  EXPECT_EQ(lrs[2], 0.0);
  EXPECT_NEAR(lrs[1], 5.5e-4, 1e-12);
  c.lr_schedule = LrSchedule::Uniform;
  c.frozen_groups.clear();
  EXPECT_EQ(layerwise_lrs(3, c), std::vector<double>(3, 1e-3));
}

TEST(Lr, StepDecayEveryFiveEpochs) {
  OptimizerConfig c;
  auto base = layerwise_lrs(4, c);
  for (int e = 1; e < 30; ++e) {
    auto prev = scheduled_lrs(base, c, e - 1);
    auto cur = scheduled_lrs(base, c, e);
    for (std::size_t g = 0; g < base.size(); ++g) {
      if (e % 5 == 0) {
        EXPECT_EQ(cur[g], prev[g] * 0.1) << e;
      } else {
        EXPECT_EQ(cur[g], prev[g]) << e;
      }
    }
  }
  EXPECT_EQ(step_decay_factor(c, 4), 1.0);
  EXPECT_EQ(step_decay_factor(c, 5), 0.1);
}

TEST(AdamW, FirstStepExample) {
  OptimizerConfig c;
  Scalars s{{1.0}, {1.0}};
  AdamW opt(c);
  std::vector<double> lr{1e-3};
  opt.step(s.groups(), lr);
  EXPECT_NEAR(s.value[0], 1.0 - 0.001 * (1.0 / (1.0 + 1e-8)) - 0.001 * 0.01, 1e-15);
  EXPECT_NEAR(s.value[0], 0.998990, 1e-9);
}

TEST(AdamW, ThreeStepScalarOracle) {
  OptimizerConfig c;
  c.weight_decay = 0.05;
  const double grads[] = {0.7, -1.3, 0.2};
  Scalars s{{0.4}, {0.0}};
  AdamW opt(c);
  const std::vector<double> lr{2e-3};
  double theta = 0.4, m = 0, v = 0;
  for (int t = 1; t <= 3; ++t) {
    s.grad[0] = grads[t - 1];
    opt.step(s.groups(), lr);
    const double g = grads[t - 1];
    m = 0.9 * m + 0.1 * g;
    v = 0.999 * v + 0.001 * g * g;
    const double mh = m / (1 - std::pow(0.9, t));
    const double vh = v / (1 - std::pow(0.999, t));
    theta = theta - 2e-3 * mh / (std::sqrt(vh) + 1e-8) - 2e-3 * 0.05 * theta;
    EXPECT_NEAR(s.value[0], theta, 1e-12) << t;
  }
  EXPECT_EQ(opt.steps(), 3u);
}

TEST(AdamW, ZeroGradNoDecayIsNoop) {
  OptimizerConfig c;
  c.weight_decay = 0.0;
  Scalars s{{0.3, -2.0}, {0.0, 0.0}};
  AdamW opt(c);
  std::vector<double> lr{1e-3, 1e-3};
  for (int i = 0; i < 5; ++i) opt.step(s.groups(), lr);
  EXPECT_EQ(s.value[0], 0.3);
  EXPECT_EQ(s.value[1], -2.0);
}

TEST(AdamW, FrozenGroupsUnchanged) {
  OptimizerConfig c;
  Scalars s{{0.3, -2.0}, {5.0, 5.0}};
  AdamW opt(c);
  std::vector<double> lr{0.0, 0.0};
  for (int i = 0; i < 10; ++i) opt.step(s.groups(), lr);
  EXPECT_EQ(s.value[0], 0.3);
  EXPECT_EQ(s.value[1], -2.0);
}

TEST(AdamW, NonFiniteGradientNamesGroupAndStep) {
  OptimizerConfig c;
  Scalars s{{1.0, 1.0}, {0.1, std::numeric_limits<double>::quiet_NaN()}};
  AdamW opt(c);
  std::vector<double> lr{1e-3, 1e-3};
  try {
    opt.step(s.groups(), lr);
    FAIL();
  } catch (const TrainingError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("g1"), std::string::npos);
    EXPECT_NE(msg.find("step 1"), std::string::npos);
  }
}

TEST(OptimizerConfig, JsonRoundTripAndValidation) {
  OptimizerConfig c;
  c.lr_schedule = LrSchedule::Geometric;
  c.frozen_groups = {0};
  auto back = OptimizerConfig::from_json(c.to_json());
  EXPECT_EQ(back.lr_schedule, LrSchedule::Geometric);
  EXPECT_EQ(back.frozen_groups, c.frozen_groups);
  EXPECT_EQ(back.to_json(), c.to_json());
  OptimizerConfig bad;
  bad.batch_size = 0;
  EXPECT_THROW(bad.validate(), ConfigError);
  EXPECT_THROW(parse_lr_schedule("cosine"), ConfigError);
}
