#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "bridgesim/grid.hpp"
#include "test_support.hpp"

namespace bridgesim {
namespace {

using testing::observe;
using testing::row;
using testing::vec;

void expect_sound(const TimeGrid& g, double horizon) {
  ASSERT_GE(g.nodes.size(), 2u);
  EXPECT_EQ(g.nodes.front(), 0.0);
  EXPECT_NEAR(g.nodes.back(), horizon, 1e-12);
  double sum = 0.0;
  for (std::size_t j = 0; j < g.steps(); ++j) {
    EXPECT_GT(g.nodes[j + 1], g.nodes[j]) << "at node " << j;
    sum += g.dt(j);
  }
  EXPECT_NEAR(sum, horizon, 1e-12);
}

TEST(BuildGridTest, SingleObservationRefinesTowardTheEnd) {
  ObservationSet obs{{observe(1.0, row({1.0}), vec({0.0}), 1.0)}};
  const GridOptions opt{0.1, 1e-4, 0.5};
  const TimeGrid g = build_grid(1.0, obs, opt);
  expect_sound(g, 1.0);
  EXPECT_EQ(g.obs_index[0], g.nodes.size() - 1);
  EXPECT_EQ(g.window_start_index[0], 0u);
  // the final node before T sits within dt_min of it
  EXPECT_LE(1.0 - g.nodes[g.nodes.size() - 2], 1e-4);
  double smallest = 1.0;
  for (std::size_t j = 0; j < g.steps(); ++j) smallest = std::min(smallest, g.dt(j));
  EXPECT_LE(smallest, 1e-4);
}

TEST(BuildGridTest, StepsInsideWindowsRespectTheGeometricBound) {
  ObservationSet obs{{observe(0.5, row({1.0}), vec({0.0}), 0.25),
                      observe(1.0, row({1.0}), vec({0.0}), 0.5)}};
  const GridOptions opt{0.05, 1e-5, 0.5};
  const TimeGrid g = build_grid(1.0, obs, opt);
  expect_sound(g, 1.0);
  for (std::size_t k = 0; k < obs.size(); ++k) {
    const double T = obs[k].time;
    for (std::size_t j = g.window_start_index[k]; j < g.obs_index[k]; ++j) {
      const double bound = std::max(opt.refine_ratio * (T - g.nodes[j]), opt.dt_min);
      EXPECT_LE(g.dt(j), bound * (1 + 1e-12) + 1e-15) << "k=" << k << " j=" << j;
    }
    EXPECT_LE(T - g.nodes[g.obs_index[k] - 1], opt.dt_min);
  }
}

TEST(BuildGridTest, WindowEndpointsAreNodes) {
  ObservationSet obs{{observe(0.5, row({1.0}), vec({0.0}), 0.25),
                      observe(1.0, row({1.0}), vec({0.0}), 0.5)}};
  const TimeGrid g = build_grid(1.0, obs, GridOptions{0.1, 1e-4, 0.5});
  for (double t : {0.25, 0.5, 1.0}) EXPECT_NO_THROW(g.index_of(t)) << t;
  EXPECT_EQ(g.nodes[g.index_of(0.5)], 0.5);
  EXPECT_EQ(g.window_start_index[1], g.obs_index[0]);
}

TEST(BuildGridTest, OutsideWindowsStepsEqualBase) {
  ObservationSet obs{{observe(1.0, row({1.0}), vec({0.0}), 0.3)}};
  const GridOptions opt{0.1, 1e-4, 0.5};
  const TimeGrid g = build_grid(1.0, obs, opt);
  const std::size_t start = g.window_start_index[0];
  for (std::size_t j = 0; j + 1 < start; ++j) EXPECT_NEAR(g.dt(j), 0.1, 1e-12);
  EXPECT_LE(g.dt(start - 1), 0.1 + 1e-12);
  EXPECT_NEAR(g.nodes[start], 0.7, 1e-15);
}

TEST(BuildGridTest, ExtraNodesAreInserted) {
  ObservationSet obs{{observe(1.0, row({1.0}), vec({0.0}), 1.0)}};
  const std::vector<double> extra{0.333, 0.9, 0.975};
  const TimeGrid g = build_grid(1.0, obs, GridOptions{0.1, 1e-4, 0.5}, extra);
  expect_sound(g, 1.0);
  for (double t : extra) EXPECT_NO_THROW(g.index_of(t)) << t;
}

TEST(BuildGridTest, HorizonBeyondLastObservationContinuesWithBaseSteps) {
  ObservationSet obs{{observe(0.5, row({1.0}), vec({0.0}))}};
  const TimeGrid g = build_grid(2.0, validate(obs, 1), GridOptions{0.1, 1e-4, 0.5});
  expect_sound(g, 2.0);
  EXPECT_NEAR(g.dt(g.steps() - 1), 0.1, 1e-12);
}

TEST(BuildGridTest, RejectsInvalidConfigurations) {
  ObservationSet obs{{observe(1.0, row({1.0}), vec({0.0}), 0.25)}};
  auto kind_of = [&](double horizon, GridOptions opt) {
    try {
      build_grid(horizon, obs, opt);
    } catch (const Error& e) {
      return e.kind();
    }
    return ErrorKind::InvalidInput;
  };
  EXPECT_EQ(kind_of(1.0, GridOptions{0.5, 0.3, 0.5}), ErrorKind::InvalidConfiguration);
  EXPECT_EQ(kind_of(0.8, GridOptions{0.1, 1e-4, 0.5}), ErrorKind::InvalidConfiguration);
  EXPECT_EQ(kind_of(1.0, GridOptions{0.1, 1e-4, 1.0}), ErrorKind::InvalidConfiguration);
  EXPECT_EQ(kind_of(1.0, GridOptions{1e-5, 1e-4, 0.5}), ErrorKind::InvalidConfiguration);
}

TEST(BuildGridTest, DefaultMinimumStepScalesWithHorizon) {
  ObservationSet obs{{observe(2.0, row({1.0}), vec({0.0}), 2.0)}};
  const TimeGrid g = build_grid(2.0, obs, GridOptions{0.1, 0.0, 0.5});
  EXPECT_LE(2.0 - g.nodes[g.nodes.size() - 2], 2e-5 + 1e-15);
}

}  // namespace
}  // namespace bridgesim
