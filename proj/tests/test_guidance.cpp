#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>

#include "doctest.h"
#include "mcs/guidance.hpp"
#include "mcs/rng.hpp"
#include "test_util.hpp"

using namespace mcs;

namespace {

const PairShape kShape{6, 3};

// central finite difference of a scalar function of the candidate tensor
template <typename Fn>
double fd(Fn&& value_of, std::vector<double> candidate, int index, double step = 1e-6) {
  candidate[index] += step;
  const double up = value_of(candidate);
  candidate[index] -= 2.0 * step;
  const double down = value_of(candidate);
  return (up - down) / (2.0 * step);
}

double rel_error(double analytic, double numeric) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
  return std::abs(analytic - numeric) / denom;
}

}  // namespace

TEST_CASE("group distance clamps to zero when everyone is far apart") {
  Rng rng(1);
  auto candidate = testutil::random_smooth_clip(kShape, rng);
  auto other = candidate;
  for (int c = 0; c < 2; ++c)
    for (int f = 0; f < kShape.clip_len; ++f)
      other[kShape.index(c, f, kHipJoint, kPosOffset)] += 10.0;  // 10 m away on x
  std::vector<const std::vector<double>*> others{&other};
  auto eval = group_distance(candidate, kShape, others, 0.25);
  CHECK(eval.value == doctest::Approx(0.0));
  for (double g : eval.grad) CHECK(g == 0.0);
}

TEST_CASE("group distance with empty others is identically zero") {
  Rng rng(2);
  auto candidate = testutil::random_smooth_clip(kShape, rng);
  auto eval = group_distance(candidate, kShape, {}, 0.25);
  CHECK(eval.value == 0.0);
  for (double g : eval.grad) CHECK(g == 0.0);
}

TEST_CASE("a fully overlapping group saturates the bound at -tau with zero gradient") {
  Rng rng(3);
  auto candidate = testutil::random_smooth_clip(kShape, rng);
  // the other group's hips coincide with the candidate's at every frame
  auto other = candidate;
  std::vector<const std::vector<double>*> others{&other};
  const double tau = 0.25;
  auto eval = group_distance(candidate, kShape, others, tau);
  CHECK(eval.value == doctest::Approx(-tau).epsilon(1e-12));
  for (double g : eval.grad) CHECK(g == doctest::Approx(0.0));
}

TEST_CASE("group distance gradient matches finite differences on random configurations") {
  Rng rng(17);
  const double tau = 0.7;  // wide threshold so the non-clamped branch is active
  for (int config = 0; config < 100; ++config) {
    auto candidate = testutil::random_smooth_clip(kShape, rng, 0.6);
    auto other_a = testutil::random_smooth_clip(kShape, rng, 0.6);
    auto other_b = testutil::random_smooth_clip(kShape, rng, 0.6);
    std::vector<const std::vector<double>*> others{&other_a, &other_b};
    auto value_of = [&](const std::vector<double>& c) {
      return group_distance(c, kShape, others, tau).value;
    };
    auto eval = group_distance(candidate, kShape, others, tau);
    for (int probe = 0; probe < 6; ++probe) {
      const int c = static_cast<int>(rng.uniform_index(2));
      const int f = static_cast<int>(rng.uniform_index(kShape.clip_len));
      const int axis = static_cast<int>(rng.uniform_index(3));
      const int idx = kShape.index(c, f, kHipJoint, kPosOffset + axis);
      CHECK(rel_error(eval.grad[idx], fd(value_of, candidate, idx)) < 1e-5);
    }
  }
}

TEST_CASE("smoothness cost is zero for a constant-velocity continuation") {
  const PairShape obs_shape{4, kShape.joints};
  std::vector<double> observed(obs_shape.dim(), 0.0), candidate(kShape.dim(), 0.0);
  for (int c = 0; c < 2; ++c)
    for (int j = 0; j < kShape.joints; ++j) {
      for (int f = 0; f < obs_shape.clip_len; ++f)
        observed[obs_shape.index(c, f, j, kPosOffset)] = 0.25 * f;
      for (int f = 0; f < kShape.clip_len; ++f)
        candidate[kShape.index(c, f, j, kPosOffset)] = 0.25 * (obs_shape.clip_len + f);
    }
  auto eval = smoothness_cost(candidate, kShape, observed, obs_shape, 1);
  CHECK(eval.value == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("a unit velocity kink at the seam costs exactly 1") {
  // positions ... 0, 0, [seam] 1, 2, 3 ... : acceleration 1 at the last
  // observed frame only (fps = 1)
  const PairShape shape{4, 1};
  const PairShape obs_shape{4, 1};
  std::vector<double> observed(obs_shape.dim(), 0.0), candidate(shape.dim(), 0.0);
  for (int f = 0; f < shape.clip_len; ++f)
    candidate[shape.index(0, f, 0, kPosOffset)] = static_cast<double>(f + 1);
  auto eval = smoothness_cost(candidate, shape, observed, obs_shape, 1);
  CHECK(eval.value == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("smoothness gradient matches finite differences on random configurations") {
  Rng rng(23);
  const PairShape obs_shape{5, kShape.joints};
  for (int config = 0; config < 100; ++config) {
    auto candidate = testutil::random_smooth_clip(kShape, rng);
    auto observed = testutil::random_smooth_clip(obs_shape, rng);
    auto value_of = [&](const std::vector<double>& c) {
      return smoothness_cost(c, kShape, observed, obs_shape, 20).value;
    };
    auto eval = smoothness_cost(candidate, kShape, observed, obs_shape, 20);
    for (int probe = 0; probe < 6; ++probe) {
      const int c = static_cast<int>(rng.uniform_index(2));
      const int f = static_cast<int>(rng.uniform_index(kShape.clip_len));
      const int j = static_cast<int>(rng.uniform_index(kShape.joints));
      const int axis = static_cast<int>(rng.uniform_index(3));
      const int idx = kShape.index(c, f, j, kPosOffset + axis);
      CHECK(rel_error(eval.grad[idx], fd(value_of, candidate, idx)) < 1e-5);
    }
  }
}

TEST_CASE("total guidance decomposes into its weighted components") {
  Rng rng(31);
  auto candidate = testutil::random_smooth_clip(kShape, rng, 0.6);
  auto other = testutil::random_smooth_clip(kShape, rng, 0.6);
  const PairShape obs_shape{4, kShape.joints};
  auto observed = testutil::random_smooth_clip(obs_shape, rng, 0.6);
  std::vector<const std::vector<double>*> others{&other};

  SUBCASE("weights (1, 0) reduce to group distance") {
    ConstraintSet cs{0.7, 0.0, 1.0};
    auto total = total_guidance(candidate, kShape, others, observed, obs_shape, cs, 20);
    auto dist = group_distance(candidate, kShape, others, cs.tau);
    CHECK(total.value == doctest::Approx(dist.value).epsilon(1e-12));
    for (int d = 0; d < kShape.dim(); ++d)
      CHECK(total.grad[d] == doctest::Approx(dist.grad[d]).epsilon(1e-12));
  }
  SUBCASE("weights (1, 0.1) equal the hand-computed weighted sum") {
    ConstraintSet cs{0.7, 0.1, 1.0};
    auto total = total_guidance(candidate, kShape, others, observed, obs_shape, cs, 20);
    auto dist = group_distance(candidate, kShape, others, cs.tau);
    auto smooth = smoothness_cost(candidate, kShape, observed, obs_shape, 20);
    CHECK(total.value == doctest::Approx(dist.value - 0.1 * smooth.value).epsilon(1e-12));
    for (int d = 0; d < kShape.dim(); ++d)
      CHECK(total.grad[d] ==
            doctest::Approx(dist.grad[d] - 0.1 * smooth.grad[d]).epsilon(1e-10));
  }
  SUBCASE("rotation and velocity channels receive zero gradient") {
    ConstraintSet cs{0.7, 0.1, 1.0};
    auto total = total_guidance(candidate, kShape, others, observed, obs_shape, cs, 20);
    for (int c = 0; c < 2; ++c)
      for (int f = 0; f < kShape.clip_len; ++f)
        for (int j = 0; j < kShape.joints; ++j) {
          for (int ch = kRotOffset; ch < kRotOffset + 4; ++ch)
            CHECK(total.grad[kShape.index(c, f, j, ch)] == 0.0);
          for (int ch = kVelOffset; ch < kVelOffset + 3; ++ch)
            CHECK(total.grad[kShape.index(c, f, j, ch)] == 0.0);
        }
  }
  SUBCASE("both components zero means (0, 0)") {
    ConstraintSet cs{0.25, 0.05, 1.0};
    // far-away other, perfectly linear candidate continuing linear observed
    std::vector<double> lin_obs(obs_shape.dim(), 0.0), lin_cand(kShape.dim(), 0.0);
    for (int c = 0; c < 2; ++c)
      for (int j = 0; j < kShape.joints; ++j) {
        for (int f = 0; f < obs_shape.clip_len; ++f)
          lin_obs[obs_shape.index(c, f, j, kPosOffset + 1)] = 0.5 * f + c;
        for (int f = 0; f < kShape.clip_len; ++f)
          lin_cand[kShape.index(c, f, j, kPosOffset + 1)] = 0.5 * (obs_shape.clip_len + f) + c;
      }
    auto far = lin_cand;
    for (int c = 0; c < 2; ++c)
      for (int f = 0; f < kShape.clip_len; ++f) far[kShape.index(c, f, 0, kPosOffset)] += 25.0;
    std::vector<const std::vector<double>*> far_others{&far};
    auto total = total_guidance(lin_cand, kShape, far_others, lin_obs, obs_shape, cs, 1);
    CHECK(total.value == doctest::Approx(0.0).epsilon(1e-12));
    for (double g : total.grad) CHECK(g == doctest::Approx(0.0));
  }
}

TEST_CASE("group distance is invariant under a joint rigid transform") {
  Rng rng(37);
  auto candidate = testutil::random_smooth_clip(kShape, rng, 0.6);
  auto other = testutil::random_smooth_clip(kShape, rng, 0.6);
  std::vector<const std::vector<double>*> others{&other};
  const double tau = 0.7;
  const double reference = group_distance(candidate, kShape, others, tau).value;
  for (int trial = 0; trial < 10; ++trial) {
    const double yaw = rng.uniform(0.0, 6.28);
    const Vec3 shift{rng.uniform(-5, 5), rng.uniform(-5, 5), rng.uniform(-1, 1)};
    auto cand2 = candidate;
    auto other2 = other;
    transform_pair(cand2, kShape, Vec3{}, yaw, shift);
    transform_pair(other2, kShape, Vec3{}, yaw, shift);
    std::vector<const std::vector<double>*> others2{&other2};
    CHECK(group_distance(cand2, kShape, others2, tau).value ==
          doctest::Approx(reference).epsilon(1e-9));
  }
}

TEST_CASE("ascending the guidance gradient increases the objective") {
  Rng rng(41);
  const PairShape obs_shape{4, kShape.joints};
  auto candidate = testutil::random_smooth_clip(kShape, rng, 0.4);
  auto other = testutil::random_smooth_clip(kShape, rng, 0.4);
  auto observed = testutil::random_smooth_clip(obs_shape, rng, 0.4);
  std::vector<const std::vector<double>*> others{&other};
  ConstraintSet cs{0.7, 0.05, 1.0};
  auto objective = [&](const std::vector<double>& c) {
    return total_guidance(c, kShape, others, observed, obs_shape, cs, 20).value;
  };
  double current = objective(candidate);
  const double initial = current;
  double step = 1e-4;
  int improvements = 0;
  for (int iter = 0; iter < 50; ++iter) {
    auto eval = total_guidance(candidate, kShape, others, observed, obs_shape, cs, 20);
    double gnorm2 = 0.0;
    for (double g : eval.grad) gnorm2 += g * g;
    if (gnorm2 < 1e-18) break;  // already at a flat optimum
    // backtracking line search along the gradient
    bool accepted = false;
    for (int back = 0; back < 40 && !accepted; ++back) {
      auto trial = candidate;
      for (int d = 0; d < kShape.dim(); ++d) trial[d] += step * eval.grad[d];
      const double value = objective(trial);
      if (value > current) {
        candidate = std::move(trial);
        current = value;
        accepted = true;
        step *= 1.5;
      } else {
        step *= 0.5;
      }
    }
    REQUIRE(accepted);
    ++improvements;
  }
  CHECK(improvements > 0);
  CHECK(current > initial);
}
