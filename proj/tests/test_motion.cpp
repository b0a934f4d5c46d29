#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>

#include "doctest.h"
#include "mcs/motion.hpp"
#include "mcs/rng.hpp"
#include "test_util.hpp"

using namespace mcs;
using testutil::build_timeline;

namespace {

std::vector<Pose> single_joint_track(const std::vector<double>& xs) {
  std::vector<Pose> frames;
  for (double x : xs) {
    Pose p;
    p.positions = {{x, 0.0, 0.0}};
    p.rotations = {Quat{}};
    p.velocities = {{0.0, 0.0, 0.0}};
    frames.push_back(std::move(p));
  }
  return frames;
}

}  // namespace

TEST_CASE("acceleration of constant-velocity motion is zero") {
  std::vector<double> xs;
  for (int f = 0; f < 12; ++f) xs.push_back(0.25 * f);
  auto acc = acceleration(single_joint_track(xs), 30);
  REQUIRE(acc.size() == 10);
  for (const auto& frame : acc)
    for (const auto& a : frame) CHECK(norm(a) <= 1e-12);
}

TEST_CASE("acceleration of a quadratic track is the second derivative") {
  // x_f = f^2 / fps^2 with fps = 1: central difference gives exactly 2.
  std::vector<double> xs;
  for (int f = 0; f < 10; ++f) xs.push_back(static_cast<double>(f) * f);
  auto acc = acceleration(single_joint_track(xs), 1);
  for (const auto& frame : acc) CHECK(frame[0].x == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("acceleration requires at least 3 frames") {
  CHECK_THROWS_WITH_AS(acceleration(single_joint_track({0.0, 1.0}), 30), "insufficient frames",
                       std::invalid_argument);
}

TEST_CASE("acceleration of any affine track is zero (property)") {
  Rng rng(99);
  for (int trial = 0; trial < 50; ++trial) {
    const int joints = 1 + static_cast<int>(rng.uniform_index(4));
    const int fps = trial % 2 == 0 ? 1 : 20;
    std::vector<Vec3> a(joints), b(joints);
    for (int j = 0; j < joints; ++j) {
      a[j] = {rng.uniform(-10, 10), rng.uniform(-10, 10), rng.uniform(-10, 10)};
      b[j] = {rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)};
    }
    std::vector<Pose> frames;
    for (int f = 0; f < 8; ++f) {
      Pose p;
      for (int j = 0; j < joints; ++j) {
        p.positions.push_back(a[j] + static_cast<double>(f) * b[j]);
        p.rotations.push_back(Quat{});
        p.velocities.push_back(b[j]);
      }
      frames.push_back(std::move(p));
    }
    // rounding in the differences scales with fps^2
    const double bound = 1e-12 * fps * fps;
    for (const auto& frame : acceleration(frames, fps))
      for (const auto& acc : frame) CHECK(norm(acc) <= bound);
  }
}

TEST_CASE("peak jerk is zero for constant-velocity scenes") {
  auto hip = [](int c, int g) { return Vec3{0.25 * g, 2.0 * c, 0.9}; };
  SUBCASE("no seam overlap") {
    auto t = build_timeline(2, 3, 8, 2, 1, hip, 0);
    CHECK(peak_jerk(t) == doctest::Approx(0.0).epsilon(1e-12));
  }
  SUBCASE("with seam overlap") {
    auto t = build_timeline(2, 3, 8, 2, 1, hip, 4);
    CHECK(peak_jerk(t) == doctest::Approx(0.0).epsilon(1e-12));
  }
}

TEST_CASE("peak jerk of a cubic hip trajectory is 6") {
  // x_g = g^3 / fps^3 with fps = 1: constant third difference of 6.
  auto hip = [](int c, int g) {
    if (c == 0) return Vec3{static_cast<double>(g) * g * g, 0.0, 0.9};
    return Vec3{0.0, 3.0, 0.9};
  };
  SUBCASE("no seam overlap") {
    auto t = build_timeline(2, 2, 8, 1, 1, hip, 0);
    CHECK(peak_jerk(t) == doctest::Approx(6.0).epsilon(1e-9));
  }
  SUBCASE("with seam overlap") {
    auto t = build_timeline(2, 3, 8, 1, 1, hip, 3);
    CHECK(peak_jerk(t) == doctest::Approx(6.0).epsilon(1e-9));
  }
}

TEST_CASE("a velocity discontinuity at the seam strictly raises peak jerk") {
  const int w = 8, steps = 2, fps = 1;
  auto smooth = [](int, int g) { return Vec3{0.5 * g, 0.0, 0.9}; };
  auto kinked = [w](int c, int g) {
    if (c != 0 || g < w) return Vec3{0.5 * g, 2.0 * c, 0.9};
    return Vec3{0.5 * w + 1.5 * (g - w), 0.0, 0.9};
  };
  auto ts_smooth = peak_jerk(build_timeline(2, steps, w, 1, fps, smooth));
  auto ts_kinked = peak_jerk(build_timeline(2, steps, w, 1, fps, kinked));
  CHECK(ts_kinked > ts_smooth);
  // Both match the independent third-difference oracle.
  CHECK(ts_smooth ==
        doctest::Approx(testutil::ts_oracle(2, steps, w, 0, fps, 10, smooth)).epsilon(1e-9));
  CHECK(ts_kinked ==
        doctest::Approx(testutil::ts_oracle(2, steps, w, 0, fps, 10, kinked)).epsilon(1e-9));
}

TEST_CASE("peak jerk requires a transition") {
  auto t = build_timeline(2, 1, 8, 1, 1, [](int c, int g) { return Vec3{1.0 * g, 1.0 * c, 0.0}; });
  CHECK_THROWS_WITH_AS(peak_jerk(t), "no transitions", std::invalid_argument);
}

TEST_CASE("quadratic motion (constant acceleration) still has zero jerk") {
  auto hip = [](int, int g) { return Vec3{0.125 * g * g, 0.0, 0.9}; };
  auto t = build_timeline(2, 2, 8, 1, 1, hip);
  CHECK(peak_jerk(t) == doctest::Approx(0.0).epsilon(1e-9));
  // and perturbing one interior frame makes it strictly positive
  t.steps[1].clips[0].frames[3].positions[0].x += 0.5;
  CHECK(peak_jerk(t) > 0.0);
}

TEST_CASE("hip distance of coincident characters is zero") {
  auto t = build_timeline(2, 2, 8, 2, 20, [](int, int) { return Vec3{1.0, 2.0, 0.9}; });
  CHECK(hip_distance(t) == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("hip distance of a static pair at distance 1 is exactly 1") {
  auto t = build_timeline(2, 2, 8, 2, 20,
                          [](int c, int) { return Vec3{static_cast<double>(c), 0.0, 0.9}; });
  CHECK(hip_distance(t) == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(min_pairwise_hip_distance(t) == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("hip distance of an equilateral triangle with side 2 is exactly 4") {
  const double h = std::sqrt(3.0);
  auto hip = [h](int c, int) {
    if (c == 0) return Vec3{0.0, 0.0, 0.9};
    if (c == 1) return Vec3{2.0, 0.0, 0.9};
    return Vec3{1.0, h, 0.9};
  };
  // Padded to 4 with one virtual character, which must not count.
  auto t = build_timeline(4, 1, 8, 1, 20, [&](int c, int g) {
    return c < 3 ? hip(c, g) : Vec3{50.0, 50.0, 0.9};
  });
  for (auto& step : t.steps) step.virtual_flags[3] = true;
  CHECK(hip_distance(t) == doctest::Approx(4.0).epsilon(1e-9));
}

TEST_CASE("hip distance matches the ordered-pair oracle and d^2 for a pair") {
  auto hip = [](int c, int g) {
    return Vec3{std::sin(0.3 * g + c), 0.5 * c * c + 0.1 * g, 0.9 + 0.05 * c};
  };
  auto t = build_timeline(4, 2, 8, 1, 10, hip);
  const int frames = concat_length(t);
  CHECK(hip_distance(t) == doctest::Approx(testutil::hd_oracle(4, frames, hip)).epsilon(1e-9));

  // Two static characters at distance d give exactly d^2.
  auto pair = build_timeline(2, 1, 8, 1, 10,
                             [](int c, int) { return Vec3{1.7 * c, 0.0, 0.9}; });
  CHECK(hip_distance(pair) == doctest::Approx(1.7 * 1.7).epsilon(1e-12));
}

TEST_CASE("hip distance is invariant under global rigid motion") {
  Rng rng(11);
  auto hip = [](int c, int g) {
    return Vec3{0.3 * g + c, std::cos(0.2 * g) * (c + 1), 0.9};
  };
  auto base = build_timeline(3, 2, 8, 1, 10, hip);
  // pad to even? hip_distance works for any N >= 2
  const double reference = hip_distance(base);
  for (int trial = 0; trial < 10; ++trial) {
    const double yaw = rng.uniform(0.0, 6.28);
    const Vec3 shift{rng.uniform(-20, 20), rng.uniform(-20, 20), rng.uniform(-5, 5)};
    auto moved = build_timeline(3, 2, 8, 1, 10, [&](int c, int g) {
      return rotate_z(hip(c, g), yaw) + shift;
    });
    CHECK(hip_distance(moved) == doctest::Approx(reference).epsilon(1e-9));
  }
}

TEST_CASE("hip distance needs two non-virtual characters") {
  auto t = build_timeline(2, 1, 8, 1, 10,
                          [](int c, int) { return Vec3{1.0 * c, 0.0, 0.9}; });
  for (auto& step : t.steps) step.virtual_flags[1] = true;
  CHECK_THROWS_AS(hip_distance(t), std::invalid_argument);
}

TEST_CASE("close pair fraction thresholds") {
  auto t = build_timeline(2, 2, 8, 1, 10,
                          [](int c, int) { return Vec3{static_cast<double>(c), 0.0, 0.9}; });
  CHECK(close_pair_fraction(t, 0.5) == doctest::Approx(0.0));
  CHECK(close_pair_fraction(t, 2.0) == doctest::Approx(1.0));
}

TEST_CASE("stitch reports the seam gap") {
  auto a = build_timeline(2, 1, 8, 2, 10, [](int c, int g) { return Vec3{0.1 * g, 1.0 * c, 0.9}; });
  SUBCASE("exact continuation after shifting start") {
    // b's first frame continues a's last frame after one velocity step
    auto c = build_timeline(2, 1, 8, 2, 10, [](int ch, int g) { return Vec3{0.1 * (g + 7), 1.0 * ch, 0.9}; });
    CHECK(stitch(a.steps[0], c.steps[0]) == doctest::Approx(0.0).epsilon(1e-12));
  }
  SUBCASE("half-meter offset for one character") {
    auto cont = build_timeline(2, 1, 8, 2, 10,
                               [](int ch, int g) { return Vec3{0.1 * (g + 7), 1.0 * ch, 0.9}; });
    // gap = 0.5 plus the 0.1 continuation step on x for character 0
    auto base = cont.steps[0];
    for (auto& frame : base.clips[0].frames)
      for (auto& p : frame.positions) p.x += 0.5;
    CHECK(stitch(a.steps[0], base) == doctest::Approx(0.5).epsilon(1e-12));
  }
  SUBCASE("mismatched joint count") {
    auto other = build_timeline(2, 1, 8, 3, 10, [](int c, int g) { return Vec3{0.1 * g, 1.0 * c, 0.9}; });
    CHECK_THROWS_AS(stitch(a.steps[0], other.steps[0]), std::invalid_argument);
  }
}

TEST_CASE("timeline validation rejects malformed scenes") {
  auto t = build_timeline(2, 2, 8, 2, 10, [](int c, int g) { return Vec3{0.1 * g, 1.0 * c, 0.9}; });
  SUBCASE("valid") { CHECK_NOTHROW(validate_timeline(t)); }
  SUBCASE("non-unit quaternion") {
    t.steps[0].clips[0].frames[0].rotations[0].w = 2.0;
    CHECK_THROWS_AS(validate_timeline(t), std::invalid_argument);
  }
  SUBCASE("ragged frame count") {
    t.steps[1].clips[1].frames.pop_back();
    CHECK_THROWS_AS(validate_timeline(t), std::invalid_argument);
  }
  SUBCASE("non-finite position") {
    t.steps[0].clips[0].frames[0].positions[0].x = std::nan("");
    CHECK_THROWS_AS(validate_timeline(t), std::invalid_argument);
  }
}
