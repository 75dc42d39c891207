#include <doctest.h>

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "motorkit/body/body.hpp"
#include "motorkit/body/kinematics.hpp"
#include "motorkit/ref/generators.hpp"
#include "motorkit/rng.hpp"
#include "motorkit/stac/stac.hpp"

using namespace motorkit;

namespace {

// Synthesis oracle: observations computed straight from the kinematics, so
// the calibration code under test never touches the ground truth path.
stac::MarkerObservations synth(const body::BodyModel& body,
                               const std::vector<body::Pose>& poses,
                               const body::MarkerSet& offsets,
                               real noise_std = 0, Rng* rng = nullptr) {
  stac::MarkerObservations obs;
  for (const auto& pose : poses) {
    auto pts = body::forward_kinematics(body, pose, offsets);
    if (rng)
      for (auto& p : pts)
        p += Vec2{real(rng->gaussian(0, noise_std)),
                  real(rng->gaussian(0, noise_std))};
    obs.points.push_back(pts);
    obs.visible.emplace_back(offsets.size(), std::uint8_t(1));
  }
  return obs;
}

// RMSE over all angular coordinates (root angle + joints), wrapped.
real angle_rmse(const std::vector<body::Pose>& a,
                const std::vector<body::Pose>& b) {
  real sse = 0;
  long n = 0;
  for (size_t i = 0; i < a.size(); ++i) {
    const real da = wrap_angle(a[i].root_ang - b[i].root_ang);
    sse += da * da;
    ++n;
    for (int j = 0; j < a[i].joint_angles.size(); ++j) {
      const real d = wrap_angle(a[i].joint_angles[j] - b[i].joint_angles[j]);
      sse += d * d;
      ++n;
    }
  }
  return std::sqrt(sse / real(n));
}

real root_rmse(const std::vector<body::Pose>& a,
               const std::vector<body::Pose>& b) {
  real sse = 0;
  for (size_t i = 0; i < a.size(); ++i)
    sse += (a[i].root_pos - b[i].root_pos).squaredNorm();
  return std::sqrt(sse / real(a.size()));
}

real offset_rmse(const body::MarkerSet& a, const body::MarkerSet& b) {
  real sse = 0;
  for (int m = 0; m < a.size(); ++m)
    sse += (a.markers[m].offset - b.markers[m].offset).squaredNorm();
  return std::sqrt(sse / real(a.size()));
}

// A moderately bent reference pose, well inside every joint limit.
body::Pose bent_pose(const body::BodyModel& body) {
  body::Pose p = body::null_pose(body);
  p.root_pos = {real(0.31), real(0.94)};
  p.root_ang = real(0.18);
  for (int j = 0; j < body.n_joints(); ++j)
    p.joint_angles[j] = real(0.4) * std::sin(real(0.9) * j + real(0.3));
  return body::clamp_to_limits(body, p);
}

std::vector<body::Pose> rom_poses(const body::BodyModel& body, int stride = 1,
                                  int max_frames = 1 << 20) {
  const auto clip = ref::range_of_motion_clip(body);
  std::vector<body::Pose> poses;
  for (int k = 0; k < clip.n_frames() && int(poses.size()) < max_frames;
       k += stride)
    poses.push_back(clip.frames[k].pose);
  return poses;
}

body::MarkerSet zero_offsets(const body::MarkerSet& layout) {
  body::MarkerSet z = layout;
  for (auto& m : z.markers) m.offset = {0, 0};
  return z;
}

}  // namespace

TEST_SUITE("stac") {

TEST_CASE("pose solve recovers a known pose from the null init") {
  const auto body = body::default_body();
  const auto offsets = body::default_markers(body);
  const body::Pose truth = bent_pose(body);
  const auto points = body::forward_kinematics(body, truth, offsets);
  const std::vector<std::uint8_t> vis(offsets.size(), 1);

  const auto solved = stac::solve_pose_frame(body, points, vis, offsets,
                                             body::null_pose(body));
  CHECK(solved.converged);
  std::vector<body::Pose> got{solved.pose}, want{truth};
  CHECK(angle_rmse(got, want) < 1e-3);
  CHECK((solved.pose.root_pos - truth.root_pos).norm() < 1e-3);
  CHECK(solved.marker_sse < 1e-12);

  // The recorded objective never increases across accepted iterations.
  REQUIRE(solved.history.size() >= 2);
  for (size_t i = 1; i < solved.history.size(); ++i)
    CHECK(solved.history[i] <= solved.history[i - 1] + 1e-15);
}

TEST_CASE("zero visible markers returns the init with nulled joints") {
  const auto body = body::default_body();
  const auto offsets = body::default_markers(body);
  body::Pose init = body::null_pose(body);
  init.root_pos = {real(1.2), real(0.7)};
  init.root_ang = real(0.5);
  init.joint_angles.setConstant(real(0.3));

  const std::vector<Vec2> points(offsets.size(), Vec2{0, 0});
  const std::vector<std::uint8_t> vis(offsets.size(), 0);
  const auto solved =
      stac::solve_pose_frame(body, points, vis, offsets, init);
  CHECK(solved.iterations == 0);
  CHECK(solved.pose.root_pos == init.root_pos);
  CHECK(solved.pose.root_ang == init.root_ang);
  CHECK(solved.pose.joint_angles.cwiseAbs().maxCoeff() == 0);
  CHECK(solved.residual == 0);
}

TEST_CASE("warm start at the truth converges immediately") {
  const auto body = body::default_body();
  const auto offsets = body::default_markers(body);
  const body::Pose truth = bent_pose(body);
  const auto points = body::forward_kinematics(body, truth, offsets);
  const std::vector<std::uint8_t> vis(offsets.size(), 1);

  const auto solved =
      stac::solve_pose_frame(body, points, vis, offsets, truth);
  CHECK(solved.converged);
  CHECK(solved.iterations <= 2);
  CHECK(solved.residual < 1e-10);
}

TEST_CASE("capped iterations return the best iterate unconverged") {
  const auto body = body::default_body();
  const auto offsets = body::default_markers(body);
  const body::Pose truth = bent_pose(body);
  const auto points = body::forward_kinematics(body, truth, offsets);
  const std::vector<std::uint8_t> vis(offsets.size(), 1);

  stac::StacConfig config;
  config.max_iterations = 1;
  const auto solved = stac::solve_pose_frame(body, points, vis, offsets,
                                             body::null_pose(body), config);
  CHECK_FALSE(solved.converged);
  CHECK(solved.iterations == 1);
  CHECK(solved.history.back() <= solved.history.front());
}

TEST_CASE("offset solve is exact on noiseless data") {
  const auto body = body::default_body();
  const auto truth = body::default_markers(body);
  const auto poses = rom_poses(body, 5);
  const auto obs = synth(body, poses, truth);

  const auto solved =
      stac::solve_marker_offsets(body, poses, obs, zero_offsets(truth));
  for (int m = 0; m < truth.size(); ++m) {
    CHECK(solved.markers[m].link == truth.markers[m].link);
    CHECK((solved.markers[m].offset - truth.markers[m].offset).norm() < 1e-6);
  }
}

TEST_CASE("single frame leaves offsets under-determined") {
  const auto body = body::default_body();
  const auto truth = body::default_markers(body);
  const std::vector<body::Pose> one{bent_pose(body)};
  const auto obs = synth(body, one, truth);
  CHECK_THROWS_WITH_AS(
      stac::solve_marker_offsets(body, one, obs, truth),
      doctest::Contains("under-determined"), NumericError);

  // Repeating the same frame adds no orientation diversity.
  std::vector<body::Pose> twice{one[0], one[0]};
  const auto obs2 = synth(body, twice, truth);
  try {
    stac::solve_marker_offsets(body, twice, obs2, truth);
    FAIL("expected NumericError");
  } catch (const NumericError& e) {
    const std::string what = e.what();
    CHECK(what.find("marker 0") != std::string::npos);
    CHECK(what.find(body.links[0].name) != std::string::npos);
  }
}

TEST_CASE("5 mm marker noise keeps offset error under 3 mm") {
  const auto body = body::default_body();
  const auto truth = body::default_markers(body);
  const auto poses = rom_poses(body, 2);
  REQUIRE(poses.size() >= 50);

  for (unsigned seed : {11u, 12u, 13u, 14u, 15u}) {
    Rng rng(seed);
    const auto obs = synth(body, poses, truth, real(0.005), &rng);
    const auto solved =
        stac::solve_marker_offsets(body, poses, obs, zero_offsets(truth));
    for (int m = 0; m < truth.size(); ++m)
      CHECK((solved.markers[m].offset - truth.markers[m].offset).norm() <
            3e-3);
  }
}

TEST_CASE("full synthetic pipeline recovers poses and offsets") {
  const auto body = body::default_body();
  const auto truth = body::default_markers(body);

  // Init offsets: truth perturbed by 1-3 cm per marker.
  Rng rng(41);
  body::MarkerSet init = truth;
  for (auto& m : init.markers) {
    const real ang = real(rng.uniform(0.0, 2.0 * kPi));
    const real mag = real(rng.uniform(0.01, 0.03));
    m.offset += mag * Vec2{std::cos(ang), std::sin(ang)};
  }

  Rng wrng(42);
  const auto walk = ref::generate_reference_clip(
      body, ref::Behavior::kWalk, ref::HeightTag::kFloor, {}, wrng);
  std::vector<body::Pose> walk_poses;
  for (int k = 0; k < 60; ++k) walk_poses.push_back(walk.frames[k].pose);
  const auto rom = rom_poses(body);

  const std::vector<stac::MarkerObservations> takes{
      synth(body, walk_poses, truth), synth(body, rom, truth)};
  const auto result = stac::run_stac(body, takes, 1, init);

  CHECK(angle_rmse(result.trajectories[0], walk_poses) < 5e-3);
  CHECK(angle_rmse(result.trajectories[1], rom) < 5e-3);
  CHECK(root_rmse(result.trajectories[0], walk_poses) < 5e-3);
  CHECK(root_rmse(result.trajectories[1], rom) < 5e-3);
  CHECK(offset_rmse(result.offsets, truth) < 2e-3);

  // Report: residual never increases across the three stages.
  const auto& rep = result.report;
  CHECK(rep.rms_stage1 >= rep.rms_stage2 - 1e-12);
  CHECK(rep.rms_stage2 >= rep.rms_stage3 - 1e-12);
  CHECK(rep.rom_frames_used == (int(rom.size()) + 1) / 2);
  CHECK(rep.iterations_stage1 > 0);
  CHECK(rep.iterations_stage3 > 0);
  CHECK(rep.summary().find("stage") != std::string::npos);
}

TEST_CASE("ground-truth init makes the offset stage a no-op") {
  const auto body = body::default_body();
  const auto truth = body::default_markers(body);
  const auto rom = rom_poses(body, 2);
  const std::vector<stac::MarkerObservations> takes{synth(body, rom, truth)};

  const auto result = stac::run_stac(body, takes, 0, truth);
  for (int m = 0; m < truth.size(); ++m)
    CHECK((result.offsets.markers[m].offset - truth.markers[m].offset)
              .norm() < 1e-6);
  CHECK(result.report.rms_stage3 < 1e-8);
}

TEST_CASE("warm starting reduces total pose-solve iterations") {
  const auto body = body::default_body();
  const auto offsets = body::default_markers(body);
  const auto poses = rom_poses(body, 1, 100);
  REQUIRE(poses.size() == 100);
  const auto obs = synth(body, poses, offsets);

  int warm = 0, cold = 0;
  body::Pose prev = body::null_pose(body);
  for (int i = 0; i < obs.n_frames(); ++i) {
    const auto w = stac::solve_pose_frame(body, obs.points[i], obs.visible[i],
                                          offsets, prev);
    warm += w.iterations;
    prev = w.pose;
    const auto c = stac::solve_pose_frame(body, obs.points[i], obs.visible[i],
                                          offsets, body::null_pose(body));
    cold += c.iterations;
  }
  CHECK(warm < cold);
}

TEST_CASE("translating observations translates only the root") {
  const auto body = body::default_body();
  const auto truth = body::default_markers(body);
  const auto rom = rom_poses(body, 4);
  const Vec2 shift{real(3.7), real(-1.1)};

  auto base = synth(body, rom, truth);
  auto moved = base;
  for (auto& frame : moved.points)
    for (auto& p : frame) p += shift;

  const auto a = stac::run_stac(body, {base}, 0, truth);
  const auto b = stac::run_stac(body, {moved}, 0, truth);

  for (size_t i = 0; i < rom.size(); ++i) {
    const auto& pa = a.trajectories[0][i];
    const auto& pb = b.trajectories[0][i];
    CHECK((pb.root_pos - pa.root_pos - shift).norm() < 1e-9);
    CHECK(std::abs(wrap_angle(pb.root_ang - pa.root_ang)) < 1e-9);
    CHECK((pb.joint_angles - pa.joint_angles).cwiseAbs().maxCoeff() < 1e-9);
  }
  for (int m = 0; m < truth.size(); ++m)
    CHECK((b.offsets.markers[m].offset - a.offsets.markers[m].offset).norm() <
          1e-9);
}

TEST_CASE("observe_poses matches the kinematics and respects the seed") {
  const auto body = body::default_body();
  const auto offsets = body::default_markers(body);
  const std::vector<body::Pose> poses{bent_pose(body), body::null_pose(body)};

  const auto clean = stac::observe_poses(body, poses, offsets);
  for (size_t i = 0; i < poses.size(); ++i) {
    const auto want = body::forward_kinematics(body, poses[i], offsets);
    for (int m = 0; m < offsets.size(); ++m)
      CHECK((clean.points[i][m] - want[m]).norm() == 0);
  }

  Rng r1(5), r2(5), r3(6);
  const auto n1 = stac::observe_poses(body, poses, offsets, real(0.01), &r1);
  const auto n2 = stac::observe_poses(body, poses, offsets, real(0.01), &r2);
  const auto n3 = stac::observe_poses(body, poses, offsets, real(0.01), &r3);
  CHECK(n1.points[0][0] == n2.points[0][0]);
  CHECK(n1.points[0][0] != n3.points[0][0]);
  CHECK((n1.points[0][0] - clean.points[0][0]).norm() > 0);
  CHECK((n1.points[0][0] - clean.points[0][0]).norm() < real(0.1));

  CHECK_THROWS_AS(stac::observe_poses(body, poses, offsets, real(0.01)),
                  ConfigError);
}

TEST_CASE("config and observation validation reject bad input") {
  stac::StacConfig config;
  config.lambda_null = -1;
  CHECK_THROWS_AS(config.validate(), ConfigError);
  config = {};
  config.tol = 0;
  CHECK_THROWS_AS(config.validate(), ConfigError);
  config = {};
  config.max_iterations = 0;
  CHECK_THROWS_AS(config.validate(), ConfigError);
  config = {};
  config.rom_stride = 0;
  CHECK_THROWS_AS(config.validate(), ConfigError);

  stac::MarkerObservations obs;
  CHECK_THROWS_AS(obs.validate(), ConfigError);
  obs.points = {{Vec2{0, 0}, Vec2{1, 1}}, {Vec2{0, 0}}};
  obs.visible = {{1, 1}, {1}};
  CHECK_THROWS_AS(obs.validate(), ConfigError);

  const real nan = std::numeric_limits<real>::quiet_NaN();
  obs.points = {{Vec2{0, 0}, Vec2{nan, 0}}};
  obs.visible = {{1, 1}};
  CHECK_THROWS_AS(obs.validate(), NumericError);
  obs.visible = {{1, 0}};  // occluded garbage is allowed
  CHECK_NOTHROW(obs.validate());

  const auto body = body::default_body();
  const auto offsets = body::default_markers(body);
  CHECK_THROWS_AS(stac::run_stac(body, {}, 0, offsets), ConfigError);
  const auto rom = rom_poses(body, 8);
  const auto take = synth(body, rom, offsets);
  CHECK_THROWS_AS(stac::run_stac(body, {take}, 1, offsets), ConfigError);
  CHECK_THROWS_AS(stac::run_stac(body, {take}, -1, offsets), ConfigError);
}

}  // TEST_SUITE
