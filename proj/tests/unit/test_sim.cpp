#include <doctest.h>

#include <cmath>

#include "motorkit/body/body.hpp"
#include "motorkit/body/kinematics.hpp"
#include "motorkit/rng.hpp"
#include "motorkit/sim/simulation.hpp"

using namespace motorkit;
using namespace motorkit::sim;

namespace {

// Closed-form constant-gravity flight, the oracle for everything ballistic.
Vec2 ballistic(const Vec2& p0, const Vec2& v0, double g, double t) {
  return {p0.x() + v0.x() * t, p0.y() + v0.y() * t - 0.5 * g * t * t};
}

body::Pose airborne_pose(Rng* rng, const body::BodyModel& body) {
  body::Pose pose;
  pose.root_pos = {rng->uniform(-1, 1), rng->uniform(2, 4)};
  pose.root_ang = rng->uniform(-0.8, 0.8);
  pose.joint_angles.resize(body.n_joints());
  for (int j = 0; j < body.n_joints(); ++j) {
    pose.joint_angles[j] = rng->uniform(0.8 * body.joints[j].limit_lo,
                                        0.8 * body.joints[j].limit_hi);
  }
  return pose;
}

body::Velocities random_vel(Rng* rng, const body::BodyModel& body, double scale) {
  body::Velocities vel;
  vel.root_vel = {rng->uniform(-scale, scale), rng->uniform(-scale, scale)};
  vel.root_angvel = rng->uniform(-scale, scale);
  vel.joint_vel.resize(body.n_joints());
  for (int j = 0; j < body.n_joints(); ++j)
    vel.joint_vel[j] = rng->uniform(-scale, scale);
  return vel;
}

Vec2 center_of_mass(const body::BodyModel& body, const body::Pose& pose,
                    real* total_mass = nullptr) {
  const auto frames = body::forward_frames(body, pose);
  Vec2 weighted = Vec2::Zero();
  real mass = 0;
  for (int l = 0; l < body.n_links(); ++l) {
    weighted += body.links[l].mass *
                body::point_on_link(frames, l, {body.links[l].length / 2, 0});
    mass += body.links[l].mass;
  }
  if (total_mass) *total_mass = mass;
  return weighted / mass;
}

// Gravitational potential, for the finite-difference bias oracle.
real potential(const body::BodyModel& body, const body::Pose& pose, real g) {
  real total_mass = 0;
  const Vec2 com = center_of_mass(body, pose, &total_mass);
  return total_mass * g * com.y();
}

real max_ground_penetration(const Simulation& sim, const SimState& state) {
  const auto frames = body::forward_frames(sim.body(), state.pose);
  real worst = 0;
  const auto contacts =
      detect_contacts(sim.body(), frames, sim.props(), state.props);
  for (const auto& c : contacts) worst = std::max(worst, c.depth);
  return worst;
}

VecX zero_action(const body::BodyModel& body) {
  return VecX::Zero(body.n_joints());
}

}  // namespace

TEST_SUITE("sim") {

TEST_CASE("free ball follows closed-form ballistics") {
  PropSpec ball;
  ball.kind = PropKind::kBall;
  ball.radius = real(0.1);
  ball.mass = real(0.5);
  Simulation sim(body::default_body(), {ball});

  body::Pose pose = body::null_pose(sim.body());
  pose.root_pos.x() = -5;  // keep the walker away from the flight path
  SimState s = sim.initial_state(pose, body::Velocities::zero(sim.body()));
  const Vec2 p0{0, 3}, v0{1.5, 3.0};
  s.props[0].pos = p0;
  s.props[0].vel = v0;

  const int steps = 100;  // 0.5 s of physics
  for (int i = 0; i < steps; ++i) s = sim.substep(s, zero_action(sim.body()));
  const double t = steps * double(sim.config().dt);
  const Vec2 expect = ballistic(p0, v0, 9.8, t);
  // Spec of the integrator: within 1% of the closed form. The trapezoidal
  // position update makes constant-gravity flight essentially exact.
  CHECK(std::abs(s.props[0].pos.y() - expect.y()) < 0.01 * std::abs(expect.y()));
  CHECK(std::abs(s.props[0].pos.y() - expect.y()) < 1e-9);
  CHECK(std::abs(s.props[0].pos.x() - expect.x()) < 1e-9);
  CHECK(std::abs(s.props[0].vel.y() - (v0.y() - 9.8 * t)) < 1e-9);
}

TEST_CASE("zero gravity, zero action, zero velocity is a fixed point") {
  SimConfig config;
  config.gravity = 0;
  PropSpec box;
  box.kind = PropKind::kBox;
  box.half_extents = {real(0.15), real(0.1)};
  box.mass = 3;
  Simulation sim(body::default_body(), {box}, config);

  SimState s = sim.initial_state(body::null_pose(sim.body()),
                                 body::Velocities::zero(sim.body()));
  s.props[0].pos = {1.0, real(0.1)};  // resting exactly on the ground

  const VecX q0 = s.pose.flat();
  SimState cur = s;
  for (int i = 0; i < 3; ++i) cur = sim.control_step(cur, zero_action(sim.body()));
  CHECK((cur.pose.flat() - q0).cwiseAbs().maxCoeff() == 0);
  CHECK(cur.vel.flat().cwiseAbs().maxCoeff() == 0);
  CHECK((cur.props[0].pos - s.props[0].pos).cwiseAbs().maxCoeff() == 0);
  CHECK(cur.props[0].vel.cwiseAbs().maxCoeff() == 0);
}

TEST_CASE("actuator torques saturate and map actions onto the limit range") {
  Simulation sim(body::default_body(), {});
  SimState s = sim.initial_state(body::null_pose(sim.body()),
                                 body::Velocities::zero(sim.body()));
  const auto& joints = sim.body().joints;

  VecX action = zero_action(sim.body());
  action[0] = 1;  // torso joint: kp * limit_hi exceeds tau_max
  VecX tau = sim.actuator_torques(s, action);
  CHECK(tau[0] == doctest::Approx(joints[0].tau_max));

  action[0] = 7;  // out-of-range input behaves like +1
  CHECK(sim.actuator_torques(s, action)[0] == doctest::Approx(joints[0].tau_max));

  // Mid-range action against a displaced joint: plain PD law by hand.
  action.setZero();
  action[1] = real(0.5);
  s.pose.joint_angles[1] = real(0.2);
  s.vel.joint_vel[1] = real(-1.0);
  const auto& j = joints[1];
  const real target = j.limit_lo + real(0.75) * (j.limit_hi - j.limit_lo);
  const real expect = std::clamp(j.kp * (target - real(0.2)) - j.kd * real(-1.0),
                                 -j.tau_max, j.tau_max);
  CHECK(sim.actuator_torques(s, action)[1] == doctest::Approx(expect).epsilon(1e-12));

  for (int j2 = 0; j2 < sim.body().n_joints(); ++j2) {
    VecX a = zero_action(sim.body());
    a[j2] = 1;
    CHECK(std::abs(sim.actuator_torques(s, a)[j2]) <= joints[j2].tau_max + 1e-12);
  }
}

TEST_CASE("free props conserve momentum without gravity or contacts") {
  SimConfig config;
  config.gravity = 0;
  PropSpec ball;
  ball.kind = PropKind::kBall;
  ball.radius = real(0.12);
  ball.mass = 2;
  PropSpec box;
  box.kind = PropKind::kBox;
  box.half_extents = {real(0.2), real(0.15)};
  box.mass = 4;
  Simulation sim(body::default_body(), {ball, box}, config);

  SimState s = sim.initial_state(body::null_pose(sim.body()),
                                 body::Velocities::zero(sim.body()));
  s.props[0] = {{0, 5}, 0, {real(0.3), real(-0.2)}, real(2.0)};
  s.props[1] = {{10, 5}, real(0.4), {real(-1.0), real(0.5)}, real(-3.0)};
  const auto init = s.props;

  for (int i = 0; i < 200; ++i) {
    s = sim.substep(s, zero_action(sim.body()));
    for (int p = 0; p < 2; ++p) {
      CHECK((s.props[p].vel - init[p].vel).cwiseAbs().maxCoeff() < 1e-10);
      CHECK(std::abs(s.props[p].angvel - init[p].angvel) < 1e-10);
    }
  }
  const double t = 200 * double(sim.config().dt);
  CHECK((s.props[0].pos - (init[0].pos + real(t) * init[0].vel)).norm() < 1e-9);
  CHECK(std::abs(s.props[1].ang - (init[1].ang + real(t) * init[1].angvel)) < 1e-9);
}

TEST_CASE("mass matrix is symmetric and reproduces kinetic energy") {
  Simulation sim(body::default_body(), {});
  Rng rng(314);
  for (int trial = 0; trial < 30; ++trial) {
    const body::Pose pose = airborne_pose(&rng, sim.body());
    const body::Velocities vel = random_vel(&rng, sim.body(), 2.0);
    const SimState s = sim.initial_state(pose, vel);

    const MatX M = sim.mass_matrix(s);
    CHECK((M - M.transpose()).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(M.ldlt().info() == Eigen::Success);

    // Independent path: per-link velocities from the kinematic recursion.
    const VecX v = vel.flat();
    const real quadratic = real(0.5) * v.dot(M * v);
    const real recursive = sim.kinetic_energy(s);
    CHECK(std::abs(quadratic - recursive) <
          1e-10 * std::max(real(1), std::abs(recursive)));
  }
}

TEST_CASE("bias forces match a finite-difference Lagrangian oracle") {
  Simulation sim(body::default_body(), {});
  Rng rng(2718);
  const int nq = sim.body().nq();
  const real g = sim.config().gravity;
  const real eps = real(1e-6);

  auto mass_at = [&](const VecX& q) {
    SimState s = sim.initial_state(body::Pose::from_flat(q),
                                   body::Velocities::zero(sim.body()));
    return sim.mass_matrix(s);
  };

  for (int trial = 0; trial < 20; ++trial) {
    const body::Pose pose = airborne_pose(&rng, sim.body());
    const body::Velocities vel = random_vel(&rng, sim.body(), 2.0);
    const VecX q = pose.flat();
    const VecX v = vel.flat();

    // bias = dM/dt v - 1/2 d(v'Mv)/dq + dV/dq, all by central differences.
    const MatX dM = (mass_at(q + eps * v) - mass_at(q - eps * v)) / (2 * eps);
    VecX oracle = dM * v;
    for (int k = 0; k < nq; ++k) {
      VecX qp = q, qm = q;
      qp[k] += eps;
      qm[k] -= eps;
      const real ep = v.dot(mass_at(qp) * v);
      const real em = v.dot(mass_at(qm) * v);
      oracle[k] -= real(0.25) * (ep - em) / eps;  // 1/2 of the central diff
      const real vp = potential(sim.body(), body::Pose::from_flat(qp), g);
      const real vm = potential(sim.body(), body::Pose::from_flat(qm), g);
      oracle[k] += (vp - vm) / (2 * eps);
    }

    const VecX bias = sim.bias_forces(sim.initial_state(pose, vel));
    const real scale = std::max(real(1), oracle.cwiseAbs().maxCoeff());
    CHECK((bias - oracle).cwiseAbs().maxCoeff() / scale < 1e-5);
  }
}

TEST_CASE("airborne center of mass follows a parabola") {
  Simulation sim(body::default_body(), {});
  Rng rng(99);
  body::Pose pose = body::null_pose(sim.body());
  pose.root_pos = {0, 3};
  body::Velocities vel = random_vel(&rng, sim.body(), 1.5);
  vel.root_vel = {1.0, 2.0};

  real mass = 0;
  const Vec2 com0 = center_of_mass(sim.body(), pose, &mass);
  // Whole-body momentum / mass = com velocity; compute it from the same
  // kinematics used by the energy test.
  const auto frames = body::forward_frames(sim.body(), pose);
  const auto fv = body::frame_velocities(sim.body(), frames, vel);
  Vec2 momentum = Vec2::Zero();
  for (int l = 0; l < sim.body().n_links(); ++l) {
    momentum += sim.body().links[l].mass *
                body::point_velocity(frames, fv, l,
                                     {sim.body().links[l].length / 2, 0});
  }
  const Vec2 vcom0 = momentum / mass;

  SimState s = sim.initial_state(pose, vel);
  for (int i = 0; i < 60; ++i) {
    s = sim.substep(s, zero_action(sim.body()));
    const double t = double(s.time);
    const Vec2 expect = ballistic(com0, vcom0, double(sim.config().gravity), t);
    CHECK((center_of_mass(sim.body(), s.pose) - expect).norm() < 1e-3);
  }
}

TEST_CASE("standing walker holds the rest pose with bounded penetration") {
  Simulation sim(body::default_body(), {});
  SimState s = sim.initial_state(body::null_pose(sim.body()),
                                 body::Velocities::zero(sim.body()));
  const int head = sim.body().head_link;
  const real head_len = sim.body().links[head].length;

  real worst_pen = 0;
  for (int i = 0; i < 60; ++i) {  // 2 s at 30 Hz
    s = sim.control_step(s, zero_action(sim.body()));
    worst_pen = std::max(worst_pen, max_ground_penetration(sim, s));
  }
  const auto frames = body::forward_frames(sim.body(), s.pose);
  const Vec2 head_top = body::point_on_link(frames, head, {head_len, 0});
  CHECK(head_top.y() > 1.3);
  CHECK(worst_pen < real(0.005));
  const auto report = sim.contact_report(s);
  CHECK(report.foot_ground > 0);
  CHECK(report.nonfoot_ground == 0);
  CHECK(s.vel.flat().cwiseAbs().maxCoeff() < 0.5);  // settled, not oscillating
}

TEST_CASE("arms support the heaviest box while balancing") {
  PropSpec box;
  box.kind = PropKind::kBox;
  box.half_extents = {real(0.12), real(0.1)};
  box.mass = 7;  // heaviest task variation
  Simulation sim(body::default_body(), {box});

  // Arms raised past horizontal (joints 2/4 are the shoulders) with the box
  // resting on them, plus a two-term ankle reflex for balance — open-loop
  // standing under a 7 kg offset load is an inverted pendulum past its
  // static margin, and the simulator only owes us controllability.
  const real q_sh = real(1.8);
  body::Pose pose = body::null_pose(sim.body());
  pose.joint_angles[2] = q_sh;
  pose.joint_angles[4] = q_sh;
  VecX action = zero_action(sim.body());
  action[2] = q_sh / 3;
  action[4] = q_sh / 3;

  SimState s = sim.initial_state(pose, body::Velocities::zero(sim.body()));
  const auto frames = body::forward_frames(sim.body(), pose);
  const Vec2 shoulder = frames.origin[3];
  const real arm_ang = q_sh - real(kPi / 2);
  const Vec2 dir{std::cos(arm_ang), std::sin(arm_ang)};
  const Vec2 up{-std::sin(arm_ang), std::cos(arm_ang)};
  s.props[0].pos = shoulder + real(0.30) * dir +
                   (real(0.035) + box.half_extents.y()) * up;
  s.props[0].ang = arm_ang;

  real worst_pen = 0;
  for (int i = 0; i < 90; ++i) {  // 3 s, measuring steady state after 1.5 s
    const real reflex = std::clamp(
        2 * s.pose.root_ang + real(0.5) * s.vel.root_angvel, real(-0.6), real(0.6));
    action[8] = reflex;
    action[11] = reflex;
    s = sim.control_step(s, action);
    if (i >= 45) worst_pen = std::max(worst_pen, max_ground_penetration(sim, s));
  }
  CHECK(s.props[0].pos.y() > 1.3);  // still resting on the arms, not dropped
  CHECK(sim.contact_report(s).walker_box > 0);
  const auto end_frames = body::forward_frames(sim.body(), s.pose);
  const int head = sim.body().head_link;
  CHECK(body::point_on_link(end_frames, head,
                            {sim.body().links[head].length, 0})
            .y() > 1.4);
  CHECK(worst_pen < real(0.005));  // penetration bound holds under load
}

TEST_CASE("box rests on a tilted pedestal without creeping") {
  const real tilt = real(0.25);  // tan(0.25) well inside the friction cone
  PropSpec ped;
  ped.kind = PropKind::kPedestal;
  ped.half_extents = {real(0.5), real(0.08)};
  PropSpec box;
  box.kind = PropKind::kBox;
  box.half_extents = {real(0.1), real(0.08)};
  box.mass = 3;
  Simulation sim(body::default_body(), {ped, box});

  body::Pose pose = body::null_pose(sim.body());
  pose.root_pos.x() = -5;
  SimState s = sim.initial_state(pose, body::Velocities::zero(sim.body()));
  s.props[0].pos = {0, real(0.4)};
  s.props[0].ang = tilt;
  const Mat2 R = rot2(tilt);
  s.props[1].pos = Vec2{0, real(0.4)} + R * Vec2{0, real(0.16)};
  s.props[1].ang = tilt;

  // Let the penalty springs settle, then demand a static hold.
  for (int i = 0; i < 100; ++i) s = sim.substep(s, zero_action(sim.body()));
  const Vec2 settled = s.props[1].pos;
  for (int i = 0; i < 400; ++i) s = sim.substep(s, zero_action(sim.body()));
  CHECK((s.props[1].pos - settled).norm() < 1e-3);
  CHECK(std::abs(s.props[1].ang - tilt) < 0.02);
}

TEST_CASE("stepping is deterministic and seed-sensitive") {
  PropSpec ball;
  ball.kind = PropKind::kBall;
  ball.radius = real(0.1);
  ball.mass = 1;
  Simulation sim(body::default_body(), {ball});
  VecX action = VecX::Constant(sim.body().n_joints(), real(0.3));

  auto rollout = [&](uint64_t seed) {
    Rng rng(seed);
    SimState s = sim.initial_state(body::null_pose(sim.body()),
                                   body::Velocities::zero(sim.body()));
    s.props[0].pos = {0.6, 2.0};
    for (int i = 0; i < 50; ++i) s = sim.control_step(s, action, &rng);
    return s;
  };

  const SimState a = rollout(7), b = rollout(7), c = rollout(8);
  CHECK((a.pose.flat() - b.pose.flat()).cwiseAbs().maxCoeff() == 0);
  CHECK((a.vel.flat() - b.vel.flat()).cwiseAbs().maxCoeff() == 0);
  CHECK((a.props[0].pos - b.props[0].pos).cwiseAbs().maxCoeff() == 0);
  CHECK((a.pose.flat() - c.pose.flat()).cwiseAbs().maxCoeff() > 0);
}

TEST_CASE("raycast reports first-hit distances") {
  PropSpec ball;
  ball.kind = PropKind::kBall;
  ball.radius = real(0.3);
  ball.mass = 1;
  PropSpec box;
  box.kind = PropKind::kBox;
  box.half_extents = {real(0.2), real(0.1)};
  box.mass = 1;
  PropSpec bucket;
  bucket.kind = PropKind::kBucket;
  bucket.half_extents = {real(0.3), real(0.4)};  // inner half-width, wall height
  Simulation sim(body::default_body(), {ball, box, bucket});

  body::Pose pose = body::null_pose(sim.body());
  pose.root_pos.x() = -3;
  SimState s = sim.initial_state(pose, body::Velocities::zero(sim.body()));
  s.props[0].pos = {2, 1};
  s.props[1].pos = {1, real(0.1)};
  s.props[2].pos = {5, 0};

  CHECK(sim.raycast(s, {0, 1}, {0, -1}, 10) == doctest::Approx(1.0));
  CHECK(sim.raycast(s, {0, 1}, {1, 0}, 10) == doctest::Approx(1.7));
  CHECK(sim.raycast(s, {0, 0.05}, {1, 0}, 10) == doctest::Approx(0.8));
  CHECK(sim.raycast(s, {0, 5}, {1, 0}, 10) == doctest::Approx(10.0));  // miss
  // Bucket: left wall outer face at x = 5 - 0.3 - 0.06 = 4.64, origin at 3.
  CHECK(sim.raycast(s, {3, 0.2}, {1, 0}, 10) == doctest::Approx(1.64));
  // From above the bucket interior: bottom slab top face at y = wall 0.03.
  CHECK(sim.raycast(s, {5, 0.5}, {0, -1}, 10) == doctest::Approx(0.47));
  // The walker is transparent to rays: looking through it still sees the box.
  CHECK(sim.raycast(s, {-4, 0.1}, {1, 0}, 10) ==
        doctest::Approx(4.8));  // box left face at x = 0.8
}

TEST_CASE("contact report flags the expected pairs") {
  PropSpec ball;
  ball.kind = PropKind::kBall;
  ball.radius = real(0.1);
  ball.mass = 1;
  PropSpec box;
  box.kind = PropKind::kBox;
  box.half_extents = {real(0.1), real(0.1)};
  box.mass = 3;
  PropSpec ped;
  ped.kind = PropKind::kPedestal;
  ped.half_extents = {real(0.3), real(0.2)};
  Simulation sim(body::default_body(), {ball, box, ped});

  body::Pose pose = body::null_pose(sim.body());
  pose.root_pos.y() -= real(0.001);  // press the soles 1 mm into the ground
  SimState s = sim.initial_state(pose, body::Velocities::zero(sim.body()));
  s.props[0].pos = {3, 2};           // airborne ball
  s.props[1].pos = {6, real(0.35)};  // floating box, clear of everything
  s.props[2].pos = {9, real(0.2)};

  auto r = sim.contact_report(s);
  CHECK(r.ball_ground == 0);
  CHECK(r.ball_walker == 0);
  CHECK(r.ball_bucket_bottom == 0);
  CHECK(r.foot_ground > 0);
  CHECK(r.nonfoot_ground == 0);
  CHECK_FALSE(r.hand_touch[0]);
  CHECK_FALSE(r.hand_touch[1]);

  // Ball pressed 1 mm into the ground.
  s.props[0].pos = {3, real(0.099)};
  r = sim.contact_report(s);
  CHECK(r.ball_ground == 1);

  // Box centered on the hanging hand tips: both hands report touch.
  const auto frames = body::forward_frames(sim.body(), pose);
  const int hand = sim.body().hand_links[0];
  const Vec2 tip = body::point_on_link(
      frames, hand, {sim.body().links[hand].length, 0});
  s.props[1].pos = tip;
  r = sim.contact_report(s);
  CHECK(r.hand_touch[0]);
  CHECK(r.hand_touch[1]);
  CHECK(r.walker_box > 0);
  CHECK(r.hand_box_count(0, 1) > 0);
}

TEST_CASE("box settling flat on a pedestal makes at least four contact points") {
  PropSpec box;
  box.kind = PropKind::kBox;
  box.half_extents = {real(0.12), real(0.1)};
  box.mass = 3;
  PropSpec ped;
  ped.kind = PropKind::kPedestal;
  ped.half_extents = {real(0.3), real(0.25)};
  Simulation sim(body::default_body(), {box, ped});

  body::Pose pose = body::null_pose(sim.body());
  pose.root_pos.x() = -5;
  SimState s = sim.initial_state(pose, body::Velocities::zero(sim.body()));
  s.props[1].pos = {1, real(0.25)};               // pedestal top at 0.5
  s.props[0].pos = {1, real(0.5 + 0.1 + 0.02)};   // drop from 2 cm above

  for (int i = 0; i < 300; ++i) s = sim.substep(s, zero_action(sim.body()));
  const auto r = sim.contact_report(s);
  CHECK(r.box_pedestal_count(0, 1) >= 4);
  CHECK(r.box_ground_count(0) == 0);
  CHECK(std::abs(s.props[0].pos.x() - 1) < 0.02);  // did not slide off
}

TEST_CASE("joint limit springs cap overshoot") {
  Simulation sim(body::default_body(), {});
  SimState s = sim.initial_state(body::null_pose(sim.body()),
                                 body::Velocities::zero(sim.body()));
  VecX tau = zero_action(sim.body());
  tau[1] = sim.body().joints[1].tau_max;  // drive the neck into its stop

  real worst = 0;
  for (int i = 0; i < 120; ++i) {
    s = sim.substep(s, tau);
    worst = std::max(worst, std::abs(s.pose.joint_angles[1]));
  }
  CHECK(worst > sim.body().joints[1].limit_hi);  // it does reach the stop
  CHECK(worst < sim.body().joints[1].limit_hi + real(0.35));
}

TEST_CASE("diverging states raise a numeric error") {
  Simulation sim(body::default_body(), {});
  SimState s = sim.initial_state(body::null_pose(sim.body()),
                                 body::Velocities::zero(sim.body()));
  s.vel.root_vel = {real(1e30), 0};
  s.vel.root_angvel = real(1e30);

  CHECK_THROWS_AS(
      [&] {
        for (int i = 0; i < 10; ++i) s = sim.substep(s, zero_action(sim.body()));
      }(),
      NumericError);
}

}  // TEST_SUITE
