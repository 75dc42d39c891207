#pragma once

#include <map>
#include <vector>

#include "motorkit/body/body.hpp"
#include "motorkit/body/proprio.hpp"
#include "motorkit/rng.hpp"
#include "motorkit/sim/contacts.hpp"
#include "motorkit/sim/props.hpp"

namespace motorkit::sim {

struct SimConfig {
  real dt = real(0.005);          // physics step
  int substeps_per_control = 6;   // 30 Hz control
  real gravity = real(9.8);

  // Penalty contact model.
  real contact_kn = real(6e4);    // normal stiffness N/m
  real contact_cn = real(600);    // normal damping
  real contact_kt = real(8e3);    // tangential (stiction) stiffness
  real contact_ct = real(80);     // tangential damping
  real friction_mu = real(0.8);

  // Joint-limit stop springs (damping handled implicitly, so they can be
  // stiff without destabilizing light links).
  real limit_kp = real(2000);
  real limit_kd = real(50);

  real action_noise_std = real(0.1);

  real control_dt() const { return dt * real(substeps_per_control); }
};

struct SimState {
  body::Pose pose;
  body::Velocities vel;
  std::vector<PropState> props;
  real time = 0;
  // Friction anchors (stiction springs), keyed by stable contact ids and
  // stored in the counter-body's local frame.
  std::map<std::uint64_t, Vec2> anchors;
};

// Deterministic planar rigid-body world: articulated walker + free props on
// a flat ground. The instance itself is immutable; all stepping is
// state -> state, so independent copies run safely in parallel.
class Simulation {
 public:
  Simulation(body::BodyModel body, std::vector<PropSpec> props,
             SimConfig config = SimConfig{});

  const body::BodyModel& body() const { return body_; }
  const std::vector<PropSpec>& props() const { return props_; }
  const SimConfig& config() const { return config_; }

  SimState initial_state(const body::Pose& pose, const body::Velocities& vel) const;

  // One 30 Hz control step: optional Gaussian action noise (std =
  // config.action_noise_std, per actuator, clamped back to [-1,1]), then
  // `substeps_per_control` physics steps under the resulting PD targets.
  SimState control_step(const SimState& state, const VecX& action,
                        Rng* noise_rng = nullptr) const;

  // One raw physics step under fixed joint torques (tests/diagnostics).
  SimState substep(const SimState& state, const VecX& joint_torques) const;

  // PD actuator torques for an action in [-1,1]^n (clamped before use).
  VecX actuator_torques(const SimState& state, const VecX& action) const;

  ContactReport contact_report(const SimState& state) const;
  body::TouchBits touch_bits(const SimState& state) const;

  // Distance from `origin` along unit `dir` to the first surface (ground,
  // prop) within max_range; returns max_range on miss. The walker is
  // transparent to its own rays.
  real raycast(const SimState& state, const Vec2& origin, const Vec2& dir,
               real max_range) const;

  // Exposed for validation tests.
  MatX mass_matrix(const SimState& state) const;
  VecX bias_forces(const SimState& state) const;
  real kinetic_energy(const SimState& state) const;

 private:
  struct Forces;  // accumulated generalized + per-prop forces

  SimState substep_impl(const SimState& state, const VecX& joint_torques,
                        const VecX* joint_damping) const;
  void accumulate_contact_forces(const SimState& state,
                                 const body::FrameSet& frames,
                                 const body::FrameVelocities& fvel,
                                 Forces* forces,
                                 std::map<std::uint64_t, Vec2>* anchors) const;

  body::BodyModel body_;
  std::vector<PropSpec> props_;
  SimConfig config_;
};

}  // namespace motorkit::sim
