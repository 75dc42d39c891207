#include "motorkit/sim/simulation.hpp"

#include <cmath>

namespace motorkit::sim {

namespace {
inline real cross2(const Vec2& a, const Vec2& b) {
  return a.x() * b.y() - a.y() * b.x();
}
inline Vec2 perp(const Vec2& v) { return {-v.y(), v.x()}; }

// Rod-with-thickness inertia about the center of mass.
real link_inertia(const body::LinkSpec& l) {
  return l.mass * (l.length * l.length + 4 * l.half_width * l.half_width) / real(12);
}

using Mat3 = Eigen::Matrix<real, 3, 3>;
}  // namespace

struct Simulation::Forces {
  VecX generalized;              // walker, nq rows
  MatX walker_damping;           // nq x nq velocity-derivative of damping terms
  std::vector<Vec2> prop_f;      // per prop
  std::vector<real> prop_n;      // torque about prop com
  std::vector<Mat3> prop_damping;
};

Simulation::Simulation(body::BodyModel body, std::vector<PropSpec> props,
                       SimConfig config)
    : body_(std::move(body)), props_(std::move(props)), config_(config) {
  body_.validate();
  for (const auto& p : props_) p.validate();
  if (config_.dt <= 0 || config_.substeps_per_control <= 0)
    throw ConfigError("sim: non-positive timestep configuration");
}

SimState Simulation::initial_state(const body::Pose& pose,
                                   const body::Velocities& vel) const {
  if (pose.joint_angles.size() != body_.n_joints() ||
      vel.joint_vel.size() != body_.n_joints())
    throw ConfigError("sim: state dimensions do not match the body");
  SimState s;
  s.pose = pose;
  s.vel = vel;
  s.props.resize(props_.size());
  return s;
}

// ----- dynamics ----- //

MatX Simulation::mass_matrix(const SimState& state) const {
  const int nq = body_.nq();
  const body::FrameSet frames = body::forward_frames(body_, state.pose);
  MatX M = MatX::Zero(nq, nq);
  MatX Jv(2, nq);
  VecX Jw(nq);
  for (int l = 0; l < body_.n_links(); ++l) {
    const auto& link = body_.links[l];
    const Vec2 com = body::point_on_link(frames, l, {link.length / 2, 0});
    Jv.setZero();
    Jw.setZero();
    Jv(0, 0) = 1;
    Jv(1, 1) = 1;
    Jv.col(2) = perp(com - state.pose.root_pos);
    Jw[2] = 1;
    for (int i = l; i != 0; i = body_.links[i].parent) {
      Jv.col(3 + i - 1) = perp(com - frames.origin[i]);
      Jw[3 + i - 1] = 1;
    }
    M.noalias() += link.mass * Jv.transpose() * Jv;
    M.noalias() += link_inertia(link) * Jw * Jw.transpose();
  }
  return M;
}

VecX Simulation::bias_forces(const SimState& state) const {
  // Recursive Newton-Euler with zero joint accelerations and the base
  // accelerating upward at g (the standard trick folding gravity into the
  // bias). Planar bodies have no gyroscopic torques, so with qdd = 0 all
  // angular accelerations vanish and only centripetal terms remain.
  const int n = body_.n_links();
  const body::FrameSet frames = body::forward_frames(body_, state.pose);
  const body::FrameVelocities fv = body::frame_velocities(body_, frames, state.vel);

  std::vector<Vec2> a_origin(n), f_acc(n, Vec2::Zero());
  std::vector<real> n_acc(n, 0);
  a_origin[0] = {0, config_.gravity};
  for (int i = 1; i < n; ++i) {
    const int p = body_.links[i].parent;
    const Vec2 r = frames.origin[i] - frames.origin[p];
    a_origin[i] = a_origin[p] - fv.omega[p] * fv.omega[p] * r;
  }
  for (int i = n - 1; i >= 0; --i) {
    const auto& link = body_.links[i];
    const Vec2 r_c = frames.rot[i] * Vec2{link.length / 2, 0};
    const Vec2 a_com = a_origin[i] - fv.omega[i] * fv.omega[i] * r_c;
    const Vec2 F = link.mass * a_com;
    f_acc[i] += F;
    n_acc[i] += cross2(r_c, F);
    if (i > 0) {
      const int p = body_.links[i].parent;
      f_acc[p] += f_acc[i];
      n_acc[p] += n_acc[i] + cross2(frames.origin[i] - frames.origin[p], f_acc[i]);
    }
  }
  VecX bias(body_.nq());
  bias[0] = f_acc[0].x();
  bias[1] = f_acc[0].y();
  bias[2] = n_acc[0];
  for (int i = 1; i < n; ++i) bias[3 + i - 1] = n_acc[i];
  return bias;
}

real Simulation::kinetic_energy(const SimState& state) const {
  const body::FrameSet frames = body::forward_frames(body_, state.pose);
  const body::FrameVelocities fv = body::frame_velocities(body_, frames, state.vel);
  real T = 0;
  for (int l = 0; l < body_.n_links(); ++l) {
    const auto& link = body_.links[l];
    const Vec2 v_com = body::point_velocity(frames, fv, l, {link.length / 2, 0});
    T += real(0.5) * link.mass * v_com.squaredNorm();
    T += real(0.5) * link_inertia(link) * fv.omega[l] * fv.omega[l];
  }
  for (size_t i = 0; i < props_.size(); ++i) {
    if (!props_[i].is_dynamic()) continue;
    T += real(0.5) * props_[i].mass * state.props[i].vel.squaredNorm();
    T += real(0.5) * props_[i].inertia() * state.props[i].angvel * state.props[i].angvel;
  }
  return T;
}

// ----- contact forces ----- //

void Simulation::accumulate_contact_forces(const SimState& state,
                                           const body::FrameSet& frames,
                                           const body::FrameVelocities& fvel,
                                           Forces* forces,
                                           std::map<std::uint64_t, Vec2>* anchors) const {
  const auto contacts = detect_contacts(body_, frames, props_, state.props);

  auto point_vel = [&](ContactPoint::Side side, int index, const Vec2& p) -> Vec2 {
    if (side == ContactPoint::Side::kGround) return Vec2::Zero();
    if (side == ContactPoint::Side::kWalker) {
      return fvel.origin_vel[index] +
             fvel.omega[index] * perp(p - frames.origin[index]);
    }
    const PropState& ps = state.props[index];
    return ps.vel + ps.angvel * perp(p - ps.pos);
  };
  auto to_local = [&](ContactPoint::Side side, int index, const Vec2& p) -> Vec2 {
    if (side == ContactPoint::Side::kGround) return p;
    if (side == ContactPoint::Side::kWalker)
      return frames.rot[index].transpose() * (p - frames.origin[index]);
    return rot2(state.props[index].ang).transpose() * (p - state.props[index].pos);
  };
  auto to_world = [&](ContactPoint::Side side, int index, const Vec2& local) -> Vec2 {
    if (side == ContactPoint::Side::kGround) return local;
    if (side == ContactPoint::Side::kWalker)
      return frames.origin[index] + frames.rot[index] * local;
    return state.props[index].pos + rot2(state.props[index].ang) * local;
  };
  auto apply = [&](ContactPoint::Side side, int index, const Vec2& p, const Vec2& f) {
    if (side == ContactPoint::Side::kGround) return;
    if (side == ContactPoint::Side::kWalker) {
      forces->generalized[0] += f.x();
      forces->generalized[1] += f.y();
      forces->generalized[2] += cross2(p - state.pose.root_pos, f);
      for (int i = index; i != 0; i = body_.links[i].parent)
        forces->generalized[3 + i - 1] += cross2(p - frames.origin[i], f);
      return;
    }
    if (!props_[index].is_dynamic()) return;
    forces->prop_f[index] += f;
    forces->prop_n[index] += cross2(p - state.props[index].pos, f);
  };
  // First-order implicit treatment of contact damping: the velocity
  // derivative of the damper lands in the damping matrices, keeping light
  // links stable at this timestep without touching the force law itself.
  auto add_damping = [&](ContactPoint::Side side, int index, const Vec2& p,
                         const Mat2& C) {
    if (side == ContactPoint::Side::kGround) return;
    if (side == ContactPoint::Side::kWalker) {
      MatX J = MatX::Zero(2, body_.nq());
      J(0, 0) = 1;
      J(1, 1) = 1;
      J.col(2) = perp(p - state.pose.root_pos);
      for (int i = index; i != 0; i = body_.links[i].parent)
        J.col(3 + i - 1) = perp(p - frames.origin[i]);
      forces->walker_damping.noalias() += J.transpose() * C * J;
      return;
    }
    if (!props_[index].is_dynamic()) return;
    Eigen::Matrix<real, 2, 3> J;
    J.leftCols<2>() = Mat2::Identity();
    J.col(2) = perp(p - state.props[index].pos);
    forces->prop_damping[index].noalias() += J.transpose() * C * J;
  };

  for (const auto& c : contacts) {
    const Vec2 v_rel =
        point_vel(c.a, c.a_index, c.point) - point_vel(c.b, c.b_index, c.point);
    const real vn = c.normal.dot(v_rel);
    real fn = config_.contact_kn * c.depth - config_.contact_cn * vn;
    if (fn <= 0) continue;  // adhesive forces never arise

    const Vec2 t = perp(c.normal);
    const real vt = t.dot(v_rel);
    // Stiction anchor, stored in the counter-body frame so it rides along
    // with moving boxes/limbs.
    Vec2 anchor_world;
    auto it = state.anchors.find(c.key);
    if (it != state.anchors.end()) {
      anchor_world = to_world(c.b, c.b_index, it->second);
    } else {
      anchor_world = c.point;
    }
    const real disp = t.dot(c.point - anchor_world);
    real ft = -config_.contact_kt * disp - config_.contact_ct * vt;
    const real ft_max = config_.friction_mu * fn;
    const bool sliding = std::abs(ft) > ft_max;
    if (sliding) {
      ft = std::clamp(ft, -ft_max, ft_max);
      // Slide the anchor so the spring alone sustains the clamped force.
      anchor_world = c.point + t * (ft / config_.contact_kt);
    }
    (*anchors)[c.key] = to_local(c.b, c.b_index, anchor_world);

    const Vec2 f = fn * c.normal + ft * t;
    apply(c.a, c.a_index, c.point, f);
    apply(c.b, c.b_index, c.point, -f);

    Mat2 C = config_.contact_cn * c.normal * c.normal.transpose();
    if (!sliding) C += config_.contact_ct * t * t.transpose();
    add_damping(c.a, c.a_index, c.point, C);
    add_damping(c.b, c.b_index, c.point, C);
  }
}

// ----- stepping ----- //

VecX Simulation::actuator_torques(const SimState& state, const VecX& action) const {
  if (action.size() != body_.n_joints())
    throw ConfigError("sim: action size mismatch");
  VecX tau(body_.n_joints());
  for (int j = 0; j < body_.n_joints(); ++j) {
    const auto& joint = body_.joints[j];
    const real a = std::clamp(action[j], real(-1), real(1));
    const real target =
        joint.limit_lo + (a + 1) / 2 * (joint.limit_hi - joint.limit_lo);
    const real q = state.pose.joint_angles[j];
    const real qd = state.vel.joint_vel[j];
    tau[j] = std::clamp(joint.kp * (target - q) - joint.kd * qd,
                        -joint.tau_max, joint.tau_max);
  }
  return tau;
}

SimState Simulation::substep(const SimState& state, const VecX& joint_torques) const {
  return substep_impl(state, joint_torques, nullptr);
}

SimState Simulation::substep_impl(const SimState& state, const VecX& joint_torques,
                                  const VecX* joint_damping) const {
  const body::FrameSet frames = body::forward_frames(body_, state.pose);
  const body::FrameVelocities fvel = body::frame_velocities(body_, frames, state.vel);
  const int nq = body_.nq();

  Forces forces;
  forces.generalized = VecX::Zero(nq);
  forces.walker_damping = MatX::Zero(nq, nq);
  forces.prop_f.assign(props_.size(), Vec2::Zero());
  forces.prop_n.assign(props_.size(), 0);
  forces.prop_damping.assign(props_.size(), Mat3::Zero());
  forces.generalized.tail(body_.n_joints()) = joint_torques;
  if (joint_damping) {
    for (int j = 0; j < body_.n_joints(); ++j)
      forces.walker_damping(3 + j, 3 + j) += (*joint_damping)[j];
  }

  // Soft joint-limit springs.
  for (int j = 0; j < body_.n_joints(); ++j) {
    const auto& joint = body_.joints[j];
    const real q = state.pose.joint_angles[j];
    const real over = q > joint.limit_hi   ? q - joint.limit_hi
                      : q < joint.limit_lo ? q - joint.limit_lo
                                           : real(0);
    if (over != 0) {
      forces.generalized[3 + j] -=
          config_.limit_kp * over + config_.limit_kd * state.vel.joint_vel[j];
      forces.walker_damping(3 + j, 3 + j) += config_.limit_kd;
    }
  }

  SimState next = state;
  next.anchors.clear();
  accumulate_contact_forces(state, frames, fvel, &forces, &next.anchors);

  // Walker: all forces evaluated at the current state, damping corrected to
  // first order implicitly,
  //   (M + dt D)(v' - v) = dt (f(q, v) - bias),
  // then a trapezoidal position update (exact for constant-gravity flight).
  const MatX M = mass_matrix(state);
  const VecX rhs = config_.dt * (forces.generalized - bias_forces(state));
  const VecX dv = (M + config_.dt * forces.walker_damping).ldlt().solve(rhs);
  const VecX v_old = state.vel.flat();
  const VecX v_new = v_old + dv;
  const VecX q_new =
      state.pose.flat() + config_.dt * real(0.5) * (v_old + v_new);
  next.pose = body::Pose::from_flat(q_new);
  next.vel = body::Velocities::from_flat(v_new);

  for (size_t i = 0; i < props_.size(); ++i) {
    if (!props_[i].is_dynamic()) continue;
    const PropState& ps = state.props[i];
    PropState& pn = next.props[i];
    Mat3 A = config_.dt * forces.prop_damping[i];
    A(0, 0) += props_[i].mass;
    A(1, 1) += props_[i].mass;
    A(2, 2) += props_[i].inertia();
    Eigen::Matrix<real, 3, 1> pf;
    pf << forces.prop_f[i].x(),
        forces.prop_f[i].y() - props_[i].mass * config_.gravity,
        forces.prop_n[i];
    const Eigen::Matrix<real, 3, 1> pdv = A.ldlt().solve(config_.dt * pf);
    pn.vel = ps.vel + pdv.head<2>();
    pn.angvel = ps.angvel + pdv[2];
    pn.pos = ps.pos + config_.dt * real(0.5) * (ps.vel + pn.vel);
    pn.ang = ps.ang + config_.dt * real(0.5) * (ps.angvel + pn.angvel);
  }
  next.time = state.time + config_.dt;

  if (!next.pose.flat().allFinite() || !next.vel.flat().allFinite())
    throw NumericError("simulation diverged at t=" + std::to_string(double(next.time)));
  for (const auto& ps : next.props)
    if (!ps.pos.allFinite() || !ps.vel.allFinite() || !std::isfinite(double(ps.ang)))
      throw NumericError("simulation diverged (prop) at t=" +
                         std::to_string(double(next.time)));
  return next;
}

SimState Simulation::control_step(const SimState& state, const VecX& action,
                                  Rng* noise_rng) const {
  VecX a = action;
  if (a.size() != body_.n_joints()) throw ConfigError("sim: action size mismatch");
  if (noise_rng && config_.action_noise_std > 0) {
    for (int j = 0; j < a.size(); ++j) {
      a[j] = std::clamp(a[j] + real(noise_rng->gaussian(0, double(config_.action_noise_std))),
                        real(-1), real(1));
    }
  }
  VecX kd(body_.n_joints());
  for (int j = 0; j < body_.n_joints(); ++j) kd[j] = body_.joints[j].kd;
  SimState s = state;
  for (int k = 0; k < config_.substeps_per_control; ++k)
    s = substep_impl(s, actuator_torques(s, a), &kd);
  return s;
}

// ----- sensing ----- //

ContactReport Simulation::contact_report(const SimState& state) const {
  const body::FrameSet frames = body::forward_frames(body_, state.pose);
  return summarize_contacts(body_, props_,
                            detect_contacts(body_, frames, props_, state.props));
}

body::TouchBits Simulation::touch_bits(const SimState& state) const {
  const ContactReport r = contact_report(state);
  body::TouchBits t;
  t.hand[0] = r.hand_touch[0];
  t.hand[1] = r.hand_touch[1];
  return t;
}

real Simulation::raycast(const SimState& state, const Vec2& origin,
                         const Vec2& dir, real max_range) const {
  real best = max_range;
  auto consider = [&](real t) {
    if (t > real(1e-9) && t < best) best = t;
  };

  if (dir.y() < 0) consider(-origin.y() / dir.y());  // ground plane y = 0

  auto ray_vs_obb = [&](const Vec2& center, real ang, const Vec2& half) {
    const Mat2 R = rot2(ang);
    const Vec2 o = R.transpose() * (origin - center);
    const Vec2 d = R.transpose() * dir;
    real t0 = 0, t1 = std::numeric_limits<real>::max();
    for (int axis = 0; axis < 2; ++axis) {
      if (std::abs(d[axis]) < real(1e-12)) {
        if (std::abs(o[axis]) > half[axis]) return;
        continue;
      }
      real ta = (-half[axis] - o[axis]) / d[axis];
      real tb = (half[axis] - o[axis]) / d[axis];
      if (ta > tb) std::swap(ta, tb);
      t0 = std::max(t0, ta);
      t1 = std::min(t1, tb);
    }
    if (t0 <= t1) consider(t0 > 0 ? t0 : t1);
  };

  for (size_t i = 0; i < props_.size(); ++i) {
    const PropSpec& spec = props_[i];
    const PropState& ps = state.props[i];
    if (spec.kind == PropKind::kBall) {
      const Vec2 oc = origin - ps.pos;
      const real b = oc.dot(dir);
      const real c = oc.squaredNorm() - spec.radius * spec.radius;
      const real disc = b * b - c;
      if (disc >= 0) {
        const real root = std::sqrt(disc);
        consider(-b - root);
        consider(-b + root);
      }
    } else if (spec.kind == PropKind::kBox || spec.kind == PropKind::kPedestal) {
      ray_vs_obb(ps.pos, ps.ang, spec.half_extents);
    } else {  // bucket: bottom + walls
      const Mat2 R = rot2(ps.ang);
      const real hw = spec.half_extents.x(), wall_h = spec.half_extents.y();
      const real t = spec.wall;
      ray_vs_obb(ps.pos, ps.ang, {hw + 2 * t, t});
      ray_vs_obb(ps.pos + R * Vec2{-(hw + t), wall_h / 2 + t}, ps.ang, {t, wall_h / 2});
      ray_vs_obb(ps.pos + R * Vec2{hw + t, wall_h / 2 + t}, ps.ang, {t, wall_h / 2});
    }
  }
  return best;
}

}  // namespace motorkit::sim
