#include "motorkit/ref/generators.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <utility>

#include "motorkit/body/kinematics.hpp"

namespace motorkit::ref {

namespace {

using body::BodyModel;
using body::Pose;
using body::Velocities;

constexpr real kGravity = real(9.8);
constexpr real kTau = real(2) * kPi;

real smoothstep5(real u) {
  u = std::clamp(u, real(0), real(1));
  return u * u * u * (real(10) + u * (real(-15) + real(6) * u));
}

// Ramps 0 -> 1 over `ramp` seconds inside each end of [t0, t1], 1 in between.
real window_env(real t, real t0, real t1, real ramp) {
  return smoothstep5((t - t0) / ramp) * smoothstep5((t1 - t) / ramp);
}

// Piecewise keyframe curve, constant outside the knot range. Every segment
// eases from rest to rest (quintic), so the whole curve is C2 with zero
// velocity and acceleration at each knot.
class Track {
 public:
  Track() = default;
  explicit Track(std::vector<std::pair<real, real>> knots)
      : knots_(std::move(knots)) {}

  real operator()(real t) const {
    if (knots_.empty()) return 0;
    if (t <= knots_.front().first) return knots_.front().second;
    if (t >= knots_.back().first) return knots_.back().second;
    std::size_t i = 1;
    while (knots_[i].first < t) ++i;
    const auto& [t0, y0] = knots_[i - 1];
    const auto& [t1, y1] = knots_[i];
    return y0 + (y1 - y0) * smoothstep5((t - t0) / (t1 - t0));
  }

 private:
  std::vector<std::pair<real, real>> knots_;
};

// Constant-speed translation with quintic speed ramps at both ends; clamps
// outside its window. C2 everywhere (the speed profile is C1 with flat ends).
class Cruise {
 public:
  Cruise() = default;
  Cruise(real t0, real t1, real x0, real x1, real ease = real(0.22))
      : t0_(t0), t1_(t1), x0_(x0), x1_(x1), ease_(ease) {}

  real operator()(real t) const {
    if (t1_ <= t0_) return x1_;
    const real u = std::clamp((t - t0_) / (t1_ - t0_), real(0), real(1));
    return x0_ + (x1_ - x0_) * profile(u);
  }

 private:
  // Integral of a speed curve that smoothsteps 0->1 over [0,e], holds, and
  // mirrors down over [1-e,1]; normalized so profile(1) == 1.
  real profile(real u) const {
    const real e = ease_;
    auto ramp_area = [](real w) {  // integral of smoothstep5 over [0,w]
      const real w4 = w * w * w * w;
      return w4 * (real(2.5) + w * (real(-3) + w));
    };
    real d;
    if (u < e)
      d = e * ramp_area(u / e);
    else if (u <= 1 - e)
      d = real(0.5) * e + (u - e);
    else
      d = (1 - e) - e * ramp_area((1 - u) / e);
    return d / (1 - e);
  }

  real t0_ = 0, t1_ = 0, x0_ = 0, x1_ = 0, ease_ = real(0.22);
};

// Planar two-segment chain: absolute world angles of both segment rays that
// put the chain tip on `target`. `bend` picks the elbow/knee side.
struct TwoLink {
  real a1, a2;
};

std::optional<TwoLink> ik_two_link(const Vec2& origin, const Vec2& target,
                                   real l1, real l2, real bend) {
  const Vec2 d = target - origin;
  real r = d.norm();
  if (r > (l1 + l2) * (real(1) + real(1e-9))) return std::nullopt;
  if (r < std::abs(l1 - l2) * (real(1) + real(1e-9)) || r < real(1e-9))
    return std::nullopt;
  r = std::min(r, l1 + l2);
  const real cos_in =
      std::clamp((l1 * l1 + r * r - l2 * l2) / (2 * l1 * r), real(-1), real(1));
  TwoLink out;
  out.a1 = std::atan2(d.y(), d.x()) + bend * std::acos(cos_in);
  const Vec2 mid = origin + l1 * Vec2{std::cos(out.a1), std::sin(out.a1)};
  const Vec2 rest = target - mid;
  out.a2 = std::atan2(rest.y(), rest.x());
  return out;
}

// Named handles into the body plus the chain constants the choreography
// needs; everything is read off the model rather than hardcoded.
struct Rig {
  const BodyModel* model;
  int torso, head;
  int uarm[2], larm[2], thigh[2], shin[2], foot[2];
  int j_torso, j_head, j_sh[2], j_el[2], j_hip[2], j_knee[2], j_ank[2];
  real l_uarm, l_larm, rest_uarm, rest_larm, arm_reach;
  real l_thigh, rest_thigh, rest_shin;
  real l_shank, shank_delta, rest_foot;
  real forearm_hw;
  real stand_y;    // root height standing with zero joints
  Vec2 ankle_off;  // ankle world offset from the root when standing

  explicit Rig(const BodyModel& b) : model(&b) {
    torso = b.link_index("torso");
    head = b.link_index("head");
    const char* sides[2] = {"_l", "_r"};
    for (int s = 0; s < 2; ++s) {
      uarm[s] = b.link_index(std::string("upper_arm") + sides[s]);
      larm[s] = b.link_index(std::string("lower_arm") + sides[s]);
      thigh[s] = b.link_index(std::string("thigh") + sides[s]);
      shin[s] = b.link_index(std::string("shin") + sides[s]);
      foot[s] = b.link_index(std::string("foot") + sides[s]);
      j_sh[s] = uarm[s] - 1;  // joint i drives link i + 1
      j_el[s] = larm[s] - 1;
      j_hip[s] = thigh[s] - 1;
      j_knee[s] = shin[s] - 1;
      j_ank[s] = foot[s] - 1;
    }
    j_torso = torso - 1;
    j_head = head - 1;
    l_uarm = b.links[uarm[0]].length;
    l_larm = b.links[larm[0]].length;
    rest_uarm = b.links[uarm[0]].rest_angle;
    rest_larm = b.links[larm[0]].rest_angle;
    arm_reach = l_uarm + l_larm;
    forearm_hw = b.links[larm[0]].half_width;
    l_thigh = b.links[thigh[0]].length;
    rest_thigh = b.links[thigh[0]].rest_angle;
    rest_shin = b.links[shin[0]].rest_angle;
    const Vec2 ankle_anchor = b.links[foot[0]].anchor;  // in the shin frame
    l_shank = ankle_anchor.norm();
    shank_delta = std::atan2(ankle_anchor.y(), ankle_anchor.x());
    rest_foot = b.links[foot[0]].rest_angle;
    const Pose stand = body::null_pose(b);
    stand_y = stand.root_pos.y();
    const auto frames = body::forward_frames(b, stand);
    ankle_off = frames.origin[foot[0]] - stand.root_pos;
  }
};

struct ArmAngles {
  real sh, el;
};

// Shoulder/elbow angles putting the hand tip on `target`. Frames only need a
// valid trunk; arm joints in them are ignored. Elbow bends forward.
std::optional<ArmAngles> solve_arm(const Rig& rig, const body::FrameSet& fr,
                                   int side, const Vec2& target) {
  const Vec2 shoulder = fr.origin[rig.uarm[side]];
  const auto ik =
      ik_two_link(shoulder, target, rig.l_uarm, rig.l_larm, real(-1));
  if (!ik) return std::nullopt;
  return ArmAngles{wrap_angle(ik->a1 - fr.angle[rig.torso] - rig.rest_uarm),
                   wrap_angle(ik->a2 - ik->a1 - rig.rest_larm)};
}

struct LegAngles {
  real hip, knee, ank;
};

// Hip/knee/ankle putting the ankle on `target` with the sole at `foot_world`
// (0 = flat). The knee bends backward; the second IK segment is the straight
// knee->ankle ray, offset from the shin axis by the ankle anchor angle.
std::optional<LegAngles> solve_leg(const Rig& rig, const body::FrameSet& fr,
                                   int side, const Vec2& target,
                                   real foot_world) {
  const Vec2 hip = fr.origin[rig.thigh[side]];
  const auto ik = ik_two_link(hip, target, rig.l_thigh, rig.l_shank, real(1));
  if (!ik) return std::nullopt;
  const real shin_world = ik->a2 - rig.shank_delta;
  LegAngles out;
  out.hip = wrap_angle(ik->a1 - fr.angle[0] - rig.rest_thigh);
  out.knee = wrap_angle(shin_world - ik->a1 - rig.rest_shin);
  out.ank = wrap_angle(foot_world - shin_world - rig.rest_foot);
  return out;
}

// Gait waveform constants shared between the walk clips and the locomotion
// windows of pickup cycles.
struct GaitShape {
  real stride = real(0.82);
  real hip = real(0.42);
  real knee = real(0.95);
  real ank = real(0.16);
  real arm = real(0.26);
  real elbow = real(0.30);
  real bob = real(0.018);
  real lean = real(0.04);
};

void apply_gait_legs(const Rig& rig, const GaitShape& g, real ph, real env,
                     Pose* pose) {
  for (int s = 0; s < 2; ++s) {
    const real p = ph + (s == 0 ? real(0) : kPi);
    pose->joint_angles[rig.j_hip[s]] = g.hip * std::sin(p) * env;
    const real w = real(0.5) + real(0.5) * std::sin(p + real(0.9));
    pose->joint_angles[rig.j_knee[s]] = -g.knee * w * w * env;
    pose->joint_angles[rig.j_ank[s]] = g.ank * std::sin(p + real(2.3)) * env;
  }
}

void apply_gait_arms(const Rig& rig, const GaitShape& g, real ph, real env,
                     Pose* pose) {
  for (int s = 0; s < 2; ++s) {
    const real p = ph + (s == 0 ? kPi : real(0));  // counter-swing
    pose->joint_angles[rig.j_sh[s]] = g.arm * std::sin(p) * env;
    pose->joint_angles[rig.j_el[s]] =
        g.elbow * (real(0.5) + real(0.5) * std::sin(p)) * env;
  }
}

struct ProgState {
  Pose pose;
  std::vector<sim::PropState> props;
};

// Samples a kinematic program at the clip rate, computing velocities as tiny
// central differences of the same program (so stored velocities agree with
// frame differences to high order).
template <typename F>
void sample_program(const BodyModel& body, real dt, int n_frames, F&& state_at,
                    ReferenceClip* clip) {
  const real h = real(1e-4);
  const int nq = 3 + body.n_joints();
  auto flatten = [&](real t) {
    const ProgState st = state_at(t);
    VecX out(nq + 3 * int(st.props.size()));
    out.head(nq) = st.pose.flat();
    for (int i = 0; i < int(st.props.size()); ++i) {
      out[nq + 3 * i + 0] = st.props[i].pos.x();
      out[nq + 3 * i + 1] = st.props[i].pos.y();
      out[nq + 3 * i + 2] = st.props[i].ang;
    }
    return out;
  };
  clip->frames.reserve(n_frames);
  for (int k = 0; k < n_frames; ++k) {
    const real t = dt * real(k);
    ProgState st = state_at(t);
    const VecX d = (flatten(t + h) - flatten(t - h)) / (2 * h);
    ClipFrame f;
    f.pose = std::move(st.pose);
    f.vel = Velocities::from_flat(d.head(nq));
    f.props = std::move(st.props);
    for (int i = 0; i < int(f.props.size()); ++i) {
      f.props[i].vel = {d[nq + 3 * i], d[nq + 3 * i + 1]};
      f.props[i].angvel = d[nq + 3 * i + 2];
    }
    clip->frames.push_back(std::move(f));
  }
}

struct HeightParams {
  real h;          // pedestal top
  real pitch;      // torso flexion while grabbing
  real lean;       // root lean while grabbing
  real stand_off;  // stop distance short of a pedestal center
  real drop;       // shoulder height above the grips while grabbing
};

// The squat can never take the root below ~0.72 or the near-horizontal shin
// would ground its own collision samples, so low grabs bow the torso instead.
HeightParams height_params(HeightTag tag) {
  switch (tag) {
    case HeightTag::kFloor:
      return {real(0.15), real(-1.45), real(-0.42), real(0.61), real(0.387)};
    case HeightTag::kTorso:
      return {real(0.60), real(-0.75), real(-0.03), real(0.48), real(0.36)};
    case HeightTag::kHead:
    default:
      return {real(1.00), real(-0.15), real(0), real(0.42), real(0.36)};
  }
}

// ----- pickup-cycle choreography ----- //
//
// Timeline: stand, walk to the loaded pedestal, squat + reach until both hand
// tips rest on the box top, lift the box onto the forearms, carry it to the
// second pedestal, lower it, and withdraw the hands. The clip is trimmed at
// the frame the putdown predicate fires, so one clip is exactly one cycle.
class PickupProgram {
 public:
  PickupProgram(const BodyModel& body, HeightTag tag, const sim::PropSpec& box,
                Rng& rng, real dt)
      : body_(body), rig_(body), box_(box), tag_(tag), dt_(dt) {
    if (box.kind != sim::PropKind::kBox)
      throw ConfigError("pickup choreography needs a box prop");
    box_.validate();
    bx_ = box.half_extents.x();
    by_ = box.half_extents.y();

    const HeightParams hp = height_params(tag);
    h_ = hp.h + real(rng.uniform(-0.02, 0.02));
    stand_off_ = hp.stand_off + real(rng.uniform(-0.015, 0.015));
    ped_b_ = real(3.0) + real(rng.uniform(-0.2, 0.2));
    const real speed = real(0.9) * (real(1) + real(rng.uniform(-0.07, 0.07)));
    const real approach = real(2.2) + real(rng.uniform(-0.3, 0.3));
    spread_ = real(0.28) + real(rng.uniform(-0.03, 0.03));

    x_arr_ = ped_a_ - stand_off_;
    x_arr2_ = ped_b_ - stand_off_;
    x_start_ = x_arr_ - approach;
    t_w0_ = real(0.35);
    t1_ = t_w0_ + approach / speed;
    t2_ = t1_ + real(1.35);
    t3_ = t2_ + real(0.2);
    t4_ = t3_ + real(1.5);
    t5_ = t4_ + (x_arr2_ - x_arr_) / speed;
    t6_ = t5_ + real(1.5);
    t7_ = t6_ + real(1.3);
    t_mid_ = t3_ + real(0.55) * (t4_ - t3_);
    t_mid2_ = t5_ + real(0.45) * (t6_ - t5_);
    walk1_ = Cruise(t_w0_, t1_, x_start_, x_arr_);
    walk2_ = Cruise(t4_, t5_, x_arr_, x_arr2_);

    rest_y_ = h_ + by_ - real(0.002);  // settles 2 mm into the pedestal top
    rest_a_ = {ped_a_, rest_y_};
    rest_b_ = {ped_b_, rest_y_};
    tip_gap_ = body.hand_radius - real(0.005);

    // Squat so the shoulder sits a fixed drop above the grip height; the
    // shoulder offset from the root depends only on lean and pitch.
    const real grip_y = rest_y_ + by_ + tip_gap_;
    const Mat2 rl = rot2(hp.lean);
    const real tw = hp.lean + kPi / 2 + hp.pitch;
    const Vec2 sh_off = rl * body.links[rig_.torso].anchor +
                        body.links[rig_.uarm[0]].anchor.x() *
                            Vec2{std::cos(tw), std::sin(tw)};
    squat_y_ = std::clamp(grip_y + hp.drop - sh_off.y(), real(0.72),
                          rig_.stand_y);

    // The trunk holds the squat while the box travels between the pedestal
    // and the via point, and rises/falls only while the box rides in front
    // of the chest, so the near-hand grip never sweeps past the shoulder.
    const real st = rig_.stand_y;
    const real sq = squat_y_;
    root_y_ = Track({{t_w0_, st},
                     {t1_, st},
                     {t2_, sq},
                     {t_mid_, sq},
                     {t4_, st},
                     {t5_, st},
                     {t_mid2_, sq},
                     {t6_, sq},
                     {t7_, st}});
    root_ang_ = Track({{t_w0_, 0},
                       {t1_, 0},
                       {t2_, hp.lean},
                       {t_mid_, hp.lean},
                       {t4_, 0},
                       {t5_, 0},
                       {t_mid2_, hp.lean},
                       {t6_, hp.lean},
                       {t7_, 0}});
    torso_q_ = Track({{t_w0_, 0},
                      {t1_, 0},
                      {t2_, hp.pitch},
                      {t_mid_, hp.pitch},
                      {t4_, 0},
                      {t5_, 0},
                      {t_mid2_, hp.pitch},
                      {t6_, hp.pitch},
                      {t7_, 0}});
    const real hq = real(-0.5) * hp.pitch;  // keep the head roughly level
    head_q_ = Track({{t_w0_, 0},
                     {t1_, 0},
                     {t2_, hq},
                     {t_mid_, hq},
                     {t4_, 0},
                     {t5_, 0},
                     {t_mid2_, hq},
                     {t6_, hq},
                     {t7_, 0}});

    base_ = body::null_pose(body);
    pin_a_ = Vec2{x_arr_, rig_.stand_y} + rig_.ankle_off;
    pin_b_ = Vec2{x_arr2_, rig_.stand_y} + rig_.ankle_off;

    // Grab posture at the source.
    const auto fr2 = body::forward_frames(body_, trunk_pose(t2_));
    for (int s = 0; s < 2; ++s) {
      const auto a = solve_arm(rig_, fr2, s, grip_world(rest_a_, 0, s));
      if (!a)
        throw GenerationError(
            "pickup: grab point out of arm reach at the source pedestal "
            "(box too large or pedestal too tall for this body)");
      grab_sh_[s] = a->sh;
      grab_el_[s] = a->el;
    }

    // Carry attachment: the box rides on both level forearms in front of the
    // chest, its underside pressed 5 mm into them; remember its pose relative
    // to the left forearm frame.
    Pose pc = trunk_pose(t4_);
    for (int s = 0; s < 2; ++s) {
      pc.joint_angles[rig_.j_sh[s]] = carry_sh_;
      pc.joint_angles[rig_.j_el[s]] = carry_el_;
    }
    const auto frc = body::forward_frames(body_, pc);
    const int fa = rig_.larm[0];
    const Vec2 mid =
        body::point_on_link(frc, fa, {rig_.l_larm / 2, 0});
    const real a2 = frc.angle[fa];
    const Vec2 n{-std::sin(a2), std::cos(a2)};
    carry_pos_ = mid + (rig_.forearm_hw + by_ - real(0.005)) * n;
    carry_ang_ = wrap_angle(a2);
    rel_pos_ = rot2(a2).transpose() * (carry_pos_ - frc.origin[fa]);

    // Via point: the box passes out in front of the squatting shoulder and
    // just below it, so the near-hand grip keeps a comfortable radius from
    // the shoulder and the arm never sweeps overhead of the bowed torso.
    const Vec2 sh_squat = fr2.origin[rig_.uarm[0]];
    const Vec2 via_a = sh_squat + Vec2{real(0.36) + spread_ * bx_,
                                       real(-0.08) - (by_ + tip_gap_)};
    // Between the via point and the chest the box is steered relative to the
    // left shoulder rather than in world space: the trunk straightens (or
    // bows) underneath it during that stretch, and a world-fixed path would
    // drag the grips through the shoulder's overhead dead zone.
    via_off_ = via_a - sh_squat;
    carry_off_ = carry_pos_ - frc.origin[rig_.uarm[0]];
    raise_x_ = Track({{t3_, rest_a_.x()}, {t_mid_, via_a.x()}});
    raise_y_ = Track({{t3_, rest_a_.y()}, {t_mid_, via_a.y()}});
    raise_ang_ = Track({{t3_, 0}, {t4_, carry_ang_}});

    const Vec2 shift{x_arr2_ - x_arr_, real(0)};
    const Vec2 via_b = via_a + shift;
    lower_x_ = Track({{t_mid2_, via_b.x()}, {t6_, rest_b_.x()}});
    lower_y_ = Track({{t_mid2_, via_b.y()}, {t6_, rest_b_.y()}});
    lower_ang_ = Track({{t5_, carry_ang_}, {t6_, 0}});

    // Release posture at the target (start of the hand withdrawal).
    const auto fr6 = body::forward_frames(body_, trunk_pose(t6_));
    for (int s = 0; s < 2; ++s) {
      const auto a = solve_arm(rig_, fr6, s, grip_world(rest_b_, 0, s));
      if (!a)
        throw GenerationError(
            "pickup: release point out of arm reach at the target pedestal");
      grab_b_sh_[s] = a->sh;
      grab_b_el_[s] = a->el;
    }

    specs_.push_back(box_);
    sim::PropSpec ped;
    ped.kind = sim::PropKind::kPedestal;
    ped.half_extents = {real(0.25), h_ / 2};
    specs_.push_back(ped);
    specs_.push_back(ped);
  }

  ReferenceClip build() const {
    ReferenceClip clip;
    clip.behavior = behavior_name(Behavior::kPickupCycle);
    clip.height = height_name(tag_);
    clip.dt = dt_;
    clip.body_hash = body::body_hash(body_);
    clip.dynamic_prop = 0;
    clip.props = specs_;
    const int n = int(std::lround(t7_ / dt_)) + 1;
    sample_program(body_, dt_, n, [this](real t) { return state_at(t); },
                   &clip);

    // End the clip on the exact frame the putdown predicate first fires, so
    // one clip is exactly one complete cycle.
    const PhaseSegmentation seg = segment_phases(body_, clip);
    const bool clean = seg.spans.size() >= 4 &&
                       seg.spans[3].phase == Phase::kPutdown &&
                       seg.spans[3].last + 1 < clip.n_frames();
    if (!clean) {
      std::string got;
      for (const auto& sp : seg.spans)
        got += " " + phase_name(sp.phase) + "[" + std::to_string(sp.first) +
               "," + std::to_string(sp.last) + "]";
      throw GenerationError(
          "pickup: choreography did not segment into one clean cycle; got" +
          got + " over " + std::to_string(clip.n_frames()) + " frames");
    }
    clip.frames.resize(seg.spans[3].last + 1);
    validate_clip(body_, clip);
    return clip;
  }

 private:
  struct TrunkEval {
    real x, y, ang, q_torso, q_head, ph, env1, env2;
  };

  TrunkEval trunk_eval(real t) const {
    TrunkEval e;
    e.x = t <= t4_ ? walk1_(t) : walk2_(t);
    e.env1 = window_env(t, t_w0_, t1_, ramp_);
    e.env2 = window_env(t, t4_, t5_, ramp_);
    const real env = e.env1 + e.env2;
    const real anchor = e.env1 > 0 ? x_start_ : x_arr_;
    e.ph = kTau * (e.x - anchor) / gait_.stride;
    e.y = root_y_(t) -
          gait_.bob * (real(0.5) - real(0.5) * std::cos(2 * e.ph)) * env;
    e.ang = root_ang_(t) - gait_.lean * env;
    e.q_torso = torso_q_(t);
    e.q_head = head_q_(t);
    return e;
  }

  Pose trunk_pose(real t) const {
    const TrunkEval e = trunk_eval(t);
    Pose p = base_;
    p.joint_angles.setZero();
    p.root_pos = {e.x, e.y};
    p.root_ang = e.ang;
    p.joint_angles[rig_.j_torso] = e.q_torso;
    p.joint_angles[rig_.j_head] = e.q_head;
    return p;
  }

  Vec2 grip_world(const Vec2& box_pos, real box_ang, int side) const {
    const real u = side == 0 ? -spread_ : spread_;
    return box_pos + rot2(box_ang) * Vec2{u * bx_, by_ + tip_gap_};
  }

  // Box pose on the way up: pedestal -> via point on a world-space track,
  // then a shoulder-anchored ease into the carry position while the trunk
  // straightens. The trunk tracks all have knots at t_mid_, so the handoff
  // between the two parameterisations is smooth.
  void raise_box(real t, const body::FrameSet& fr, Vec2* pos,
                 real* ang) const {
    *ang = raise_ang_(t);
    if (t <= t_mid_) {
      *pos = {raise_x_(t), raise_y_(t)};
      return;
    }
    const real s = smoothstep5((t - t_mid_) / (t4_ - t_mid_));
    *pos = fr.origin[rig_.uarm[0]] + (1 - s) * via_off_ + s * carry_off_;
  }

  // Mirror image for the way down: shoulder-anchored until the via point,
  // then a world-space track down onto the target pedestal.
  void lower_box(real t, const body::FrameSet& fr, Vec2* pos,
                 real* ang) const {
    *ang = lower_ang_(t);
    if (t >= t_mid2_) {
      *pos = {lower_x_(t), lower_y_(t)};
      return;
    }
    const real s = smoothstep5((t - t5_) / (t_mid2_ - t5_));
    *pos = fr.origin[rig_.uarm[0]] + (1 - s) * carry_off_ + s * via_off_;
  }

  ArmAngles arm_or_throw(const body::FrameSet& fr, int side, const Vec2& target,
                         real t) const {
    const auto a = solve_arm(rig_, fr, side, target);
    if (!a) {
      const Vec2 sh = fr.origin[rig_.uarm[side]];
      throw GenerationError(
          "pickup: box grip left the arm workspace mid-transfer (t=" +
          std::to_string(t) + " side=" + std::to_string(side) +
          " shoulder=(" + std::to_string(sh.x()) + "," +
          std::to_string(sh.y()) + ") target=(" + std::to_string(target.x()) +
          "," + std::to_string(target.y()) +
          ") r=" + std::to_string((target - sh).norm()) + ")");
    }
    return *a;
  }

  ProgState state_at(real t) const {
    const TrunkEval e = trunk_eval(t);
    Pose pose = base_;
    pose.joint_angles.setZero();
    pose.root_pos = {e.x, e.y};
    pose.root_ang = e.ang;
    pose.joint_angles[rig_.j_torso] = e.q_torso;
    pose.joint_angles[rig_.j_head] = e.q_head;
    const auto fr = body::forward_frames(body_, pose);

    // Legs: gait inside the two walk windows, planted stance elsewhere.
    if (t < t1_ || (t > t4_ && t < t5_)) {
      apply_gait_legs(rig_, gait_, e.ph, e.env1 + e.env2, &pose);
    } else {
      const Vec2 pin = t <= t4_ ? pin_a_ : pin_b_;
      for (int s = 0; s < 2; ++s) {
        const auto leg = solve_leg(rig_, fr, s, pin, 0);
        if (!leg)
          throw GenerationError("pickup: stance squat out of leg reach");
        pose.joint_angles[rig_.j_hip[s]] = leg->hip;
        pose.joint_angles[rig_.j_knee[s]] = leg->knee;
        pose.joint_angles[rig_.j_ank[s]] = leg->ank;
      }
    }

    // Arms.
    if (t < t1_) {
      apply_gait_arms(rig_, gait_, e.ph, e.env1, &pose);
    } else if (t < t2_) {
      const real s = smoothstep5((t - t1_) / (t2_ - t1_));
      for (int i = 0; i < 2; ++i) {
        pose.joint_angles[rig_.j_sh[i]] = s * grab_sh_[i];
        pose.joint_angles[rig_.j_el[i]] = s * grab_el_[i];
      }
    } else if (t < t3_) {
      for (int i = 0; i < 2; ++i) {
        pose.joint_angles[rig_.j_sh[i]] = grab_sh_[i];
        pose.joint_angles[rig_.j_el[i]] = grab_el_[i];
      }
    } else if (t < t4_) {
      // Hands glued to the rising box, easing into the carry posture.
      Vec2 bp;
      real ba;
      raise_box(t, fr, &bp, &ba);
      const real u = (t - t3_) / (t4_ - t3_);
      const real b =
          u <= real(0.70) ? real(0) : smoothstep5((u - real(0.70)) / real(0.30));
      for (int i = 0; i < 2; ++i) {
        const ArmAngles a = arm_or_throw(fr, i, grip_world(bp, ba, i), t);
        pose.joint_angles[rig_.j_sh[i]] = (1 - b) * a.sh + b * carry_sh_;
        pose.joint_angles[rig_.j_el[i]] = (1 - b) * a.el + b * carry_el_;
      }
    } else if (t < t5_) {
      for (int i = 0; i < 2; ++i) {
        pose.joint_angles[rig_.j_sh[i]] = carry_sh_;
        pose.joint_angles[rig_.j_el[i]] = carry_el_;
      }
    } else if (t < t6_) {
      Vec2 bp;
      real ba;
      lower_box(t, fr, &bp, &ba);
      const real u = (t - t5_) / (t6_ - t5_);
      const real b = u >= real(0.30) ? real(1) : smoothstep5(u / real(0.30));
      for (int i = 0; i < 2; ++i) {
        const ArmAngles a = arm_or_throw(fr, i, grip_world(bp, ba, i), t);
        pose.joint_angles[rig_.j_sh[i]] = (1 - b) * carry_sh_ + b * a.sh;
        pose.joint_angles[rig_.j_el[i]] = (1 - b) * carry_el_ + b * a.el;
      }
    } else {
      const real s = smoothstep5((t - t6_) / (t7_ - t6_));
      for (int i = 0; i < 2; ++i) {
        pose.joint_angles[rig_.j_sh[i]] = (1 - s) * grab_b_sh_[i];
        pose.joint_angles[rig_.j_el[i]] = (1 - s) * grab_b_el_[i];
      }
    }

    // Box.
    sim::PropState box;
    if (t < t3_) {
      box.pos = rest_a_;
    } else if (t < t4_) {
      raise_box(t, fr, &box.pos, &box.ang);
    } else if (t < t5_) {
      // Rigid on the forearms while walking.
      const auto fr2 = body::forward_frames(body_, pose);
      const int fa = rig_.larm[0];
      box.pos = fr2.origin[fa] + rot2(fr2.angle[fa]) * rel_pos_;
      box.ang = wrap_angle(fr2.angle[fa]);
    } else if (t < t6_) {
      lower_box(t, fr, &box.pos, &box.ang);
    } else {
      box.pos = rest_b_;
    }

    ProgState out;
    out.pose = std::move(pose);
    out.props.resize(3);
    out.props[0] = box;
    out.props[1].pos = {ped_a_, h_ / 2};
    out.props[2].pos = {ped_b_, h_ / 2};
    return out;
  }

  const BodyModel& body_;
  Rig rig_;
  sim::PropSpec box_;
  HeightTag tag_;
  real dt_;
  real bx_, by_;
  real h_;
  real ped_a_ = 0, ped_b_;
  real stand_off_, spread_, tip_gap_;
  real x_start_, x_arr_, x_arr2_;
  real t_w0_, t1_, t2_, t3_, t4_, t5_, t6_, t7_, t_mid_, t_mid2_;
  real ramp_ = real(0.5);
  Cruise walk1_, walk2_;
  GaitShape gait_;
  Track root_y_, root_ang_, torso_q_, head_q_;
  Track raise_x_, raise_y_, raise_ang_;
  Track lower_x_, lower_y_, lower_ang_;
  real squat_y_, rest_y_;
  Vec2 rest_a_, rest_b_, pin_a_, pin_b_;
  real grab_sh_[2], grab_el_[2], grab_b_sh_[2], grab_b_el_[2];
  real carry_sh_ = real(0.75), carry_el_ = real(0.82);
  Vec2 carry_pos_, rel_pos_, via_off_, carry_off_;
  real carry_ang_;
  Pose base_;
  std::vector<sim::PropSpec> specs_;
};

// ----- walk ----- //

class WalkProgram {
 public:
  WalkProgram(const BodyModel& body, Rng& rng, real dt)
      : body_(body), rig_(body), dt_(dt) {
    const real dist = real(3.6) + real(rng.uniform(-0.4, 0.4));
    const real speed = real(0.9) * (real(1) + real(rng.uniform(-0.07, 0.07)));
    t0_ = real(0.4);
    t1_ = t0_ + dist / speed;
    t_end_ = t1_ + real(0.5);
    cruise_ = Cruise(t0_, t1_, 0, dist);
    base_ = body::null_pose(body);
  }

  ReferenceClip build() const {
    ReferenceClip clip;
    clip.behavior = behavior_name(Behavior::kWalk);
    clip.dt = dt_;
    clip.body_hash = body::body_hash(body_);
    const int n = int(std::lround(t_end_ / dt_)) + 1;
    sample_program(body_, dt_, n, [this](real t) { return state_at(t); },
                   &clip);
    validate_clip(body_, clip);
    return clip;
  }

 private:
  ProgState state_at(real t) const {
    const real x = cruise_(t);
    const real env = window_env(t, t0_, t1_, real(0.5));
    const real ph = kTau * x / gait_.stride;
    Pose pose = base_;
    pose.joint_angles.setZero();
    pose.root_pos = {
        x, rig_.stand_y -
               gait_.bob * (real(0.5) - real(0.5) * std::cos(2 * ph)) * env};
    pose.root_ang = -gait_.lean * env;
    apply_gait_legs(rig_, gait_, ph, env, &pose);
    apply_gait_arms(rig_, gait_, ph, env, &pose);
    return {std::move(pose), {}};
  }

  const BodyModel& body_;
  Rig rig_;
  real dt_, t0_, t1_, t_end_;
  Cruise cruise_;
  GaitShape gait_;
  Pose base_;
};

// ----- toss ----- //
//
// The ball rides cradled on the forearms; a wind-up rocks it back, an
// underarm swing releases it mid-arc, and from the release instant the
// authored ball states follow the exact ballistic parabola. The clip ends
// well before the ball reaches the ground.
class TossProgram {
 public:
  TossProgram(const BodyModel& body, const sim::PropSpec& ball, Rng& rng,
              real dt)
      : body_(body), rig_(body), ball_(ball), dt_(dt) {
    if (ball.kind != sim::PropKind::kBall)
      throw ConfigError("toss choreography needs a ball prop");
    ball_.validate();
    r_ = ball.radius;

    const real windup_sh = real(0.25) + real(rng.uniform(-0.04, 0.04));
    const real swing_sh = real(1.9) + real(rng.uniform(-0.06, 0.06));
    const real rel_frac = real(0.45) + real(rng.uniform(-0.03, 0.03));

    sh_ = Track({{0, real(1.1)},
                 {real(1.2), real(1.1)},
                 {real(2.3), windup_sh},
                 {real(2.5), windup_sh},
                 {real(2.95), swing_sh},
                 {real(3.45), real(0.8)}});
    el_ = Track({{0, real(0.55)},
                 {real(1.2), real(0.55)},
                 {real(2.3), real(0.9)},
                 {real(2.5), real(0.9)},
                 {real(2.95), real(0.25)},
                 {real(3.45), real(0.35)}});
    root_ang_ = Track({{0, 0},
                       {real(1.2), 0},
                       {real(2.3), real(0.09)},
                       {real(2.5), real(0.09)},
                       {real(2.95), real(-0.11)},
                       {real(3.45), 0}});
    torso_q_ = Track({{0, 0},
                      {real(1.2), 0},
                      {real(2.3), real(0.12)},
                      {real(2.5), real(0.12)},
                      {real(2.95), real(-0.16)},
                      {real(3.45), 0}});
    head_q_ = Track({{0, 0},
                     {real(1.2), 0},
                     {real(2.3), real(-0.06)},
                     {real(2.5), real(-0.06)},
                     {real(2.95), real(0.08)},
                     {real(3.45), 0}});
    base_ = body::null_pose(body);
    pin_ = Vec2{0, rig_.stand_y} + rig_.ankle_off;

    t_rel_ = real(2.5) + rel_frac * real(0.45);
    const real h = real(1e-4);
    p_rel_ = cradled_ball(t_rel_);
    v_rel_ = (cradled_ball(t_rel_ + h) - cradled_ball(t_rel_ - h)) / (2 * h);
    if (v_rel_.x() < real(0.5) || v_rel_.y() < real(0.5))
      throw GenerationError("toss: swing does not release forward and upward");
    const real drop = p_rel_.y() - r_;
    const real t_fly =
        (v_rel_.y() + std::sqrt(v_rel_.y() * v_rel_.y() + 2 * kGravity * drop)) /
        kGravity;
    t_end_ = t_rel_ + t_fly - real(0.06);
    if (t_end_ < real(3.0))
      throw GenerationError("toss: flight too short for a valid clip");
  }

  ReferenceClip build() const {
    ReferenceClip clip;
    clip.behavior = behavior_name(Behavior::kToss);
    clip.dt = dt_;
    clip.body_hash = body::body_hash(body_);
    clip.dynamic_prop = 0;
    clip.props = {ball_};
    const int n = int(t_end_ / dt_) + 1;
    sample_program(body_, dt_, n, [this](real t) { return state_at(t); },
                   &clip);
    validate_clip(body_, clip);
    return clip;
  }

 private:
  Pose pose_at(real t) const {
    Pose pose = base_;
    pose.joint_angles.setZero();
    pose.root_pos = {0, rig_.stand_y};
    pose.root_ang = root_ang_(t);
    pose.joint_angles[rig_.j_torso] = torso_q_(t);
    pose.joint_angles[rig_.j_head] = head_q_(t);
    const auto fr = body::forward_frames(body_, pose);
    for (int s = 0; s < 2; ++s) {
      pose.joint_angles[rig_.j_sh[s]] = sh_(t);
      pose.joint_angles[rig_.j_el[s]] = el_(t);
      const auto leg = solve_leg(rig_, fr, s, pin_, 0);
      if (!leg) throw GenerationError("toss: stance out of leg reach");
      pose.joint_angles[rig_.j_hip[s]] = leg->hip;
      pose.joint_angles[rig_.j_knee[s]] = leg->knee;
      pose.joint_angles[rig_.j_ank[s]] = leg->ank;
    }
    return pose;
  }

  Vec2 cradled_ball(real t) const {
    const auto fr = body::forward_frames(body_, pose_at(t));
    const int fa = rig_.larm[0];
    const Vec2 mid = body::point_on_link(fr, fa, {rig_.l_larm / 2, 0});
    const real a2 = fr.angle[fa];
    const Vec2 n{-std::sin(a2), std::cos(a2)};
    return mid + (rig_.forearm_hw + r_ - real(0.005)) * n;
  }

  ProgState state_at(real t) const {
    ProgState out;
    out.pose = pose_at(t);
    sim::PropState ball;
    if (t < t_rel_) {
      ball.pos = cradled_ball(t);
    } else {
      const real tau = t - t_rel_;
      ball.pos = p_rel_ + tau * v_rel_ -
                 Vec2{0, real(0.5) * kGravity * tau * tau};
    }
    out.props = {ball};
    return out;
  }

  const BodyModel& body_;
  Rig rig_;
  sim::PropSpec ball_;
  real dt_, r_;
  Track sh_, el_, root_ang_, torso_q_, head_q_;
  Pose base_;
  Vec2 pin_;
  real t_rel_, t_end_;
  Vec2 p_rel_, v_rel_;
};

}  // namespace

std::string behavior_name(Behavior b) {
  switch (b) {
    case Behavior::kPickupCycle:
      return "pickup-cycle";
    case Behavior::kWalk:
      return "walk";
    case Behavior::kToss:
    default:
      return "toss";
  }
}

std::string height_name(HeightTag h) {
  switch (h) {
    case HeightTag::kFloor:
      return "floor";
    case HeightTag::kTorso:
      return "torso";
    case HeightTag::kHead:
    default:
      return "head";
  }
}

real pickup_height(HeightTag h) { return height_params(h).h; }

ReferenceClip generate_reference_clip(const body::BodyModel& body,
                                      Behavior behavior, HeightTag height,
                                      const sim::PropSpec& prop, Rng& rng,
                                      real dt) {
  if (dt <= 0) throw ConfigError("reference clip dt must be positive");
  switch (behavior) {
    case Behavior::kPickupCycle:
      return PickupProgram(body, height, prop, rng, dt).build();
    case Behavior::kWalk:
      return WalkProgram(body, rng, dt).build();
    case Behavior::kToss:
    default:
      return TossProgram(body, prop, rng, dt).build();
  }
}

ReferenceClip range_of_motion_clip(const body::BodyModel& body, real dt) {
  if (dt <= 0) throw ConfigError("reference clip dt must be positive");
  const Pose base = body::null_pose(body);
  const int nj = body.n_joints();
  ReferenceClip clip;
  clip.behavior = "rom";
  clip.dt = dt;
  clip.body_hash = body::body_hash(body);
  const real t_end = real(6.51);
  const int n = int(std::lround(t_end / dt)) + 1;
  auto state_at = [&](real t) {
    Pose p = base;
    p.root_pos = {real(0.10) * std::sin(kTau * real(0.17) * t),
                  base.root_pos.y() +
                      real(0.05) * std::sin(kTau * real(0.23) * t + real(0.4))};
    p.root_ang = real(0.15) * std::sin(kTau * real(0.19) * t + real(0.8));
    for (int j = 0; j < nj; ++j) {
      const real amp =
          real(0.62) * std::min(body.joints[j].limit_hi, -body.joints[j].limit_lo);
      const real f = real(0.20) + real(0.03) * real(j);
      p.joint_angles[j] = amp * std::sin(kTau * f * t + real(0.9) * real(j));
    }
    return ProgState{std::move(p), {}};
  };
  sample_program(body, dt, n, state_at, &clip);
  validate_clip(body, clip);
  return clip;
}

std::vector<ReferenceClip> build_corpus(const body::BodyModel& body,
                                        const CorpusConfig& config, Rng& rng) {
  if (config.pickups_per_combo < 0 || config.walk_clips < 0 ||
      config.toss_clips < 0)
    throw ConfigError("corpus clip counts cannot be negative");
  std::vector<ReferenceClip> out;
  const HeightTag tags[3] = {HeightTag::kFloor, HeightTag::kTorso,
                             HeightTag::kHead};
  struct BoxDef {
    Vec2 half;
    real mass;
  };
  const BoxDef sizes[2] = {{{real(0.11), real(0.09)}, real(3)},
                           {{real(0.14), real(0.11)}, real(5)}};
  for (const HeightTag tag : tags) {
    for (const BoxDef& def : sizes) {
      for (int rep = 0; rep < config.pickups_per_combo; ++rep) {
        sim::PropSpec box;
        box.kind = sim::PropKind::kBox;
        box.half_extents = def.half;
        box.mass = def.mass;
        box.color = def.mass / 10;
        out.push_back(generate_reference_clip(body, Behavior::kPickupCycle,
                                              tag, box, rng, config.dt));
      }
    }
  }
  if (config.mime_variants) {
    const int n_pickups = int(out.size());
    for (int i = 0; i < n_pickups; ++i)
      out.push_back(make_mime_variant(out[i]));
  }
  const sim::PropSpec none;
  for (int i = 0; i < config.walk_clips; ++i)
    out.push_back(generate_reference_clip(body, Behavior::kWalk,
                                          HeightTag::kFloor, none, rng,
                                          config.dt));
  sim::PropSpec ball;
  ball.kind = sim::PropKind::kBall;
  ball.radius = real(0.09);
  ball.mass = real(1);
  ball.color = real(0.1);
  for (int i = 0; i < config.toss_clips; ++i)
    out.push_back(generate_reference_clip(body, Behavior::kToss,
                                          HeightTag::kFloor, ball, rng,
                                          config.dt));
  return out;
}

}  // namespace motorkit::ref
