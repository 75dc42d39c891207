#include "motorkit/body/body.hpp"

#include <json.hpp>

#include <fstream>
#include <limits>

#include "motorkit/body/kinematics.hpp"

namespace motorkit::body {

int BodyModel::link_index(const std::string& name) const {
  for (int i = 0; i < n_links(); ++i)
    if (links[i].name == name) return i;
  throw ConfigError("body: unknown link " + name);
}

void BodyModel::validate() const {
  if (links.empty()) throw ConfigError("body: no links");
  if (links[0].parent != -1) throw ConfigError("body: links[0] must be the root");
  for (int i = 1; i < n_links(); ++i) {
    if (links[i].parent < 0 || links[i].parent >= i)
      throw ConfigError("body: link " + links[i].name +
                        " must have an earlier parent (tree structure)");
    if (links[i].mass <= 0 || links[i].length <= 0)
      throw ConfigError("body: link " + links[i].name + " needs positive mass/length");
  }
  if (int(joints.size()) != n_links() - 1)
    throw ConfigError("body: need one joint per non-root link");
  if (n_joints() < 8)
    throw ConfigError("body: needs >= 8 actuated degrees of freedom");
  for (const auto& j : joints)
    if (!(j.limit_lo < j.limit_hi)) throw ConfigError("body: joint limit min >= max");
  for (const auto& m : marker_slots) {
    if (m.link < 0 || m.link >= n_links())
      throw ConfigError("body: marker slot " + m.name + " on invalid link");
    const real bound = real(2) * std::max(links[m.link].length, real(0.1));
    if (m.offset.norm() > bound)
      throw ConfigError("body: marker slot " + m.name + " offset exceeds 2x link length");
  }
  for (int idx : {head_link, hand_links[0], hand_links[1], foot_links[0], foot_links[1]})
    if (idx < 0 || idx >= n_links())
      throw ConfigError("body: head/hand/foot link indices unset");
}

VecX Pose::flat() const {
  VecX q(3 + joint_angles.size());
  q[0] = root_pos.x();
  q[1] = root_pos.y();
  q[2] = root_ang;
  q.tail(joint_angles.size()) = joint_angles;
  return q;
}

Pose Pose::from_flat(const VecX& q) {
  Pose p;
  p.root_pos = {q[0], q[1]};
  p.root_ang = q[2];
  p.joint_angles = q.tail(q.size() - 3);
  return p;
}

VecX Velocities::flat() const {
  VecX v(3 + joint_vel.size());
  v[0] = root_vel.x();
  v[1] = root_vel.y();
  v[2] = root_angvel;
  v.tail(joint_vel.size()) = joint_vel;
  return v;
}

Velocities Velocities::from_flat(const VecX& v) {
  Velocities out;
  out.root_vel = {v[0], v[1]};
  out.root_angvel = v[2];
  out.joint_vel = v.tail(v.size() - 3);
  return out;
}

Velocities Velocities::zero(const BodyModel& body) {
  Velocities out;
  out.joint_vel = VecX::Zero(body.n_joints());
  return out;
}

Pose null_pose(const BodyModel& body) {
  Pose p;
  p.joint_angles = VecX::Zero(body.n_joints());
  p.root_pos = {0, 0};
  // Ground the pose: shift the root up until the lowest capsule point (foot
  // soles, for any sane body) rests exactly on z = 0.
  const FrameSet frames = forward_frames(body, p);
  real lowest = std::numeric_limits<real>::max();
  for (int i = 0; i < body.n_links(); ++i) {
    const Vec2 tip = point_on_link(frames, i, {body.links[i].length, 0});
    lowest = std::min(lowest, std::min(frames.origin[i].y(), tip.y()) -
                                  body.links[i].half_width);
  }
  p.root_pos.y() = -lowest;
  return p;
}

Pose clamp_to_limits(const BodyModel& body, const Pose& pose) {
  Pose p = pose;
  p.root_ang = wrap_angle(p.root_ang);
  for (int i = 0; i < body.n_joints(); ++i)
    p.joint_angles[i] = std::clamp(p.joint_angles[i], body.joints[i].limit_lo,
                                   body.joints[i].limit_hi);
  return p;
}

Velocities zero_velocities(const BodyModel& body) {
  Velocities v;
  v.joint_vel = VecX::Zero(body.n_joints());
  return v;
}

MarkerSet default_markers(const BodyModel& body) {
  MarkerSet set;
  for (const auto& slot : body.marker_slots)
    set.markers.push_back({slot.link, slot.offset});
  return set;
}

// ----- default body ----- //

namespace {
// Appends a link plus its joint; returns the link index.
int add_link(BodyModel& b, const std::string& name, int parent, Vec2 anchor,
             real rest_angle, real length, real mass, real half_width,
             real limit, real kp, real kd, real tau_max, bool is_foot = false) {
  b.links.push_back({name, parent, anchor, rest_angle, length, mass, half_width, is_foot});
  b.joints.push_back({-limit, limit, kp, kd, tau_max});
  return int(b.links.size()) - 1;
}
}  // namespace

BodyModel default_body() {
  // Sagittal-plane humanoid, x forward and z up. Zero joint angles = upright
  // stand with arms hanging; the root (pelvis) frame stays world-aligned, so
  // segments that hang down or stand up get their direction from rest_angle.
  // Joint limits are symmetric so the left/right mirror of any valid pose is
  // valid (the planar stand-in for heading randomization).
  BodyModel b;
  // Pelvis: compact root blob at hip level (capsule ~ a circle of radius 7 cm).
  b.links.push_back({"pelvis", -1, {0, 0}, 0, real(0.02), real(8.0), real(0.07)});

  const real up = kPi / 2;

  // Torso and head. The torso mounts at the waist, 14 cm above the hips.
  const int torso = add_link(b, "torso", 0, {0, real(0.14)}, up, real(0.40),
                             real(10.0), real(0.09), real(1.5), 400, 40, 250);
  const int head = add_link(b, "head", torso, {real(0.40), 0}, 0, real(0.22),
                            real(4.0), real(0.07), real(1.0), 30, 3, 30);

  // Arms (shoulder at the torso tip). rest pi flips them to hang downward.
  const int uarm_l = add_link(b, "upper_arm_l", torso, {real(0.40), 0}, kPi,
                              real(0.26), real(1.5), real(0.035), real(3.0), 120, 12, 120);
  const int larm_l = add_link(b, "lower_arm_l", uarm_l, {real(0.26), 0}, 0,
                              real(0.24), real(1.0), real(0.03), real(2.6), 80, 8, 90);
  const int uarm_r = add_link(b, "upper_arm_r", torso, {real(0.40), 0}, kPi,
                              real(0.26), real(1.5), real(0.035), real(3.0), 120, 12, 120);
  const int larm_r = add_link(b, "lower_arm_r", uarm_r, {real(0.26), 0}, 0,
                              real(0.24), real(1.0), real(0.03), real(2.6), 80, 8, 90);

  // Legs (hip at the pelvis frame origin). The ankle pivot sits 5 cm below
  // and the heel 5 cm behind the shin tip, so the sole is the lowest surface
  // by a clear margin and ground contact is feet-only in upright poses.
  const int thigh_l = add_link(b, "thigh_l", 0, {0, 0}, -up, real(0.40),
                               real(4.5), real(0.055), real(2.2), 300, 30, 250);
  const int shin_l = add_link(b, "shin_l", thigh_l, {real(0.40), 0}, 0, real(0.40),
                              real(2.5), real(0.04), real(2.6), 300, 30, 250);
  const int foot_l = add_link(b, "foot_l", shin_l, {real(0.45), real(-0.05)}, up,
                              real(0.18), real(1.0), real(0.025), real(1.0), 600,
                              20, 120, true);
  const int thigh_r = add_link(b, "thigh_r", 0, {0, 0}, -up, real(0.40),
                               real(4.5), real(0.055), real(2.2), 300, 30, 250);
  const int shin_r = add_link(b, "shin_r", thigh_r, {real(0.40), 0}, 0, real(0.40),
                              real(2.5), real(0.04), real(2.6), 300, 30, 250);
  const int foot_r = add_link(b, "foot_r", shin_r, {real(0.45), real(-0.05)}, up,
                              real(0.18), real(1.0), real(0.025), real(1.0), 600,
                              20, 120, true);

  b.head_link = head;
  b.hand_links[0] = larm_l;
  b.hand_links[1] = larm_r;
  b.foot_links[0] = foot_l;
  b.foot_links[1] = foot_r;
  b.hand_radius = real(0.04);

  // Marker slots: enough attachment diversity that every link's orientation
  // is observable from >= 2 markers or from its children.
  auto slot = [&](const std::string& name, int link, real ox, real oz) {
    b.marker_slots.push_back({name, link, {ox, oz}});
  };
  slot("pelvis_f", 0, real(0.02), real(0.06));
  slot("pelvis_b", 0, real(0.02), real(-0.06));
  slot("torso_lo", torso, real(0.10), real(0.07));
  slot("torso_hi", torso, real(0.32), real(-0.07));
  slot("head_top", head, real(0.18), real(0.02));
  slot("uarm_l", uarm_l, real(0.13), real(0.03));
  slot("wrist_l", larm_l, real(0.21), real(-0.02));
  slot("uarm_r", uarm_r, real(0.13), real(-0.03));
  slot("wrist_r", larm_r, real(0.21), real(0.02));
  slot("thigh_l", thigh_l, real(0.20), real(0.04));
  slot("shin_l", shin_l, real(0.22), real(-0.03));
  slot("toe_l", foot_l, real(0.16), real(0.02));
  slot("thigh_r", thigh_r, real(0.20), real(-0.04));
  slot("shin_r", shin_r, real(0.22), real(0.03));
  slot("toe_r", foot_r, real(0.16), real(-0.02));

  b.validate();
  return b;
}

namespace {
struct Fnv {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  void feed(const void* data, std::size_t n) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) { h ^= p[i]; h *= 0x100000001B3ULL; }
  }
  void feed(real x) { double d = double(x); feed(&d, sizeof d); }
  void feed(int x) { feed(&x, sizeof x); }
  void feed(const std::string& s) { feed(s.data(), s.size()); }
};
}  // namespace

std::uint64_t body_hash(const BodyModel& body) {
  Fnv f;
  for (const auto& l : body.links) {
    f.feed(l.name);
    f.feed(l.parent);
    f.feed(l.anchor.x()); f.feed(l.anchor.y());
    f.feed(l.rest_angle); f.feed(l.length); f.feed(l.mass); f.feed(l.half_width);
    f.feed(int(l.is_foot));
  }
  for (const auto& j : body.joints) {
    f.feed(j.limit_lo); f.feed(j.limit_hi);
    f.feed(j.kp); f.feed(j.kd); f.feed(j.tau_max);
  }
  f.feed(body.head_link);
  f.feed(body.hand_links[0]); f.feed(body.hand_links[1]);
  f.feed(body.foot_links[0]); f.feed(body.foot_links[1]);
  f.feed(body.hand_radius);
  return f.h;
}

// ----- body description file ----- //

namespace {
using nlohmann::json;

json vec2_json(const Vec2& v) { return json::array({v.x(), v.y()}); }
Vec2 json_vec2(const json& j) { return Vec2(real(j.at(0)), real(j.at(1))); }
}  // namespace

void save_body(const std::string& path, const BodyModel& body) {
  json j;
  j["format"] = "motorkit-body";
  j["version"] = 1;
  j["hand_radius"] = body.hand_radius;
  j["head_link"] = body.head_link;
  j["hand_links"] = {body.hand_links[0], body.hand_links[1]};
  j["foot_links"] = {body.foot_links[0], body.foot_links[1]};
  for (const auto& l : body.links) {
    j["links"].push_back({{"name", l.name},
                          {"parent", l.parent},
                          {"anchor", vec2_json(l.anchor)},
                          {"rest_angle", l.rest_angle},
                          {"length", l.length},
                          {"mass", l.mass},
                          {"half_width", l.half_width},
                          {"is_foot", l.is_foot}});
  }
  for (const auto& jt : body.joints) {
    j["joints"].push_back({{"limit_lo", jt.limit_lo},
                           {"limit_hi", jt.limit_hi},
                           {"kp", jt.kp},
                           {"kd", jt.kd},
                           {"tau_max", jt.tau_max}});
  }
  for (const auto& m : body.marker_slots) {
    j["marker_slots"].push_back(
        {{"name", m.name}, {"link", m.link}, {"offset", vec2_json(m.offset)}});
  }
  std::ofstream os(path);
  if (!os) throw IoError("body: cannot write " + path);
  os << j.dump(2) << "\n";
}

BodyModel load_body(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("body: cannot open " + path);
  json j;
  try {
    is >> j;
  } catch (const json::exception& e) {
    throw IoError("body: parse error in " + path + ": " + e.what());
  }
  if (j.value("format", "") != "motorkit-body" || j.value("version", 0) != 1)
    throw IoError("body: " + path + " is not a v1 body description");
  BodyModel b;
  b.hand_radius = real(j.at("hand_radius"));
  b.head_link = j.at("head_link");
  b.hand_links[0] = j.at("hand_links").at(0);
  b.hand_links[1] = j.at("hand_links").at(1);
  b.foot_links[0] = j.at("foot_links").at(0);
  b.foot_links[1] = j.at("foot_links").at(1);
  for (const auto& l : j.at("links")) {
    b.links.push_back({l.at("name"), l.at("parent"), json_vec2(l.at("anchor")),
                       real(l.at("rest_angle")), real(l.at("length")),
                       real(l.at("mass")), real(l.at("half_width")),
                       bool(l.at("is_foot"))});
  }
  for (const auto& jt : j.at("joints")) {
    b.joints.push_back({real(jt.at("limit_lo")), real(jt.at("limit_hi")),
                        real(jt.at("kp")), real(jt.at("kd")),
                        real(jt.at("tau_max"))});
  }
  for (const auto& m : j.at("marker_slots"))
    b.marker_slots.push_back({m.at("name"), m.at("link"), json_vec2(m.at("offset"))});
  b.validate();
  return b;
}

}  // namespace motorkit::body
