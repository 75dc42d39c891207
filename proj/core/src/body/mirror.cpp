#include "motorkit/body/mirror.hpp"

namespace motorkit::body {

MirrorMap make_mirror_map(const BodyModel& body, real pivot_x) {
  MirrorMap map;
  map.pivot_x = pivot_x;
  map.joint_perm.resize(body.n_joints());
  auto partner = [&](const std::string& name) -> std::string {
    if (name.size() > 2 && name.ends_with("_l")) return name.substr(0, name.size() - 1) + "r";
    if (name.size() > 2 && name.ends_with("_r")) return name.substr(0, name.size() - 1) + "l";
    return name;  // midline link maps to itself
  };
  for (int j = 0; j < body.n_joints(); ++j) {
    const int mirrored_link = body.link_index(partner(body.links[j + 1].name));
    map.joint_perm[j] = mirrored_link - 1;
  }
  return map;
}

Pose MirrorMap::apply(const Pose& pose) const {
  Pose out = pose;
  out.root_pos = apply_point(pose.root_pos);
  out.root_ang = wrap_angle(-pose.root_ang);
  for (size_t j = 0; j < joint_perm.size(); ++j)
    out.joint_angles[int(j)] = -pose.joint_angles[joint_perm[j]];
  return out;
}

Velocities MirrorMap::apply(const Velocities& vel) const {
  Velocities out = vel;
  out.root_vel = apply_vector(vel.root_vel);
  out.root_angvel = -vel.root_angvel;
  for (size_t j = 0; j < joint_perm.size(); ++j)
    out.joint_vel[int(j)] = -vel.joint_vel[joint_perm[j]];
  return out;
}

}  // namespace motorkit::body
