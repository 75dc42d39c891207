#include "motorkit/body/kinematics.hpp"

namespace motorkit::body {

FrameSet forward_frames(const BodyModel& body, const Pose& pose) {
  if (pose.joint_angles.size() != body.n_joints())
    throw ConfigError("kinematics: pose joint count mismatch");
  const int n = body.n_links();
  FrameSet f;
  f.origin.resize(n);
  f.angle.resize(n);
  f.rot.resize(n);
  f.origin[0] = pose.root_pos;
  f.angle[0] = pose.root_ang + body.links[0].rest_angle;
  f.rot[0] = rot2(f.angle[0]);
  for (int i = 1; i < n; ++i) {
    const LinkSpec& l = body.links[i];
    f.origin[i] = f.origin[l.parent] + f.rot[l.parent] * l.anchor;
    f.angle[i] = f.angle[l.parent] + l.rest_angle + pose.joint_angles[i - 1];
    f.rot[i] = rot2(f.angle[i]);
  }
  return f;
}

FrameVelocities frame_velocities(const BodyModel& body, const FrameSet& frames,
                                 const Velocities& vel) {
  const int n = body.n_links();
  FrameVelocities fv;
  fv.origin_vel.resize(n);
  fv.omega.resize(n);
  fv.origin_vel[0] = vel.root_vel;
  fv.omega[0] = vel.root_angvel;
  for (int i = 1; i < n; ++i) {
    const LinkSpec& l = body.links[i];
    const Vec2 r = frames.rot[l.parent] * l.anchor;
    fv.origin_vel[i] =
        fv.origin_vel[l.parent] + fv.omega[l.parent] * Vec2(-r.y(), r.x());
    fv.omega[i] = fv.omega[l.parent] + vel.joint_vel[i - 1];
  }
  return fv;
}

std::vector<Vec2> forward_kinematics(const BodyModel& body, const Pose& pose,
                                     const MarkerSet& markers) {
  const FrameSet frames = forward_frames(body, pose);
  std::vector<Vec2> out;
  out.reserve(markers.markers.size());
  for (const auto& m : markers.markers) {
    if (m.link < 0 || m.link >= body.n_links())
      throw ConfigError("kinematics: marker on invalid link");
    out.push_back(point_on_link(frames, m.link, m.offset));
  }
  return out;
}

bool is_ancestor(const BodyModel& body, int ancestor, int link) {
  for (int i = link; i != -1; i = body.links[i].parent)
    if (i == ancestor) return true;
  return false;
}

MatX marker_jacobian(const BodyModel& body, const Pose& pose,
                     const MarkerSet& markers) {
  const FrameSet frames = forward_frames(body, pose);
  const int nm = markers.size();
  MatX J = MatX::Zero(2 * nm, body.nq());
  for (int m = 0; m < nm; ++m) {
    const auto& marker = markers.markers[m];
    const Vec2 p = point_on_link(frames, marker.link, marker.offset);
    // Root translation.
    J(2 * m, 0) = 1;
    J(2 * m + 1, 1) = 1;
    // Root rotation spins the whole chain about root_pos.
    const Vec2 r_root = p - pose.root_pos;
    J(2 * m, 2) = -r_root.y();
    J(2 * m + 1, 2) = r_root.x();
    // Each ancestor joint spins the marker about its anchor.
    for (int link = marker.link; link != 0; link = body.links[link].parent) {
      const Vec2 r = p - frames.origin[link];
      J(2 * m, 3 + link - 1) = -r.y();
      J(2 * m + 1, 3 + link - 1) = r.x();
    }
  }
  return J;
}

}  // namespace motorkit::body
