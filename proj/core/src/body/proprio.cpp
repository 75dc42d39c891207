#include "motorkit/body/proprio.hpp"

namespace motorkit::body {

WorldFrame WorldFrame::transformed(const WorldFrame& w, const Vec2& translation,
                                   real rotation) {
  const Mat2 R = rot2(rotation);
  WorldFrame out;
  out.ground_origin = R * w.ground_origin + translation;
  out.ground_angle = w.ground_angle + rotation;
  out.gravity_dir = R * w.gravity_dir;
  return out;
}

Pose transform_pose(const Pose& pose, const Vec2& translation, real rotation) {
  Pose out = pose;
  out.root_pos = rot2(rotation) * pose.root_pos + translation;
  out.root_ang = wrap_angle(pose.root_ang + rotation);
  return out;
}

Velocities transform_velocities(const Velocities& vel, real rotation) {
  Velocities out = vel;
  out.root_vel = rot2(rotation) * vel.root_vel;
  return out;
}

int proprio_dim(const BodyModel& body) {
  return 2 * body.n_joints() + 2 + 1 + 2 + 1 + 10 + 2;
}

VecX proprio_features(const BodyModel& body, const Pose& pose,
                      const Velocities& vel, const TouchBits& touch,
                      const WorldFrame& world) {
  // Appendage geometry is computed with the root pinned at the origin: the
  // features are egocentric by construction (bit-identical under root
  // translation, not merely close).
  Pose local = pose;
  local.root_pos = {0, 0};
  local.root_ang = 0;
  const FrameSet frames = forward_frames(body, local);
  const Mat2 root_R = rot2(pose.root_ang);  // orientation, not rest-adjusted
  const Mat2 to_root = root_R.transpose();

  VecX f(proprio_dim(body));
  int k = 0;
  f.segment(k, body.n_joints()) = pose.joint_angles;
  k += body.n_joints();
  f.segment(k, body.n_joints()) = vel.joint_vel;
  k += body.n_joints();

  const Vec2 v_root = to_root * vel.root_vel;
  f[k++] = v_root.x();
  f[k++] = v_root.y();
  f[k++] = vel.root_angvel;

  const Vec2 g_root = to_root * world.gravity_dir;
  f[k++] = g_root.x();
  f[k++] = g_root.y();

  // Signed distance from the root to the ground line along its normal.
  const Vec2 ground_normal(-std::sin(world.ground_angle), std::cos(world.ground_angle));
  f[k++] = ground_normal.dot(pose.root_pos - world.ground_origin);

  // Appendage vectors x_app: root -> (left hand, right hand, head top, left
  // foot tip, right foot tip), expressed in the root frame. With the root
  // pinned at the origin and angle zero, the pinned-world position IS the
  // root-frame vector.
  const int app_links[5] = {body.hand_links[0], body.hand_links[1],
                            body.head_link, body.foot_links[0],
                            body.foot_links[1]};
  for (int link : app_links) {
    const Vec2 rel = point_on_link(frames, link, {body.links[link].length, 0});
    f[k++] = rel.x();
    f[k++] = rel.y();
  }

  f[k++] = touch.hand[0] ? real(1) : real(0);
  f[k++] = touch.hand[1] ? real(1) : real(0);
  if (k != f.size()) throw ConfigError("proprio: feature count mismatch");
  return f;
}

}  // namespace motorkit::body
