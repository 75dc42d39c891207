#pragma once

#include "motorkit/body/body.hpp"

namespace motorkit::body {

// World frame of every link for one pose.
struct FrameSet {
  std::vector<Vec2> origin;  // link frame origin (inboard anchor)
  std::vector<real> angle;   // absolute frame angle
  std::vector<Mat2> rot;
};

// Per-link spatial velocity (origin point velocity + angular rate).
struct FrameVelocities {
  std::vector<Vec2> origin_vel;
  std::vector<real> omega;
};

FrameSet forward_frames(const BodyModel& body, const Pose& pose);
FrameVelocities frame_velocities(const BodyModel& body, const FrameSet& frames,
                                 const Velocities& vel);

inline Vec2 point_on_link(const FrameSet& frames, int link, const Vec2& local) {
  return frames.origin[link] + frames.rot[link] * local;
}
// Velocity of a link-fixed point.
inline Vec2 point_velocity(const FrameSet& frames, const FrameVelocities& fv,
                           int link, const Vec2& local) {
  const Vec2 r = frames.rot[link] * local;
  return fv.origin_vel[link] + fv.omega[link] * Vec2(-r.y(), r.x());
}

// f_k: world position of every marker.
std::vector<Vec2> forward_kinematics(const BodyModel& body, const Pose& pose,
                                     const MarkerSet& markers);

// d(marker positions)/d(q): rows are (marker 0 x, marker 0 z, marker 1 x, ...),
// columns follow Pose::flat() ordering. Analytic planar Jacobian.
MatX marker_jacobian(const BodyModel& body, const Pose& pose,
                     const MarkerSet& markers);

// True if `ancestor` is on the chain from `link` to the root (inclusive).
bool is_ancestor(const BodyModel& body, int ancestor, int link);

}  // namespace motorkit::body
