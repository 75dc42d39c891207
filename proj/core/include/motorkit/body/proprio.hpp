#pragma once

#include "motorkit/body/body.hpp"
#include "motorkit/body/kinematics.hpp"

namespace motorkit::body {

// Scene frame the body lives in. Egocentric features are computed relative to
// this frame, so rigidly transforming (pose, velocities, world) together
// leaves them unchanged. The defaults describe the simulator's flat ground
// with gravity along -z.
struct WorldFrame {
  Vec2 ground_origin{0, 0};
  real ground_angle = 0;              // ground tangent direction
  Vec2 gravity_dir{0, real(-1)};      // unit vector

  static WorldFrame transformed(const WorldFrame& w, const Vec2& translation,
                                real rotation);
};

// Applies a rigid transform (rotate about the origin by `rotation`, then
// translate) to a pose and its velocities; used by tests and data
// augmentation.
Pose transform_pose(const Pose& pose, const Vec2& translation, real rotation);
Velocities transform_velocities(const Velocities& vel, real rotation);

struct TouchBits {
  bool hand[2] = {false, false};  // left, right
};

// Egocentric feature vector: joint angles + velocities, root-frame linear and
// angular velocity, gravity direction in the root frame, root height above
// the ground line, root-frame appendage vectors (hands, head, feet), and the
// hand touch bits.
VecX proprio_features(const BodyModel& body, const Pose& pose,
                      const Velocities& vel, const TouchBits& touch,
                      const WorldFrame& world = WorldFrame{});
int proprio_dim(const BodyModel& body);

}  // namespace motorkit::body
