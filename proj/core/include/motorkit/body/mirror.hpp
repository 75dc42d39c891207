#pragma once

#include "motorkit/body/body.hpp"

namespace motorkit::body {

// Left/right reflection about the vertical line x = pivot_x: the planar
// analog of heading randomization, also used for data augmentation. Swaps the
// left/right limb chains and negates every angle-like quantity (joint limits
// are symmetric, so mirrored poses stay valid).
struct MirrorMap {
  std::vector<int> joint_perm;  // mirrored joint index per joint
  real pivot_x = 0;

  Pose apply(const Pose& pose) const;
  Velocities apply(const Velocities& vel) const;
  Vec2 apply_point(const Vec2& p) const {
    return {2 * pivot_x - p.x(), p.y()};
  }
  Vec2 apply_vector(const Vec2& v) const { return {-v.x(), v.y()}; }
};

MirrorMap make_mirror_map(const BodyModel& body, real pivot_x = 0);

}  // namespace motorkit::body
