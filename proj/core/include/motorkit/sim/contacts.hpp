#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <vector>

#include "motorkit/body/body.hpp"
#include "motorkit/body/kinematics.hpp"
#include "motorkit/body/proprio.hpp"
#include "motorkit/sim/props.hpp"

namespace motorkit::sim {

// Kinematic contact summary used by task predicates, phase segmentation, and
// observations. Pure function of poses, so it also works on kinematically
// authored states that never touched the dynamics.
struct ContactReport {
  int nonfoot_ground = 0;  // non-foot walker capsule <-> ground
  int foot_ground = 0;
  int ball_ground = 0;
  int ball_walker = 0;
  int ball_bucket_bottom = 0;
  int walker_box = 0;
  bool hand_touch[2] = {false, false};           // hand tip touching anything
  std::map<std::pair<int, int>, int> box_pedestal;  // (box prop, pedestal prop) -> points
  std::map<int, int> box_ground;                    // box prop -> points
  std::map<std::pair<int, int>, int> hand_box;      // (hand 0/1, box prop) -> points
  std::map<int, int> walker_box_map;                // box prop -> walker points

  int box_pedestal_count(int box, int pedestal) const;
  int box_ground_count(int box) const;
  int hand_box_count(int hand, int box) const;
  int walker_box_count(int box) const;
  int box_pedestal_total(int box) const;
};

// One resolved geometric contact, before forces.
struct ContactPoint {
  Vec2 point{0, 0};   // world
  Vec2 normal{0, 1};  // pushes the first participant out of the second
  real depth = 0;     // > 0 when penetrating

  // Participants, for reporting and force routing.
  enum class Side { kWalker, kProp, kGround };
  Side a = Side::kWalker;
  int a_index = 0;  // walker link or prop index
  Side b = Side::kGround;
  int b_index = 0;  // prop index when b is a prop
  int b_part = 0;   // bucket part: 0 bottom, 1/2 walls
  std::uint64_t key = 0;  // stable id for friction anchors
};

// Full geometric contact pass for one state.
std::vector<ContactPoint> detect_contacts(const body::BodyModel& body,
                                          const body::FrameSet& frames,
                                          const std::vector<PropSpec>& specs,
                                          const std::vector<PropState>& props);

ContactReport summarize_contacts(const body::BodyModel& body,
                                 const std::vector<PropSpec>& specs,
                                 const std::vector<ContactPoint>& contacts);

}  // namespace motorkit::sim
