#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "motorkit/common.hpp"

namespace motorkit::body {

// One rigid segment. The link frame sits at its inboard joint anchor with the
// segment running along local +x to (length, 0); center of mass at midpoint.
struct LinkSpec {
  std::string name;
  int parent = -1;       // -1 for the root link
  Vec2 anchor{0, 0};     // joint anchor, in the parent frame
  real rest_angle = 0;   // frame angle relative to parent at zero joint angle
  real length = 0;       // m
  real mass = 0;         // kg
  real half_width = 0;   // m, collision/visual thickness
  bool is_foot = false;
};

// Actuated revolute joint driving link i+1 (the root is unactuated).
struct JointSpec {
  real limit_lo = -kPi;
  real limit_hi = kPi;
  real kp = 0;       // position gain
  real kd = 0;       // damping gain
  real tau_max = 0;  // Nm
};

struct MarkerSlot {
  std::string name;
  int link = 0;
  Vec2 offset{0, 0};  // link frame, m
};

// Reduced planar humanoid: mobile pelvis root, torso, head, two 2-segment
// arms with point hands, two 3-segment legs with feet.
struct BodyModel {
  std::vector<LinkSpec> links;    // links[0] is the root
  std::vector<JointSpec> joints;  // joints[i] drives links[i+1]
  std::vector<MarkerSlot> marker_slots;
  int head_link = -1;
  int hand_links[2] = {-1, -1};  // left, right
  int foot_links[2] = {-1, -1};  // left, right
  real hand_radius = real(0.04);

  int n_links() const { return int(links.size()); }
  int n_joints() const { return int(joints.size()); }
  int nq() const { return 3 + n_joints(); }  // root x, z, angle + joints
  int link_index(const std::string& name) const;
  void validate() const;  // tree structure, limits, dof count
};

// Generalized coordinates: planar root + joint angles.
struct Pose {
  Vec2 root_pos{0, 0};
  real root_ang = 0;  // wrapped to (-pi, pi]
  VecX joint_angles;

  VecX flat() const;  // [x, z, ang, q_0..q_{n-1}]
  static Pose from_flat(const VecX& q);
};

struct Velocities {
  Vec2 root_vel{0, 0};
  real root_angvel = 0;
  VecX joint_vel;

  VecX flat() const;
  static Velocities from_flat(const VecX& v);
  static Velocities zero(const BodyModel& body);
};

// Marker attachment offsets being calibrated (x_m): one (link, local offset)
// per marker.
struct MarkerSet {
  struct Marker {
    int link = 0;
    Vec2 offset{0, 0};
  };
  std::vector<Marker> markers;

  int size() const { return int(markers.size()); }
};

Pose null_pose(const BodyModel& body);
Pose clamp_to_limits(const BodyModel& body, const Pose& pose);
Velocities zero_velocities(const BodyModel& body);
// Marker set assembled from the body's marker slots.
MarkerSet default_markers(const BodyModel& body);

// The standard reduced body used across the pipeline (12 actuated joints,
// ~1.5 m tall, ~43 kg).
BodyModel default_body();

// Versioned body description file (JSON).
void save_body(const std::string& path, const BodyModel& body);
BodyModel load_body(const std::string& path);

// Stable fingerprint of the kinematic/dynamic definition (names, geometry,
// limits, gains). Artifacts carry this so stale files fail loudly.
std::uint64_t body_hash(const BodyModel& body);

}  // namespace motorkit::body
