#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "motorkit/body/body.hpp"
#include "motorkit/sim/contacts.hpp"
#include "motorkit/sim/props.hpp"

namespace motorkit::ref {

// One reference frame at the control rate.
struct ClipFrame {
  body::Pose pose;
  body::Velocities vel;
  std::vector<sim::PropState> props;  // parallel to ReferenceClip::props
};

// A synthetic motion snippet: body pose/velocity plus the scene props, evenly
// sampled. Stands in for a motion-capture clip everywhere downstream.
struct ReferenceClip {
  std::string behavior;  // pickup-cycle | walk | toss | rom (+ "-mime")
  std::string height;    // floor | torso | head; empty when not a pickup
  real dt = real(0.03);
  std::uint64_t body_hash = 0;
  int dynamic_prop = -1;  // index into props; -1 when the clip is body-only
  std::vector<sim::PropSpec> props;
  std::vector<ClipFrame> frames;

  int n_frames() const { return int(frames.size()); }
  real duration() const {
    return frames.empty() ? real(0) : dt * real(n_frames() - 1);
  }
};

// Structural checks plus the clip invariants: consistent sizes, finite data,
// 3-20 s duration, joint limits, and stored velocities within 5% of finite
// differences of the stored poses.
void validate_clip(const body::BodyModel& body, const ReferenceClip& clip);

// Aggregate relative L2 deviation between stored body velocities and central
// finite differences of the stored poses (interior frames).
real velocity_fd_deviation(const ReferenceClip& clip);

// Versioned clip file (JSON, same family as the body description format).
void save_clip(const std::string& path, const ReferenceClip& clip);
ReferenceClip load_clip(const std::string& path);
// Load and insist the clip was authored for `body`.
ReferenceClip load_clip(const std::string& path, const body::BodyModel& body);

// ----- warehouse phase machine (shared with the task environment) ----- //

enum class Phase { kGoto, kLift, kCarry, kPutdown };
std::string phase_name(Phase p);
Phase next_phase(Phase p);

struct PhaseContext {
  int box = -1;
  int source_pedestal = -1;
  int target_pedestal = -1;
  real goto_radius = real(0.65);  // "within" distance for GOTO/CARRY

  int focal_pedestal(Phase p) const {
    return (p == Phase::kGoto || p == Phase::kLift) ? source_pedestal
                                                    : target_pedestal;
  }
};

// Success predicate of one phase for a kinematic snapshot. Distances are
// horizontal, walker root to pedestal center.
bool phase_success(Phase p, real walker_x, const std::vector<sim::PropState>& props,
                   const sim::ContactReport& report, const PhaseContext& ctx);

struct PhaseSpan {
  Phase phase;
  int first = 0;
  int last = 0;  // inclusive; the success frame unless the clip is truncated
};
struct PhaseSegmentation {
  std::vector<PhaseSpan> spans;
  PhaseContext context;
};

// Labels a clip by running the phase predicates frame by frame. Clips without
// a box initially resting on a pedestal (walk, toss, body-only) come back as
// one full-length GOTO-like span. Task failure states inside the clip (box on
// the ground, walker grounded off its feet) raise SegmentationError naming
// the offending frame.
PhaseSegmentation segment_phases(const body::BodyModel& body,
                                 const ReferenceClip& clip);

// The same body motion with the manipulated prop removed and the behavior tag
// suffixed "-mime". Body frames are copied bit-identically.
ReferenceClip make_mime_variant(const ReferenceClip& clip);

}  // namespace motorkit::ref
