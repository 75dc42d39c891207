#pragma once

#include <vector>

#include "motorkit/ref/clip.hpp"
#include "motorkit/rng.hpp"

namespace motorkit::ref {

enum class Behavior { kPickupCycle, kWalk, kToss };
enum class HeightTag { kFloor, kTorso, kHead };

std::string behavior_name(Behavior b);
std::string height_name(HeightTag h);
real pickup_height(HeightTag h);  // pedestal top height for the tag

// Scripted keyframe choreography sampled at the control rate. Pickup cycles
// walk to a loaded pedestal, grab, carry to the second pedestal, and put the
// box down; walks are plain gait; tosses hold a ball, wind up, and release it
// onto a ballistic arc. Smooth (C2) by construction. Throws GenerationError
// when a keyframe is unreachable or violates joint limits.
ReferenceClip generate_reference_clip(const body::BodyModel& body,
                                      Behavior behavior, HeightTag height,
                                      const sim::PropSpec& prop, Rng& rng,
                                      real dt = real(0.03));

// Joint-sweep clip for marker calibration: every joint oscillates through
// ~60% of its range at a distinct frequency so link orientations decorrelate.
ReferenceClip range_of_motion_clip(const body::BodyModel& body,
                                   real dt = real(0.03));

struct CorpusConfig {
  int pickups_per_combo = 1;  // clips per (height x box size) pair
  int walk_clips = 2;
  int toss_clips = 2;
  bool mime_variants = true;  // add a mime twin of every pickup
  real dt = real(0.03);
};

// Balanced clip set: pickup cycles at three heights x two box sizes (+ mime
// twins), walks, and tosses. Every clip passes validate_clip and its own
// segmentation. Counts are configurable so ablations can reweight behaviors.
std::vector<ReferenceClip> build_corpus(const body::BodyModel& body,
                                        const CorpusConfig& config, Rng& rng);

}  // namespace motorkit::ref
