#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "motorkit/body/body.hpp"
#include "motorkit/rng.hpp"

namespace motorkit::stac {

// Observed marker table for one take: frames x markers plus visibility bits.
struct MarkerObservations {
  std::vector<std::vector<Vec2>> points;           // [frame][marker], world
  std::vector<std::vector<std::uint8_t>> visible;  // parallel to points

  int n_frames() const { return int(points.size()); }
  int n_markers() const { return points.empty() ? 0 : int(points[0].size()); }
  void validate() const;  // >= 1 frame, rectangular, visible points finite
};

// Synthesizes observations from known poses and offsets, with optional
// Gaussian sensor noise. All markers come back visible.
MarkerObservations observe_poses(const body::BodyModel& body,
                                 const std::vector<body::Pose>& poses,
                                 const body::MarkerSet& offsets,
                                 real noise_std = 0, Rng* rng = nullptr);

struct StacConfig {
  // Joint regularizer weight, relative to the mean per-marker residual; it
  // fades as the fit tightens, so a perfect fit is a fixed point.
  real lambda_null = real(1e-3);
  real tol = real(1e-12);       // relative objective decrease to stop
  real step_tol = real(1e-10);  // step infinity norm to stop
  int max_iterations = 60;
  int rom_stride = 2;  // frame stride for the offset solve
  void validate() const;
};

struct PoseSolve {
  body::Pose pose;
  real residual = 0;    // marker SSE + regularizer at the final weight
  real marker_sse = 0;  // marker term alone
  int iterations = 0;
  bool converged = true;       // false: stopped only by max_iterations
  std::vector<real> history;   // objective at init and each accepted step
};

// argmin_q sum_visible ||f(q) - s*||^2 + lambda ||q_joints||^2 by damped
// Gauss-Newton with Levenberg adaptation on the analytic marker Jacobian.
// The regularizer covers joint angles only, never the root, so the problem
// is translation-equivariant. With no visible markers the regularizer-only
// optimum is returned exactly: the init with its joints nulled.
PoseSolve solve_pose_frame(const body::BodyModel& body,
                           const std::vector<Vec2>& points,
                           const std::vector<std::uint8_t>& visible,
                           const body::MarkerSet& offsets,
                           const body::Pose& init,
                           const StacConfig& config = {});

// Exact per-marker linear least squares for the attachment offsets given
// poses (rotations are orthonormal, so the normal matrix is n*I). Uses the
// layout only for the marker -> link assignment. Throws NumericError naming
// any marker whose link shows fewer than two distinct orientations.
body::MarkerSet solve_marker_offsets(const body::BodyModel& body,
                                     const std::vector<body::Pose>& poses,
                                     const MarkerObservations& obs,
                                     const body::MarkerSet& layout);

struct StacReport {
  // RMS per-marker residual (m) on the strided range-of-motion frames the
  // offsets are fit to, after each stage. Non-increasing by construction.
  real rms_stage1 = 0, rms_stage2 = 0, rms_stage3 = 0;
  int iterations_stage1 = 0, iterations_stage3 = 0;
  int rom_frames_used = 0;
  StacConfig config;
  std::string summary() const;
};

struct StacResult {
  body::MarkerSet offsets;
  std::vector<std::vector<body::Pose>> trajectories;  // per input take
  StacReport report;
};

// Three stages, no further alternation: (1) per-frame pose solve with the
// initial offsets, each frame warm-started from the preceding one; (2) exact
// offset solve on strided frames of the range-of-motion take; (3) per-frame
// re-solve with the calibrated offsets, independently initialized from the
// stage-1 poses (parallelizable).
StacResult run_stac(const body::BodyModel& body,
                    const std::vector<MarkerObservations>& takes,
                    int rom_take, const body::MarkerSet& init_offsets,
                    const StacConfig& config = {});

}  // namespace motorkit::stac
