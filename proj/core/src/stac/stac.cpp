#include "motorkit/stac/stac.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "motorkit/body/kinematics.hpp"

namespace motorkit::stac {

void MarkerObservations::validate() const {
  if (points.empty()) throw ConfigError("stac: observations need >= 1 frame");
  if (visible.size() != points.size())
    throw ConfigError("stac: visibility table size mismatch");
  const size_t nm = points[0].size();
  for (size_t i = 0; i < points.size(); ++i) {
    if (points[i].size() != nm || visible[i].size() != nm)
      throw ConfigError("stac: ragged observation table");
    for (size_t m = 0; m < nm; ++m)
      if (visible[i][m] && !points[i][m].allFinite())
        throw NumericError("stac: non-finite visible marker " +
                           std::to_string(m) + " at frame " +
                           std::to_string(i));
  }
}

void StacConfig::validate() const {
  if (lambda_null < 0) throw ConfigError("stac: lambda_null must be >= 0");
  if (tol <= 0 || step_tol <= 0)
    throw ConfigError("stac: tolerances must be > 0");
  if (max_iterations < 1) throw ConfigError("stac: max_iterations must be >= 1");
  if (rom_stride < 1) throw ConfigError("stac: rom_stride must be >= 1");
}

MarkerObservations observe_poses(const body::BodyModel& body,
                                 const std::vector<body::Pose>& poses,
                                 const body::MarkerSet& offsets,
                                 real noise_std, Rng* rng) {
  if (noise_std > 0 && !rng)
    throw ConfigError("stac: noisy observations need an rng");
  MarkerObservations obs;
  obs.points.reserve(poses.size());
  for (const auto& pose : poses) {
    auto pts = body::forward_kinematics(body, pose, offsets);
    if (noise_std > 0)
      for (auto& p : pts)
        p += Vec2{real(rng->gaussian(0, noise_std)),
                  real(rng->gaussian(0, noise_std))};
    obs.points.push_back(std::move(pts));
    obs.visible.emplace_back(offsets.size(), std::uint8_t(1));
  }
  return obs;
}

namespace {

// Marker residual r = f(q) - s* over the visible subset, stacked (x, z).
real marker_sse_at(const body::BodyModel& body, const body::Pose& pose,
                   const body::MarkerSet& offsets,
                   const std::vector<Vec2>& points,
                   const std::vector<int>& vis, VecX* r_out) {
  const auto f = body::forward_kinematics(body, pose, offsets);
  if (r_out) r_out->resize(2 * int(vis.size()));
  real sse = 0;
  for (size_t k = 0; k < vis.size(); ++k) {
    const Vec2 d = f[vis[k]] - points[vis[k]];
    sse += d.squaredNorm();
    if (r_out) {
      (*r_out)[2 * k] = d.x();
      (*r_out)[2 * k + 1] = d.y();
    }
  }
  return sse;
}

}  // namespace

PoseSolve solve_pose_frame(const body::BodyModel& body,
                           const std::vector<Vec2>& points,
                           const std::vector<std::uint8_t>& visible,
                           const body::MarkerSet& offsets,
                           const body::Pose& init, const StacConfig& config) {
  config.validate();
  if (int(points.size()) != offsets.size() ||
      visible.size() != points.size())
    throw ConfigError("stac: observation row does not match the marker set");
  if (int(init.joint_angles.size()) != body.n_joints())
    throw ConfigError("stac: init pose does not match the body");

  std::vector<int> vis;
  for (size_t m = 0; m < visible.size(); ++m)
    if (visible[m]) vis.push_back(int(m));

  PoseSolve out;
  if (vis.empty()) {
    // Regularizer-only objective: joints to null, root wherever it was.
    out.pose = init;
    out.pose.joint_angles.setZero();
    out.history = {0};
    return out;
  }

  const int nq = body.nq();
  const int nj = body.n_joints();
  const real nvis = real(vis.size());
  VecX q = init.flat();

  VecX r;
  real sse = marker_sse_at(body, body::Pose::from_flat(q), offsets, points,
                           vis, &r);
  // Fading regularizer weight; kept non-increasing so the recorded objective
  // is non-increasing across accepted iterations by construction.
  real lambda = config.lambda_null * sse / nvis;
  auto objective = [&](real marker, const VecX& qv) {
    return marker + lambda * qv.tail(nj).squaredNorm();
  };
  real fval = objective(sse, q);
  out.history.push_back(fval);

  real mu = 0;  // Levenberg damping, scaled to the normal matrix on first use
  out.converged = false;
  for (int iter = 0; iter < config.max_iterations; ++iter) {
    const body::Pose pose = body::Pose::from_flat(q);
    const MatX Jfull = body::marker_jacobian(body, pose, offsets);
    MatX J(2 * vis.size(), nq);
    for (size_t k = 0; k < vis.size(); ++k) {
      J.row(2 * k) = Jfull.row(2 * vis[k]);
      J.row(2 * k + 1) = Jfull.row(2 * vis[k] + 1);
    }

    MatX H = J.transpose() * J;
    VecX g = J.transpose() * r;
    for (int j = 0; j < nj; ++j) {
      H(3 + j, 3 + j) += lambda;
      g[3 + j] += lambda * q[3 + j];
    }
    if (mu == 0) mu = real(1e-6) * H.diagonal().maxCoeff() + real(1e-12);

    // Retry with stronger damping until the (frozen-weight) objective drops.
    bool accepted = false;
    VecX q_new;
    real sse_new = 0, f_new = 0;
    for (int tries = 0; tries < 40; ++tries) {
      const VecX step =
          (H + mu * MatX::Identity(nq, nq)).ldlt().solve(-g);
      q_new = q + step;
      VecX r_new;
      sse_new = marker_sse_at(body, body::Pose::from_flat(q_new), offsets,
                              points, vis, &r_new);
      f_new = objective(sse_new, q_new);
      if (f_new <= fval && q_new.allFinite()) {
        accepted = true;
        r.swap(r_new);
        mu = std::max(mu * real(0.3), real(1e-15));
        if (step.lpNorm<Eigen::Infinity>() < config.step_tol) {
          out.converged = true;
        }
        break;
      }
      mu *= 8;
    }
    ++out.iterations;
    if (!accepted) {  // no descent direction left: at a local minimum
      out.converged = true;
      break;
    }

    const real drop = fval - f_new;
    q = q_new;
    sse = sse_new;
    lambda = std::min(lambda, config.lambda_null * sse / nvis);
    fval = objective(sse, q);
    out.history.push_back(fval);
    if (drop <= config.tol * std::max(fval, real(1e-30))) {
      out.converged = true;
      break;
    }
    if (out.converged) break;  // step_tol hit above
  }

  out.pose = body::Pose::from_flat(q);
  out.residual = fval;
  out.marker_sse = sse;
  return out;
}

body::MarkerSet solve_marker_offsets(const body::BodyModel& body,
                                     const std::vector<body::Pose>& poses,
                                     const MarkerObservations& obs,
                                     const body::MarkerSet& layout) {
  obs.validate();
  if (int(poses.size()) != obs.n_frames())
    throw ConfigError("stac: pose count does not match observation frames");
  if (obs.n_markers() != layout.size())
    throw ConfigError("stac: observation columns do not match the layout");

  std::vector<body::FrameSet> frames;
  frames.reserve(poses.size());
  for (const auto& pose : poses)
    frames.push_back(body::forward_frames(body, pose));

  body::MarkerSet out = layout;
  for (int m = 0; m < layout.size(); ++m) {
    const int link = layout.markers[m].link;
    Vec2 acc{0, 0};
    int n = 0;
    std::vector<real> seen;
    for (int i = 0; i < obs.n_frames(); ++i) {
      if (!obs.visible[i][m]) continue;
      const real a = frames[i].angle[link];
      acc += frames[i].rot[link].transpose() *
             (obs.points[i][m] - frames[i].origin[link]);
      ++n;
      bool fresh = true;
      for (real s : seen)
        if (std::abs(wrap_angle(a - s)) < real(1e-6)) fresh = false;
      if (fresh) seen.push_back(a);
    }
    if (seen.size() < 2)
      throw NumericError("stac: marker " + std::to_string(m) + " (" +
                         body.links[link].name +
                         ") observed in fewer than two link orientations; "
                         "offset is under-determined");
    out.markers[m].offset = acc / real(n);
  }
  return out;
}

namespace {

real subset_rms(const body::BodyModel& body,
                const std::vector<body::Pose>& poses,
                const MarkerObservations& obs, const body::MarkerSet& offsets,
                const std::vector<int>& frames) {
  real sse = 0;
  long count = 0;
  for (int i : frames) {
    const auto f = body::forward_kinematics(body, poses[i], offsets);
    for (int m = 0; m < obs.n_markers(); ++m) {
      if (!obs.visible[i][m]) continue;
      sse += (f[m] - obs.points[i][m]).squaredNorm();
      ++count;
    }
  }
  return count ? std::sqrt(sse / real(count)) : real(0);
}

}  // namespace

std::string StacReport::summary() const {
  std::ostringstream os;
  os << "stac: rms per marker (m) stage1 " << rms_stage1 << " -> stage2 "
     << rms_stage2 << " -> stage3 " << rms_stage3 << " on " << rom_frames_used
     << " range-of-motion frames; pose-solve iterations " << iterations_stage1
     << " + " << iterations_stage3 << "; lambda_null " << config.lambda_null
     << ", tol " << config.tol << ", max_iterations " << config.max_iterations
     << ", rom_stride " << config.rom_stride;
  return os.str();
}

StacResult run_stac(const body::BodyModel& body,
                    const std::vector<MarkerObservations>& takes,
                    int rom_take, const body::MarkerSet& init_offsets,
                    const StacConfig& config) {
  config.validate();
  if (takes.empty()) throw ConfigError("stac: no takes");
  if (rom_take < 0 || rom_take >= int(takes.size()))
    throw ConfigError("stac: range-of-motion take index out of range");
  for (const auto& take : takes) {
    take.validate();
    if (take.n_markers() != init_offsets.size())
      throw ConfigError("stac: take does not match the marker layout");
  }

  StacResult out;
  out.report.config = config;
  const body::Pose null = body::null_pose(body);

  // Stage 1: pose solve with the initial offsets, warm-started frame to
  // frame within each take.
  std::vector<std::vector<body::Pose>> stage1(takes.size());
  for (size_t t = 0; t < takes.size(); ++t) {
    const auto& take = takes[t];
    stage1[t].reserve(take.n_frames());
    body::Pose prev = null;
    for (int i = 0; i < take.n_frames(); ++i) {
      const auto solved = solve_pose_frame(body, take.points[i],
                                           take.visible[i], init_offsets,
                                           prev, config);
      prev = solved.pose;
      stage1[t].push_back(solved.pose);
      out.report.iterations_stage1 += solved.iterations;
    }
  }

  // Stage 2: exact offset solve on the strided range-of-motion frames.
  const auto& rom = takes[rom_take];
  std::vector<int> strided;
  for (int i = 0; i < rom.n_frames(); i += config.rom_stride)
    strided.push_back(i);
  out.report.rom_frames_used = int(strided.size());
  MarkerObservations sub;
  std::vector<body::Pose> sub_poses;
  for (int i : strided) {
    sub.points.push_back(rom.points[i]);
    sub.visible.push_back(rom.visible[i]);
    sub_poses.push_back(stage1[rom_take][i]);
  }
  out.report.rms_stage1 = subset_rms(body, stage1[rom_take], rom,
                                     init_offsets, strided);
  out.offsets = solve_marker_offsets(body, sub_poses, sub, init_offsets);
  out.report.rms_stage2 =
      subset_rms(body, stage1[rom_take], rom, out.offsets, strided);

  // Stage 3: independent per-frame re-solve with the calibrated offsets,
  // initialized at the stage-1 poses.
  out.trajectories.resize(takes.size());
  for (size_t t = 0; t < takes.size(); ++t) {
    const auto& take = takes[t];
    out.trajectories[t].resize(take.n_frames());
    for (int i = 0; i < take.n_frames(); ++i) {
      const auto solved = solve_pose_frame(body, take.points[i],
                                           take.visible[i], out.offsets,
                                           stage1[t][i], config);
      out.trajectories[t][i] = solved.pose;
      out.report.iterations_stage3 += solved.iterations;
    }
  }
  out.report.rms_stage3 = subset_rms(body, out.trajectories[rom_take], rom,
                                     out.offsets, strided);
  return out;
}

}  // namespace motorkit::stac
