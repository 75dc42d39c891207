#include "motorkit/ref/clip.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>

#include "motorkit/body/kinematics.hpp"

namespace motorkit::ref {

void validate_clip(const body::BodyModel& body, const ReferenceClip& clip) {
  if (clip.frames.size() < 2) throw ConfigError("clip: needs at least 2 frames");
  if (!(clip.dt > 0)) throw ConfigError("clip: dt must be positive");
  if (clip.body_hash != 0 && clip.body_hash != body::body_hash(body))
    throw ConfigError("clip: authored for a different body");
  if (clip.dynamic_prop >= int(clip.props.size()))
    throw ConfigError("clip: dynamic_prop out of range");
  if (clip.dynamic_prop >= 0 && !clip.props[clip.dynamic_prop].is_dynamic())
    throw ConfigError("clip: dynamic_prop must be a box or ball");
  for (const auto& spec : clip.props) spec.validate();

  const real dur = clip.duration();
  if (dur < real(3) - real(1e-9) || dur > real(20) + real(1e-9))
    throw GenerationError("clip: duration " + std::to_string(double(dur)) +
                          " s outside [3, 20] s");

  const int nj = body.n_joints();
  for (int k = 0; k < clip.n_frames(); ++k) {
    const ClipFrame& f = clip.frames[k];
    if (int(f.pose.joint_angles.size()) != nj ||
        int(f.vel.joint_vel.size()) != nj ||
        int(f.props.size()) != int(clip.props.size()))
      throw ConfigError("clip: inconsistent sizes at frame " + std::to_string(k));
    if (!f.pose.flat().allFinite() || !f.vel.flat().allFinite())
      throw NumericError("clip: non-finite frame " + std::to_string(k));
    for (int j = 0; j < nj; ++j) {
      const auto& lim = body.joints[j];
      if (f.pose.joint_angles[j] < lim.limit_lo - real(1e-6) ||
          f.pose.joint_angles[j] > lim.limit_hi + real(1e-6))
        throw GenerationError("clip: joint " + std::to_string(j) +
                              " outside its limit at frame " + std::to_string(k));
    }
  }

  const real fd = velocity_fd_deviation(clip);
  if (fd > real(0.05))
    throw GenerationError("clip: stored velocities deviate " +
                          std::to_string(double(fd * 100)) +
                          "% from finite differences");
}

real velocity_fd_deviation(const ReferenceClip& clip) {
  const int n = clip.n_frames();
  if (n < 3) return 0;
  real err2 = 0, den2 = 0;
  for (int k = 1; k + 1 < n; ++k) {
    const VecX fd = (clip.frames[k + 1].pose.flat() -
                     clip.frames[k - 1].pose.flat()) /
                    (2 * clip.dt);
    err2 += (fd - clip.frames[k].vel.flat()).squaredNorm();
    den2 += fd.squaredNorm();
  }
  return den2 > 0 ? std::sqrt(err2 / den2) : real(0);
}

// ----- serialization ----- //

namespace {
using nlohmann::json;

json vecx_json(const VecX& v) {
  json a = json::array();
  for (int i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}
VecX json_vecx(const json& j) {
  VecX v(j.size());
  for (int i = 0; i < int(j.size()); ++i) v[i] = real(j.at(i));
  return v;
}
}  // namespace

void save_clip(const std::string& path, const ReferenceClip& clip) {
  json j;
  j["format"] = "motorkit-clip";
  j["version"] = 1;
  j["behavior"] = clip.behavior;
  j["height"] = clip.height;
  j["dt"] = clip.dt;
  j["body_hash"] = clip.body_hash;
  j["dynamic_prop"] = clip.dynamic_prop;
  j["props"] = json::array();
  for (const auto& p : clip.props) {
    j["props"].push_back({{"kind", prop_kind_name(p.kind)},
                          {"half_extents", {p.half_extents.x(), p.half_extents.y()}},
                          {"radius", p.radius},
                          {"wall", p.wall},
                          {"mass", p.mass},
                          {"color", p.color}});
  }
  j["frames"] = json::array();
  for (const auto& f : clip.frames) {
    json pf = json::array();
    for (const auto& s : f.props)
      pf.push_back({s.pos.x(), s.pos.y(), s.ang, s.vel.x(), s.vel.y(), s.angvel});
    j["frames"].push_back({{"q", vecx_json(f.pose.flat())},
                           {"v", vecx_json(f.vel.flat())},
                           {"p", pf}});
  }
  std::ofstream os(path);
  if (!os) throw IoError("clip: cannot write " + path);
  os << j.dump() << "\n";
}

ReferenceClip load_clip(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("clip: cannot open " + path);
  json j;
  try {
    is >> j;
  } catch (const json::exception& e) {
    throw IoError("clip: parse error in " + path + ": " + e.what());
  }
  if (j.value("format", "") != "motorkit-clip" || j.value("version", 0) != 1)
    throw IoError("clip: " + path + " is not a v1 clip file");
  ReferenceClip clip;
  clip.behavior = j.at("behavior");
  clip.height = j.at("height");
  clip.dt = real(j.at("dt"));
  clip.body_hash = j.at("body_hash");
  clip.dynamic_prop = j.at("dynamic_prop");
  for (const auto& p : j.at("props")) {
    sim::PropSpec spec;
    spec.kind = sim::prop_kind_from_name(p.at("kind"));
    spec.half_extents = {real(p.at("half_extents").at(0)),
                         real(p.at("half_extents").at(1))};
    spec.radius = real(p.at("radius"));
    spec.wall = real(p.at("wall"));
    spec.mass = real(p.at("mass"));
    spec.color = real(p.at("color"));
    clip.props.push_back(spec);
  }
  for (const auto& fj : j.at("frames")) {
    ClipFrame f;
    f.pose = body::Pose::from_flat(json_vecx(fj.at("q")));
    f.vel = body::Velocities::from_flat(json_vecx(fj.at("v")));
    for (const auto& pj : fj.at("p")) {
      sim::PropState s;
      s.pos = {real(pj.at(0)), real(pj.at(1))};
      s.ang = real(pj.at(2));
      s.vel = {real(pj.at(3)), real(pj.at(4))};
      s.angvel = real(pj.at(5));
      f.props.push_back(s);
    }
    clip.frames.push_back(std::move(f));
  }
  return clip;
}

ReferenceClip load_clip(const std::string& path, const body::BodyModel& body) {
  ReferenceClip clip = load_clip(path);
  if (clip.body_hash != body::body_hash(body))
    throw IoError("clip: " + path + " was authored for a different body");
  return clip;
}

// ----- phase machine ----- //

std::string phase_name(Phase p) {
  switch (p) {
    case Phase::kGoto: return "GOTO";
    case Phase::kLift: return "LIFT";
    case Phase::kCarry: return "CARRY";
    case Phase::kPutdown: return "PUTDOWN";
  }
  return "?";
}

Phase next_phase(Phase p) {
  switch (p) {
    case Phase::kGoto: return Phase::kLift;
    case Phase::kLift: return Phase::kCarry;
    case Phase::kCarry: return Phase::kPutdown;
    case Phase::kPutdown: return Phase::kGoto;
  }
  return Phase::kGoto;
}

bool phase_success(Phase p, real walker_x, const std::vector<sim::PropState>& props,
                   const sim::ContactReport& report, const PhaseContext& ctx) {
  const int focal = ctx.focal_pedestal(p);
  const real dist = std::abs(walker_x - props[focal].pos.x());
  const bool hands_on = report.hand_box_count(0, ctx.box) >= 1 &&
                        report.hand_box_count(1, ctx.box) >= 1;
  switch (p) {
    case Phase::kGoto:
      return dist <= ctx.goto_radius;
    case Phase::kLift:
      return hands_on && report.box_pedestal_total(ctx.box) == 0;
    case Phase::kCarry:
      return dist <= ctx.goto_radius && hands_on;
    case Phase::kPutdown:
      return report.walker_box_count(ctx.box) == 0 &&
             report.box_pedestal_count(ctx.box, focal) >= 4;
  }
  return false;
}

PhaseSegmentation segment_phases(const body::BodyModel& body,
                                 const ReferenceClip& clip) {
  if (clip.frames.empty()) throw ConfigError("clip: no frames to segment");

  auto report_at = [&](int k) {
    const ClipFrame& f = clip.frames[k];
    const auto frames = body::forward_frames(body, f.pose);
    return summarize_contacts(
        body, clip.props, detect_contacts(body, frames, clip.props, f.props));
  };

  PhaseSegmentation out;
  PhaseContext& ctx = out.context;
  ctx.box = clip.dynamic_prop;

  std::vector<int> pedestals;
  for (int i = 0; i < int(clip.props.size()); ++i)
    if (clip.props[i].kind == sim::PropKind::kPedestal) pedestals.push_back(i);

  // The machine applies only to box-on-pedestal scenes; everything else is a
  // single locomotion-like span.
  bool machine = ctx.box >= 0 &&
                 clip.props[ctx.box].kind == sim::PropKind::kBox &&
                 pedestals.size() >= 2;
  if (machine) {
    const auto first = report_at(0);
    ctx.source_pedestal = -1;
    for (int ped : pedestals)
      if (first.box_pedestal_count(ctx.box, ped) > 0) ctx.source_pedestal = ped;
    if (ctx.source_pedestal < 0) {
      machine = false;
    } else {
      for (int ped : pedestals)
        if (ped != ctx.source_pedestal) ctx.target_pedestal = ped;
    }
  }
  if (!machine) {
    out.spans.push_back({Phase::kGoto, 0, clip.n_frames() - 1});
    return out;
  }

  Phase phase = Phase::kGoto;
  int start = 0;
  PhaseContext running = ctx;  // pedestal roles swap per completed cycle
  for (int k = 0; k < clip.n_frames(); ++k) {
    const auto report = report_at(k);
    if (report.box_ground_count(ctx.box) > 0)
      throw SegmentationError("clip: box touches the ground at frame " +
                              std::to_string(k));
    if (report.nonfoot_ground > 0)
      throw SegmentationError("clip: walker grounded off its feet at frame " +
                              std::to_string(k));
    if (phase_success(phase, clip.frames[k].pose.root_pos.x(), clip.frames[k].props,
                      report, running)) {
      out.spans.push_back({phase, start, k});
      if (phase == Phase::kPutdown)
        std::swap(running.source_pedestal, running.target_pedestal);
      phase = next_phase(phase);
      start = k + 1;
    }
  }
  if (start < clip.n_frames())  // truncated tail still inside `phase`
    out.spans.push_back({phase, start, clip.n_frames() - 1});
  return out;
}

ReferenceClip make_mime_variant(const ReferenceClip& clip) {
  if (clip.dynamic_prop < 0)
    throw ConfigError("clip: mime variant needs a manipulated prop");
  ReferenceClip out = clip;
  out.props.erase(out.props.begin() + clip.dynamic_prop);
  for (auto& f : out.frames) f.props.erase(f.props.begin() + clip.dynamic_prop);
  out.dynamic_prop = -1;
  out.behavior += "-mime";
  return out;
}

}  // namespace motorkit::ref
