#include "motorkit/sim/contacts.hpp"

#include <array>

namespace motorkit::sim {

namespace {

// Solid region a circle can press into.
struct Solid {
  bool is_ground = false;
  Vec2 center{0, 0};
  Mat2 rot = Mat2::Identity();
  Vec2 half{0, 0};
  int prop_index = -1;  // -1 for ground
  int part = 0;
  bool dynamic = false;
};

struct Circle {
  Vec2 center{0, 0};
  real radius = 0;
  ContactPoint::Side side = ContactPoint::Side::kWalker;
  int index = 0;  // link or prop
  int sub = 0;    // sample-point id within the owner
};

std::optional<ContactPoint> circle_vs_solid(const Circle& c, const Solid& s) {
  ContactPoint cp;
  if (s.is_ground) {
    const real depth = c.radius - c.center.y();
    if (depth <= 0) return std::nullopt;
    cp.normal = {0, 1};
    cp.depth = depth;
    cp.point = c.center - Vec2{0, c.radius};
    return cp;
  }
  const Vec2 local = s.rot.transpose() * (c.center - s.center);
  const Vec2 clamped = local.cwiseMax(-s.half).cwiseMin(s.half);
  if ((local - clamped).squaredNorm() > real(1e-24)) {
    const Vec2 d = local - clamped;
    const real dist = d.norm();
    if (dist >= c.radius) return std::nullopt;
    cp.normal = s.rot * (d / dist);
    cp.depth = c.radius - dist;
    cp.point = s.center + s.rot * clamped;
    return cp;
  }
  // Center inside the box: push out along the least-penetrated face.
  const real dx_pos = s.half.x() - local.x(), dx_neg = local.x() + s.half.x();
  const real dz_pos = s.half.y() - local.y(), dz_neg = local.y() + s.half.y();
  Vec2 n_local;
  real face_depth;
  if (std::min(dx_pos, dx_neg) < std::min(dz_pos, dz_neg)) {
    n_local = {dx_pos < dx_neg ? real(1) : real(-1), 0};
    face_depth = std::min(dx_pos, dx_neg);
  } else {
    n_local = {0, dz_pos < dz_neg ? real(1) : real(-1)};
    face_depth = std::min(dz_pos, dz_neg);
  }
  cp.normal = s.rot * n_local;
  cp.depth = c.radius + face_depth;
  cp.point = c.center;
  return cp;
}

std::uint64_t contact_key(int a_side, int a_index, int a_sub, int b_index, int b_part) {
  // b_index -1 (ground) maps to 0xFF.
  return (std::uint64_t(a_side) << 60) | (std::uint64_t(a_index & 0xFF) << 48) |
         (std::uint64_t(a_sub & 0xFFFF) << 32) |
         (std::uint64_t(std::uint8_t(b_index)) << 8) | std::uint64_t(b_part & 0xFF);
}

// 12 perimeter sample points per box face, [corner, midpoint, corner] on each
// face, so every corner carries two penalty points.
std::array<Vec2, 12> box_sample_points(const Vec2& half) {
  const real hx = half.x(), hz = half.y();
  return {Vec2{-hx, -hz}, Vec2{0, -hz}, Vec2{hx, -hz},    // bottom
          Vec2{hx, -hz},  Vec2{hx, 0},  Vec2{hx, hz},     // right
          Vec2{hx, hz},   Vec2{0, hz},  Vec2{-hx, hz},    // top
          Vec2{-hx, hz},  Vec2{-hx, 0}, Vec2{-hx, -hz}};  // left
}

}  // namespace

std::vector<ContactPoint> detect_contacts(const body::BodyModel& body,
                                          const body::FrameSet& frames,
                                          const std::vector<PropSpec>& specs,
                                          const std::vector<PropState>& props) {
  std::vector<Solid> solids;
  Solid ground;
  ground.is_ground = true;
  solids.push_back(ground);
  for (int i = 0; i < int(specs.size()); ++i) {
    const PropSpec& spec = specs[i];
    const PropState& st = props[i];
    const Mat2 R = rot2(st.ang);
    if (spec.kind == PropKind::kBox || spec.kind == PropKind::kPedestal) {
      solids.push_back({false, st.pos, R, spec.half_extents, i, 0,
                        spec.is_dynamic()});
    } else if (spec.kind == PropKind::kBucket) {
      // Bottom slab plus two walls; the bucket frame origin sits at the
      // center of the bottom slab.
      const real hw = spec.half_extents.x(), wall_h = spec.half_extents.y();
      const real t = spec.wall;
      solids.push_back({false, st.pos, R, {hw + 2 * t, t}, i, 0, false});
      const Vec2 l_off{-(hw + t), wall_h / 2 + t};
      const Vec2 r_off{hw + t, wall_h / 2 + t};
      solids.push_back({false, st.pos + R * l_off, R, {t, wall_h / 2}, i, 1, false});
      solids.push_back({false, st.pos + R * r_off, R, {t, wall_h / 2}, i, 2, false});
    }
  }

  // Sample circles: walker capsules (origin, midpoint, tip), hand tips with
  // the hand radius, box perimeter points, ball disc.
  std::vector<Circle> circles;
  for (int l = 0; l < body.n_links(); ++l) {
    const auto& link = body.links[l];
    const Vec2 locals[3] = {{0, 0}, {link.length / 2, 0}, {link.length, 0}};
    for (int s = 0; s < 3; ++s) {
      real radius = link.half_width;
      if ((l == body.hand_links[0] || l == body.hand_links[1]) && s == 2)
        radius = std::max(radius, body.hand_radius);
      circles.push_back({body::point_on_link(frames, l, locals[s]), radius,
                         ContactPoint::Side::kWalker, l, s});
    }
  }
  for (int i = 0; i < int(specs.size()); ++i) {
    if (specs[i].kind == PropKind::kBox) {
      const Mat2 R = rot2(props[i].ang);
      const auto pts = box_sample_points(specs[i].half_extents);
      for (int s = 0; s < int(pts.size()); ++s) {
        circles.push_back({props[i].pos + R * pts[s], 0,
                           ContactPoint::Side::kProp, i, s});
      }
    } else if (specs[i].kind == PropKind::kBall) {
      circles.push_back({props[i].pos, specs[i].radius,
                         ContactPoint::Side::kProp, i, 0});
    }
  }

  std::vector<ContactPoint> out;
  for (const Circle& c : circles) {
    for (const Solid& s : solids) {
      // Skip self-contacts (box sample points against their own solid).
      if (c.side == ContactPoint::Side::kProp && s.prop_index == c.index) continue;
      // Static fixtures (pedestals, buckets) sit beside the walker's sagittal
      // plane; the body passes them freely and only props rest against them.
      if (c.side == ContactPoint::Side::kWalker && !s.is_ground && !s.dynamic)
        continue;
      // Walker capsules cannot collide with the walker; props' points vs
      // other dynamic boxes are allowed (box stacking).
      auto hit = circle_vs_solid(c, s);
      if (!hit) continue;
      ContactPoint cp = *hit;
      cp.a = c.side;
      cp.a_index = c.index;
      cp.b = s.is_ground ? ContactPoint::Side::kGround : ContactPoint::Side::kProp;
      cp.b_index = s.prop_index;
      cp.b_part = s.part;
      cp.key = contact_key(int(c.side), c.index, c.sub, s.prop_index, s.part);
      out.push_back(cp);
    }
  }

  // Ball vs walker capsule segments (the one pairing not covered by sampled
  // circles; catching needs smooth ball-limb geometry).
  for (int i = 0; i < int(specs.size()); ++i) {
    if (specs[i].kind != PropKind::kBall) continue;
    for (int l = 0; l < body.n_links(); ++l) {
      const auto& link = body.links[l];
      const Vec2 a = frames.origin[l];
      const Vec2 b = body::point_on_link(frames, l, {link.length, 0});
      const Vec2 ab = b - a;
      const real len2 = std::max(ab.squaredNorm(), real(1e-12));
      const real t = std::clamp((props[i].pos - a).dot(ab) / len2, real(0), real(1));
      const Vec2 closest = a + t * ab;
      const Vec2 d = props[i].pos - closest;
      const real dist = d.norm();
      const real r_sum = specs[i].radius + link.half_width;
      if (dist >= r_sum || dist < real(1e-9)) continue;
      ContactPoint cp;
      cp.normal = d / dist;  // pushes the ball away from the limb
      cp.depth = r_sum - dist;
      cp.point = closest + cp.normal * link.half_width;
      cp.a = ContactPoint::Side::kProp;
      cp.a_index = i;
      cp.b = ContactPoint::Side::kWalker;
      cp.b_index = l;
      cp.key = contact_key(3, i, l, 0, 0);
      out.push_back(cp);
    }
  }
  return out;
}

int ContactReport::box_pedestal_count(int box, int pedestal) const {
  auto it = box_pedestal.find({box, pedestal});
  return it == box_pedestal.end() ? 0 : it->second;
}
int ContactReport::box_ground_count(int box) const {
  auto it = box_ground.find(box);
  return it == box_ground.end() ? 0 : it->second;
}
int ContactReport::hand_box_count(int hand, int box) const {
  auto it = hand_box.find({hand, box});
  return it == hand_box.end() ? 0 : it->second;
}
int ContactReport::walker_box_count(int box) const {
  auto it = walker_box_map.find(box);
  return it == walker_box_map.end() ? 0 : it->second;
}
int ContactReport::box_pedestal_total(int box) const {
  int total = 0;
  for (const auto& [key, n] : box_pedestal)
    if (key.first == box) total += n;
  return total;
}

ContactReport summarize_contacts(const body::BodyModel& body,
                                 const std::vector<PropSpec>& specs,
                                 const std::vector<ContactPoint>& contacts) {
  ContactReport r;
  auto hand_of_link = [&](int link) -> int {
    if (link == body.hand_links[0]) return 0;
    if (link == body.hand_links[1]) return 1;
    return -1;
  };
  for (const auto& c : contacts) {
    const bool a_walker = c.a == ContactPoint::Side::kWalker;
    const bool b_walker = c.b == ContactPoint::Side::kWalker;
    const bool b_ground = c.b == ContactPoint::Side::kGround;
    if (a_walker && b_ground) {
      if (body.links[c.a_index].is_foot)
        ++r.foot_ground;
      else
        ++r.nonfoot_ground;
      const int hand = hand_of_link(c.a_index);
      if (hand >= 0) r.hand_touch[hand] = true;
      continue;
    }
    if (a_walker && !b_ground) {
      const PropKind kind = specs[c.b_index].kind;
      const int hand = hand_of_link(c.a_index);
      if (hand >= 0) r.hand_touch[hand] = true;
      if (kind == PropKind::kBox) {
        ++r.walker_box;
        ++r.walker_box_map[c.b_index];
        if (hand >= 0) ++r.hand_box[{hand, c.b_index}];
      }
      continue;
    }
    // a is a prop.
    const PropKind a_kind = specs[c.a_index].kind;
    if (a_kind == PropKind::kBall) {
      if (b_ground) {
        ++r.ball_ground;
      } else if (b_walker) {
        ++r.ball_walker;
        const int hand = hand_of_link(c.b_index);
        if (hand >= 0) r.hand_touch[hand] = true;
      } else if (specs[c.b_index].kind == PropKind::kBucket && c.b_part == 0) {
        ++r.ball_bucket_bottom;
      }
      continue;
    }
    if (a_kind == PropKind::kBox) {
      if (b_ground) {
        ++r.box_ground[c.a_index];
      } else if (!b_walker && specs[c.b_index].kind == PropKind::kPedestal) {
        ++r.box_pedestal[{c.a_index, c.b_index}];
      }
    }
  }
  return r;
}

}  // namespace motorkit::sim
