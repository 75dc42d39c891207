#pragma once

#include <string>

#include "motorkit/common.hpp"

namespace motorkit::sim {

enum class PropKind { kBox, kBall, kPedestal, kBucket };

std::string prop_kind_name(PropKind kind);
PropKind prop_kind_from_name(const std::string& name);

// Scene object. Boxes and balls are dynamic; pedestals and buckets are
// static fixtures.
struct PropSpec {
  PropKind kind = PropKind::kBox;
  Vec2 half_extents{0, 0};  // box / pedestal half sizes; bucket inner half-width (x) and wall height (y)
  real radius = 0;          // ball
  real wall = real(0.03);   // bucket wall/bottom thickness
  real mass = real(1);      // dynamic props
  real color = 0;           // mass-visualization proxy scalar

  bool is_dynamic() const { return kind == PropKind::kBox || kind == PropKind::kBall; }
  real inertia() const;
  void validate() const;
};

struct PropState {
  Vec2 pos{0, 0};
  real ang = 0;
  Vec2 vel{0, 0};
  real angvel = 0;
};

}  // namespace motorkit::sim
