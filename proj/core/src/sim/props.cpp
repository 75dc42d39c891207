#include "motorkit/sim/props.hpp"

namespace motorkit::sim {

std::string prop_kind_name(PropKind kind) {
  switch (kind) {
    case PropKind::kBox: return "box";
    case PropKind::kBall: return "ball";
    case PropKind::kPedestal: return "pedestal";
    case PropKind::kBucket: return "bucket";
  }
  throw ConfigError("prop: unknown kind");
}

PropKind prop_kind_from_name(const std::string& name) {
  if (name == "box") return PropKind::kBox;
  if (name == "ball") return PropKind::kBall;
  if (name == "pedestal") return PropKind::kPedestal;
  if (name == "bucket") return PropKind::kBucket;
  throw ConfigError("prop: unknown kind name " + name);
}

real PropSpec::inertia() const {
  switch (kind) {
    case PropKind::kBox:
      return mass * (half_extents.x() * half_extents.x() +
                     half_extents.y() * half_extents.y()) / real(3);
    case PropKind::kBall:
      return real(0.5) * mass * radius * radius;
    default:
      return mass;  // static props never integrate
  }
}

void PropSpec::validate() const {
  if (mass <= 0) throw ConfigError("prop: non-positive mass");
  if (kind == PropKind::kBall) {
    if (radius <= 0) throw ConfigError("prop: ball needs positive radius");
  } else if (half_extents.x() <= 0 || half_extents.y() <= 0) {
    throw ConfigError("prop: needs positive dimensions");
  }
}

}  // namespace motorkit::sim
