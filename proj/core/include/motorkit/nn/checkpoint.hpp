#pragma once

#include <string>

#include "motorkit/nn/params.hpp"

namespace motorkit::nn {

// Versioned binary container: magic + version, a free-form metadata string
// (JSON by convention), the named layout table, and the raw parameter array.
// Round trips are bit-exact.
struct Checkpoint {
  ParamVector params;
  std::string meta;
};

void save_checkpoint(const std::string& path, const ParamVector& params,
                     const std::string& meta = "{}");
Checkpoint load_checkpoint(const std::string& path);

}  // namespace motorkit::nn
