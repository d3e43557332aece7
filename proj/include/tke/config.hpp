#pragma once

// Strict key = value configuration for models. Unknown or duplicate keys are
// hard errors; the perturbation list is a sequence of (degree, order,
// amplitude) triples.
//
//   band_limit = 32
//   fiber_length = 6.283185307179586
//   symmetry_mode = even
//   perturbation = (2, 0, 0.05) (4, 1, -0.01)

#include "tke/model.hpp"

#include <string>

namespace tke {

ModelConfig parse_model_config_text(const std::string& text);
ModelConfig parse_model_config_file(const std::string& path);

std::string symmetry_mode_name(SymmetryMode mode);
SymmetryMode symmetry_mode_from_name(const std::string& name);

}  // namespace tke
