#pragma once

#include <string>
#include <utility>

#include "gam/config.hpp"
#include "gam/encoder.hpp"

namespace gam {

// Versioned flat container: magic + version, the experiment config as text,
// then named f64 arrays with shapes (parameters plus the sigma ladder).
// Writes are atomic (temp file + rename); round trips are bit-exact.
void save_checkpoint(const Model& model, const ExperimentConfig& config, const std::string& path);

std::pair<Model, ExperimentConfig> load_checkpoint(const std::string& path);

}  // namespace gam
