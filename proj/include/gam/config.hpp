#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "gam/adam.hpp"
#include "gam/dataset.hpp"
#include "gam/encoder.hpp"
#include "gam/losses.hpp"

namespace gam {

// Ordered dotted-key/value text tree: one "key = value" per line, '#'
// comments. The on-disk format for experiment configs and run manifests.
class ConfigTree {
public:
    static ConfigTree parse(const std::string& text, const std::string& origin = "<string>");
    static ConfigTree load(const std::string& path);

    void set(const std::string& key, const std::string& value);
    bool has(const std::string& key) const;
    const std::string& get(const std::string& key) const;
    std::string get_or(const std::string& key, const std::string& fallback) const;

    const std::vector<std::pair<std::string, std::string>>& entries() const { return entries_; }
    std::string serialize() const;
    void save(const std::string& path) const;

private:
    std::vector<std::pair<std::string, std::string>> entries_;
};

struct ExperimentConfig {
    std::string variant = "custom";
    std::uint64_t seed = 1;
    ModelConfig model;

    int epochs = 600;
    int batch_shapes = 24;
    AdamParams adam;
    double grad_clip = 0.0;  // 0 disables clipping
    int checkpoint_every = 0;
    AugmentPolicy augment;
    LossOptions loss;

    std::string data_dir;
    int data_count = 200;
    int data_points = 128;

    int eval_pairs = 100;
    double eval_noise_stddev = 0.0;
    double eval_noise_fraction = 1.0;
    bool normalize_geodesic = false;
    std::string eval_checkpoint;

    void validate() const;
};

// Schema-checked conversion; unknown keys or malformed values are errors.
ExperimentConfig experiment_from_tree(const ConfigTree& tree);
ConfigTree experiment_to_tree(const ExperimentConfig& config);

bool is_known_config_key(const std::string& key);

// Named starting points: 0gh, 4gh, 4gh.lis, 4gh.lis.noise at full scale and
// the -mini desk-scale counterparts.
ExperimentConfig preset(const std::string& name);
std::vector<std::string> preset_names();

// Human-readable summary: variant, dimensions, head layout, sigma ladder,
// parameter counts.
std::string describe(const ExperimentConfig& config);

}  // namespace gam
