#pragma once

#include <array>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "gam/geometry.hpp"

namespace gam {

// Pose of one synthetic body: per-joint bend angles and per-bone length
// offsets. All zeros reproduce the rest template.
struct DeformParams {
    std::vector<double> bend_x;   // one per bone
    std::vector<double> bend_y;   // one per bone
    std::vector<double> stretch;  // multiplicative length offset per bone, 0 = rest

    static DeformParams rest();
};

int synth_bone_count();
DeformParams random_deform_params(std::mt19937_64& rng);

// Tube body around an articulated multi-bone spine, sampled to exactly n
// surface points with index-consistent parameterization across poses. The
// triangulation is connected and identical for every pose of a given n.
std::pair<PointCloud, std::vector<std::array<int, 3>>> synth_shape(int n,
                                                                   const DeformParams& params);

// Clouds share a template indexing: point i corresponds to point i in every
// other cloud of the set.
struct ShapeDataset {
    std::string name;
    int n = 0;
    std::uint64_t seed = 0;
    std::vector<PointCloud> clouds;
    std::vector<std::array<int, 3>> triangles;  // shared connectivity; may be empty

    int count() const { return static_cast<int>(clouds.size()); }
    bool has_mesh() const { return !triangles.empty(); }
    MeshRef mesh(int i) const { return MeshRef{clouds[i], triangles}; }
};

ShapeDataset generate_synthetic_dataset(int count, int n, std::uint64_t seed);

// Directory layout: manifest.txt plus shapes/shape_NNNN.off (or .xyz when no
// connectivity is available).
void save_dataset(const ShapeDataset& dataset, const std::string& dir);
ShapeDataset load_dataset(const std::string& dir);

struct NoisePolicy {
    bool enabled = false;
    double fraction = 0.5;
    double stddev = 0.02;
};

struct AugmentPolicy {
    bool rotation = true;
    bool permutation = true;
    NoisePolicy noise;

    static AugmentPolicy all_off() { return {false, false, {}}; }
};

struct Couple {
    PointCloud x, y;
    Correspondence corr;
};

// Independently rotates each shape (one of the five rotation modes chosen
// uniformly), injects noise per the policy, then applies independent random
// permutations with the correspondence re-indexed.
Couple augment_pair(const PointCloud& x, const PointCloud& y, const Correspondence& corr,
                    const AugmentPolicy& policy, std::mt19937_64& rng);

// Stream splitting so batch preparation stays reproducible regardless of
// evaluation order.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream);

}  // namespace gam
