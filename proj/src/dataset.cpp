#include "gam/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "gam/errors.hpp"
#include "gam/geometry_io.hpp"

namespace fs = std::filesystem;

namespace gam {

namespace {

constexpr int kBones = 5;
constexpr double kBoneLengths[kBones] = {0.30, 0.25, 0.20, 0.15, 0.10};
constexpr int kManifestVersion = 1;

// Body-like radius profile along the spine: hip, torso and head bulges.
double radius_profile(double t) {
    auto bump = [](double t, double center, double width) {
        const double u = (t - center) / width;
        return std::exp(-u * u);
    };
    return 0.05 + 0.055 * bump(t, 0.15, 0.14) + 0.075 * bump(t, 0.52, 0.20) +
           0.045 * bump(t, 0.92, 0.08);
}

struct Spine {
    std::vector<Vec3> joints;  // kBones + 1
    std::vector<Vec3> dirs;    // unit direction per bone
    std::vector<double> lengths;
    double total = 0.0;

    // Point and tangent at arc parameter t in [0, 1].
    std::pair<Vec3, Vec3> at(double t) const {
        double s = t * total;
        for (int b = 0; b < kBones; ++b) {
            if (s <= lengths[b] || b == kBones - 1) {
                const double clamped = std::min(s, lengths[b]);
                return {joints[b] + dirs[b] * clamped, dirs[b]};
            }
            s -= lengths[b];
        }
        return {joints[kBones], dirs[kBones - 1]};
    }
};

Spine build_spine(const DeformParams& params) {
    Spine spine;
    spine.joints.push_back({0, 0, 0});
    Mat3 cumulative = Mat3::identity();
    for (int b = 0; b < kBones; ++b) {
        cumulative = cumulative.times(Mat3::rotation_x(params.bend_x[b]))
                         .times(Mat3::rotation_y(params.bend_y[b]));
        const Vec3 dir = cumulative.apply({0, 0, 1});
        const double len = kBoneLengths[b] * (1.0 + params.stretch[b]);
        if (len <= 0.0) throw std::invalid_argument("synth_shape: bone stretched to zero length");
        spine.dirs.push_back(dir);
        spine.lengths.push_back(len);
        spine.joints.push_back(spine.joints.back() + dir * len);
        spine.total += len;
    }
    return spine;
}

std::vector<int> ring_sizes(int n) {
    const int body = n - 2;  // two pole vertices
    int rings = std::max(2, (body + 4) / 8);
    while (body / rings < 3) --rings;
    std::vector<int> sizes(rings, body / rings);
    for (int k = 0; k < body % rings; ++k) ++sizes[k];
    return sizes;
}

// Closed triangle band between two rings of (possibly) different sizes.
void zipper(const std::vector<int>& a, const std::vector<int>& b,
            std::vector<std::array<int, 3>>& out) {
    const int na = static_cast<int>(a.size());
    const int nb = static_cast<int>(b.size());
    int i = 0, j = 0;
    while (i < na || j < nb) {
        bool step_a;
        if (i >= na)
            step_a = false;
        else if (j >= nb)
            step_a = true;
        else
            step_a = static_cast<std::int64_t>(i + 1) * nb <= static_cast<std::int64_t>(j + 1) * na;
        if (step_a) {
            out.push_back({a[i % na], a[(i + 1) % na], b[j % nb]});
            ++i;
        } else {
            out.push_back({a[i % na], b[(j + 1) % nb], b[j % nb]});
            ++j;
        }
    }
}

}  // namespace

DeformParams DeformParams::rest() {
    DeformParams p;
    p.bend_x.assign(kBones, 0.0);
    p.bend_y.assign(kBones, 0.0);
    p.stretch.assign(kBones, 0.0);
    return p;
}

int synth_bone_count() { return kBones; }

DeformParams random_deform_params(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> bend(-0.55, 0.55);
    std::uniform_real_distribution<double> stretch(-0.2, 0.2);
    DeformParams p = DeformParams::rest();
    for (int b = 0; b < kBones; ++b) {
        p.bend_x[b] = bend(rng);
        p.bend_y[b] = bend(rng);
        p.stretch[b] = stretch(rng);
    }
    return p;
}

std::pair<PointCloud, std::vector<std::array<int, 3>>> synth_shape(int n,
                                                                   const DeformParams& params) {
    if (n < 16) throw std::invalid_argument("synth_shape: need at least 16 points");
    if (static_cast<int>(params.bend_x.size()) != kBones ||
        static_cast<int>(params.bend_y.size()) != kBones ||
        static_cast<int>(params.stretch.size()) != kBones)
        throw std::invalid_argument("synth_shape: deform parameter count mismatch");

    const Spine spine = build_spine(params);
    const std::vector<int> sizes = ring_sizes(n);
    const int rings = static_cast<int>(sizes.size());

    PointCloud cloud;
    cloud.points.resize(n);
    std::vector<std::vector<int>> ring_ids(rings);

    // Vertex 0 and n-1 cap the tube just past the spine endpoints.
    const auto [start, start_dir] = spine.at(0.0);
    const auto [end, end_dir] = spine.at(1.0);
    cloud.points[0] = start - start_dir * (0.8 * radius_profile(0.0));
    cloud.points[n - 1] = end + end_dir * (0.8 * radius_profile(1.0));

    Vec3 prev_normal{1, 0, 0};
    int next_id = 1;
    for (int k = 0; k < rings; ++k) {
        const double t = (k + 0.5) / rings;
        const auto [center, tangent] = spine.at(t);
        // Parallel transport keeps ring orientation continuous along bends.
        Vec3 normal = prev_normal - tangent * tangent.dot(prev_normal);
        if (normal.norm() < 1e-9) normal = Vec3{0, 1, 0} - tangent * tangent.y;
        normal = normal.normalized();
        prev_normal = normal;
        const Vec3 binormal = tangent.cross(normal);
        const double r = radius_profile(t);
        ring_ids[k].resize(sizes[k]);
        for (int s = 0; s < sizes[k]; ++s) {
            const double phi = 2.0 * std::numbers::pi * s / sizes[k];
            cloud.points[next_id] =
                center + normal * (r * std::cos(phi)) + binormal * (r * std::sin(phi));
            ring_ids[k][s] = next_id++;
        }
    }

    std::vector<std::array<int, 3>> triangles;
    triangles.reserve(2 * n);
    for (int s = 0; s < sizes[0]; ++s)
        triangles.push_back({0, ring_ids[0][(s + 1) % sizes[0]], ring_ids[0][s]});
    for (int k = 0; k + 1 < rings; ++k) zipper(ring_ids[k], ring_ids[k + 1], triangles);
    const auto& last = ring_ids[rings - 1];
    for (int s = 0; s < sizes[rings - 1]; ++s)
        triangles.push_back({n - 1, last[s], last[(s + 1) % sizes[rings - 1]]});
    return {std::move(cloud), std::move(triangles)};
}

ShapeDataset generate_synthetic_dataset(int count, int n, std::uint64_t seed) {
    if (count < 2) throw std::invalid_argument("generate_synthetic_dataset: need at least 2 shapes");
    ShapeDataset dataset;
    dataset.name = "synthetic";
    dataset.n = n;
    dataset.seed = seed;
    dataset.clouds.reserve(count);
    for (int i = 0; i < count; ++i) {
        std::mt19937_64 rng(mix_seed(seed, static_cast<std::uint64_t>(i)));
        auto [cloud, triangles] = synth_shape(n, random_deform_params(rng));
        if (i == 0) dataset.triangles = std::move(triangles);
        dataset.clouds.push_back(std::move(cloud));
    }
    return dataset;
}

void save_dataset(const ShapeDataset& dataset, const std::string& dir) {
    fs::create_directories(fs::path(dir) / "shapes");
    std::ofstream manifest(fs::path(dir) / "manifest.txt");
    if (!manifest) throw IoError("cannot write manifest in " + dir);
    manifest << "manifest_version " << kManifestVersion << "\n";
    manifest << "name " << dataset.name << "\n";
    manifest << "seed " << dataset.seed << "\n";
    manifest << "n " << dataset.n << "\n";
    manifest << "count " << dataset.count() << "\n";
    const bool mesh = dataset.has_mesh();
    manifest << "format " << (mesh ? "off" : "xyz") << "\n";
    for (int i = 0; i < dataset.count(); ++i) {
        std::ostringstream name;
        name << "shapes/shape_" << std::setw(4) << std::setfill('0') << i
             << (mesh ? ".off" : ".xyz");
        const std::string rel = name.str();
        if (mesh)
            save_mesh_off(MeshRef{dataset.clouds[i], dataset.triangles}, (fs::path(dir) / rel).string());
        else
            save_cloud_xyz(dataset.clouds[i], (fs::path(dir) / rel).string());
        manifest << "shape " << i << " " << rel << "\n";
    }
    if (!manifest) throw IoError("manifest write failed in " + dir);
}

ShapeDataset load_dataset(const std::string& dir) {
    const fs::path manifest_path = fs::path(dir) / "manifest.txt";
    std::ifstream in(manifest_path);
    if (!in) throw IoError("cannot open: " + manifest_path.string());
    ShapeDataset dataset;
    std::string format = "off";
    std::vector<std::pair<int, std::string>> files;
    std::string line;
    int lineno = 0;
    int version = -1, count = -1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ss(line);
        std::string key;
        ss >> key;
        if (key == "manifest_version")
            ss >> version;
        else if (key == "name")
            ss >> dataset.name;
        else if (key == "seed")
            ss >> dataset.seed;
        else if (key == "n")
            ss >> dataset.n;
        else if (key == "count")
            ss >> count;
        else if (key == "format")
            ss >> format;
        else if (key == "shape") {
            int idx;
            std::string rel;
            if (!(ss >> idx >> rel))
                throw ParseError(manifest_path.string() + ":" + std::to_string(lineno) +
                                 ": malformed shape entry");
            files.emplace_back(idx, rel);
        } else {
            throw ParseError(manifest_path.string() + ":" + std::to_string(lineno) +
                             ": unknown key '" + key + "'");
        }
        if (ss.fail())
            throw ParseError(manifest_path.string() + ":" + std::to_string(lineno) +
                             ": malformed value");
    }
    if (version != kManifestVersion)
        throw ParseError(manifest_path.string() + ": unsupported manifest version " +
                         std::to_string(version));
    if (count != static_cast<int>(files.size()))
        throw ParseError(manifest_path.string() + ": count does not match shape entries");
    std::sort(files.begin(), files.end());
    for (const auto& [idx, rel] : files) {
        const std::string path = (fs::path(dir) / rel).string();
        if (format == "off") {
            MeshRef mesh = load_mesh_off(path);
            if (dataset.clouds.empty())
                dataset.triangles = mesh.triangles;
            else if (mesh.triangles != dataset.triangles)
                throw ParseError(path + ": connectivity differs from the rest of the dataset");
            dataset.clouds.push_back(std::move(mesh.cloud));
        } else {
            dataset.clouds.push_back(load_cloud_xyz(path));
        }
        if (dataset.clouds.back().size() != dataset.n)
            throw ParseError(path + ": point count does not match manifest n");
    }
    return dataset;
}

Couple augment_pair(const PointCloud& x, const PointCloud& y, const Correspondence& corr,
                    const AugmentPolicy& policy, std::mt19937_64& rng) {
    Couple couple{x, y, corr};
    if (policy.rotation) {
        const RotationMode modes[] = {RotationMode::AllAxes, RotationMode::X, RotationMode::Y,
                                      RotationMode::Z, RotationMode::None};
        std::uniform_int_distribution<int> pick(0, 4);
        couple.x = rotate(couple.x, random_rotation(modes[pick(rng)], rng));
        couple.y = rotate(couple.y, random_rotation(modes[pick(rng)], rng));
    }
    if (policy.noise.enabled) {
        couple.x = inject_noise(couple.x, policy.noise.fraction, policy.noise.stddev, rng);
        couple.y = inject_noise(couple.y, policy.noise.fraction, policy.noise.stddev, rng);
    }
    if (policy.permutation) {
        auto [px, corr_x] =
            apply_permutation(couple.x, couple.corr, random_permutation(couple.x.size(), rng),
                              PairSide::X);
        couple.x = std::move(px);
        auto [py, corr_xy] =
            apply_permutation(couple.y, corr_x, random_permutation(couple.y.size(), rng),
                              PairSide::Y);
        couple.y = std::move(py);
        couple.corr = std::move(corr_xy);
    }
    return couple;
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
    // splitmix64 finalizer over the combined value
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

}  // namespace gam
