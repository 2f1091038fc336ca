#pragma once

#include <array>
#include <cstdint>
#include <random>
#include <vector>

#include "gam/tensor.hpp"

namespace gam {

struct Vec3 {
    double x = 0.0, y = 0.0, z = 0.0;

    Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
    Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
    Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
    double dot(const Vec3& o) const { return x * o.x + y * o.y + z * o.z; }
    Vec3 cross(const Vec3& o) const {
        return {y * o.z - z * o.y, z * o.x - x * o.z, x * o.y - y * o.x};
    }
    double norm() const;
    Vec3 normalized() const;
};

double distance(const Vec3& a, const Vec3& b);
double squared_distance(const Vec3& a, const Vec3& b);

struct PointCloud {
    std::vector<Vec3> points;

    int size() const { return static_cast<int>(points.size()); }
    bool all_finite() const;
};

// Triangle connectivity over a point cloud; used only for geodesic metrics.
struct MeshRef {
    PointCloud cloud;
    std::vector<std::array<int, 3>> triangles;

    void validate() const;  // index bounds; throws on violation
};

// Ground-truth bijection: x_to_y[i] is the Y index paired with X index i.
struct Correspondence {
    std::vector<int> x_to_y;

    int size() const { return static_cast<int>(x_to_y.size()); }
    int at(int i) const { return x_to_y[i]; }
    void validate() const;  // throws unless bijective
    Correspondence inverse() const;
    static Correspondence identity(int n);
};

struct Matrix {
    int rows = 0, cols = 0;
    std::vector<double> v;

    static Matrix zeros(int r, int c) { return {r, c, std::vector<double>(static_cast<std::size_t>(r) * c, 0.0)}; }
    double& at(int r, int c) { return v[static_cast<std::size_t>(r) * cols + c]; }
    double at(int r, int c) const { return v[static_cast<std::size_t>(r) * cols + c]; }
    bool empty() const { return v.empty(); }
};

// Pairwise Euclidean distances over the concatenated [X rows | SEP | Y rows]
// sequence. Cross-shape entries and SEP/point entries are zero; the SEP
// diagonal entry is zero.
struct BlockDistanceMatrix {
    int nx = 0, ny = 0;
    Matrix d;

    int size() const { return nx + 1 + ny; }
    int sep() const { return nx; }
    bool same_shape(int i, int j) const {
        return (i < nx && j < nx) || (i > nx && j > nx) || (i == j && i == nx);
    }
};

// How Gaussian heads treat cross-shape and SEP entries: Masked removes them
// from the softmax entirely; Literal keeps exp(0) = 1 there.
enum class GaussianCrossMode { Masked, Literal };

// Learnable sigmas are clamped to this floor at the point of use.
inline constexpr double kSigmaFloor = 1e-3;

// Centers the cloud on its centroid and scales the farthest point to unit
// distance. Throws NumericError when all points coincide.
PointCloud normalize(const PointCloud& cloud);

BlockDistanceMatrix block_distance_matrix(const PointCloud& x, const PointCloud& y);

// exp(-E^2 / (2 sigma^2)) over within-shape entries; cross entries follow the
// mode. Differentiable in sigma when it is a tracked scalar.
Tensor gaussian_energy(const BlockDistanceMatrix& e, const Tensor& sigma,
                       GaussianCrossMode mode = GaussianCrossMode::Masked);
Tensor gaussian_energy(const BlockDistanceMatrix& e, double sigma,
                       GaussianCrossMode mode = GaussianCrossMode::Masked);

enum class RotationMode { AllAxes, X, Y, Z, None };

struct Mat3 {
    double m[3][3] = {{1, 0, 0}, {0, 1, 0}, {0, 0, 1}};

    Vec3 apply(const Vec3& p) const;
    Mat3 times(const Mat3& o) const;
    static Mat3 identity() { return {}; }
    static Mat3 rotation_x(double angle);
    static Mat3 rotation_y(double angle);
    static Mat3 rotation_z(double angle);
};

Mat3 random_rotation(RotationMode mode, std::mt19937_64& rng);
PointCloud rotate(const PointCloud& cloud, const Mat3& r);

enum class PairSide { X, Y };

std::vector<int> random_permutation(int n, std::mt19937_64& rng);
std::vector<int> inverse_permutation(const std::vector<int>& perm);

// Reorders one side of a couple (out[i] = in[perm[i]]) and re-indexes the
// correspondence so the ground-truth pairing is preserved.
std::pair<PointCloud, Correspondence> apply_permutation(const PointCloud& cloud,
                                                        const Correspondence& corr,
                                                        const std::vector<int>& perm,
                                                        PairSide side);

// Perturbs floor(fraction*n) uniformly chosen points with iid N(0, stddev^2)
// per coordinate.
PointCloud inject_noise(const PointCloud& cloud, double fraction, double stddev,
                        std::mt19937_64& rng);

// Symmetric sum of the two directed means of squared nearest-neighbor
// distances.
double chamfer(const PointCloud& a, const PointCloud& b);

// Dijkstra over mesh edges with Euclidean weights. Throws NumericError when
// some vertex is unreachable from the source.
std::vector<double> geodesic_distances(const MeshRef& mesh, int source);

double mesh_surface_area(const MeshRef& mesh);

// Per mapped point, the index of the closest target point; ties break toward
// the lowest index.
std::vector<int> nearest_neighbor_match(const PointCloud& mapped, const PointCloud& target);

}  // namespace gam
