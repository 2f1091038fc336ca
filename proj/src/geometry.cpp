#include "gam/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <queue>
#include <stdexcept>
#include <string>

#include "gam/errors.hpp"

namespace gam {

double Vec3::norm() const { return std::sqrt(x * x + y * y + z * z); }

Vec3 Vec3::normalized() const {
    const double n = norm();
    if (n == 0.0) throw NumericError("normalized: zero vector");
    return {x / n, y / n, z / n};
}

double distance(const Vec3& a, const Vec3& b) { return (a - b).norm(); }

double squared_distance(const Vec3& a, const Vec3& b) {
    const Vec3 d = a - b;
    return d.dot(d);
}

bool PointCloud::all_finite() const {
    for (const Vec3& p : points)
        if (!std::isfinite(p.x) || !std::isfinite(p.y) || !std::isfinite(p.z)) return false;
    return true;
}

void MeshRef::validate() const {
    const int n = cloud.size();
    for (const auto& t : triangles)
        for (int v : t)
            if (v < 0 || v >= n)
                throw std::invalid_argument("mesh: triangle index " + std::to_string(v) +
                                            " out of range");
}

void Correspondence::validate() const {
    const int n = size();
    std::vector<bool> hit(n, false);
    for (int v : x_to_y) {
        if (v < 0 || v >= n || hit[v])
            throw std::invalid_argument("correspondence: mapping is not a bijection");
        hit[v] = true;
    }
}

Correspondence Correspondence::inverse() const {
    Correspondence inv;
    inv.x_to_y.resize(x_to_y.size());
    for (int i = 0; i < size(); ++i) inv.x_to_y[x_to_y[i]] = i;
    return inv;
}

Correspondence Correspondence::identity(int n) {
    Correspondence c;
    c.x_to_y.resize(n);
    for (int i = 0; i < n; ++i) c.x_to_y[i] = i;
    return c;
}

PointCloud normalize(const PointCloud& cloud) {
    const int n = cloud.size();
    if (n < 2) throw std::invalid_argument("normalize: need at least 2 points");
    Vec3 centroid;
    for (const Vec3& p : cloud.points) centroid = centroid + p;
    centroid = centroid * (1.0 / n);
    double max_norm = 0.0;
    for (const Vec3& p : cloud.points) max_norm = std::max(max_norm, (p - centroid).norm());
    if (max_norm == 0.0) throw NumericError("normalize: degenerate cloud, all points coincide");
    PointCloud out;
    out.points.reserve(n);
    const double inv = 1.0 / max_norm;
    for (const Vec3& p : cloud.points) out.points.push_back((p - centroid) * inv);
    return out;
}

BlockDistanceMatrix block_distance_matrix(const PointCloud& x, const PointCloud& y) {
    BlockDistanceMatrix e;
    e.nx = x.size();
    e.ny = y.size();
    const int n = e.size();
    e.d = Matrix::zeros(n, n);
    for (int i = 0; i < e.nx; ++i)
        for (int j = i + 1; j < e.nx; ++j) {
            const double dist = distance(x.points[i], x.points[j]);
            e.d.at(i, j) = dist;
            e.d.at(j, i) = dist;
        }
    for (int i = 0; i < e.ny; ++i)
        for (int j = i + 1; j < e.ny; ++j) {
            const double dist = distance(y.points[i], y.points[j]);
            e.d.at(e.nx + 1 + i, e.nx + 1 + j) = dist;
            e.d.at(e.nx + 1 + j, e.nx + 1 + i) = dist;
        }
    return e;
}

Tensor gaussian_energy(const BlockDistanceMatrix& e, const Tensor& sigma, GaussianCrossMode mode) {
    if (sigma.size() != 1) throw std::invalid_argument("gaussian_energy: sigma must be scalar");
    const double sigma_raw = sigma.value();
    if (sigma_raw <= 0.0 && !sigma.requires_grad())
        throw std::domain_error("gaussian_energy: sigma must be positive");
    const double s = std::max(sigma_raw, kSigmaFloor);
    const int n = e.size();
    const double fill = mode == GaussianCrossMode::Masked ? kMaskedEnergy : 1.0;
    std::vector<double> out(static_cast<std::size_t>(n) * n, fill);
    const double inv2s2 = 1.0 / (2.0 * s * s);
    auto kernel_span = [&](int row, int col0, int col1) {
        const double* dist = &e.d.v[static_cast<std::size_t>(row) * n + col0];
        double* dst = &out[static_cast<std::size_t>(row) * n + col0];
        for (int j = 0; j < col1 - col0; ++j) dst[j] = std::exp(-dist[j] * dist[j] * inv2s2);
    };
    for (int i = 0; i < e.nx; ++i) kernel_span(i, 0, e.nx);
    out[static_cast<std::size_t>(e.sep()) * n + e.sep()] = 1.0;
    for (int i = e.nx + 1; i < n; ++i) kernel_span(i, e.nx + 1, n);
    // d/ds exp(-d^2/(2 s^2)) = exp(...) * d^2 / s^3; zero below the clamp.
    // Entries outside the within-shape blocks have d = 0 and contribute
    // nothing in either cross mode.
    const bool clamped = sigma_raw < kSigmaFloor;
    Matrix dist_copy = e.d;
    const int nx = e.nx;
    return Tensor::make(
        {n, n}, std::move(out), {sigma},
        [n, nx, s, clamped, dist_copy = std::move(dist_copy)](Tensor::Node& self) {
            const Tensor& ps = self.parents[0];
            if (!ps.requires_grad() || clamped) return;
            ps.node()->ensure_grad();
            const double inv_s3 = 1.0 / (s * s * s);
            double acc = 0.0;
            auto span = [&](int row, int col0, int col1) {
                const double* dist = &dist_copy.v[static_cast<std::size_t>(row) * n + col0];
                const double* g = &self.grad[static_cast<std::size_t>(row) * n + col0];
                const double* y = &self.data[static_cast<std::size_t>(row) * n + col0];
                for (int j = 0; j < col1 - col0; ++j) acc += g[j] * y[j] * dist[j] * dist[j];
            };
            for (int i = 0; i < nx; ++i) span(i, 0, nx);
            for (int i = nx + 1; i < n; ++i) span(i, nx + 1, n);
            ps.node()->grad[0] += acc * inv_s3;
        });
}

Tensor gaussian_energy(const BlockDistanceMatrix& e, double sigma, GaussianCrossMode mode) {
    if (sigma <= 0.0) throw std::domain_error("gaussian_energy: sigma must be positive");
    return gaussian_energy(e, Tensor::scalar(sigma), mode);
}

Vec3 Mat3::apply(const Vec3& p) const {
    return {m[0][0] * p.x + m[0][1] * p.y + m[0][2] * p.z,
            m[1][0] * p.x + m[1][1] * p.y + m[1][2] * p.z,
            m[2][0] * p.x + m[2][1] * p.y + m[2][2] * p.z};
}

Mat3 Mat3::times(const Mat3& o) const {
    Mat3 r;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) {
            double s = 0.0;
            for (int k = 0; k < 3; ++k) s += m[i][k] * o.m[k][j];
            r.m[i][j] = s;
        }
    return r;
}

Mat3 Mat3::rotation_x(double a) {
    Mat3 r;
    const double c = std::cos(a), s = std::sin(a);
    r.m[1][1] = c;
    r.m[1][2] = -s;
    r.m[2][1] = s;
    r.m[2][2] = c;
    return r;
}

Mat3 Mat3::rotation_y(double a) {
    Mat3 r;
    const double c = std::cos(a), s = std::sin(a);
    r.m[0][0] = c;
    r.m[0][2] = s;
    r.m[2][0] = -s;
    r.m[2][2] = c;
    return r;
}

Mat3 Mat3::rotation_z(double a) {
    Mat3 r;
    const double c = std::cos(a), s = std::sin(a);
    r.m[0][0] = c;
    r.m[0][1] = -s;
    r.m[1][0] = s;
    r.m[1][1] = c;
    return r;
}

Mat3 random_rotation(RotationMode mode, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> angle(0.0, 2.0 * std::numbers::pi);
    switch (mode) {
        case RotationMode::None:
            return Mat3::identity();
        case RotationMode::X:
            return Mat3::rotation_x(angle(rng));
        case RotationMode::Y:
            return Mat3::rotation_y(angle(rng));
        case RotationMode::Z:
            return Mat3::rotation_z(angle(rng));
        case RotationMode::AllAxes: {
            const double ax = angle(rng), ay = angle(rng), az = angle(rng);
            return Mat3::rotation_z(az).times(Mat3::rotation_y(ay)).times(Mat3::rotation_x(ax));
        }
    }
    return Mat3::identity();
}

PointCloud rotate(const PointCloud& cloud, const Mat3& r) {
    PointCloud out;
    out.points.reserve(cloud.points.size());
    for (const Vec3& p : cloud.points) out.points.push_back(r.apply(p));
    return out;
}

std::vector<int> random_permutation(int n, std::mt19937_64& rng) {
    std::vector<int> perm(n);
    for (int i = 0; i < n; ++i) perm[i] = i;
    for (int i = n - 1; i > 0; --i) {
        std::uniform_int_distribution<int> pick(0, i);
        std::swap(perm[i], perm[pick(rng)]);
    }
    return perm;
}

std::vector<int> inverse_permutation(const std::vector<int>& perm) {
    std::vector<int> inv(perm.size());
    for (std::size_t i = 0; i < perm.size(); ++i) inv[perm[i]] = static_cast<int>(i);
    return inv;
}

namespace {

void check_permutation(const std::vector<int>& perm, int n) {
    if (static_cast<int>(perm.size()) != n)
        throw std::invalid_argument("apply_permutation: length mismatch");
    std::vector<bool> hit(n, false);
    for (int v : perm) {
        if (v < 0 || v >= n || hit[v])
            throw std::invalid_argument("apply_permutation: not a bijection");
        hit[v] = true;
    }
}

}  // namespace

std::pair<PointCloud, Correspondence> apply_permutation(const PointCloud& cloud,
                                                        const Correspondence& corr,
                                                        const std::vector<int>& perm,
                                                        PairSide side) {
    const int n = cloud.size();
    check_permutation(perm, n);
    if (corr.size() != n) throw std::invalid_argument("apply_permutation: correspondence size mismatch");
    PointCloud out;
    out.points.resize(n);
    for (int i = 0; i < n; ++i) out.points[i] = cloud.points[perm[i]];
    Correspondence new_corr;
    new_corr.x_to_y.resize(n);
    if (side == PairSide::X) {
        for (int i = 0; i < n; ++i) new_corr.x_to_y[i] = corr.x_to_y[perm[i]];
    } else {
        const std::vector<int> inv = inverse_permutation(perm);
        for (int i = 0; i < n; ++i) new_corr.x_to_y[i] = inv[corr.x_to_y[i]];
    }
    return {std::move(out), std::move(new_corr)};
}

PointCloud inject_noise(const PointCloud& cloud, double fraction, double stddev,
                        std::mt19937_64& rng) {
    if (fraction < 0.0 || fraction > 1.0)
        throw std::domain_error("inject_noise: fraction must lie in [0, 1]");
    if (stddev < 0.0) throw std::domain_error("inject_noise: stddev must be nonnegative");
    const int n = cloud.size();
    const int count = static_cast<int>(fraction * n);
    PointCloud out = cloud;
    if (count == 0 || stddev == 0.0) return out;
    std::vector<int> order = random_permutation(n, rng);
    std::normal_distribution<double> noise(0.0, stddev);
    for (int k = 0; k < count; ++k) {
        Vec3& p = out.points[order[k]];
        p.x += noise(rng);
        p.y += noise(rng);
        p.z += noise(rng);
    }
    return out;
}

namespace {

double directed_mean_sq_nn(const PointCloud& from, const PointCloud& to) {
    double total = 0.0;
    for (const Vec3& p : from.points) {
        double best = std::numeric_limits<double>::infinity();
        for (const Vec3& q : to.points) best = std::min(best, squared_distance(p, q));
        total += best;
    }
    return total / from.size();
}

}  // namespace

double chamfer(const PointCloud& a, const PointCloud& b) {
    if (a.size() == 0 || b.size() == 0) throw std::invalid_argument("chamfer: empty cloud");
    return directed_mean_sq_nn(a, b) + directed_mean_sq_nn(b, a);
}

std::vector<double> geodesic_distances(const MeshRef& mesh, int source) {
    const int n = mesh.cloud.size();
    if (source < 0 || source >= n) throw std::invalid_argument("geodesic_distances: bad source index");
    mesh.validate();
    std::vector<std::vector<std::pair<int, double>>> adj(n);
    auto add_edge = [&](int a, int b) {
        const double w = distance(mesh.cloud.points[a], mesh.cloud.points[b]);
        adj[a].emplace_back(b, w);
        adj[b].emplace_back(a, w);
    };
    for (const auto& t : mesh.triangles) {
        add_edge(t[0], t[1]);
        add_edge(t[1], t[2]);
        add_edge(t[2], t[0]);
    }
    std::vector<double> dist(n, std::numeric_limits<double>::infinity());
    dist[source] = 0.0;
    using Item = std::pair<double, int>;
    std::priority_queue<Item, std::vector<Item>, std::greater<>> heap;
    heap.emplace(0.0, source);
    while (!heap.empty()) {
        const auto [d, u] = heap.top();
        heap.pop();
        if (d > dist[u]) continue;
        for (const auto& [v, w] : adj[u]) {
            const double nd = d + w;
            if (nd < dist[v]) {
                dist[v] = nd;
                heap.emplace(nd, v);
            }
        }
    }
    for (int i = 0; i < n; ++i)
        if (!std::isfinite(dist[i]))
            throw NumericError("geodesic_distances: vertex " + std::to_string(i) +
                               " unreachable from source " + std::to_string(source));
    return dist;
}

double mesh_surface_area(const MeshRef& mesh) {
    double area = 0.0;
    for (const auto& t : mesh.triangles) {
        const Vec3 ab = mesh.cloud.points[t[1]] - mesh.cloud.points[t[0]];
        const Vec3 ac = mesh.cloud.points[t[2]] - mesh.cloud.points[t[0]];
        area += 0.5 * ab.cross(ac).norm();
    }
    return area;
}

std::vector<int> nearest_neighbor_match(const PointCloud& mapped, const PointCloud& target) {
    if (target.size() == 0) throw std::invalid_argument("nearest_neighbor_match: empty target");
    std::vector<int> match(mapped.size());
    for (int i = 0; i < mapped.size(); ++i) {
        double best = std::numeric_limits<double>::infinity();
        int best_j = 0;
        for (int j = 0; j < target.size(); ++j) {
            const double d = squared_distance(mapped.points[i], target.points[j]);
            if (d < best) {
                best = d;
                best_j = j;
            }
        }
        match[i] = best_j;
    }
    return match;
}

}  // namespace gam
