#include "gam/evaluate.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <random>

#include "gam/errors.hpp"
#include "gam/train.hpp"

namespace fs = std::filesystem;

namespace gam {

namespace {

PointCloud tensor_to_cloud(const Tensor& t) {
    PointCloud cloud;
    cloud.points.resize(t.rows());
    for (int i = 0; i < t.rows(); ++i)
        cloud.points[i] = {t.at(i, 0), t.at(i, 1), t.at(i, 2)};
    return cloud;
}

// Geodesic rows are memoized per source since ground-truth targets repeat.
class GeodesicCache {
public:
    explicit GeodesicCache(const MeshRef& mesh) : mesh_(mesh) {}

    double operator()(int from, int to) {
        auto it = rows_.find(from);
        if (it == rows_.end()) it = rows_.emplace(from, geodesic_distances(mesh_, from)).first;
        return it->second[to];
    }

private:
    const MeshRef& mesh_;
    std::map<int, std::vector<double>> rows_;
};

std::ofstream open_csv(const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open for writing: " + path);
    out.precision(17);
    return out;
}

}  // namespace

MatchReport match_outputs(const PointCloud& x_hat, const PointCloud& y_hat, const PointCloud& x,
                          const PointCloud& y, const MeshRef& mesh_x, const MeshRef& mesh_y,
                          const Correspondence& corr, bool normalize_geodesic) {
    MatchReport report;
    report.chamfer_xy = chamfer(x_hat, y);
    report.chamfer_yx = chamfer(y_hat, x);
    report.direction =
        report.chamfer_xy <= report.chamfer_yx ? MatchDirection::XtoY : MatchDirection::YtoX;

    const bool x_to_y = report.direction == MatchDirection::XtoY;
    const PointCloud& predicted = x_to_y ? x_hat : y_hat;
    const PointCloud& target = x_to_y ? y : x;
    const MeshRef& target_mesh = x_to_y ? mesh_y : mesh_x;
    const Correspondence ground_truth = x_to_y ? corr : corr.inverse();

    const std::vector<int> matched = nearest_neighbor_match(predicted, target);
    GeodesicCache geo(target_mesh);
    const double scale =
        normalize_geodesic ? 1.0 / std::sqrt(mesh_surface_area(target_mesh)) : 1.0;
    report.per_point_error.resize(matched.size());
    double total = 0.0;
    for (std::size_t i = 0; i < matched.size(); ++i) {
        const int truth = ground_truth.at(static_cast<int>(i));
        const double err = geo(truth, matched[i]) * scale;
        report.per_point_error[i] = err;
        total += err;
    }
    report.mean_error = total / static_cast<double>(matched.size());
    return report;
}

MatchReport evaluate_pair(const Model& model, const PointCloud& x, const PointCloud& y,
                          const MeshRef& mesh_x, const MeshRef& mesh_y, const Correspondence& corr,
                          const MaskSpec& mask, bool normalize_geodesic) {
    NoGradGuard inference;
    ForwardResult out = model.forward(x, y, mask);
    return match_outputs(tensor_to_cloud(out.x_hat), tensor_to_cloud(out.y_hat), x, y, mesh_x,
                         mesh_y, corr, normalize_geodesic);
}

EvalSummary evaluate_testset(const Model& model, const ShapeDataset& dataset,
                             const EvalOptions& options) {
    if (dataset.count() < 2) throw std::invalid_argument("evaluate_testset: need at least 2 shapes");
    if (!dataset.has_mesh())
        throw std::invalid_argument("evaluate_testset: dataset has no connectivity for geodesics");
    std::mt19937_64 rng(mix_seed(options.seed, 0x4556414cULL));
    std::uniform_int_distribution<int> pick(0, dataset.count() - 1);
    const Correspondence identity = Correspondence::identity(dataset.n);

    EvalSummary summary;
    double total = 0.0;
    for (int p = 0; p < options.pairs; ++p) {
        int a = pick(rng);
        int b = pick(rng);
        while (b == a) b = pick(rng);
        PointCloud x = normalize(dataset.clouds[a]);
        PointCloud y = normalize(dataset.clouds[b]);
        // Geodesics stay on the clean shapes; noise only affects what the
        // model and the nearest-neighbor matching see.
        MeshRef mesh_x{x, dataset.triangles};
        MeshRef mesh_y{y, dataset.triangles};
        if (options.noise.enabled && options.noise.stddev > 0.0) {
            x = inject_noise(x, options.noise.fraction, options.noise.stddev, rng);
            y = inject_noise(y, options.noise.fraction, options.noise.stddev, rng);
        }
        MatchReport report =
            evaluate_pair(model, x, y, mesh_x, mesh_y, identity, options.mask,
                          options.normalize_geodesic);
        report.pair_id = p;
        report.src = a;
        report.dst = b;
        total += report.mean_error;
        summary.reports.push_back(std::move(report));
    }
    summary.mean_error = total / options.pairs;
    return summary;
}

double cross_quadrant_mass(const Matrix& xi, int nx, int ny) {
    const int n = nx + 1 + ny;
    if (xi.rows != n || xi.cols != n)
        throw std::invalid_argument("cross_quadrant_mass: matrix size mismatch");
    double cross = 0.0;
    for (int i = 0; i < n; ++i) {
        if (i == nx) continue;
        const bool row_in_x = i < nx;
        for (int j = 0; j < n; ++j) {
            if (j == nx) continue;
            const bool col_in_x = j < nx;
            if (row_in_x != col_in_x) cross += xi.at(i, j);
        }
    }
    return cross;
}

HeadClass classify_head(const Matrix& xi, int nx, int ny) {
    const int n = nx + 1 + ny;
    if (xi.rows != n || xi.cols != n)
        throw std::invalid_argument("classify_head: matrix size mismatch");
    double self_mass = 0.0, cross_mass = 0.0;
    for (int i = 0; i < n; ++i) {
        if (i == nx) continue;
        const bool row_in_x = i < nx;
        for (int j = 0; j < n; ++j) {
            if (j == nx) continue;
            const bool col_in_x = j < nx;
            (row_in_x == col_in_x ? self_mass : cross_mass) += xi.at(i, j);
        }
    }
    if (self_mass == cross_mass)
        std::cerr << "classify_head: quadrant masses tie, defaulting to self\n";
    return self_mass >= cross_mass ? HeadClass::Self : HeadClass::Cross;
}

std::vector<HeadAblationRow> ablate_heads(const Model& model, const ShapeDataset& dataset,
                                          const EvalOptions& options) {
    const ModelConfig& config = model.config();
    // Classification looks at the final layer's attention on one clean pair.
    NoGradGuard inference;
    PointCloud cx = normalize(dataset.clouds[0]);
    PointCloud cy = normalize(dataset.clouds[1 % dataset.count()]);
    ForwardResult recorded = model.forward(cx, cy, MaskSpec::none(), true);
    const std::vector<Matrix>& last_layer = recorded.attention->xi.back();

    std::vector<HeadAblationRow> rows;
    for (int h = 0; h < config.heads; ++h) {
        EvalOptions masked = options;
        masked.mask = MaskSpec::head_all_layers(h);
        HeadAblationRow row;
        row.head = h;
        row.mean_error = evaluate_testset(model, dataset, masked).mean_error;
        row.cross_mass = cross_quadrant_mass(last_layer[h], cx.size(), cy.size());
        row.head_class = classify_head(last_layer[h], cx.size(), cy.size());
        rows.push_back(row);
    }
    return rows;
}

std::vector<LayerAblationRow> ablate_layers(const ExperimentConfig& base,
                                            const ShapeDataset& dataset, const std::string& out_dir,
                                            const EvalOptions& options) {
    if (base.model.sigmas.empty())
        throw std::invalid_argument("ablate_layers: base config needs a sigma ladder");
    std::vector<LayerAblationRow> rows;
    for (int layer = 0; layer < base.model.layers; ++layer) {
        ExperimentConfig config = base;
        config.variant = base.variant + ".layer" + std::to_string(layer);
        // Gaussian heads only at this layer; plain dot-product elsewhere.
        std::string gaussian_group;
        const int gaussians = std::min<int>(static_cast<int>(config.model.sigmas.size()),
                                            config.model.heads);
        for (int h = 0; h < config.model.heads; ++h)
            gaussian_group.push_back(
                h < config.model.heads - gaussians ? 'd' : static_cast<char>('0' + (h - (config.model.heads - gaussians))));
        std::string layout;
        for (int l = 0; l < config.model.layers; ++l) {
            if (l > 0) layout.push_back('/');
            layout += l == layer ? gaussian_group : std::string(config.model.heads, 'd');
        }
        config.model.head_layout =
            ModelConfig::parse_head_layout(layout, config.model.layers, config.model.heads);
        const std::string run_dir =
            out_dir.empty() ? "" : (fs::path(out_dir) / ("layer" + std::to_string(layer))).string();
        TrainResult trained = train(config, dataset, run_dir);
        LayerAblationRow row;
        row.layer = layer;
        row.mean_error = evaluate_testset(trained.model, dataset, options).mean_error;
        rows.push_back(row);
    }
    return rows;
}

void export_attention(const Model& model, const PointCloud& x, const PointCloud& y, int layer,
                      int head, int point_index, const std::string& matrix_csv,
                      const std::string& row_csv) {
    const ModelConfig& config = model.config();
    if (layer < 0 || layer >= config.layers) throw std::invalid_argument("export_attention: bad layer");
    if (head < 0 || head >= config.heads) throw std::invalid_argument("export_attention: bad head");
    const int n = x.size() + 1 + y.size();
    if (point_index < 0 || point_index >= n)
        throw std::invalid_argument("export_attention: point index out of range");

    NoGradGuard inference;
    ForwardResult out = model.forward(x, y, MaskSpec::none(), true);
    const Matrix& xi = out.attention->xi[layer][head];

    {
        std::ofstream csv = open_csv(matrix_csv);
        for (int i = 0; i < xi.rows; ++i) {
            for (int j = 0; j < xi.cols; ++j) {
                if (j) csv << ',';
                csv << xi.at(i, j);
            }
            csv << '\n';
        }
        if (!csv) throw IoError("write failed: " + matrix_csv);
    }
    {
        std::ofstream csv = open_csv(row_csv);
        csv << "x,y,z,weight\n";
        auto coords = [&](int j) -> Vec3 {
            if (j < x.size()) return x.points[j];
            if (j == x.size()) return {kSepVector[0], kSepVector[1], kSepVector[2]};
            return y.points[j - x.size() - 1];
        };
        for (int j = 0; j < xi.cols; ++j) {
            const Vec3 p = coords(j);
            csv << p.x << ',' << p.y << ',' << p.z << ',' << xi.at(point_index, j) << '\n';
        }
        if (!csv) throw IoError("write failed: " + row_csv);
    }
}

void write_match_report_csv(const EvalSummary& summary, const std::string& path) {
    std::ofstream csv = open_csv(path);
    csv << "pair_id,src,dst,direction,chamfer_xy,chamfer_yx,mean_geodesic_error\n";
    for (const MatchReport& r : summary.reports) {
        csv << r.pair_id << ',' << r.src << ',' << r.dst << ','
            << (r.direction == MatchDirection::XtoY ? "x_to_y" : "y_to_x") << ',' << r.chamfer_xy
            << ',' << r.chamfer_yx << ',' << r.mean_error << '\n';
    }
    if (!csv) throw IoError("write failed: " + path);
}

void write_head_ablation_csv(const std::vector<HeadAblationRow>& rows, double full_model_error,
                             const std::string& path) {
    std::ofstream csv = open_csv(path);
    csv << "head,masked_mean_error,full_model_error,class,cross_mass\n";
    for (const HeadAblationRow& r : rows) {
        csv << r.head << ',' << r.mean_error << ',' << full_model_error << ','
            << (r.head_class == HeadClass::Self ? "self" : "cross") << ',' << r.cross_mass << '\n';
    }
    if (!csv) throw IoError("write failed: " + path);
}

void write_layer_ablation_csv(const std::vector<LayerAblationRow>& rows, const std::string& path) {
    std::ofstream csv = open_csv(path);
    csv << "layer,mean_error\n";
    for (const LayerAblationRow& r : rows) csv << r.layer << ',' << r.mean_error << '\n';
    if (!csv) throw IoError("write failed: " + path);
}

}  // namespace gam
