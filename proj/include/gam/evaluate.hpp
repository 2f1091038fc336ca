#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gam/config.hpp"
#include "gam/dataset.hpp"
#include "gam/encoder.hpp"
#include "gam/geometry.hpp"

namespace gam {

enum class MatchDirection { XtoY, YtoX };

struct MatchReport {
    int pair_id = 0;
    int src = 0, dst = 0;  // dataset indices of X and Y
    MatchDirection direction = MatchDirection::XtoY;
    double chamfer_xy = 0.0;  // chamfer(x_hat, Y)
    double chamfer_yx = 0.0;  // chamfer(y_hat, X)
    std::vector<double> per_point_error;
    double mean_error = 0.0;
};

// Direction selection and geodesic scoring from already-predicted clouds;
// the model-level evaluate_pair forwards and delegates here. Kept separate so
// oracle predictions can be scored directly.
MatchReport match_outputs(const PointCloud& x_hat, const PointCloud& y_hat, const PointCloud& x,
                          const PointCloud& y, const MeshRef& mesh_x, const MeshRef& mesh_y,
                          const Correspondence& corr, bool normalize_geodesic = false);

MatchReport evaluate_pair(const Model& model, const PointCloud& x, const PointCloud& y,
                          const MeshRef& mesh_x, const MeshRef& mesh_y, const Correspondence& corr,
                          const MaskSpec& mask = MaskSpec::none(), bool normalize_geodesic = false);

struct EvalOptions {
    int pairs = 100;
    std::uint64_t seed = 0;
    NoisePolicy noise;  // fraction applies to every sampled pair's clouds
    bool normalize_geodesic = false;
    MaskSpec mask;
};

struct EvalSummary {
    double mean_error = 0.0;
    std::vector<MatchReport> reports;
};

EvalSummary evaluate_testset(const Model& model, const ShapeDataset& dataset,
                             const EvalOptions& options);

enum class HeadClass { Self, Cross };

// Quadrant-mass classification of an attention matrix over the concatenated
// sequence, SEP row/column excluded. Ties classify as Self with a warning on
// stderr.
HeadClass classify_head(const Matrix& xi, int nx, int ny);
double cross_quadrant_mass(const Matrix& xi, int nx, int ny);

struct HeadAblationRow {
    int head = 0;
    double mean_error = 0.0;
    HeadClass head_class = HeadClass::Self;
    double cross_mass = 0.0;
};

// Masks head i across every layer, one head at a time, and re-evaluates.
std::vector<HeadAblationRow> ablate_heads(const Model& model, const ShapeDataset& dataset,
                                          const EvalOptions& options);

struct LayerAblationRow {
    int layer = 0;
    double mean_error = 0.0;
};

// Trains one fresh model per layer position with Gaussian heads only at that
// layer, then evaluates each.
std::vector<LayerAblationRow> ablate_layers(const ExperimentConfig& base,
                                            const ShapeDataset& dataset, const std::string& out_dir,
                                            const EvalOptions& options);

// Writes the full attention matrix of (layer, head) for the pair (x, y) as
// CSV, plus the row of `point_index` as a (x,y,z,weight) field over the
// concatenated points.
void export_attention(const Model& model, const PointCloud& x, const PointCloud& y, int layer,
                      int head, int point_index, const std::string& matrix_csv,
                      const std::string& row_csv);

void write_match_report_csv(const EvalSummary& summary, const std::string& path);
void write_head_ablation_csv(const std::vector<HeadAblationRow>& rows, double full_model_error,
                             const std::string& path);
void write_layer_ablation_csv(const std::vector<LayerAblationRow>& rows, const std::string& path);

}  // namespace gam
