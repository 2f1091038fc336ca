#pragma once

#include "gam/encoder.hpp"
#include "gam/geometry.hpp"
#include "gam/tensor.hpp"

namespace gam {

enum class LossReduction { Mean, Sum };

struct LossOptions {
    LossReduction reduction = LossReduction::Mean;
    double sep_weight = 1.0;
};

struct LossBreakdown {
    double l_xy = 0.0;
    double l_yx = 0.0;
    double l_sep = 0.0;
    double total = 0.0;
};

// Squared-distance reconstruction terms between remapped clouds and their
// ground-truth partners: l_xy compares x_hat rows with Y reordered by the
// correspondence, l_yx compares y_hat with X.
std::pair<Tensor, Tensor> correspondence_loss(const Tensor& x_hat, const Tensor& y_hat,
                                              const PointCloud& x, const PointCloud& y,
                                              const Correspondence& corr,
                                              LossReduction reduction = LossReduction::Mean);

// Mean squared error of the separator output against the separator input.
Tensor sep_loss(const Tensor& sep_out);

// l_xy + l_yx + sep_weight * l_sep as a scalar graph node, plus the plain
// numbers for logging.
std::pair<Tensor, LossBreakdown> total_loss(const ForwardResult& out, const PointCloud& x,
                                            const PointCloud& y, const Correspondence& corr,
                                            const LossOptions& options = {});

}  // namespace gam
