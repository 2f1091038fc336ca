#include "gam/losses.hpp"

#include <stdexcept>

namespace gam {

namespace {

Tensor cloud_tensor(const PointCloud& cloud) {
    std::vector<double> data;
    data.reserve(static_cast<std::size_t>(cloud.size()) * 3);
    for (const Vec3& p : cloud.points) {
        data.push_back(p.x);
        data.push_back(p.y);
        data.push_back(p.z);
    }
    return Tensor::from_data({cloud.size(), 3}, std::move(data));
}

Tensor reduce_sq(const Tensor& diff, LossReduction reduction) {
    Tensor sq = sum_all(mul(diff, diff));
    if (reduction == LossReduction::Sum) return sq;
    return scale(sq, 1.0 / diff.rows());  // per-point mean
}

}  // namespace

std::pair<Tensor, Tensor> correspondence_loss(const Tensor& x_hat, const Tensor& y_hat,
                                              const PointCloud& x, const PointCloud& y,
                                              const Correspondence& corr,
                                              LossReduction reduction) {
    const int n = corr.size();
    if (x.size() != n || y.size() != n || x_hat.rows() != n || y_hat.rows() != n)
        throw std::invalid_argument("correspondence_loss: size mismatch");
    corr.validate();
    // Reorder targets so row i of each prediction faces its matched point.
    PointCloud y_matched, x_matched;
    y_matched.points.resize(n);
    x_matched.points.resize(n);
    for (int i = 0; i < n; ++i) {
        y_matched.points[i] = y.points[corr.at(i)];
        x_matched.points[corr.at(i)] = x.points[i];
    }
    Tensor l_xy = reduce_sq(sub(x_hat, cloud_tensor(y_matched)), reduction);
    Tensor l_yx = reduce_sq(sub(y_hat, cloud_tensor(x_matched)), reduction);
    return {l_xy, l_yx};
}

Tensor sep_loss(const Tensor& sep_out) {
    if (sep_out.size() != 3) throw std::invalid_argument("sep_loss: expected a 1x3 row");
    Tensor target = Tensor::from_data({1, 3}, {kSepVector[0], kSepVector[1], kSepVector[2]});
    Tensor diff = sub(sep_out, target);
    return mean_all(mul(diff, diff));
}

std::pair<Tensor, LossBreakdown> total_loss(const ForwardResult& out, const PointCloud& x,
                                            const PointCloud& y, const Correspondence& corr,
                                            const LossOptions& options) {
    auto [l_xy, l_yx] = correspondence_loss(out.x_hat, out.y_hat, x, y, corr, options.reduction);
    Tensor l_sep = sep_loss(out.sep_out);
    Tensor total = add(add(l_xy, l_yx), scale(l_sep, options.sep_weight));
    LossBreakdown breakdown;
    breakdown.l_xy = l_xy.value();
    breakdown.l_yx = l_yx.value();
    breakdown.l_sep = l_sep.value();
    breakdown.total = total.value();
    return {total, breakdown};
}

}  // namespace gam
