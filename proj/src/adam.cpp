#include "gam/adam.hpp"

#include <cmath>
#include <stdexcept>

namespace gam {

Adam::Adam(AdamParams params, std::vector<Tensor> parameters)
    : params_(params), parameters_(std::move(parameters)) {
    m_.reserve(parameters_.size());
    v_.reserve(parameters_.size());
    for (const Tensor& p : parameters_) {
        if (!p.defined() || !p.requires_grad())
            throw std::invalid_argument("adam: every parameter must require grad");
        m_.emplace_back(p.size(), 0.0);
        v_.emplace_back(p.size(), 0.0);
    }
}

void Adam::step() {
    ++t_;
    const double bc1 = 1.0 - std::pow(params_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(params_.beta2, static_cast<double>(t_));
    for (std::size_t k = 0; k < parameters_.size(); ++k) {
        Tensor& p = parameters_[k];
        if (!p.has_grad()) continue;
        const auto& g = p.grad();
        auto& data = p.mutable_data();
        auto& m = m_[k];
        auto& v = v_[k];
        for (std::size_t i = 0; i < data.size(); ++i) {
            m[i] = params_.beta1 * m[i] + (1.0 - params_.beta1) * g[i];
            v[i] = params_.beta2 * v[i] + (1.0 - params_.beta2) * g[i] * g[i];
            const double m_hat = m[i] / bc1;
            const double v_hat = v[i] / bc2;
            data[i] -= params_.lr * m_hat / (std::sqrt(v_hat) + params_.eps);
        }
    }
}

void Adam::zero_grad() {
    for (Tensor& p : parameters_) p.zero_grad();
}

}  // namespace gam
