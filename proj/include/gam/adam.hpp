#pragma once

#include <cstdint>
#include <vector>

#include "gam/tensor.hpp"

namespace gam {

struct AdamParams {
    double lr = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

// Adam with bias correction over a fixed parameter list. Moment buffers are
// keyed by position, so the list must not change between steps.
class Adam {
public:
    Adam(AdamParams params, std::vector<Tensor> parameters);

    // Applies one update from the gradients currently stored on the
    // parameters; missing gradients are treated as zero.
    void step();
    void zero_grad();

    std::int64_t step_count() const { return t_; }
    const AdamParams& params() const { return params_; }

private:
    AdamParams params_;
    std::vector<Tensor> parameters_;
    std::vector<std::vector<double>> m_;
    std::vector<std::vector<double>> v_;
    std::int64_t t_ = 0;
};

}  // namespace gam
