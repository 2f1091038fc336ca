#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <vector>

namespace gam {

// Pre-softmax energy marking an attention entry as masked. softmax_rows lowers
// such entries to exactly zero and never propagates gradient through them.
inline constexpr double kMaskedEnergy = -1e30;

inline bool is_masked_energy(double v) { return v <= -1e29; }

bool autograd_enabled();

// Disables graph construction for the current thread while alive. Used for
// inference forwards and finite-difference probes.
class NoGradGuard {
public:
    NoGradGuard();
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

private:
    bool prev_;
};

// Dense row-major f64 tensor participating in a tape-based reverse-mode
// graph. Handles share the underlying node; the tape is freed after each
// backward() so a graph cannot be differentiated twice.
class Tensor {
public:
    struct Node {
        std::vector<int> shape;
        std::vector<double> data;
        std::vector<double> grad;  // empty until first accumulation
        bool requires_grad = false;
        std::vector<Tensor> parents;
        std::function<void(Node&)> backward_fn;

        std::size_t size() const { return data.size(); }
        void ensure_grad();
    };

    Tensor() = default;
    explicit Tensor(std::shared_ptr<Node> n) : n_(std::move(n)) {}

    static Tensor zeros(std::vector<int> shape, bool requires_grad = false);
    static Tensor from_data(std::vector<int> shape, std::vector<double> data,
                            bool requires_grad = false);
    static Tensor scalar(double value, bool requires_grad = false);

    // Builds an op result. Parents and backward_fn are dropped when autograd
    // is off or when no parent requires grad.
    static Tensor make(std::vector<int> shape, std::vector<double> data,
                       std::vector<Tensor> parents,
                       std::function<void(Node&)> backward_fn);

    bool defined() const { return static_cast<bool>(n_); }
    const std::vector<int>& shape() const;
    int rows() const;  // 2-d tensors
    int cols() const;
    std::size_t size() const;
    bool requires_grad() const;

    const std::vector<double>& data() const;
    std::vector<double>& mutable_data();  // in-place parameter updates
    const std::vector<double>& grad() const;
    bool has_grad() const;
    void zero_grad();
    bool grad_is_finite() const;

    double value() const;  // scalar tensors
    double at(int r, int c) const;

    // Reverse-mode accumulation from a scalar loss. Gradients add into any
    // prior contents (call zero_grad between steps). Frees the tape.
    void backward();

    const std::shared_ptr<Node>& node() const { return n_; }

private:
    std::shared_ptr<Node> n_;
};

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor add_rowvec(const Tensor& a, const Tensor& row);
Tensor scale(const Tensor& a, double s);
Tensor relu(const Tensor& a);
Tensor exp_elementwise(const Tensor& a);

// Row softmax honoring the mask sentinel: masked entries give exact zeros and
// receive exact zero gradient. A fully masked row is a NumericError.
Tensor softmax_rows(const Tensor& a);

// Per-row mean/variance normalization with affine gain/bias (epsilon 1e-5).
Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias);

Tensor sum_all(const Tensor& a);
Tensor mean_all(const Tensor& a);
Tensor gather_rows(const Tensor& a, const std::vector<int>& rows);
Tensor concat_cols(const std::vector<Tensor>& parts);

// Rotary positional rotation of key rows: row m gets each coordinate pair
// (2p, 2p+1) rotated by angle m * base^(-2p / cols).
Tensor rope_rotate_rows(const Tensor& keys, double base);

double rope_theta(int pair_index_one_based, int dim, double base);

}  // namespace gam
