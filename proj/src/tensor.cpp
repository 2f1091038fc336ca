#include "gam/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <unordered_set>

#include "gam/errors.hpp"

namespace gam {

namespace {

thread_local bool g_autograd_enabled = true;

std::size_t shape_size(const std::vector<int>& shape) {
    std::size_t n = 1;
    for (int e : shape) {
        if (e <= 0) throw std::invalid_argument("tensor: nonpositive extent in shape");
        n *= static_cast<std::size_t>(e);
    }
    return n;
}

// C (+)= A(n x k) * B(k x m)
void mm_nn(const double* __restrict a, const double* __restrict b, double* __restrict c, int n,
           int k, int m, bool accumulate) {
    if (!accumulate) std::fill(c, c + static_cast<std::size_t>(n) * m, 0.0);
    for (int i = 0; i < n; ++i) {
        const double* ai = a + static_cast<std::size_t>(i) * k;
        double* ci = c + static_cast<std::size_t>(i) * m;
        for (int p = 0; p < k; ++p) {
            const double av = ai[p];
            const double* bp = b + static_cast<std::size_t>(p) * m;
            for (int j = 0; j < m; ++j) ci[j] += av * bp[j];
        }
    }
}

// C (+)= A(n x k) * B(m x k)^T
void mm_nt(const double* __restrict a, const double* __restrict b, double* __restrict c, int n,
           int k, int m, bool accumulate) {
    for (int i = 0; i < n; ++i) {
        const double* ai = a + static_cast<std::size_t>(i) * k;
        double* ci = c + static_cast<std::size_t>(i) * m;
        for (int j = 0; j < m; ++j) {
            const double* bj = b + static_cast<std::size_t>(j) * k;
            double acc = 0.0;
            for (int p = 0; p < k; ++p) acc += ai[p] * bj[p];
            ci[j] = accumulate ? ci[j] + acc : acc;
        }
    }
}

// C (+)= A(k x n)^T * B(k x m)
void mm_tn(const double* __restrict a, const double* __restrict b, double* __restrict c, int n,
           int k, int m, bool accumulate) {
    if (!accumulate) std::fill(c, c + static_cast<std::size_t>(n) * m, 0.0);
    for (int p = 0; p < k; ++p) {
        const double* ap = a + static_cast<std::size_t>(p) * n;
        const double* bp = b + static_cast<std::size_t>(p) * m;
        for (int i = 0; i < n; ++i) {
            const double av = ap[i];
            if (av == 0.0) continue;
            double* ci = c + static_cast<std::size_t>(i) * m;
            for (int j = 0; j < m; ++j) ci[j] += av * bp[j];
        }
    }
}

void check_2d(const Tensor& t, const char* op) {
    if (!t.defined() || t.shape().size() != 2)
        throw std::invalid_argument(std::string(op) + ": expected a 2-d tensor");
}

void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (a.shape() != b.shape())
        throw std::invalid_argument(std::string(op) + ": shape mismatch");
}

}  // namespace

bool autograd_enabled() { return g_autograd_enabled; }

NoGradGuard::NoGradGuard() : prev_(g_autograd_enabled) { g_autograd_enabled = false; }
NoGradGuard::~NoGradGuard() { g_autograd_enabled = prev_; }

void Tensor::Node::ensure_grad() {
    if (grad.size() != data.size()) grad.assign(data.size(), 0.0);
}

Tensor Tensor::zeros(std::vector<int> shape, bool requires_grad) {
    const std::size_t n = shape_size(shape);
    return from_data(std::move(shape), std::vector<double>(n, 0.0), requires_grad);
}

Tensor Tensor::from_data(std::vector<int> shape, std::vector<double> data, bool requires_grad) {
    if (shape_size(shape) != data.size())
        throw std::invalid_argument("tensor: data length does not match shape");
    auto node = std::make_shared<Node>();
    node->shape = std::move(shape);
    node->data = std::move(data);
    node->requires_grad = requires_grad;
    return Tensor(std::move(node));
}

Tensor Tensor::scalar(double value, bool requires_grad) {
    return from_data({1}, {value}, requires_grad);
}

Tensor Tensor::make(std::vector<int> shape, std::vector<double> data,
                    std::vector<Tensor> parents, std::function<void(Node&)> backward_fn) {
    if (shape_size(shape) != data.size())
        throw std::invalid_argument("tensor: data length does not match shape");
    auto node = std::make_shared<Node>();
    node->shape = std::move(shape);
    node->data = std::move(data);
    bool track = false;
    if (g_autograd_enabled) {
        for (const Tensor& p : parents)
            if (p.defined() && p.requires_grad()) track = true;
    }
    if (track) {
        node->requires_grad = true;
        node->parents = std::move(parents);
        node->backward_fn = std::move(backward_fn);
    }
    return Tensor(std::move(node));
}

const std::vector<int>& Tensor::shape() const { return n_->shape; }

int Tensor::rows() const {
    check_2d(*this, "rows");
    return n_->shape[0];
}

int Tensor::cols() const {
    check_2d(*this, "cols");
    return n_->shape[1];
}

std::size_t Tensor::size() const { return n_->data.size(); }

bool Tensor::requires_grad() const { return n_ && n_->requires_grad; }

const std::vector<double>& Tensor::data() const { return n_->data; }

std::vector<double>& Tensor::mutable_data() { return n_->data; }

const std::vector<double>& Tensor::grad() const {
    if (!has_grad()) throw std::logic_error("tensor: gradient not populated");
    return n_->grad;
}

bool Tensor::has_grad() const { return n_ && n_->grad.size() == n_->data.size(); }

void Tensor::zero_grad() {
    if (!n_) return;
    n_->grad.assign(n_->data.size(), 0.0);
}

bool Tensor::grad_is_finite() const {
    if (!has_grad()) return false;
    for (double g : n_->grad)
        if (!std::isfinite(g)) return false;
    return true;
}

double Tensor::value() const {
    if (size() != 1) throw std::invalid_argument("value: tensor is not scalar");
    return n_->data[0];
}

double Tensor::at(int r, int c) const {
    check_2d(*this, "at");
    return n_->data[static_cast<std::size_t>(r) * n_->shape[1] + c];
}

void Tensor::backward() {
    if (!n_) throw std::invalid_argument("backward: undefined tensor");
    if (size() != 1) throw std::invalid_argument("backward: loss must be a scalar");
    if (!n_->requires_grad) throw std::invalid_argument("backward: loss does not require grad");

    // Post-order DFS over parent edges; reversed, every node precedes its
    // producers, so each grad is complete before its backward_fn runs.
    std::vector<Node*> order;
    std::unordered_set<Node*> seen;
    struct Frame {
        Node* node;
        std::size_t next;
    };
    std::vector<Frame> stack{{n_.get(), 0}};
    seen.insert(n_.get());
    while (!stack.empty()) {
        Frame& f = stack.back();
        if (f.next < f.node->parents.size()) {
            Node* p = f.node->parents[f.next++].node().get();
            if (p && p->requires_grad && seen.insert(p).second) stack.push_back({p, 0});
        } else {
            order.push_back(f.node);
            stack.pop_back();
        }
    }

    n_->ensure_grad();
    n_->grad[0] += 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node* node = *it;
        if (node->backward_fn) {
            node->ensure_grad();
            node->backward_fn(*node);
        }
    }
    for (Node* node : order) {
        if (node->backward_fn) {
            node->backward_fn = nullptr;
            node->parents.clear();
            node->grad.clear();  // interior grads are scratch; leaves keep theirs
        }
    }
}

Tensor matmul(const Tensor& a, const Tensor& b) {
    check_2d(a, "matmul");
    check_2d(b, "matmul");
    const int n = a.rows(), k = a.cols(), m = b.cols();
    if (b.rows() != k) throw std::invalid_argument("matmul: inner dimensions disagree");
    std::vector<double> out(static_cast<std::size_t>(n) * m);
    mm_nn(a.data().data(), b.data().data(), out.data(), n, k, m, false);
    return Tensor::make(
        {n, m}, std::move(out), {a, b}, [n, k, m](Tensor::Node& self) {
            const Tensor& pa = self.parents[0];
            const Tensor& pb = self.parents[1];
            if (pa.requires_grad()) {
                pa.node()->ensure_grad();
                mm_nt(self.grad.data(), pb.data().data(), pa.node()->grad.data(), n, m, k, true);
            }
            if (pb.requires_grad()) {
                pb.node()->ensure_grad();
                mm_tn(pa.data().data(), self.grad.data(), pb.node()->grad.data(), k, n, m, true);
            }
        });
}

Tensor transpose(const Tensor& a) {
    check_2d(a, "transpose");
    const int n = a.rows(), m = a.cols();
    std::vector<double> out(a.size());
    const auto& src = a.data();
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < m; ++j)
            out[static_cast<std::size_t>(j) * n + i] = src[static_cast<std::size_t>(i) * m + j];
    return Tensor::make({m, n}, std::move(out), {a}, [n, m](Tensor::Node& self) {
        const Tensor& pa = self.parents[0];
        if (!pa.requires_grad()) return;
        pa.node()->ensure_grad();
        auto& ga = pa.node()->grad;
        for (int j = 0; j < m; ++j)
            for (int i = 0; i < n; ++i)
                ga[static_cast<std::size_t>(i) * m + j] += self.grad[static_cast<std::size_t>(j) * n + i];
    });
}

Tensor add(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "add");
    std::vector<double> out(a.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] + b.data()[i];
    return Tensor::make(a.shape(), std::move(out), {a, b}, [](Tensor::Node& self) {
        for (int side = 0; side < 2; ++side) {
            const Tensor& p = self.parents[side];
            if (!p.requires_grad()) continue;
            p.node()->ensure_grad();
            auto& g = p.node()->grad;
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
        }
    });
}

Tensor sub(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "sub");
    std::vector<double> out(a.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] - b.data()[i];
    return Tensor::make(a.shape(), std::move(out), {a, b}, [](Tensor::Node& self) {
        const Tensor& pa = self.parents[0];
        const Tensor& pb = self.parents[1];
        if (pa.requires_grad()) {
            pa.node()->ensure_grad();
            auto& g = pa.node()->grad;
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
        }
        if (pb.requires_grad()) {
            pb.node()->ensure_grad();
            auto& g = pb.node()->grad;
            for (std::size_t i = 0; i < g.size(); ++i) g[i] -= self.grad[i];
        }
    });
}

Tensor mul(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "mul");
    std::vector<double> out(a.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] * b.data()[i];
    return Tensor::make(a.shape(), std::move(out), {a, b}, [](Tensor::Node& self) {
        const Tensor& pa = self.parents[0];
        const Tensor& pb = self.parents[1];
        if (pa.requires_grad()) {
            pa.node()->ensure_grad();
            auto& g = pa.node()->grad;
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * pb.data()[i];
        }
        if (pb.requires_grad()) {
            pb.node()->ensure_grad();
            auto& g = pb.node()->grad;
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * pa.data()[i];
        }
    });
}

Tensor add_rowvec(const Tensor& a, const Tensor& row) {
    check_2d(a, "add_rowvec");
    if (row.shape().size() != 1 || row.shape()[0] != a.cols())
        throw std::invalid_argument("add_rowvec: row vector length must equal column count");
    const int n = a.rows(), m = a.cols();
    std::vector<double> out(a.size());
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < m; ++j)
            out[static_cast<std::size_t>(i) * m + j] = a.data()[static_cast<std::size_t>(i) * m + j] + row.data()[j];
    return Tensor::make({n, m}, std::move(out), {a, row}, [n, m](Tensor::Node& self) {
        const Tensor& pa = self.parents[0];
        const Tensor& pr = self.parents[1];
        if (pa.requires_grad()) {
            pa.node()->ensure_grad();
            auto& g = pa.node()->grad;
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
        }
        if (pr.requires_grad()) {
            pr.node()->ensure_grad();
            auto& g = pr.node()->grad;
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < m; ++j) g[j] += self.grad[static_cast<std::size_t>(i) * m + j];
        }
    });
}

Tensor scale(const Tensor& a, double s) {
    std::vector<double> out(a.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] * s;
    return Tensor::make(a.shape(), std::move(out), {a}, [s](Tensor::Node& self) {
        const Tensor& pa = self.parents[0];
        if (!pa.requires_grad()) return;
        pa.node()->ensure_grad();
        auto& g = pa.node()->grad;
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * s;
    });
}

Tensor relu(const Tensor& a) {
    std::vector<double> out(a.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] > 0.0 ? a.data()[i] : 0.0;
    return Tensor::make(a.shape(), std::move(out), {a}, [](Tensor::Node& self) {
        const Tensor& pa = self.parents[0];
        if (!pa.requires_grad()) return;
        pa.node()->ensure_grad();
        auto& g = pa.node()->grad;
        for (std::size_t i = 0; i < g.size(); ++i)
            if (pa.data()[i] > 0.0) g[i] += self.grad[i];
    });
}

Tensor exp_elementwise(const Tensor& a) {
    std::vector<double> out(a.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::exp(a.data()[i]);
    return Tensor::make(a.shape(), std::move(out), {a}, [](Tensor::Node& self) {
        const Tensor& pa = self.parents[0];
        if (!pa.requires_grad()) return;
        pa.node()->ensure_grad();
        auto& g = pa.node()->grad;
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * self.data[i];
    });
}

Tensor softmax_rows(const Tensor& a) {
    check_2d(a, "softmax_rows");
    const int n = a.rows(), m = a.cols();
    std::vector<double> out(a.size());
    const auto& x = a.data();
    for (int i = 0; i < n; ++i) {
        const std::size_t base = static_cast<std::size_t>(i) * m;
        double mx = -std::numeric_limits<double>::infinity();
        for (int j = 0; j < m; ++j)
            if (!is_masked_energy(x[base + j])) mx = std::max(mx, x[base + j]);
        if (!std::isfinite(mx))
            throw NumericError("softmax_rows: fully masked row " + std::to_string(i));
        double denom = 0.0;
        for (int j = 0; j < m; ++j) {
            const double v = x[base + j];
            const double e = is_masked_energy(v) ? 0.0 : std::exp(v - mx);
            out[base + j] = e;
            denom += e;
        }
        for (int j = 0; j < m; ++j) out[base + j] /= denom;
    }
    return Tensor::make({n, m}, std::move(out), {a}, [n, m](Tensor::Node& self) {
        const Tensor& pa = self.parents[0];
        if (!pa.requires_grad()) return;
        pa.node()->ensure_grad();
        auto& g = pa.node()->grad;
        const auto& x = pa.data();
        const auto& y = self.data;
        for (int i = 0; i < n; ++i) {
            const std::size_t base = static_cast<std::size_t>(i) * m;
            double dot = 0.0;
            for (int j = 0; j < m; ++j) dot += self.grad[base + j] * y[base + j];
            for (int j = 0; j < m; ++j) {
                if (is_masked_energy(x[base + j])) continue;  // hard zero grad
                g[base + j] += y[base + j] * (self.grad[base + j] - dot);
            }
        }
    });
}

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias) {
    check_2d(x, "layer_norm");
    const int n = x.rows(), d = x.cols();
    if (d < 2) throw std::invalid_argument("layer_norm: row width must be >= 2");
    if (gain.shape() != std::vector<int>{d} || bias.shape() != std::vector<int>{d})
        throw std::invalid_argument("layer_norm: gain/bias must have length equal to row width");
    constexpr double eps = 1e-5;
    std::vector<double> out(x.size());
    std::vector<double> inv_std(n);
    std::vector<double> normed(x.size());
    const auto& xv = x.data();
    for (int i = 0; i < n; ++i) {
        const std::size_t base = static_cast<std::size_t>(i) * d;
        double mean = 0.0;
        for (int j = 0; j < d; ++j) mean += xv[base + j];
        mean /= d;
        double var = 0.0;
        for (int j = 0; j < d; ++j) {
            const double c = xv[base + j] - mean;
            var += c * c;
        }
        var /= d;
        const double is = 1.0 / std::sqrt(var + eps);
        inv_std[i] = is;
        for (int j = 0; j < d; ++j) {
            const double nj = (xv[base + j] - mean) * is;
            normed[base + j] = nj;
            out[base + j] = gain.data()[j] * nj + bias.data()[j];
        }
    }
    return Tensor::make(
        {n, d}, std::move(out), {x, gain, bias},
        [n, d, inv_std = std::move(inv_std), normed = std::move(normed)](Tensor::Node& self) {
            const Tensor& px = self.parents[0];
            const Tensor& pg = self.parents[1];
            const Tensor& pb = self.parents[2];
            if (pg.requires_grad()) {
                pg.node()->ensure_grad();
                auto& gg = pg.node()->grad;
                for (int i = 0; i < n; ++i) {
                    const std::size_t base = static_cast<std::size_t>(i) * d;
                    for (int j = 0; j < d; ++j) gg[j] += self.grad[base + j] * normed[base + j];
                }
            }
            if (pb.requires_grad()) {
                pb.node()->ensure_grad();
                auto& gb = pb.node()->grad;
                for (int i = 0; i < n; ++i) {
                    const std::size_t base = static_cast<std::size_t>(i) * d;
                    for (int j = 0; j < d; ++j) gb[j] += self.grad[base + j];
                }
            }
            if (px.requires_grad()) {
                px.node()->ensure_grad();
                auto& gx = px.node()->grad;
                const auto& gv = pg.data();
                for (int i = 0; i < n; ++i) {
                    const std::size_t base = static_cast<std::size_t>(i) * d;
                    double mean_dn = 0.0, mean_dn_n = 0.0;
                    for (int j = 0; j < d; ++j) {
                        const double dn = self.grad[base + j] * gv[j];
                        mean_dn += dn;
                        mean_dn_n += dn * normed[base + j];
                    }
                    mean_dn /= d;
                    mean_dn_n /= d;
                    for (int j = 0; j < d; ++j) {
                        const double dn = self.grad[base + j] * gv[j];
                        gx[base + j] += inv_std[i] * (dn - mean_dn - normed[base + j] * mean_dn_n);
                    }
                }
            }
        });
}

Tensor sum_all(const Tensor& a) {
    double s = 0.0;
    for (double v : a.data()) s += v;
    return Tensor::make({1}, {s}, {a}, [](Tensor::Node& self) {
        const Tensor& pa = self.parents[0];
        if (!pa.requires_grad()) return;
        pa.node()->ensure_grad();
        auto& g = pa.node()->grad;
        for (double& gi : g) gi += self.grad[0];
    });
}

Tensor mean_all(const Tensor& a) {
    double s = 0.0;
    for (double v : a.data()) s += v;
    const double inv = 1.0 / static_cast<double>(a.size());
    return Tensor::make({1}, {s * inv}, {a}, [inv](Tensor::Node& self) {
        const Tensor& pa = self.parents[0];
        if (!pa.requires_grad()) return;
        pa.node()->ensure_grad();
        auto& g = pa.node()->grad;
        for (double& gi : g) gi += self.grad[0] * inv;
    });
}

Tensor gather_rows(const Tensor& a, const std::vector<int>& rows) {
    check_2d(a, "gather_rows");
    const int m = a.cols();
    for (int r : rows)
        if (r < 0 || r >= a.rows()) throw std::invalid_argument("gather_rows: row index out of range");
    std::vector<double> out(rows.size() * static_cast<std::size_t>(m));
    for (std::size_t i = 0; i < rows.size(); ++i)
        std::copy_n(a.data().begin() + static_cast<std::size_t>(rows[i]) * m, m,
                    out.begin() + i * m);
    return Tensor::make({static_cast<int>(rows.size()), m}, std::move(out), {a},
                        [rows, m](Tensor::Node& self) {
                            const Tensor& pa = self.parents[0];
                            if (!pa.requires_grad()) return;
                            pa.node()->ensure_grad();
                            auto& g = pa.node()->grad;
                            for (std::size_t i = 0; i < rows.size(); ++i)
                                for (int j = 0; j < m; ++j)
                                    g[static_cast<std::size_t>(rows[i]) * m + j] += self.grad[i * m + j];
                        });
}

Tensor concat_cols(const std::vector<Tensor>& parts) {
    if (parts.empty()) throw std::invalid_argument("concat_cols: no inputs");
    const int n = parts[0].rows();
    int total = 0;
    for (const Tensor& p : parts) {
        check_2d(p, "concat_cols");
        if (p.rows() != n) throw std::invalid_argument("concat_cols: row counts differ");
        total += p.cols();
    }
    std::vector<double> out(static_cast<std::size_t>(n) * total);
    int off = 0;
    for (const Tensor& p : parts) {
        const int m = p.cols();
        for (int i = 0; i < n; ++i)
            std::copy_n(p.data().begin() + static_cast<std::size_t>(i) * m, m,
                        out.begin() + static_cast<std::size_t>(i) * total + off);
        off += m;
    }
    return Tensor::make({n, total}, std::move(out), parts, [n, total](Tensor::Node& self) {
        int off = 0;
        for (Tensor& p : self.parents) {
            const int m = p.cols();
            if (p.requires_grad()) {
                p.node()->ensure_grad();
                auto& g = p.node()->grad;
                for (int i = 0; i < n; ++i)
                    for (int j = 0; j < m; ++j)
                        g[static_cast<std::size_t>(i) * m + j] +=
                            self.grad[static_cast<std::size_t>(i) * total + off + j];
            }
            off += m;
        }
    });
}

double rope_theta(int pair_index_one_based, int dim, double base) {
    return std::pow(base, -2.0 * (pair_index_one_based - 1) / static_cast<double>(dim));
}

Tensor rope_rotate_rows(const Tensor& keys, double base) {
    check_2d(keys, "rope_rotate_rows");
    const int n = keys.rows(), d = keys.cols();
    if (d % 2 != 0) throw std::invalid_argument("rope_rotate_rows: head width must be even");
    const int pairs = d / 2;
    std::vector<double> cosv(static_cast<std::size_t>(n) * pairs);
    std::vector<double> sinv(static_cast<std::size_t>(n) * pairs);
    for (int p = 0; p < pairs; ++p) {
        const double theta = rope_theta(p + 1, d, base);
        for (int i = 0; i < n; ++i) {
            const double ang = i * theta;
            cosv[static_cast<std::size_t>(i) * pairs + p] = std::cos(ang);
            sinv[static_cast<std::size_t>(i) * pairs + p] = std::sin(ang);
        }
    }
    std::vector<double> out(keys.size());
    const auto& k = keys.data();
    for (int i = 0; i < n; ++i) {
        const std::size_t base_i = static_cast<std::size_t>(i) * d;
        for (int p = 0; p < pairs; ++p) {
            const double c = cosv[static_cast<std::size_t>(i) * pairs + p];
            const double s = sinv[static_cast<std::size_t>(i) * pairs + p];
            const double k0 = k[base_i + 2 * p];
            const double k1 = k[base_i + 2 * p + 1];
            out[base_i + 2 * p] = c * k0 - s * k1;
            out[base_i + 2 * p + 1] = s * k0 + c * k1;
        }
    }
    return Tensor::make(
        {n, d}, std::move(out), {keys},
        [n, d, pairs, cosv = std::move(cosv), sinv = std::move(sinv)](Tensor::Node& self) {
            const Tensor& pk = self.parents[0];
            if (!pk.requires_grad()) return;
            pk.node()->ensure_grad();
            auto& g = pk.node()->grad;
            for (int i = 0; i < n; ++i) {
                const std::size_t base_i = static_cast<std::size_t>(i) * d;
                for (int p = 0; p < pairs; ++p) {
                    const double c = cosv[static_cast<std::size_t>(i) * pairs + p];
                    const double s = sinv[static_cast<std::size_t>(i) * pairs + p];
                    const double g0 = self.grad[base_i + 2 * p];
                    const double g1 = self.grad[base_i + 2 * p + 1];
                    g[base_i + 2 * p] += c * g0 + s * g1;
                    g[base_i + 2 * p + 1] += -s * g0 + c * g1;
                }
            }
        });
}

}  // namespace gam
