#pragma once

// Straightforward plain-loop encoder forward used as an independent oracle
// for the graph-based implementation. All-dot-product layouts only, residual
// attention off. Reads parameters from the model by name; shares no tensor or
// graph machinery with the code under test.

#include <cmath>
#include <string>
#include <vector>

#include "gam/encoder.hpp"
#include "gam/geometry.hpp"

namespace refenc {

using Mat = std::vector<std::vector<double>>;

inline Mat to_mat(const gam::Tensor& t) {
    Mat m(t.rows(), std::vector<double>(t.cols()));
    for (int i = 0; i < t.rows(); ++i)
        for (int j = 0; j < t.cols(); ++j) m[i][j] = t.at(i, j);
    return m;
}

inline std::vector<double> to_vec(const gam::Tensor& t) { return t.data(); }

inline Mat affine(const Mat& x, const Mat& w, const std::vector<double>& b) {
    const std::size_t n = x.size(), k = w.size(), m = w[0].size();
    Mat out(n, std::vector<double>(m, 0.0));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < m; ++j) {
            double acc = b[j];
            for (std::size_t p = 0; p < k; ++p) acc += x[i][p] * w[p][j];
            out[i][j] = acc;
        }
    return out;
}

inline void rope_keys_in_place(Mat& k, double base) {
    const int d = static_cast<int>(k[0].size());
    for (std::size_t row = 0; row < k.size(); ++row) {
        for (int p = 0; p < d / 2; ++p) {
            const double theta = std::pow(base, -2.0 * p / static_cast<double>(d));
            const double ang = static_cast<double>(row) * theta;
            const double c = std::cos(ang), s = std::sin(ang);
            const double k0 = k[row][2 * p], k1 = k[row][2 * p + 1];
            k[row][2 * p] = c * k0 - s * k1;
            k[row][2 * p + 1] = s * k0 + c * k1;
        }
    }
}

inline void softmax_rows_in_place(Mat& m) {
    for (auto& row : m) {
        double mx = row[0];
        for (double v : row) mx = std::max(mx, v);
        double denom = 0.0;
        for (double& v : row) {
            v = std::exp(v - mx);
            denom += v;
        }
        for (double& v : row) v /= denom;
    }
}

inline void layer_norm_in_place(Mat& m, const std::vector<double>& gain,
                                const std::vector<double>& bias) {
    const double eps = 1e-5;
    for (auto& row : m) {
        double mean = 0.0;
        for (double v : row) mean += v;
        mean /= row.size();
        double var = 0.0;
        for (double v : row) var += (v - mean) * (v - mean);
        var /= row.size();
        const double inv = 1.0 / std::sqrt(var + eps);
        for (std::size_t j = 0; j < row.size(); ++j)
            row[j] = gain[j] * (row[j] - mean) * inv + bias[j];
    }
}

// Full forward (input projection, encoder layers, output projection) with the
// same parameters as `model`. Requires an all-dot-product layout, residual
// attention Off, and RoPE applied to keys when enabled.
inline Mat forward(const gam::Model& model, const gam::PointCloud& x, const gam::PointCloud& y) {
    const gam::ModelConfig& cfg = model.config();
    const int hd = cfg.head_dim();
    Mat h;
    for (const gam::Vec3& p : x.points) h.push_back({p.x, p.y, p.z});
    h.push_back({0.0, 0.0, 0.0});
    for (const gam::Vec3& p : y.points) h.push_back({p.x, p.y, p.z});

    auto w = [&](const std::string& name) { return to_mat(model.param(name)); };
    auto b = [&](const std::string& name) { return to_vec(model.param(name)); };

    h = affine(h, w("input_proj.w"), b("input_proj.b"));
    const std::size_t n = h.size();
    for (int l = 0; l < cfg.layers; ++l) {
        const std::string lp = "layer" + std::to_string(l) + ".";
        Mat concat(n, std::vector<double>(cfg.d, 0.0));
        for (int head = 0; head < cfg.heads; ++head) {
            const std::string hp = lp + "head" + std::to_string(head) + ".";
            Mat q = affine(h, w(hp + "wq"), b(hp + "bq"));
            Mat k = affine(h, w(hp + "wk"), b(hp + "bk"));
            Mat v = affine(h, w(hp + "wv"), b(hp + "bv"));
            if (cfg.rope_enabled) rope_keys_in_place(k, cfg.rope_base);
            Mat scores(n, std::vector<double>(n, 0.0));
            const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(hd));
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < n; ++j) {
                    double acc = 0.0;
                    for (int p = 0; p < hd; ++p) acc += q[i][p] * k[j][p];
                    scores[i][j] = acc * inv_sqrt;
                }
            softmax_rows_in_place(scores);
            for (std::size_t i = 0; i < n; ++i)
                for (int p = 0; p < hd; ++p) {
                    double acc = 0.0;
                    for (std::size_t j = 0; j < n; ++j) acc += scores[i][j] * v[j][p];
                    concat[i][head * hd + p] = acc;
                }
        }
        Mat attn = affine(concat, w(lp + "attn_out.w"), b(lp + "attn_out.b"));
        for (std::size_t i = 0; i < n; ++i)
            for (int j = 0; j < cfg.d; ++j) attn[i][j] += h[i][j];
        layer_norm_in_place(attn, b(lp + "ln1.gain"), b(lp + "ln1.bias"));
        Mat ff = affine(attn, w(lp + "ff.w1"), b(lp + "ff.b1"));
        for (auto& row : ff)
            for (double& v : row) v = v > 0.0 ? v : 0.0;
        ff = affine(ff, w(lp + "ff.w2"), b(lp + "ff.b2"));
        for (std::size_t i = 0; i < n; ++i)
            for (int j = 0; j < cfg.d; ++j) ff[i][j] += attn[i][j];
        layer_norm_in_place(ff, b(lp + "ln2.gain"), b(lp + "ln2.bias"));
        h = std::move(ff);
    }
    return affine(h, w("output_proj.w"), b("output_proj.b"));
}

}  // namespace refenc
