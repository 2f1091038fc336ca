#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "fd_check.hpp"
#include "gam/encoder.hpp"
#include "gam/losses.hpp"
#include "reference_encoder.hpp"

using namespace gam;

namespace {

PointCloud random_normalized_cloud(int n, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    PointCloud cloud;
    for (int i = 0; i < n; ++i) cloud.points.push_back({dist(rng), dist(rng), dist(rng)});
    return normalize(cloud);
}

ModelConfig tiny_config(int d = 16, int heads = 4, int layers = 2, const std::string& layout = "dd01") {
    ModelConfig cfg;
    cfg.d = d;
    cfg.heads = heads;
    cfg.layers = layers;
    cfg.ff_hidden = 2 * d;
    cfg.sigmas = {0.3, 0.8};
    cfg.head_layout = ModelConfig::parse_head_layout(layout, layers, heads);
    return cfg;
}

}  // namespace

TEST_CASE("concat_inputs layout and round trip") {
    PointCloud x{{{1, 2, 3}}};
    PointCloud y{{{4, 5, 6}}};
    Tensor in = concat_inputs(x, y);
    CHECK(in.rows() == 3);
    CHECK(in.cols() == 3);
    CHECK(in.at(0, 0) == 1);
    CHECK(in.at(1, 0) == 0);  // SEP row
    CHECK(in.at(1, 2) == 0);
    CHECK(in.at(2, 2) == 6);
}

TEST_CASE("concat_inputs row count for large clouds") {
    std::mt19937_64 rng(2);
    PointCloud x = random_normalized_cloud(1000, rng);
    PointCloud y = random_normalized_cloud(1000, rng);
    CHECK(concat_inputs(x, y).rows() == 2001);
}

TEST_CASE("head layout parsing") {
    auto layout = ModelConfig::parse_head_layout("dddd0123", 6, 8);
    CHECK(layout.size() == 6);
    for (const auto& layer : layout) {
        CHECK(layer[0].kind == HeadKind::DotProduct);
        CHECK(layer[4].kind == HeadKind::Gaussian);
        CHECK(layer[4].sigma_index == 0);
        CHECK(layer[7].sigma_index == 3);
    }
    auto per_layer = ModelConfig::parse_head_layout("dd/d0/dd", 3, 2);
    CHECK(per_layer[1][1].kind == HeadKind::Gaussian);
    CHECK(per_layer[2][1].kind == HeadKind::DotProduct);
    CHECK_THROWS_AS(ModelConfig::parse_head_layout("dd", 1, 3), std::invalid_argument);
    CHECK_THROWS_AS(ModelConfig::parse_head_layout("dx", 1, 2), std::invalid_argument);
}

TEST_CASE("config validation") {
    ModelConfig bad = tiny_config();
    bad.d = 15;  // not divisible by heads
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);

    ModelConfig odd = tiny_config(12, 4, 1, "dddd");
    odd.rope_enabled = true;  // head width 3 is odd
    CHECK_THROWS_AS(odd.validate(), std::invalid_argument);

    ModelConfig missing_sigma = tiny_config();
    missing_sigma.sigmas = {0.3};
    CHECK_THROWS_AS(missing_sigma.validate(), std::invalid_argument);
}

TEST_CASE("parameter counts") {
    // d=8, h=2, one layer, all dot product, hand count:
    // input 3*8+8=32; per head 3*(8*4+4)=108 -> 216; attn_out 8*8+8=72;
    // ff (ff_hidden=32) 8*32+32+32*8+8=552; ln 4*8=32; output 8*3+3=27.
    ModelConfig cfg;
    cfg.d = 8;
    cfg.heads = 2;
    cfg.layers = 1;
    const ParamCounts counts = parameter_count(cfg);
    CHECK(counts.total() == 32 + 216 + 72 + 552 + 32 + 27);

    ModelConfig dot = tiny_config(16, 4, 2, "dddd");
    ModelConfig gauss = tiny_config(16, 4, 2, "dd01");
    CHECK(parameter_count(gauss).total() < parameter_count(dot).total());
    // Each Gaussian head drops its Q and K projections.
    const long long per_head = 2LL * 16 * 4 + 2 * 4;
    CHECK(parameter_count(dot).total() - parameter_count(gauss).total() == 2 * 2 * per_head);
}

TEST_CASE("full-scale parameter delta matches the architecture arithmetic") {
    ModelConfig dot;
    dot.d = 512;
    dot.heads = 8;
    dot.layers = 6;
    ModelConfig gauss = dot;
    gauss.sigmas = {0.05, 0.1, 0.5, 1.0};
    gauss.head_layout = ModelConfig::parse_head_layout("dddd0123", 6, 8);
    const ParamCounts a = parameter_count(dot);
    const ParamCounts b = parameter_count(gauss);
    CHECK(a.weights - b.weights == 6LL * 2 * 512 * 256);
    CHECK(a.biases - b.biases == 6LL * 4 * 2 * 64);
}

TEST_CASE("dot head energy: zero projections give uniform rows") {
    ModelConfig cfg = tiny_config(8, 2, 1, "dd");
    Model model(cfg, 1);
    // Zero Q/K projections -> zero logits -> uniform attention.
    for (const std::string name :
         {"layer0.head0.wq", "layer0.head0.wk", "layer0.head0.bq", "layer0.head0.bk"}) {
        auto& data = model.param(name).mutable_data();
        std::fill(data.begin(), data.end(), 0.0);
    }
    std::mt19937_64 rng(4);
    PointCloud x = random_normalized_cloud(3, rng);
    PointCloud y = random_normalized_cloud(3, rng);
    ForwardResult out = model.forward(x, y, MaskSpec::none(), true);
    const Matrix& xi = out.attention->xi[0][0];
    const int n = 7;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) CHECK(xi.at(i, j) == doctest::Approx(1.0 / n).epsilon(1e-9));
}

TEST_CASE("residual attention dominates when previous energies are large") {
    // Two layers, dot-product heads with zero Q/K at layer 1: the layer-1
    // logits are the carried layer-0 attention alone, scaled through softmax.
    ModelConfig cfg = tiny_config(8, 2, 2, "dd");
    Model model(cfg, 2);
    for (int h = 0; h < 2; ++h) {
        for (const char* part : {"wq", "wk", "bq", "bk"}) {
            auto& data = model
                             .param("layer1.head" + std::to_string(h) + "." + part)
                             .mutable_data();
            std::fill(data.begin(), data.end(), 0.0);
        }
    }
    std::mt19937_64 rng(5);
    PointCloud x = random_normalized_cloud(3, rng);
    PointCloud y = random_normalized_cloud(3, rng);
    ForwardResult out = model.forward(x, y, MaskSpec::none(), true);
    const Matrix& xi0 = out.attention->xi[0][0];
    const Matrix& xi1 = out.attention->xi[1][0];
    // softmax(prev_xi) row-wise should reproduce xi1 exactly.
    for (int i = 0; i < xi0.rows; ++i) {
        double denom = 0.0;
        for (int j = 0; j < xi0.cols; ++j) denom += std::exp(xi0.at(i, j));
        for (int j = 0; j < xi0.cols; ++j)
            CHECK(xi1.at(i, j) == doctest::Approx(std::exp(xi0.at(i, j)) / denom).epsilon(1e-12));
    }
}

TEST_CASE("gaussian head attention: small sigma sharpens to the softmax of a delta kernel") {
    // The kernel collapses to an indicator as sigma -> 0; the softmax of that
    // indicator puts e/(e + k - 1) on the diagonal of a k-point block, which
    // is the sharpest attainable Gaussian-head attention.
    ModelConfig cfg = tiny_config(8, 2, 1, "01");
    cfg.sigmas = {1e-3, 1e6};
    Model model(cfg, 3);
    PointCloud x{{{-1, 0, 0}, {0.2, 0.4, 0}, {1, -0.3, 0}}};
    PointCloud y{{{0.5, 0.5, 0}, {-0.5, 0.2, 0}, {0, -1, 0}}};
    ForwardResult out = model.forward(x, y, MaskSpec::none(), true);
    const Matrix& sharp = out.attention->xi[0][0];
    const double e = std::exp(1.0);
    const double diag = e / (e + 2.0);
    for (int i = 0; i < 3; ++i) {
        CHECK(sharp.at(i, i) == doctest::Approx(diag).epsilon(1e-6));
        for (int j = 0; j < 3; ++j)
            if (j != i) CHECK(sharp.at(i, j) == doctest::Approx(1.0 / (e + 2.0)).epsilon(1e-6));
    }
    const Matrix& flat = out.attention->xi[0][1];
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) CHECK(flat.at(i, j) == doctest::Approx(1.0 / 3).epsilon(1e-6));
}

TEST_CASE("gaussian head support widens with sigma on a synthetic body") {
    // Four sigma rungs over a normalized shape: per-row support (weights
    // above 1e-3) must be nondecreasing in sigma.
    ModelConfig cfg = tiny_config(16, 4, 1, "0123");
    cfg.sigmas = {0.05, 0.1, 0.5, 1.0};
    Model model(cfg, 4);
    std::mt19937_64 rng(6);
    PointCloud x = random_normalized_cloud(24, rng);
    PointCloud y = random_normalized_cloud(24, rng);
    ForwardResult out = model.forward(x, y, MaskSpec::none(), true);
    const int n = 2 * 24 + 1;
    std::vector<long> support(4, 0);
    for (int h = 0; h < 4; ++h) {
        const Matrix& xi = out.attention->xi[0][h];
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                if (xi.at(i, j) > 1e-3) ++support[h];
    }
    CHECK(support[0] <= support[1]);
    CHECK(support[1] <= support[2]);
    CHECK(support[2] <= support[3]);
}

TEST_CASE("attention rows sum to one at every layer for both head kinds") {
    ModelConfig cfg = tiny_config();
    Model model(cfg, 5);
    std::mt19937_64 rng(7);
    for (int trial = 0; trial < 5; ++trial) {
        PointCloud x = random_normalized_cloud(5, rng);
        PointCloud y = random_normalized_cloud(5, rng);
        ForwardResult out = model.forward(x, y, MaskSpec::none(), true);
        for (const auto& layer : out.attention->xi)
            for (const Matrix& xi : layer)
                for (int i = 0; i < xi.rows; ++i) {
                    double sum = 0.0;
                    for (int j = 0; j < xi.cols; ++j) sum += xi.at(i, j);
                    CHECK(std::abs(sum - 1.0) < 1e-9);
                }
    }
}

TEST_CASE("gaussian cross-quadrant weights are exactly zero at every layer") {
    ModelConfig cfg = tiny_config();
    Model model(cfg, 8);
    std::mt19937_64 rng(9);
    PointCloud x = random_normalized_cloud(6, rng);
    PointCloud y = random_normalized_cloud(6, rng);
    ForwardResult out = model.forward(x, y, MaskSpec::none(), true);
    const int nx = 6;
    for (int l = 0; l < cfg.layers; ++l)
        for (int h = 0; h < cfg.heads; ++h) {
            if (cfg.head(l, h).kind != HeadKind::Gaussian) continue;
            const Matrix& xi = out.attention->xi[l][h];
            for (int i = 0; i < xi.rows; ++i)
                for (int j = 0; j < xi.cols; ++j) {
                    const bool same = (i < nx && j < nx) || (i > nx && j > nx) ||
                                      (i == nx && j == nx);
                    if (!same) CHECK(xi.at(i, j) == 0.0);
                }
        }
}

TEST_CASE("gaussian head attention is invariant under rigid rotations of the inputs") {
    ModelConfig cfg = tiny_config();
    Model model(cfg, 10);
    std::mt19937_64 rng(11);
    PointCloud x = random_normalized_cloud(5, rng);
    PointCloud y = random_normalized_cloud(5, rng);
    ForwardResult base = model.forward(x, y, MaskSpec::none(), true);
    PointCloud xr = rotate(x, random_rotation(RotationMode::AllAxes, rng));
    PointCloud yr = rotate(y, random_rotation(RotationMode::AllAxes, rng));
    ForwardResult rotated = model.forward(xr, yr, MaskSpec::none(), true);
    for (int l = 0; l < cfg.layers; ++l)
        for (int h = 0; h < cfg.heads; ++h) {
            if (cfg.head(l, h).kind != HeadKind::Gaussian) continue;
            const Matrix& a = base.attention->xi[l][h];
            const Matrix& b = rotated.attention->xi[l][h];
            for (std::size_t i = 0; i < a.v.size(); ++i) CHECK(std::abs(a.v[i] - b.v[i]) < 1e-9);
        }
}

TEST_CASE("attention apply basics") {
    // Identity attention returns V; uniform attention averages V rows.
    Tensor v = Tensor::from_data({3, 2}, {1, 2, 3, 4, 5, 6});
    Tensor eye = Tensor::from_data({3, 3}, {1, 0, 0, 0, 1, 0, 0, 0, 1});
    Tensor out = matmul(eye, v);
    for (std::size_t i = 0; i < v.size(); ++i) CHECK(out.data()[i] == v.data()[i]);

    Tensor uniform = Tensor::from_data({3, 3}, std::vector<double>(9, 1.0 / 3));
    Tensor averaged = matmul(uniform, v);
    CHECK(averaged.at(0, 0) == doctest::Approx(3.0));
    CHECK(averaged.at(2, 1) == doctest::Approx(4.0));
}

TEST_CASE("attention output rows stay within the convex hull of V per coordinate") {
    std::mt19937_64 rng(13);
    ModelConfig cfg = tiny_config();
    Model model(cfg, 12);
    PointCloud x = random_normalized_cloud(4, rng);
    PointCloud y = random_normalized_cloud(4, rng);
    ForwardResult out = model.forward(x, y, MaskSpec::none(), true);
    // Convexity at the level of the attention op itself, on random inputs.
    std::uniform_real_distribution<double> dist(-2.0, 2.0);
    std::vector<double> logits(25), values(15);
    for (double& v : logits) v = dist(rng);
    for (double& v : values) v = dist(rng);
    Tensor xi = softmax_rows(Tensor::from_data({5, 5}, logits));
    Tensor v = Tensor::from_data({5, 3}, values);
    Tensor applied = matmul(xi, v);
    for (int j = 0; j < 3; ++j) {
        double lo = 1e300, hi = -1e300;
        for (int i = 0; i < 5; ++i) {
            lo = std::min(lo, v.at(i, j));
            hi = std::max(hi, v.at(i, j));
        }
        for (int i = 0; i < 5; ++i) {
            CHECK(applied.at(i, j) >= lo - 1e-12);
            CHECK(applied.at(i, j) <= hi + 1e-12);
        }
    }
}

TEST_CASE("masked heads contribute nothing at a fresh model") {
    ModelConfig cfg = tiny_config(8, 2, 1, "dd");
    Model model(cfg, 14);
    std::mt19937_64 rng(15);
    PointCloud x = random_normalized_cloud(3, rng);
    PointCloud y = random_normalized_cloud(3, rng);
    auto& bo = model.param("layer0.attn_out.b").mutable_data();
    std::fill(bo.begin(), bo.end(), 0.0);
    MaskSpec all;
    all.entries = {{MaskSpec::kAllLayers, 0}, {MaskSpec::kAllLayers, 1}};
    ForwardResult masked = model.forward(x, y, all);
    // With every head masked and the projection bias zeroed, the attention
    // sublayer adds nothing: the layer reduces to LN2(z + FF(z)), z = LN1(h).
    Tensor h = add_rowvec(matmul(concat_inputs(x, y), model.param("input_proj.w")),
                          model.param("input_proj.b"));
    Tensor z = layer_norm(h, model.param("layer0.ln1.gain"), model.param("layer0.ln1.bias"));
    Tensor ff = add_rowvec(
        matmul(relu(add_rowvec(matmul(z, model.param("layer0.ff.w1")), model.param("layer0.ff.b1"))),
               model.param("layer0.ff.w2")),
        model.param("layer0.ff.b2"));
    Tensor expected = add_rowvec(
        matmul(layer_norm(add(z, ff), model.param("layer0.ln2.gain"), model.param("layer0.ln2.bias")),
               model.param("output_proj.w")),
        model.param("output_proj.b"));
    for (std::size_t i = 0; i < expected.size(); ++i)
        CHECK(masked.output.data()[i] == doctest::Approx(expected.data()[i]).epsilon(1e-12));
}

TEST_CASE("forward output shape equals input shape through layers") {
    ModelConfig cfg = tiny_config();
    Model model(cfg, 16);
    std::mt19937_64 rng(17);
    PointCloud x = random_normalized_cloud(4, rng);
    PointCloud y = random_normalized_cloud(4, rng);
    ForwardResult out = model.forward(x, y);
    CHECK(out.output.rows() == 9);
    CHECK(out.output.cols() == 3);
    CHECK(out.x_hat.rows() == 4);
    CHECK(out.y_hat.rows() == 4);
    CHECK(out.sep_out.rows() == 1);
}

TEST_CASE("zeroed output projection maps everything to zero clouds") {
    ModelConfig cfg = tiny_config();
    Model model(cfg, 18);
    for (const std::string name : {"output_proj.w", "output_proj.b"}) {
        auto& data = model.param(name).mutable_data();
        std::fill(data.begin(), data.end(), 0.0);
    }
    std::mt19937_64 rng(19);
    PointCloud x = random_normalized_cloud(4, rng);
    PointCloud y = random_normalized_cloud(4, rng);
    ForwardResult out = model.forward(x, y);
    for (double v : out.output.data()) CHECK(v == 0.0);
}

TEST_CASE("permuting X permutes x_hat rows identically when RoPE is off") {
    ModelConfig cfg = tiny_config();
    cfg.rope_enabled = false;
    Model model(cfg, 20);
    std::mt19937_64 rng(21);
    const int n = 6;
    PointCloud x = random_normalized_cloud(n, rng);
    PointCloud y = random_normalized_cloud(n, rng);
    ForwardResult base = model.forward(x, y);
    const std::vector<int> perm = random_permutation(n, rng);
    PointCloud xp;
    xp.points.resize(n);
    for (int i = 0; i < n; ++i) xp.points[i] = x.points[perm[i]];
    ForwardResult permuted = model.forward(xp, y);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < 3; ++j)
            CHECK(permuted.x_hat.at(i, j) == doctest::Approx(base.x_hat.at(perm[i], j)).epsilon(1e-9));
}

TEST_CASE("all-dot-product forward matches the independent reference implementation") {
    ModelConfig cfg;
    cfg.d = 16;
    cfg.heads = 4;
    cfg.layers = 1;
    cfg.ff_hidden = 32;
    cfg.residual_attention = ResidualAttentionMode::Off;
    Model model(cfg, 22);
    std::mt19937_64 rng(23);
    PointCloud x = random_normalized_cloud(8, rng);
    PointCloud y = random_normalized_cloud(8, rng);
    ForwardResult out = model.forward(x, y);
    refenc::Mat expected = refenc::forward(model, x, y);
    for (int i = 0; i < out.output.rows(); ++i)
        for (int j = 0; j < 3; ++j)
            CHECK(std::abs(out.output.at(i, j) - expected[i][j]) < 1e-10);
}

TEST_CASE("reference equivalence also holds with multiple layers") {
    ModelConfig cfg;
    cfg.d = 8;
    cfg.heads = 2;
    cfg.layers = 3;
    cfg.ff_hidden = 16;
    cfg.residual_attention = ResidualAttentionMode::Off;
    Model model(cfg, 24);
    std::mt19937_64 rng(25);
    PointCloud x = random_normalized_cloud(5, rng);
    PointCloud y = random_normalized_cloud(5, rng);
    ForwardResult out = model.forward(x, y);
    refenc::Mat expected = refenc::forward(model, x, y);
    for (int i = 0; i < out.output.rows(); ++i)
        for (int j = 0; j < 3; ++j)
            CHECK(std::abs(out.output.at(i, j) - expected[i][j]) < 1e-10);
}

TEST_CASE("every parameter gradient matches finite differences on a toy model") {
    ModelConfig cfg = tiny_config(16, 4, 2, "dd01");
    cfg.sigma_learnable = true;
    cfg.sigmas = {0.3, 0.8};
    Model model(cfg, 26);
    std::mt19937_64 rng(27);
    const int n = 5;
    PointCloud x = random_normalized_cloud(n, rng);
    PointCloud y = random_normalized_cloud(n, rng);
    Correspondence corr = Correspondence::identity(n);

    auto loss_value = [&]() {
        ForwardResult out = model.forward(x, y);
        auto [loss, breakdown] = total_loss(out, x, y, corr);
        return loss.value();
    };
    {
        ForwardResult out = model.forward(x, y);
        auto [loss, breakdown] = total_loss(out, x, y, corr);
        loss.backward();
    }
    for (const auto& [name, tensor] : model.named_parameters()) {
        REQUIRE(tensor.has_grad());
        CHECK_MESSAGE(tensor.grad_is_finite(), name);
        const double err = fd::max_grad_rel_err(tensor, loss_value);
        CHECK_MESSAGE(err < 1e-4, name, " rel err ", err);
    }
}

TEST_CASE("sigma stays fixed when not learnable") {
    ModelConfig cfg = tiny_config();
    Model model(cfg, 28);
    CHECK_FALSE(model.has_param("sigma0"));
    CHECK(model.sigma_value(0) == 0.3);
    CHECK(model.sigma_value(1) == 0.8);
}

TEST_CASE("mask spec parsing") {
    MaskSpec spec = MaskSpec::parse("2:5,all:1");
    CHECK(spec.is_masked(2, 5));
    CHECK_FALSE(spec.is_masked(1, 5));
    CHECK(spec.is_masked(0, 1));
    CHECK(spec.is_masked(4, 1));
    CHECK_THROWS_AS(MaskSpec::parse("nope"), std::invalid_argument);
    CHECK(MaskSpec::parse("2:5,all:1").to_string() == "2:5,all:1");
}
