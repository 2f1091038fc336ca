#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "fd_check.hpp"
#include "gam/adam.hpp"
#include "gam/errors.hpp"
#include "gam/tensor.hpp"

using namespace gam;

namespace {

Tensor random_tensor(std::vector<int> shape, std::mt19937_64& rng, bool requires_grad = true) {
    std::size_t n = 1;
    for (int e : shape) n *= e;
    std::uniform_real_distribution<double> dist(-1.5, 1.5);
    std::vector<double> data(n);
    for (double& v : data) v = dist(rng);
    return Tensor::from_data(std::move(shape), std::move(data), requires_grad);
}

}  // namespace

TEST_CASE("matmul identity and hand product") {
    Tensor eye = Tensor::from_data({2, 2}, {1, 0, 0, 1});
    Tensor a = Tensor::from_data({2, 2}, {3, -1, 2, 5});
    Tensor prod = matmul(eye, a);
    for (std::size_t i = 0; i < 4; ++i) CHECK(prod.data()[i] == a.data()[i]);

    Tensor b = Tensor::from_data({2, 2}, {1, 2, 3, 4});
    Tensor c = Tensor::from_data({2, 1}, {0, 1});
    Tensor r = matmul(b, c);
    CHECK(r.at(0, 0) == doctest::Approx(2));
    CHECK(r.at(1, 0) == doctest::Approx(4));
}

TEST_CASE("matmul rejects mismatched inner dimensions") {
    Tensor a = Tensor::zeros({2, 3});
    Tensor b = Tensor::zeros({2, 2});
    CHECK_THROWS_AS(matmul(a, b), std::invalid_argument);
}

TEST_CASE("matmul gradient matches finite differences") {
    std::mt19937_64 rng(7);
    Tensor a = random_tensor({3, 4}, rng);
    Tensor b = random_tensor({4, 2}, rng);
    sum_all(matmul(a, b)).backward();
    auto loss = [&]() { return sum_all(matmul(a, b)).value(); };
    CHECK(fd::max_grad_rel_err(a, loss) < 1e-6);
    CHECK(fd::max_grad_rel_err(b, loss) < 1e-6);
}

TEST_CASE("softmax_rows basics") {
    Tensor x = Tensor::from_data({1, 3}, {0, 0, 0});
    Tensor y = softmax_rows(x);
    for (int j = 0; j < 3; ++j) CHECK(y.at(0, j) == doctest::Approx(1.0 / 3).epsilon(1e-12));

    Tensor masked = Tensor::from_data({1, 2}, {kMaskedEnergy, 0.0});
    Tensor ym = softmax_rows(masked);
    CHECK(ym.at(0, 0) == 0.0);
    CHECK(ym.at(0, 1) == 1.0);

    Tensor z = Tensor::from_data({1, 3}, {1, 2, 3});
    Tensor yz = softmax_rows(z);
    const double denom = std::exp(1.0) + std::exp(2.0) + std::exp(3.0);
    for (int j = 0; j < 3; ++j)
        CHECK(std::abs(yz.at(0, j) - std::exp(1.0 + j) / denom) < 1e-12);
}

TEST_CASE("softmax_rows rows sum to one and entries stay in [0,1]") {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 50; ++trial) {
        Tensor x = random_tensor({5, 7}, rng, false);
        Tensor y = softmax_rows(x);
        for (int i = 0; i < 5; ++i) {
            double sum = 0.0;
            for (int j = 0; j < 7; ++j) {
                const double v = y.at(i, j);
                CHECK(v >= 0.0);
                CHECK(v <= 1.0);
                sum += v;
            }
            CHECK(std::abs(sum - 1.0) < 1e-12);
        }
    }
}

TEST_CASE("softmax_rows masked entries get exact zero output and gradient") {
    Tensor x = Tensor::from_data({2, 3}, {0.3, kMaskedEnergy, -0.2, kMaskedEnergy, 1.0, 2.0}, true);
    Tensor y = softmax_rows(x);
    CHECK(y.at(0, 1) == 0.0);
    CHECK(y.at(1, 0) == 0.0);
    std::mt19937_64 rng(3);
    Tensor w = random_tensor({2, 3}, rng, false);
    sum_all(mul(y, w)).backward();
    CHECK(x.grad()[1] == 0.0);
    CHECK(x.grad()[3] == 0.0);
    CHECK(x.grad()[0] != 0.0);
}

TEST_CASE("softmax_rows fully masked row is an error") {
    Tensor x = Tensor::from_data({1, 2}, {kMaskedEnergy, kMaskedEnergy});
    CHECK_THROWS_AS(softmax_rows(x), NumericError);
}

TEST_CASE("softmax gradient matches finite differences") {
    std::mt19937_64 rng(13);
    Tensor x = random_tensor({4, 5}, rng);
    Tensor w = random_tensor({4, 5}, rng, false);
    sum_all(mul(softmax_rows(x), w)).backward();
    auto loss = [&]() { return sum_all(mul(softmax_rows(x), w)).value(); };
    CHECK(fd::max_grad_rel_err(x, loss) < 1e-4);
}

TEST_CASE("layer_norm constant row maps to bias") {
    Tensor x = Tensor::from_data({1, 4}, {2.5, 2.5, 2.5, 2.5});
    Tensor gain = Tensor::from_data({4}, {1, 1, 1, 1});
    Tensor bias = Tensor::zeros({4});
    Tensor y = layer_norm(x, gain, bias);
    for (int j = 0; j < 4; ++j) CHECK(y.at(0, j) == doctest::Approx(0.0));
}

TEST_CASE("layer_norm analytic two-point row") {
    Tensor x = Tensor::from_data({1, 2}, {1, -1});
    Tensor gain = Tensor::from_data({2}, {1, 1});
    Tensor bias = Tensor::zeros({2});
    Tensor y = layer_norm(x, gain, bias);
    // mean 0, variance 1 -> epsilon shrinks the row slightly below +-1
    const double expected = 1.0 / std::sqrt(1.0 + 1e-5);
    CHECK(y.at(0, 0) == doctest::Approx(expected).epsilon(1e-12));
    CHECK(y.at(0, 1) == doctest::Approx(-expected).epsilon(1e-12));
}

TEST_CASE("layer_norm gradient matches finite differences") {
    std::mt19937_64 rng(17);
    Tensor x = random_tensor({3, 6}, rng);
    Tensor gain = random_tensor({6}, rng);
    Tensor bias = random_tensor({6}, rng);
    Tensor w = random_tensor({3, 6}, rng, false);
    sum_all(mul(layer_norm(x, gain, bias), w)).backward();
    auto loss = [&]() { return sum_all(mul(layer_norm(x, gain, bias), w)).value(); };
    CHECK(fd::max_grad_rel_err(x, loss) < 1e-5);
    CHECK(fd::max_grad_rel_err(gain, loss) < 1e-5);
    CHECK(fd::max_grad_rel_err(bias, loss) < 1e-5);
}

TEST_CASE("elementwise op values") {
    Tensor x = Tensor::from_data({3}, {-1, 0, 2});
    Tensor r = relu(x);
    CHECK(r.data() == std::vector<double>{0, 0, 2});
    CHECK(exp_elementwise(Tensor::from_data({1}, {0})).value() == 1.0);
}

TEST_CASE("add gradient splits to both operands") {
    Tensor a = Tensor::from_data({2}, {1, 2}, true);
    Tensor b = Tensor::from_data({2}, {3, 4}, true);
    sum_all(add(a, b)).backward();
    CHECK(a.grad() == std::vector<double>{1, 1});
    CHECK(b.grad() == std::vector<double>{1, 1});
}

TEST_CASE("backward on simple graphs") {
    Tensor x = Tensor::from_data({3}, {5, -2, 0.5}, true);
    sum_all(x).backward();
    CHECK(x.grad() == std::vector<double>{1, 1, 1});

    Tensor y = Tensor::from_data({2}, {1, 2}, true);
    sum_all(mul(y, y)).backward();
    CHECK(y.grad()[0] == doctest::Approx(2));
    CHECK(y.grad()[1] == doctest::Approx(4));
}

TEST_CASE("backward requires a scalar loss") {
    Tensor x = Tensor::from_data({2}, {1, 2}, true);
    Tensor y = add(x, x);
    CHECK_THROWS_AS(y.backward(), std::invalid_argument);
}

TEST_CASE("gradients accumulate until zero_grad") {
    Tensor x = Tensor::from_data({2}, {1, 2}, true);
    sum_all(x).backward();
    sum_all(x).backward();
    CHECK(x.grad() == std::vector<double>{2, 2});
    x.zero_grad();
    sum_all(x).backward();
    CHECK(x.grad() == std::vector<double>{1, 1});
}

TEST_CASE("finite differences across remaining ops") {
    std::mt19937_64 rng(23);

    Tensor a = random_tensor({3, 4}, rng);
    Tensor row = random_tensor({4}, rng);
    Tensor w = random_tensor({3, 4}, rng, false);
    sum_all(mul(add_rowvec(a, row), w)).backward();
    auto loss1 = [&]() { return sum_all(mul(add_rowvec(a, row), w)).value(); };
    CHECK(fd::max_grad_rel_err(a, loss1) < 1e-4);
    CHECK(fd::max_grad_rel_err(row, loss1) < 1e-4);

    Tensor b = random_tensor({2, 3}, rng);
    sum_all(mul(exp_elementwise(scale(b, 0.7)), w = random_tensor({2, 3}, rng, false))).backward();
    auto loss2 = [&]() { return sum_all(mul(exp_elementwise(scale(b, 0.7)), w)).value(); };
    CHECK(fd::max_grad_rel_err(b, loss2) < 1e-4);

    Tensor c = random_tensor({4, 3}, rng);
    Tensor wt = random_tensor({3, 4}, rng, false);
    sum_all(mul(transpose(c), wt)).backward();
    auto loss3 = [&]() { return sum_all(mul(transpose(c), wt)).value(); };
    CHECK(fd::max_grad_rel_err(c, loss3) < 1e-4);

    Tensor d = random_tensor({5, 2}, rng);
    const std::vector<int> rows{4, 0, 0, 3};
    Tensor wg = random_tensor({4, 2}, rng, false);
    sum_all(mul(gather_rows(d, rows), wg)).backward();
    auto loss4 = [&]() { return sum_all(mul(gather_rows(d, rows), wg)).value(); };
    CHECK(fd::max_grad_rel_err(d, loss4) < 1e-4);

    Tensor e1 = random_tensor({3, 2}, rng);
    Tensor e2 = random_tensor({3, 3}, rng);
    Tensor wc = random_tensor({3, 5}, rng, false);
    sum_all(mul(concat_cols({e1, e2}), wc)).backward();
    auto loss5 = [&]() { return sum_all(mul(concat_cols({e1, e2}), wc)).value(); };
    CHECK(fd::max_grad_rel_err(e1, loss5) < 1e-4);
    CHECK(fd::max_grad_rel_err(e2, loss5) < 1e-4);

    Tensor f = random_tensor({4, 6}, rng);
    Tensor wf = random_tensor({4, 6}, rng, false);
    sum_all(mul(rope_rotate_rows(f, 10000.0), wf)).backward();
    auto loss6 = [&]() { return sum_all(mul(rope_rotate_rows(f, 10000.0), wf)).value(); };
    CHECK(fd::max_grad_rel_err(f, loss6) < 1e-4);

    Tensor g = random_tensor({3, 3}, rng);
    Tensor wr = random_tensor({3, 3}, rng, false);
    sum_all(mul(relu(g), wr)).backward();
    auto loss7 = [&]() { return sum_all(mul(relu(g), wr)).value(); };
    CHECK(fd::max_grad_rel_err(g, loss7) < 1e-4);

    Tensor m = random_tensor({2, 2}, rng);
    mean_all(mul(m, m)).backward();
    auto loss8 = [&]() { return mean_all(mul(m, m)).value(); };
    CHECK(fd::max_grad_rel_err(m, loss8) < 1e-4);
}

TEST_CASE("forward determinism") {
    std::mt19937_64 rng(29);
    Tensor a = random_tensor({4, 4}, rng, false);
    Tensor b = random_tensor({4, 4}, rng, false);
    Tensor r1 = softmax_rows(matmul(a, b));
    Tensor r2 = softmax_rows(matmul(a, b));
    CHECK(r1.data() == r2.data());
}

TEST_CASE("rope_theta formula") {
    CHECK(rope_theta(1, 64, 10000.0) == 1.0);
    CHECK(rope_theta(32, 64, 10000.0) == doctest::Approx(std::pow(10000.0, -62.0 / 64.0)));
}

TEST_CASE("rope rotation at position zero is the identity") {
    std::mt19937_64 rng(31);
    Tensor k = random_tensor({1, 8}, rng, false);
    Tensor r = rope_rotate_rows(k, 10000.0);
    for (int j = 0; j < 8; ++j) CHECK(r.at(0, j) == doctest::Approx(k.at(0, j)));
}

TEST_CASE("adam zero gradient leaves parameters unchanged") {
    Tensor p = Tensor::from_data({2}, {0.5, -0.25}, true);
    p.zero_grad();
    Adam opt(AdamParams{}, {p});
    opt.step();
    CHECK(p.data() == std::vector<double>{0.5, -0.25});
}

TEST_CASE("adam first step moves by lr in the gradient sign") {
    Tensor p = Tensor::scalar(0.0, true);
    sum_all(p).backward();  // gradient 1
    Adam opt(AdamParams{.lr = 0.1}, {p});
    opt.step();
    CHECK(p.value() == doctest::Approx(-0.1).epsilon(1e-6));
}

TEST_CASE("adam descends a convex quadratic") {
    Tensor p = Tensor::scalar(1.0, true);
    auto loss_value = [&]() { return p.value() * p.value(); };
    const double initial = loss_value();
    Adam opt(AdamParams{.lr = 0.05}, {p});
    for (int i = 0; i < 2; ++i) {
        opt.zero_grad();
        mul(p, p).backward();
        opt.step();
    }
    CHECK(loss_value() < initial);
}

TEST_CASE("no-grad scope skips graph construction") {
    Tensor p = Tensor::scalar(2.0, true);
    NoGradGuard guard;
    Tensor y = mul(p, p);
    CHECK_FALSE(y.requires_grad());
}
