#include <doctest.h>

#include <cmath>

#include "msap/gradcheck.hpp"
#include "msap/nn.hpp"
#include "msap/ops.hpp"
#include "test_support.hpp"

using namespace msap;
using msap::testing::random_tensor;

namespace {

// Direct nested-loop cross-correlation, independent of the im2col path.
std::vector<double> conv_oracle(const Tensor& x, const Tensor& w, const Tensor& b, const Conv2dSpec& s) {
    const std::size_t C = x.dim(0), H = x.dim(1), W = x.dim(2);
    const std::size_t Ho = (H + 2 * s.padding - s.kernel_h) / s.stride + 1;
    const std::size_t Wo = (W + 2 * s.padding - s.kernel_w) / s.stride + 1;
    std::vector<double> out(s.out_channels * Ho * Wo);
    for (std::size_t o = 0; o < s.out_channels; ++o)
        for (std::size_t y = 0; y < Ho; ++y)
            for (std::size_t xx = 0; xx < Wo; ++xx) {
                double acc = b[o];
                for (std::size_t c = 0; c < C; ++c)
                    for (std::size_t ky = 0; ky < s.kernel_h; ++ky)
                        for (std::size_t kx = 0; kx < s.kernel_w; ++kx) {
                            const long iy = static_cast<long>(y * s.stride + ky) - static_cast<long>(s.padding);
                            const long ix = static_cast<long>(xx * s.stride + kx) - static_cast<long>(s.padding);
                            if (iy < 0 || ix < 0 || iy >= static_cast<long>(H) || ix >= static_cast<long>(W)) continue;
                            acc += w[((o * C + c) * s.kernel_h + ky) * s.kernel_w + kx] *
                                   x[(c * H + static_cast<std::size_t>(iy)) * W + static_cast<std::size_t>(ix)];
                        }
                out[(o * Ho + y) * Wo + xx] = acc;
            }
    return out;
}

double sig(double v) { return 1.0 / (1.0 + std::exp(-v)); }

}  // namespace

TEST_CASE("conv2d") {
    SUBCASE("1x1 identity kernel") {
        std::mt19937_64 rng(1);
        Tensor x = random_tensor({3, 4, 5}, rng);
        Conv2dSpec s{3, 3, 1, 1, 1, 0};
        std::vector<double> w(9, 0.0);
        for (int i = 0; i < 3; ++i) w[static_cast<std::size_t>(i * 3 + i)] = 1.0;
        auto y = conv2d(x, Tensor({3, 3, 1, 1}, w), Tensor::zeros({3}), s);
        CHECK(msap::testing::bitwise_equal(y, x));
    }
    SUBCASE("all-ones 3x3 over constant input: 9 interior, 6 edge, 4 corner") {
        Conv2dSpec s{1, 1, 3, 3, 1, 1};
        Tensor x = Tensor::filled({1, 4, 4}, 1.0);
        Tensor w = Tensor::filled({1, 1, 3, 3}, 1.0);
        auto y = conv2d(x, w, Tensor::zeros({1}), s);
        auto oracle = conv_oracle(x, w, Tensor::zeros({1}), s);
        const std::vector<double> expected{4, 6, 6, 4, 6, 9, 9, 6, 6, 9, 9, 6, 4, 6, 6, 4};
        for (std::size_t i = 0; i < 16; ++i) {
            CHECK(oracle[i] == expected[i]);
            CHECK(y[i] == expected[i]);
        }
    }
    SUBCASE("matches nested-loop oracle with stride and padding") {
        std::mt19937_64 rng(2);
        for (std::size_t stride : {1u, 2u}) {
            Conv2dSpec s{2, 3, 3, 3, stride, 1};
            Tensor x = random_tensor({2, 7, 6}, rng), w = random_tensor({3, 2, 3, 3}, rng), b = random_tensor({3}, rng);
            auto y = conv2d(x, w, b, s);
            auto o = conv_oracle(x, w, b, s);
            CHECK(y.shape() == Shape{3, s.out_height(7), s.out_width(6)});
            for (std::size_t i = 0; i < o.size(); ++i) CHECK(std::abs(y[i] - o[i]) < 1e-12);
        }
    }
    SUBCASE("gradient") {
        std::mt19937_64 rng(3);
        ParameterSet ps;
        ps.add("x", random_tensor({2, 6, 6}, rng));
        ps.add("w", random_tensor({3, 2, 3, 3}, rng));
        ps.add("b", random_tensor({3}, rng));
        const Tensor proj = random_tensor({3, 3, 3}, rng);
        Conv2dSpec s{2, 3, 3, 3, 2, 1};
        auto f = [&](const BoundParameters& p) { return sum(mul(conv2d(p[0], p[1], p[2], s), proj)); };
        CHECK(grad_check(f, ps) < 1e-4);
    }
    SUBCASE("shape errors name the layer") {
        Conv2dSpec s{2, 1, 3, 3, 1, 1};
        try {
            conv2d(Tensor::zeros({3, 4, 4}), Tensor::zeros({1, 2, 3, 3}), Tensor::zeros({1}), s, "segment.cnn_diff.0");
            FAIL("expected ShapeError");
        } catch (const ShapeError& e) {
            CHECK(std::string(e.what()).find("segment.cnn_diff.0") != std::string::npos);
        }
        Conv2dSpec big{1, 1, 5, 5, 1, 0};
        CHECK_THROWS_AS(conv2d(Tensor::zeros({1, 3, 3}), Tensor::zeros({1, 1, 5, 5}), Tensor::zeros({1}), big), ShapeError);
    }
}

TEST_CASE("avg_pool2d") {
    auto y = avg_pool2d(Tensor({1, 2, 2}, {1, 2, 3, 4}));
    CHECK(y.shape() == Shape{1, 1, 1});
    CHECK(y[0] == 2.5);
    auto c = avg_pool2d(Tensor::filled({2, 4, 6}, 0.3));
    for (double v : c.data()) CHECK(v == doctest::Approx(0.3).epsilon(1e-15));
    CHECK_THROWS_AS(avg_pool2d(Tensor::zeros({1, 3, 4})), ShapeError);

    std::mt19937_64 rng(4);
    ParameterSet ps;
    ps.add("x", random_tensor({2, 4, 4}, rng));
    const Tensor proj = random_tensor({2, 2, 2}, rng);
    auto f = [&](const BoundParameters& p) { return sum(mul(avg_pool2d(p[0]), proj)); };
    CHECK(grad_check(f, ps) < 1e-4);
}

TEST_CASE("upsample_bilinear") {
    SUBCASE("half-pixel coordinate formula") {
        // Oracle: evaluate src = (d + 0.5)/2 − 0.5 clamped to [0,1] on [0, 1].
        std::vector<double> expected;
        for (int d = 0; d < 4; ++d) expected.push_back(std::clamp((d + 0.5) / 2.0 - 0.5, 0.0, 1.0));
        CHECK(expected == std::vector<double>{0.0, 0.25, 0.75, 1.0});
        auto y = upsample_bilinear(Tensor({1, 1, 2}, {0.0, 1.0}));
        CHECK(y.shape() == Shape{1, 2, 4});
        for (std::size_t r = 0; r < 2; ++r)
            for (std::size_t i = 0; i < 4; ++i) CHECK(y[r * 4 + i] == expected[i]);
    }
    SUBCASE("constants are preserved, and pool then upsample is the identity on them") {
        Tensor c = Tensor::filled({3, 4, 4}, 0.7);
        auto up = upsample_bilinear(c);
        for (double v : up.data()) CHECK(v == 0.7);
        auto round = upsample_bilinear(avg_pool2d(Tensor::filled({2, 8, 8}, 0.5)));
        CHECK(msap::testing::bitwise_equal(round, Tensor::filled({2, 8, 8}, 0.5)));
    }
    SUBCASE("gradient") {
        std::mt19937_64 rng(5);
        ParameterSet ps;
        ps.add("x", random_tensor({2, 3, 4}, rng));
        const Tensor proj = random_tensor({2, 6, 8}, rng);
        auto f = [&](const BoundParameters& p) { return sum(mul(upsample_bilinear(p[0]), proj)); };
        CHECK(grad_check(f, ps) < 1e-4);
    }
}

TEST_CASE("global_avg_pool") {
    auto y = global_avg_pool(Tensor::filled({3, 2, 5}, 1.5));
    CHECK(y.shape() == Shape{3});
    CHECK(y[2] == 1.5);
    std::vector<double> onehot(16, 0.0);
    onehot[5] = 8.0;
    CHECK(global_avg_pool(Tensor({1, 4, 4}, onehot))[0] == 0.5);

    std::mt19937_64 rng(6);
    ParameterSet ps;
    ps.add("x", random_tensor({3, 4, 4}, rng));
    const Tensor proj = random_tensor({3}, rng);
    auto f = [&](const BoundParameters& p) { return sum(mul(global_avg_pool(p[0]), proj)); };
    CHECK(grad_check(f, ps) < 1e-4);
}

TEST_CASE("lstm_cell") {
    const LstmSpec spec{3, 2};
    SUBCASE("zero parameters give zero hidden output") {
        std::mt19937_64 rng(7);
        auto out = lstm_cell(random_tensor({3}, rng), Tensor::zeros({2}), Tensor::zeros({2}), Tensor::zeros({8, 3}),
                             Tensor::zeros({8, 2}), Tensor::zeros({8}), spec);
        for (double v : out.h.data()) CHECK(v == 0.0);
        for (double v : out.c.data()) CHECK(v == 0.0);
    }
    SUBCASE("saturated forget gate carries the cell") {
        // Scalar reference of the gate formulas for one unit.
        auto ref = [](double pre_i, double pre_f, double pre_g, double c) {
            return sig(pre_f) * c + sig(pre_i) * std::tanh(pre_g);
        };
        std::vector<double> bias(8, 0.0);
        bias[2] = bias[3] = 20.0;  // forget block is rows [2,4)
        std::mt19937_64 rng(8);
        auto out = lstm_cell(random_tensor({3}, rng), Tensor::zeros({2}), Tensor({2}, {1.0, 1.0}), Tensor::zeros({8, 3}),
                             Tensor::zeros({8, 2}), Tensor({8}, bias), spec);
        for (std::size_t j = 0; j < 2; ++j) {
            CHECK(std::abs(out.c[j] - ref(0.0, 20.0, 0.0, 1.0)) < 1e-15);
            CHECK(std::abs(out.c[j] - 1.0) < 1e-8);
        }
    }
    SUBCASE("matches the scalar reference on random parameters") {
        std::mt19937_64 rng(9);
        Tensor x = random_tensor({3}, rng), h = random_tensor({2}, rng), c = random_tensor({2}, rng);
        Tensor wi = random_tensor({8, 3}, rng), wh = random_tensor({8, 2}, rng), b = random_tensor({8}, rng);
        auto out = lstm_cell(x, h, c, wi, wh, b, spec);
        for (std::size_t j = 0; j < 2; ++j) {
            double pre[4];
            for (std::size_t gate = 0; gate < 4; ++gate) {
                const std::size_t row = gate * 2 + j;
                pre[gate] = b[row];
                for (std::size_t k = 0; k < 3; ++k) pre[gate] += wi[row * 3 + k] * x[k];
                for (std::size_t k = 0; k < 2; ++k) pre[gate] += wh[row * 2 + k] * h[k];
            }
            const double cn = sig(pre[1]) * c[j] + sig(pre[0]) * std::tanh(pre[2]);
            CHECK(std::abs(out.c[j] - cn) < 1e-14);
            CHECK(std::abs(out.h[j] - sig(pre[3]) * std::tanh(cn)) < 1e-14);
        }
    }
    SUBCASE("gradient through three chained steps") {
        std::mt19937_64 rng(10);
        ParameterSet ps;
        ps.add("wi", random_tensor({8, 3}, rng));
        ps.add("wh", random_tensor({8, 2}, rng));
        ps.add("b", random_tensor({8}, rng));
        ps.add("h0", random_tensor({2}, rng));
        ps.add("c0", random_tensor({2}, rng));
        std::vector<Tensor> xs{random_tensor({3}, rng), random_tensor({3}, rng), random_tensor({3}, rng)};
        const Tensor proj = random_tensor({2}, rng);
        auto f = [&](const BoundParameters& p) {
            Tensor h = p[3], c = p[4];
            for (const auto& x : xs) {
                auto o = lstm_cell(x, h, c, p[0], p[1], p[2], spec);
                h = o.h;
                c = o.c;
            }
            return add(sum(mul(h, proj)), sum(c));
        };
        CHECK(grad_check(f, ps) < 1e-4);
    }
    SUBCASE("dimension mismatch") {
        CHECK_THROWS_AS(lstm_cell(Tensor::zeros({4}), Tensor::zeros({2}), Tensor::zeros({2}), Tensor::zeros({8, 3}),
                                  Tensor::zeros({8, 2}), Tensor::zeros({8}), spec),
                        ShapeError);
    }
}

TEST_CASE("linear") {
    std::mt19937_64 rng(11);
    Tensor x = random_tensor({3}, rng);
    Tensor eye({3, 3}, {1, 0, 0, 0, 1, 0, 0, 0, 1});
    CHECK(msap::testing::bitwise_equal(linear(x, eye, Tensor::zeros({3})), x));
    Tensor b({2}, {0.5, -2.0});
    auto y = linear(x, Tensor::zeros({2, 3}), b);
    CHECK(y[0] == 0.5);
    CHECK(y[1] == -2.0);

    ParameterSet ps;
    ps.add("w", random_tensor({2, 3}, rng));
    ps.add("b", random_tensor({2}, rng));
    ps.add("x", random_tensor({3}, rng));
    auto f = [&](const BoundParameters& p) { return sum(tanh(linear(p[2], p[0], p[1]))); };
    CHECK(grad_check(f, ps) < 1e-4);
}

TEST_CASE("dropout") {
    std::mt19937_64 rng(12);
    Tensor x = random_tensor({10000}, rng, 0.5, 1.5);
    CHECK(msap::testing::bitwise_equal(dropout(x, 0.0, true, rng), x));
    CHECK(msap::testing::bitwise_equal(dropout(x, 0.7, false, rng), x));
    CHECK_THROWS_AS(dropout(x, 1.0, true, rng), ContractError);
    CHECK_THROWS_AS(dropout(x, -0.1, true, rng), ContractError);

    std::mt19937_64 seeded(2024);
    auto y = dropout(x, 0.5, true, seeded);
    std::size_t kept = 0;
    double in_mean = 0.0, out_mean = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (y[i] != 0.0) {
            ++kept;
            CHECK(y[i] == doctest::Approx(2.0 * x[i]));
        }
        in_mean += x[i];
        out_mean += y[i];
    }
    const double frac = static_cast<double>(kept) / 10000.0;
    CHECK(frac > 0.48);
    CHECK(frac < 0.52);
    CHECK(std::abs(out_mean - in_mean) / in_mean < 0.02);

    std::mt19937_64 again(2024);
    CHECK(msap::testing::bitwise_equal(dropout(x, 0.5, true, again), y));
}

TEST_CASE("softmax_cross_entropy") {
    CHECK(softmax_cross_entropy(Tensor::filled({4}, 0.3), 1).item() == doctest::Approx(std::log(4.0)).epsilon(1e-14));
    const double big = softmax_cross_entropy(Tensor({2}, {1000.0, 0.0}), 0).item();
    CHECK(std::isfinite(big));
    CHECK(big < 1e-300);
    CHECK_THROWS_AS(softmax_cross_entropy(Tensor::zeros({3}), 3), ContractError);

    std::mt19937_64 rng(13);
    for (int t = 0; t < 20; ++t) {
        Tape tape;
        Tensor logits = tape.leaf(random_tensor({5}, rng, -3.0, 3.0), "z");
        const std::size_t label = static_cast<std::size_t>(t % 5);
        Tensor loss = softmax_cross_entropy(logits, label);
        CHECK(loss.item() >= 0.0);
        auto g = tape.backward(loss).at("z");
        auto p = softmax(logits.data());
        for (std::size_t i = 0; i < 5; ++i) CHECK(std::abs(g[i] - (p[i] - (i == label ? 1.0 : 0.0))) < 1e-10);
    }
}
