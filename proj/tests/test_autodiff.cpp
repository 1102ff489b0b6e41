#include <doctest.h>

#include <cmath>

#include "msap/gradcheck.hpp"
#include "msap/nn.hpp"
#include "msap/ops.hpp"
#include "test_support.hpp"

using namespace msap;
using msap::testing::random_tensor;

TEST_CASE("elementwise primitives") {
    Tensor a({2}, {1, 2});
    Tensor b({2}, {3, 4});
    auto s = add(a, b);
    CHECK(s[0] == 4.0);
    CHECK(s[1] == 6.0);
    CHECK(sigmoid(Tensor::scalar(0.0)).item() == 0.5);

    SUBCASE("scalar broadcast") {
        auto m = mul(Tensor::scalar(2.0), b);
        CHECK(m.shape() == Shape{2});
        CHECK(m[1] == 8.0);
    }
    SUBCASE("shape mismatch names kind and shapes") {
        Tensor c({3}, {1, 2, 3});
        try {
            add(a, c);
            FAIL("expected ShapeError");
        } catch (const ShapeError& e) {
            const std::string msg = e.what();
            CHECK(msg.find("add") != std::string::npos);
            CHECK(msg.find("[2]") != std::string::npos);
            CHECK(msg.find("[3]") != std::string::npos);
        }
    }
    SUBCASE("apply_primitive dispatch and arity") {
        std::vector<Tensor> ops{a, b};
        CHECK(apply_primitive(Primitive::sub, ops)[0] == -2.0);
        CHECK_THROWS_AS(apply_primitive(Primitive::relu, ops), ContractError);
        std::vector<Tensor> sc{a, Tensor::scalar(3.0)};
        CHECK(apply_primitive(Primitive::scale, sc)[1] == 6.0);
    }
}

TEST_CASE("matmul with identity returns the operand") {
    std::mt19937_64 rng(7);
    Tensor eye({2, 2}, {1, 0, 0, 1});
    Tensor m = random_tensor({2, 2}, rng);
    auto r = matmul(eye, m);
    for (std::size_t i = 0; i < 4; ++i) CHECK(r[i] == m[i]);
    CHECK_THROWS_AS(matmul(eye, Tensor::zeros({3, 2})), ShapeError);
}

TEST_CASE("backward on simple functions") {
    Tape tape;
    Tensor x = tape.leaf(Tensor::scalar(3.0), "x");
    auto g = tape.backward(mul(x, x));
    CHECK(g.at("x").item() == doctest::Approx(6.0));

    Tape tape2;
    Tensor y = tape2.leaf(Tensor({2}, {-1.0, 2.0}), "y");
    auto g2 = tape2.backward(sum(relu(y)));
    CHECK(g2.at("y")[0] == 0.0);
    CHECK(g2.at("y")[1] == 1.0);
}

TEST_CASE("backward contract") {
    Tape tape;
    Tensor x = tape.leaf(Tensor({2}, {1.0, 2.0}), "x");
    Tensor unused = tape.leaf(Tensor({3}, {1.0, 2.0, 3.0}), "unused");
    CHECK_THROWS_AS(tape.backward(scale(x, 2.0)), ContractError);

    SUBCASE("unreachable leaves report zeros") {
        auto g = tape.backward(sum(x));
        CHECK(g.at("unused").shape() == Shape{3});
        for (double v : g.at("unused").data()) CHECK(v == 0.0);
    }
    SUBCASE("tape is reusable from a second root") {
        Tensor f = sum(mul(x, x));
        Tensor h = sum(scale(x, 5.0));
        auto gf = tape.backward(f);
        auto gh = tape.backward(h);
        auto gf2 = tape.backward(f);
        CHECK(gf.at("x")[1] == 4.0);
        CHECK(gh.at("x")[1] == 5.0);
        CHECK(gf2.at("x")[1] == 4.0);
    }
    SUBCASE("duplicate leaf names are rejected") {
        CHECK_THROWS_AS(tape.leaf(Tensor::scalar(1.0), "x"), ContractError);
    }
}

TEST_CASE("records only when an operand requires a gradient") {
    Tape tape;
    Tensor c = Tensor::scalar(2.0);
    auto r = mul(c, c);
    CHECK_FALSE(r.requires_grad());
    CHECK(tape.node_count() == 0);
    Tensor x = tape.leaf(Tensor::scalar(1.0));
    auto y = mul(x, c);
    CHECK(y.requires_grad());
    CHECK(tape.record_count() == 1);
}

TEST_CASE("linearity of backward") {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 10; ++trial) {
        Tape tape;
        Tensor w = tape.leaf(random_tensor({3, 4}, rng), "w");
        Tensor v = random_tensor({4}, rng);
        Tensor f = sum(tanh(matmul(w, v)));
        Tensor g = mean(mul(w, w));
        const double a = 0.7, b = -1.3;
        Tensor combo = add(scale(f, a), scale(g, b));
        auto gc = tape.backward(combo).at("w");
        auto gf = tape.backward(f).at("w");
        auto gg = tape.backward(g).at("w");
        for (std::size_t i = 0; i < gc.size(); ++i) CHECK(std::abs(gc[i] - (a * gf[i] + b * gg[i])) < 1e-12);
    }
}

TEST_CASE("determinism of forward and backward") {
    auto run = [] {
        std::mt19937_64 rng(3);
        Tape tape;
        Tensor w = tape.leaf(random_tensor({4, 4}, rng), "w");
        Tensor x = random_tensor({4}, rng);
        Tensor out = sum(sigmoid(matmul(w, x)));
        return std::pair{out.item(), tape.backward(out).at("w")};
    };
    auto [v1, g1] = run();
    auto [v2, g2] = run();
    CHECK(v1 == v2);
    CHECK(msap::testing::bitwise_equal(g1, g2));
}

TEST_CASE("grad_check on quadratic, constant and primitives") {
    std::mt19937_64 rng(5);
    ParameterSet ps;
    ps.add("theta", random_tensor({6}, rng));
    const Tensor a = random_tensor({6}, rng);

    SUBCASE("quadratic") {
        auto f = [&](const BoundParameters& p) { return sum(mul(a, mul(p[0], p[0]))); };
        CHECK(grad_check(f, ps) < 1e-7);
    }
    SUBCASE("constant") {
        auto f = [&](const BoundParameters&) { return Tensor::scalar(4.2); };
        CHECK(grad_check(f, ps) == 0.0);
    }
    SUBCASE("every primitive") {
        ParameterSet q;
        q.add("a", random_tensor({4, 4}, rng));
        q.add("b", random_tensor({4, 4}, rng));
        q.add("s", random_tensor({1}, rng));
        auto f = [&](const BoundParameters& p) {
            Tensor t = add(mul(p[0], p[1]), sub(p[0], p[2]));
            t = add(tanh(t), sigmoid(scale(t, 0.5)));
            t = matmul(t, relu(add(p[1], Tensor::scalar(0.25))));
            return add(sum(t), mean(mul(t, t)));
        };
        CHECK(grad_check(f, q) < 1e-4);
    }
    SUBCASE("cross-entropy of softmax(W x)") {
        ParameterSet q;
        q.add("w", random_tensor({4, 5}, rng, -0.1, 0.1));
        const Tensor x = random_tensor({5}, rng);
        auto f = [&](const BoundParameters& p) { return softmax_cross_entropy(matmul(p[0], x), 2); };
        CHECK(grad_check(f, q) < 1e-4);
    }
}
