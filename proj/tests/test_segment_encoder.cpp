#include <doctest.h>

#include <cmath>

#include "msap/gradcheck.hpp"
#include "msap/invariants.hpp"
#include "msap/ops.hpp"
#include "msap/segment_encoder.hpp"
#include "test_support.hpp"

using namespace msap;
using msap::testing::bitwise_equal;
using msap::testing::random_tensor;

namespace {

Tensor quantized(Shape shape, std::mt19937_64& rng) {
    Tensor t = random_tensor(std::move(shape), rng, 0.0, 1.0);
    for (auto& x : t.mutable_data()) x = std::nearbyint(x * 65536.0) / 65536.0;
    return t;
}

SampledSegment random_segment(std::mt19937_64& rng, Shape shape = {3, 32, 32}) {
    SampledSegment s;
    for (auto& f : s.frames) f = quantized(shape, rng);
    return s;
}

// Straight-line reference of the encoder on raw vectors: explicit loops for
// every conv, pool, upsample and sum, no shared code with the library ops.
struct Map {
    std::size_t c, h, w;
    std::vector<double> v;
    double at(std::size_t ch, long y, long x) const {
        if (y < 0 || x < 0 || y >= static_cast<long>(h) || x >= static_cast<long>(w)) return 0.0;
        return v[(ch * h + static_cast<std::size_t>(y)) * w + static_cast<std::size_t>(x)];
    }
};

Map from(const Tensor& t) { return Map{t.dim(0), t.dim(1), t.dim(2), {t.data().begin(), t.data().end()}}; }

Map conv_relu(const Map& in, const Tensor& w, const Tensor& b, std::size_t stride) {
    const std::size_t out_c = w.dim(0);
    const std::size_t oh = (in.h + 2 - 3) / stride + 1, ow = (in.w + 2 - 3) / stride + 1;
    Map out{out_c, oh, ow, std::vector<double>(out_c * oh * ow)};
    for (std::size_t o = 0; o < out_c; ++o)
        for (std::size_t y = 0; y < oh; ++y)
            for (std::size_t x = 0; x < ow; ++x) {
                double acc = b[o];
                for (std::size_t c = 0; c < in.c; ++c)
                    for (long ky = 0; ky < 3; ++ky)
                        for (long kx = 0; kx < 3; ++kx)
                            acc += w[((o * in.c + c) * 3 + static_cast<std::size_t>(ky)) * 3 + static_cast<std::size_t>(kx)] *
                                   in.at(c, static_cast<long>(y * stride) + ky - 1, static_cast<long>(x * stride) + kx - 1);
                out.v[(o * oh + y) * ow + x] = std::max(0.0, acc);
            }
    return out;
}

Map pool2(const Map& in) {
    Map out{in.c, in.h / 2, in.w / 2, std::vector<double>(in.c * (in.h / 2) * (in.w / 2))};
    for (std::size_t c = 0; c < in.c; ++c)
        for (std::size_t y = 0; y < out.h; ++y)
            for (std::size_t x = 0; x < out.w; ++x) {
                const long Y = static_cast<long>(2 * y), X = static_cast<long>(2 * x);
                out.v[(c * out.h + y) * out.w + x] =
                    (in.at(c, Y, X) + in.at(c, Y, X + 1) + in.at(c, Y + 1, X) + in.at(c, Y + 1, X + 1)) / 4.0;
            }
    return out;
}

Map up2(const Map& in) {
    Map out{in.c, in.h * 2, in.w * 2, std::vector<double>(in.c * in.h * in.w * 4)};
    auto src = [](std::size_t d, std::size_t n) {
        double s = (static_cast<double>(d) + 0.5) / 2.0 - 0.5;
        return std::clamp(s, 0.0, static_cast<double>(n - 1));
    };
    for (std::size_t c = 0; c < in.c; ++c)
        for (std::size_t y = 0; y < out.h; ++y)
            for (std::size_t x = 0; x < out.w; ++x) {
                const double sy = src(y, in.h), sx = src(x, in.w);
                const long y0 = static_cast<long>(std::floor(sy)), x0 = static_cast<long>(std::floor(sx));
                const long y1 = std::min<long>(y0 + 1, static_cast<long>(in.h) - 1), x1 = std::min<long>(x0 + 1, static_cast<long>(in.w) - 1);
                const double fy = sy - static_cast<double>(y0), fx = sx - static_cast<double>(x0);
                out.v[(c * out.h + y) * out.w + x] = (1 - fy) * ((1 - fx) * in.at(c, y0, x0) + fx * in.at(c, y0, x1)) +
                                                     fy * ((1 - fx) * in.at(c, y1, x0) + fx * in.at(c, y1, x1));
            }
    return out;
}

Map plus(Map a, const Map& b) {
    for (std::size_t i = 0; i < a.v.size(); ++i) a.v[i] += b.v[i];
    return a;
}

std::vector<double> reference_encode(const ParameterSet& p, const SampledSegment& s, double gain) {
    auto P = [&](const std::string& n) { return p[p.id_of(n)].value; };
    const std::size_t C = s.frames[0].dim(0), H = s.frames[0].dim(1), W = s.frames[0].dim(2);
    Map D{4 * C, H, W, std::vector<double>(4 * C * H * W)};
    for (std::size_t d = 0; d < 4; ++d)
        for (std::size_t i = 0; i < C * H * W; ++i) D.v[d * C * H * W + i] = gain * (s.frames[d + 1][i] - s.frames[d][i]);
    const Map pooled = pool2(D);
    Map short_path = conv_relu(pooled, P("segment.cnn_diff.0.weight"), P("segment.cnn_diff.0.bias"), 1);
    short_path = up2(conv_relu(short_path, P("segment.cnn_diff.1.weight"), P("segment.cnn_diff.1.bias"), 1));
    const Map fuse = plus(short_path, conv_relu(from(s.frames[2]), P("segment.cnn_frame.0.weight"), P("segment.cnn_frame.0.bias"), 1));
    Map out = conv_relu(fuse, P("segment.cnn_out.0.weight"), P("segment.cnn_out.0.bias"), 2);
    out = conv_relu(out, P("segment.cnn_out.1.weight"), P("segment.cnn_out.1.bias"), 2);
    out = plus(out, conv_relu(pooled, P("segment.cnn_diff2.0.weight"), P("segment.cnn_diff2.0.bias"), 2));
    std::vector<double> feature(out.c, 0.0);
    for (std::size_t c = 0; c < out.c; ++c) {
        for (std::size_t i = 0; i < out.h * out.w; ++i) feature[c] += out.v[c * out.h * out.w + i];
        feature[c] /= static_cast<double>(out.h * out.w);
    }
    return feature;
}

}  // namespace

TEST_CASE("temporal_difference") {
    std::mt19937_64 rng(1);
    SampledSegment still;
    const Tensor f = quantized({3, 4, 4}, rng);
    for (auto& x : still.frames) x = f;
    const Tensor zero = temporal_difference(still);
    CHECK(zero.shape() == Shape{12, 4, 4});
    for (double v : zero.data()) CHECK(v == 0.0);

    // Linear ramp I_j = j·U gives U in every slab.
    SampledSegment ramp;
    const Tensor U = quantized({1, 3, 3}, rng);
    for (std::size_t j = 0; j < 5; ++j) {
        std::vector<double> v(U.data().begin(), U.data().end());
        for (auto& x : v) x *= static_cast<double>(j);
        ramp.frames[j] = Tensor({1, 3, 3}, v);
    }
    const Tensor d = temporal_difference(ramp);
    for (std::size_t s = 0; s < 4; ++s)
        for (std::size_t i = 0; i < 9; ++i) CHECK(d[s * 9 + i] == U[i]);

    SampledSegment bad = still;
    bad.frames[3] = Tensor::zeros({3, 4, 5});
    CHECK_THROWS_AS(temporal_difference(bad), InputError);
}

TEST_CASE("brightness offsets leave the difference stack unchanged") {
    const auto r = brightness_invariance_check(21, {0.05, 0.2}, 20);
    CHECK_MESSAGE(r.passed, r.detail);
}

TEST_CASE("encoder shapes and trace on the default configuration") {
    ParameterSet params;
    std::mt19937_64 rng(2);
    const auto enc = SegmentEncoder::create(params, SegmentEncoderConfig{}, rng);
    SegmentEncodingTrace trace;
    const auto f = enc.encode(BoundParameters(params), random_segment(rng), 3, &trace);
    CHECK(f.vector.shape() == Shape{128});
    CHECK(f.index == 3);
    CHECK(trace.diff.shape() == Shape{12, 32, 32});
    CHECK(trace.s_short.shape() == Shape{64, 32, 32});
    CHECK(trace.appearance.shape() == Shape{64, 32, 32});
    CHECK(trace.s_fuse.shape() == Shape{64, 32, 32});
    CHECK(trace.out_fused.shape() == Shape{128, 8, 8});
    CHECK(trace.out_diff.shape() == Shape{128, 8, 8});
    CHECK(trace.s_out_map.shape() == Shape{128, 8, 8});
    for (double v : f.vector.data()) CHECK(std::isfinite(v));
}

TEST_CASE("encoder matches a straight-line reference") {
    ParameterSet params;
    std::mt19937_64 rng(4);
    SegmentEncoderConfig cfg{3, 16, 16, 8, 12};
    const auto enc = SegmentEncoder::create(params, cfg, rng);
    // Non-zero biases so every path is exercised.
    for (ParamId id = 0; id < params.size(); ++id) {
        if (params[id].name.ends_with(".bias")) {
            for (auto& x : params.values(id)) x = std::uniform_real_distribution<double>(-0.2, 0.2)(rng);
        }
    }
    for (int trial = 0; trial < 3; ++trial) {
        const auto s = random_segment(rng, {3, 16, 16});
        const auto got = enc.encode(BoundParameters(params), s).vector;
        const auto want = reference_encode(params, s, cfg.diff_gain);
        REQUIRE(got.size() == want.size());
        for (std::size_t i = 0; i < want.size(); ++i) CHECK(std::abs(got[i] - want[i]) <= 1e-12);
    }
}

TEST_CASE("zero motion collapses to the appearance path") {
    ParameterSet params;
    std::mt19937_64 rng(5);
    const auto enc = SegmentEncoder::create(params, SegmentEncoderConfig{3, 16, 16, 8, 8}, rng);
    SampledSegment still;
    const Tensor f = quantized({3, 16, 16}, rng);
    for (auto& x : still.frames) x = f;
    SegmentEncodingTrace trace;
    enc.encode(BoundParameters(params), still, 0, &trace);
    for (double v : trace.s_short.data()) CHECK(v == 0.0);
    CHECK(bitwise_equal(trace.s_fuse, trace.appearance));
}

TEST_CASE("brightness changes only the appearance path") {
    ParameterSet params;
    std::mt19937_64 rng(6);
    const auto enc = SegmentEncoder::create(params, SegmentEncoderConfig{3, 16, 16, 8, 8}, rng);
    const auto s = random_segment(rng, {3, 16, 16});
    SampledSegment brighter;
    for (std::size_t j = 0; j < 5; ++j) {
        std::vector<double> v(s.frames[j].data().begin(), s.frames[j].data().end());
        for (auto& x : v) x += 0.2;
        brighter.frames[j] = Tensor(s.frames[j].shape(), v);
    }
    SegmentEncodingTrace a, b;
    enc.encode(BoundParameters(params), s, 0, &a);
    enc.encode(BoundParameters(params), brighter, 0, &b);
    CHECK(bitwise_equal(a.diff, b.diff));
    CHECK(bitwise_equal(a.s_short, b.s_short));
    CHECK(bitwise_equal(a.out_diff, b.out_diff));
    CHECK_FALSE(bitwise_equal(a.appearance, b.appearance));
}

TEST_CASE("encoder determinism and configuration errors") {
    ParameterSet params;
    std::mt19937_64 rng(7);
    const auto enc = SegmentEncoder::create(params, SegmentEncoderConfig{3, 16, 16, 8, 8}, rng);
    const auto s = random_segment(rng, {3, 16, 16});
    CHECK(bitwise_equal(enc.encode(BoundParameters(params), s).vector, enc.encode(BoundParameters(params), s).vector));
    CHECK_THROWS_AS(enc.encode(BoundParameters(params), random_segment(rng, {3, 8, 8})), ConfigError);

    ParameterSet other;
    CHECK_THROWS_AS(SegmentEncoder::create(other, SegmentEncoderConfig{3, 18, 16, 8, 8}, rng), ConfigError);
    SegmentEncoderConfig no_gain;
    no_gain.diff_gain = 0.0;
    CHECK_THROWS_AS(no_gain.validate(), ConfigError);
}

TEST_CASE("gradients through the encoder") {
    ParameterSet params;
    std::mt19937_64 rng(8);
    const auto enc = SegmentEncoder::create(params, SegmentEncoderConfig{1, 8, 8, 3, 3}, rng);
    const auto s = random_segment(rng, {1, 8, 8});
    const double err = grad_check([&](const BoundParameters& b) { return sum(enc.encode(b, s).vector); }, params);
    CHECK(err < 1e-4);
}
