#include "msap/invariants.hpp"

#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <functional>

#include "msap/gradcheck.hpp"
#include "msap/ops.hpp"
#include "msap/segment_encoder.hpp"
#include "msap/synth_motion.hpp"

namespace msap {
namespace {

std::vector<double> uniform_values(std::size_t n, std::mt19937_64& rng, double lo, double hi) {
    std::uniform_real_distribution<double> d(lo, hi);
    std::vector<double> v(n);
    for (auto& x : v) x = d(rng);
    return v;
}

Tensor uniform(const Shape& s, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
    return Tensor(s, uniform_values(numel(s), rng, lo, hi));
}

// Entries in ±[0.1, 1], so kinks of relu sit far from every probe.
Tensor away_from_zero(const Shape& s, std::mt19937_64& rng) {
    auto v = uniform_values(numel(s), rng, 0.1, 1.0);
    std::bernoulli_distribution sign(0.5);
    for (auto& x : v) x = sign(rng) ? x : -x;
    return Tensor(s, std::move(v));
}

// Random linear read-out so that every output entry reaches the scalar with
// its own weight.
Tensor readout(const Tensor& y, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    return sum(mul(y, uniform(y.shape(), rng)));
}

Tensor quantized_frame(const Shape& s, std::mt19937_64& rng, double hi = 1.0) {
    auto v = uniform_values(numel(s), rng, 0.0, hi);
    for (auto& x : v) x = std::nearbyint(x / kIntensityQuantum) * kIntensityQuantum;
    return Tensor(s, std::move(v));
}

CheckResult grad_entry(const std::string& name, const ScalarObjective& f, const ParameterSet& point, double eps, double tol) {
    const auto r = grad_check_report(f, point, eps);
    char buf[256];
    std::snprintf(buf, sizeof(buf), "%zu entries, worst %s[%zu] analytic %.6e numeric %.6e", r.entries, r.worst_parameter.c_str(),
                  r.worst_index, r.analytic, r.numeric);
    return CheckResult{"grad " + name, r.max_relative_error < tol, r.max_relative_error, tol, buf};
}

bool same_bits(std::span<const double> a, std::span<const double> b) {
    return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

}  // namespace

ModelConfig tiny_model_config() {
    ModelConfig cfg;
    cfg.encoder = SegmentEncoderConfig{1, 8, 8, 4, 4};
    cfg.hidden_dim = 4;
    cfg.num_classes = 3;
    cfg.dropout_p = 0.5;
    cfg.segments = 3;
    return cfg;
}

FullVideo tiny_clip(std::uint64_t seed, std::size_t label) {
    const auto cfg = tiny_model_config();
    std::mt19937_64 rng(mix_seed(seed, {0x71c1}));
    FullVideo v;
    v.label = label;
    v.id = "tiny#" + std::to_string(seed);
    for (std::size_t t = 0; t < 15; ++t) v.frames.push_back(quantized_frame({cfg.encoder.channels, cfg.encoder.height, cfg.encoder.width}, rng));
    return v;
}

std::vector<CheckResult> gradient_suite(std::uint64_t seed, double eps, double tol) {
    std::vector<CheckResult> out;
    std::mt19937_64 rng(mix_seed(seed, {0x9c4d}));
    std::uint64_t salt = 0;
    auto next_seed = [&] { return mix_seed(seed, {0x7ead, ++salt}); };

    // Binary elementwise primitives.
    {
        ParameterSet p;
        p.add("a", uniform({3, 4}, rng));
        p.add("b", uniform({3, 4}, rng));
        const auto s = next_seed();
        for (Primitive k : {Primitive::add, Primitive::sub, Primitive::mul}) {
            out.push_back(grad_entry(std::string(to_string(k)), [&, k](const BoundParameters& b) {
                const Tensor ops[] = {b[0], b[1]};
                return readout(apply_primitive(k, ops), s);
            }, p, eps, tol));
        }
    }
    {
        ParameterSet p;
        p.add("a", uniform({2, 3, 4}, rng));
        const auto s = next_seed();
        out.push_back(grad_entry("scale", [&](const BoundParameters& b) { return readout(scale(b[0], -1.7), s); }, p, eps, tol));
    }
    {
        ParameterSet p;
        p.add("a", away_from_zero({4, 4}, rng));
        const auto s = next_seed();
        out.push_back(grad_entry("relu", [&](const BoundParameters& b) { return readout(relu(b[0]), s); }, p, eps, tol));
    }
    {
        ParameterSet p;
        p.add("a", uniform({4, 4}, rng, -3.0, 3.0));
        const auto s = next_seed();
        out.push_back(grad_entry("sigmoid", [&](const BoundParameters& b) { return readout(sigmoid(b[0]), s); }, p, eps, tol));
        out.push_back(grad_entry("tanh", [&](const BoundParameters& b) { return readout(msap::tanh(b[0]), s); }, p, eps, tol));
    }
    {
        ParameterSet p;
        p.add("a", uniform({3, 4}, rng));
        p.add("b", uniform({4, 2}, rng));
        p.add("v", uniform({4}, rng));
        const auto s = next_seed();
        out.push_back(grad_entry("matmul", [&](const BoundParameters& b) {
            return add(readout(matmul(b[0], b[1]), s), readout(matmul(b[0], b[2]), s + 1));
        }, p, eps, tol));
    }
    {
        ParameterSet p;
        p.add("a", uniform({2, 3, 4}, rng));
        const auto s = next_seed();
        out.push_back(grad_entry("sum", [&](const BoundParameters& b) { return mul(sum(b[0]), sum(b[0])); }, p, eps, tol));
        out.push_back(grad_entry("mean", [&](const BoundParameters& b) {
            return readout(mul(mean(b[0]), b[0]), s);
        }, p, eps, tol));
    }

    // Neural ops.
    for (std::size_t stride : {1u, 2u}) {
        ParameterSet p;
        Conv2dSpec spec{2, 3, 3, 3, stride, 1};
        p.add("x", uniform({2, 8, 8}, rng));
        p.add("w", uniform({3, 2, 3, 3}, rng));
        p.add("b", uniform({3}, rng));
        const auto s = next_seed();
        out.push_back(grad_entry("conv2d stride " + std::to_string(stride), [&, spec](const BoundParameters& b) {
            return readout(conv2d(b[0], b[1], b[2], spec), s);
        }, p, eps, tol));
    }
    {
        ParameterSet p;
        p.add("x", uniform({4, 8, 8}, rng));
        const auto s = next_seed();
        out.push_back(grad_entry("avg_pool2d", [&](const BoundParameters& b) { return readout(avg_pool2d(b[0]), s); }, p, eps, tol));
        out.push_back(grad_entry("upsample_bilinear", [&](const BoundParameters& b) {
            return readout(upsample_bilinear(b[0]), s);
        }, p, eps, tol));
        out.push_back(grad_entry("global_avg_pool", [&](const BoundParameters& b) {
            return readout(global_avg_pool(b[0]), s);
        }, p, eps, tol));
    }
    {
        ParameterSet p;
        const LstmSpec spec{3, 4};
        p.add("x", uniform({3}, rng));
        p.add("h", uniform({4}, rng));
        p.add("c", uniform({4}, rng));
        p.add("w_input", uniform({16, 3}, rng));
        p.add("w_hidden", uniform({16, 4}, rng));
        p.add("bias", uniform({16}, rng));
        const auto s = next_seed();
        out.push_back(grad_entry("lstm_cell", [&](const BoundParameters& b) {
            auto first = lstm_cell(b[0], b[1], b[2], b[3], b[4], b[5], spec);
            auto second = lstm_cell(b[0], first.h, first.c, b[3], b[4], b[5], spec);
            return add(readout(second.h, s), readout(second.c, s + 1));
        }, p, eps, tol));
    }
    {
        ParameterSet p;
        p.add("x", uniform({5}, rng));
        p.add("w", uniform({3, 5}, rng));
        p.add("b", uniform({3}, rng));
        const auto s = next_seed();
        out.push_back(grad_entry("linear", [&](const BoundParameters& b) { return readout(linear(b[0], b[1], b[2]), s); }, p, eps,
                                 tol));
        const auto mask_seed = next_seed();
        out.push_back(grad_entry("dropout", [&](const BoundParameters& b) {
            std::mt19937_64 mask(mask_seed);
            return readout(dropout(linear(b[0], b[1], b[2]), 0.5, true, mask), s);
        }, p, eps, tol));
        out.push_back(grad_entry("softmax_cross_entropy", [&](const BoundParameters& b) {
            return softmax_cross_entropy(linear(b[0], b[1], b[2]), 2);
        }, p, eps, tol));
    }

    // Composed loss: encoder + LSTM + head + cross-entropy over one clip, with
    // random frame sampling and dropout drawn from a stream fixed per call.
    {
        const Model model = Model::create(tiny_model_config(), mix_seed(seed, {0xc0de}));
        const FullVideo clip = tiny_clip(seed, 1);
        const auto stream = next_seed();
        out.push_back(grad_entry("composed clip loss", [&](const BoundParameters& b) {
            std::mt19937_64 r(stream);
            return clip_loss(model, b, clip, true, r, SamplingMode::random);
        }, model.params(), eps, tol));
    }
    return out;
}

std::vector<FullVideo> random_clips(const CorpusConfig& cfg, std::size_t count, std::uint64_t seed) {
    std::mt19937_64 rng(mix_seed(seed, {0xc1a5}));
    std::uniform_int_distribution<std::size_t> cls(0, cfg.classes.size() - 1);
    std::vector<FullVideo> clips;
    for (std::size_t i = 0; i < count; ++i) {
        const auto c = cls(rng);
        clips.push_back(generate_clip(cfg.classes[c], cfg, rng()));
    }
    return clips;
}

CheckResult streaming_fold_check(const Model& model, const std::vector<FullVideo>& clips, double tol) {
    const std::size_t K = model.config().segments;
    const BoundParameters bound(model.params());
    std::mt19937_64 unused(0);
    double worst = 0.0;
    for (const auto& v : clips) {
        const PartialVideo whole = partial(v, K, K);
        std::vector<SegmentFeature> features;
        for (std::size_t k = 1; k <= K; ++k) {
            features.push_back(model.encoder().encode(bound, sample_frames(whole.segment_frames(k), SamplingMode::deterministic), k));
        }
        const auto folded = fold_sequence(model, features);
        PredictorState state = init_state(model);
        for (std::size_t k = 0; k < K; ++k) {
            auto [next, o] = step(model, bound, state, features[k], false, unused, K);
            state = std::move(next);
            for (std::size_t j = 0; j < folded[k].size(); ++j) worst = std::max(worst, std::abs(o.logits[j] - folded[k][j]));
        }
    }
    char buf[128];
    std::snprintf(buf, sizeof(buf), "%zu clips x %zu steps, max |logit diff| %.3e", clips.size(), K, worst);
    return CheckResult{"streaming step == whole-sequence fold", worst <= tol, worst, tol, buf};
}

CheckResult causality_check(const Model& model, const std::vector<FullVideo>& clips, std::uint64_t seed) {
    const std::size_t K = model.config().segments;
    std::size_t mismatches = 0, cases = 0;
    std::mt19937_64 rng(mix_seed(seed, {0xca05}));
    for (const auto& v : clips) {
        const auto reference = predict_partial(model, v, K, K);
        const auto segments = split_segments(v, K);
        for (std::size_t k = 1; k <= K; ++k) {
            FullVideo noisy = v;
            for (std::size_t t = segments[k - 1].end; t < noisy.frames.size(); ++t) {
                noisy.frames[t] = quantized_frame(noisy.frames[t].shape(), rng);
            }
            const auto cut = predict_partial(model, noisy, k, K);
            const auto full = predict_partial(model, noisy, K, K);
            for (std::size_t j = 0; j < k; ++j) {
                ++cases;
                if (!same_bits(cut[j].logits.data(), reference[j].logits.data())) ++mismatches;
                if (!same_bits(full[j].logits.data(), reference[j].logits.data())) ++mismatches;
            }
        }
    }
    char buf[128];
    std::snprintf(buf, sizeof(buf), "%zu clips, every k, %zu step comparisons, %zu differing", clips.size(), 2 * cases, mismatches);
    return CheckResult{"causality under future-frame noise", mismatches == 0, static_cast<double>(mismatches), 0.0, buf};
}

CheckResult prefix_consistency_check(const Model& model, const std::vector<FullVideo>& clips) {
    const std::size_t K = model.config().segments;
    std::size_t mismatches = 0, cases = 0;
    for (const auto& v : clips) {
        const auto full = predict_partial(model, v, K, K);
        for (std::size_t k = 1; k < K; ++k) {
            const auto part = predict_partial(model, v, k, K);
            for (std::size_t j = 0; j < k; ++j) {
                ++cases;
                if (!same_bits(part[j].logits.data(), full[j].logits.data())) ++mismatches;
            }
        }
    }
    char buf[128];
    std::snprintf(buf, sizeof(buf), "%zu clips, %zu step comparisons, %zu differing", clips.size(), cases, mismatches);
    return CheckResult{"prefix consistency", mismatches == 0, static_cast<double>(mismatches), 0.0, buf};
}

CheckResult brightness_invariance_check(std::uint64_t seed, const std::vector<double>& offsets, std::size_t count,
                                        std::size_t channels, std::size_t height, std::size_t width) {
    std::mt19937_64 rng(mix_seed(seed, {0xb417}));
    std::size_t mismatches = 0, cases = 0;
    for (std::size_t i = 0; i < count; ++i) {
        SampledSegment s;
        for (auto& f : s.frames) f = quantized_frame({channels, height, width}, rng);
        const Tensor reference = temporal_difference(s);
        for (double c : offsets) {
            SampledSegment shifted;
            for (std::size_t j = 0; j < kSampledFrames; ++j) {
                auto v = std::vector<double>(s.frames[j].data().begin(), s.frames[j].data().end());
                for (auto& x : v) x += c;
                shifted.frames[j] = Tensor(s.frames[j].shape(), std::move(v));
            }
            ++cases;
            if (!same_bits(temporal_difference(shifted).data(), reference.data())) ++mismatches;
        }
    }
    char buf[128];
    std::snprintf(buf, sizeof(buf), "%zu segments x %zu offsets, %zu differing stacks", count, offsets.size(), mismatches);
    return CheckResult{"temporal-difference brightness invariance", mismatches == 0 && cases > 0, static_cast<double>(mismatches), 0.0,
                       buf};
}

bool all_passed(const std::vector<CheckResult>& results) {
    for (const auto& r : results)
        if (!r.passed) return false;
    return !results.empty();
}

std::string format_results(const std::vector<CheckResult>& results) {
    std::string out;
    for (const auto& r : results) {
        char buf[96];
        std::snprintf(buf, sizeof(buf), " (%.3e, limit %.1e) ", r.measured, r.limit);
        out += std::string(r.passed ? "PASS " : "FAIL ") + r.name + buf + r.detail + "\n";
    }
    return out;
}

}  // namespace msap
