#include "msap/segment_encoder.hpp"

#include <cmath>

#include "msap/ops.hpp"

namespace msap {

Tensor temporal_difference(const SampledSegment& sampled) {
    const Shape& s = sampled.frames[0].shape();
    if (s.size() != 3) throw InputError("temporal_difference: frames must be [C,H,W], got " + shape_str(s));
    for (const auto& f : sampled.frames) {
        if (f.shape() != s) throw InputError("temporal_difference: frame shapes " + shape_str(s) + " and " + shape_str(f.shape()) + " differ");
    }
    const std::size_t plane = numel(s);
    std::vector<double> out(4 * plane);
    for (std::size_t d = 0; d < 4; ++d) {
        auto prev = sampled.frames[d].data();
        auto next = sampled.frames[d + 1].data();
        double* dst = out.data() + d * plane;
        for (std::size_t i = 0; i < plane; ++i) {
            dst[i] = std::nearbyint((next[i] - prev[i]) / kIntensityQuantum) * kIntensityQuantum;
        }
    }
    return Tensor({4 * s[0], s[1], s[2]}, std::move(out));
}

Tensor ConvStack::operator()(const BoundParameters& bound, const Tensor& x) const {
    Tensor y = x;
    for (const auto& layer : layers) y = relu(layer(bound, y));
    return y;
}

void SegmentEncoderConfig::validate() const {
    if (channels == 0 || diff_channels == 0 || feature_dim == 0) throw ConfigError("segment encoder: channel counts must be positive");
    if (!(diff_gain > 0.0) || !std::isfinite(diff_gain)) throw ConfigError("segment encoder: difference gain must be positive");
    if (height % 4 != 0 || width % 4 != 0 || height == 0 || width == 0) {
        throw ConfigError("segment encoder: frame extents " + std::to_string(height) + "x" + std::to_string(width) +
                          " must be positive multiples of 4");
    }
}

SegmentEncoder SegmentEncoder::create(ParameterSet& params, const SegmentEncoderConfig& cfg, std::mt19937_64& rng,
                                      const std::string& prefix) {
    cfg.validate();
    SegmentEncoder enc;
    enc.cfg_ = cfg;
    const std::size_t diff_in = 4 * cfg.channels;
    auto conv = [](std::size_t in, std::size_t out, std::size_t stride) { return Conv2dSpec{in, out, 3, 3, stride, 1}; };
    enc.cnn_diff_.layers.push_back(Conv2dLayer::create(params, prefix + ".cnn_diff.0", conv(diff_in, cfg.diff_channels, 1), rng));
    enc.cnn_diff_.layers.push_back(Conv2dLayer::create(params, prefix + ".cnn_diff.1", conv(cfg.diff_channels, cfg.diff_channels, 1), rng));
    enc.cnn_frame_.layers.push_back(Conv2dLayer::create(params, prefix + ".cnn_frame.0", conv(cfg.channels, cfg.diff_channels, 1), rng));
    enc.cnn_out_.layers.push_back(Conv2dLayer::create(params, prefix + ".cnn_out.0", conv(cfg.diff_channels, cfg.feature_dim, 2), rng));
    enc.cnn_out_.layers.push_back(Conv2dLayer::create(params, prefix + ".cnn_out.1", conv(cfg.feature_dim, cfg.feature_dim, 2), rng));
    enc.cnn_diff2_.layers.push_back(Conv2dLayer::create(params, prefix + ".cnn_diff2.0", conv(diff_in, cfg.feature_dim, 2), rng));
    return enc;
}

SegmentFeature SegmentEncoder::encode(const BoundParameters& bound, const SampledSegment& sampled, std::size_t index,
                                      SegmentEncodingTrace* trace) const {
    const Shape expected{cfg_.channels, cfg_.height, cfg_.width};
    if (sampled.frames[0].shape() != expected) {
        throw ConfigError("segment encoder configured for frames " + shape_str(expected) + ", got " +
                          shape_str(sampled.frames[0].shape()));
    }
    auto stage = [](const char* name, auto&& fn) {
        try {
            return fn();
        } catch (const ShapeError& e) {
            throw ConfigError(std::string("segment encoder, ") + name + ": " + e.what());
        }
    };

    const Tensor diff = temporal_difference(sampled);
    const Tensor pooled = avg_pool2d(cfg_.diff_gain == 1.0 ? diff : scale(diff, cfg_.diff_gain), 2);
    const Tensor s_short = stage("short-term difference path", [&] { return upsample_bilinear(cnn_diff_(bound, pooled), 2); });
    const Tensor appearance = stage("appearance fusion", [&] { return cnn_frame_(bound, sampled.center_frame()); });
    const Tensor s_fuse = stage("appearance fusion", [&] { return add(s_short, appearance); });
    const Tensor out_fused = stage("output fusion", [&] { return cnn_out_(bound, s_fuse); });
    const Tensor out_diff = stage("output fusion", [&] { return cnn_diff2_(bound, pooled); });
    const Tensor s_out_map = stage("output fusion", [&] { return add(out_fused, out_diff); });

    if (trace) *trace = SegmentEncodingTrace{diff, s_short, appearance, s_fuse, out_fused, out_diff, s_out_map};
    return SegmentFeature{global_avg_pool(s_out_map), index};
}

}  // namespace msap
