#pragma once

#include <random>
#include <string>
#include <vector>

#include "msap/nn.hpp"
#include "msap/video.hpp"

namespace msap {

/// Intensity resolution of frames: values are multiples of 2^-16.
inline constexpr double kIntensityQuantum = 1.0 / 65536.0;

/// Four consecutive differences of a 5-frame sample stacked along channels:
/// (I1−I0, I2−I1, I3−I2, I4−I3) -> [4·C, H, W]. Differences are snapped to
/// the intensity grid, so a brightness offset common to all five frames
/// leaves the stack bitwise unchanged.
Tensor temporal_difference(const SampledSegment& sampled);

/// Conv layers applied in sequence, each followed by ReLU.
struct ConvStack {
    std::vector<Conv2dLayer> layers;

    Tensor operator()(const BoundParameters& bound, const Tensor& x) const;
};

/// Channel plan of the segment encoder. Frames must have H and W divisible
/// by 4; the output map lands on the [feature_dim, H/4, W/4] grid.
struct SegmentEncoderConfig {
    std::size_t channels = 3;
    std::size_t height = 32;
    std::size_t width = 32;
    std::size_t diff_channels = 64;  // cnn_diff and cnn_frame outputs
    std::size_t feature_dim = 128;   // cnn_out and cnn_diff2 outputs
    double diff_gain = 16.0;         // D is multiplied by this before both difference paths

    void validate() const;
};

struct SegmentFeature {
    Tensor vector;  // [feature_dim]
    std::size_t index = 0;
};

/// Intermediate maps of one encoding, exposed for tests.
struct SegmentEncodingTrace {
    Tensor diff;       // D, [4C, H, W]
    Tensor s_short;    // upsample(cnn_diff(pool(g·D)))
    Tensor appearance; // cnn_frame(centre frame)
    Tensor s_fuse;     // s_short + appearance
    Tensor out_fused;  // cnn_out(s_fuse)
    Tensor out_diff;   // cnn_diff2(pool(g·D))
    Tensor s_out_map;  // out_fused + out_diff
};

/// The segment scale: temporal differences of five frames fused with the
/// centre frame's appearance.
///
///   s_short   = upsample(cnn_diff(pool(g·D)))
///   s_fuse    = s_short + cnn_frame(I_t)
///   s_out_map = cnn_out(s_fuse) + cnn_diff2(pool(g·D))
///   feature   = global_avg_pool(s_out_map)
///
/// cnn_diff is two stride-1 layers and cnn_frame one; cnn_out is two
/// stride-2 layers and cnn_diff2 one stride-2 layer, so both branches of the
/// last sum meet on the same grid. Every stack owns its parameters.
class SegmentEncoder {
public:
    static SegmentEncoder create(ParameterSet& params, const SegmentEncoderConfig& cfg, std::mt19937_64& rng,
                                 const std::string& prefix = "segment");

    SegmentFeature encode(const BoundParameters& bound, const SampledSegment& sampled, std::size_t index = 0,
                          SegmentEncodingTrace* trace = nullptr) const;

    const SegmentEncoderConfig& config() const { return cfg_; }
    const ConvStack& cnn_diff() const { return cnn_diff_; }
    const ConvStack& cnn_frame() const { return cnn_frame_; }
    const ConvStack& cnn_out() const { return cnn_out_; }
    const ConvStack& cnn_diff2() const { return cnn_diff2_; }

private:
    SegmentEncoderConfig cfg_;
    ConvStack cnn_diff_;
    ConvStack cnn_frame_;
    ConvStack cnn_out_;
    ConvStack cnn_diff2_;
};

}  // namespace msap
