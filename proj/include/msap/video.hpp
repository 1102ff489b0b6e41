#pragma once

#include <array>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "msap/tensor.hpp"

namespace msap {

/// A complete clip: T frames of shape [C,H,W] with values in [0,1].
struct FullVideo {
    std::vector<Tensor> frames;
    std::size_t label = 0;
    std::string id;

    std::size_t frame_count() const { return frames.size(); }
};

/// Segment k (1-based) covers frames [begin, end) of its parent.
struct Segment {
    std::string parent;
    std::size_t index = 1;
    std::size_t begin = 0;
    std::size_t end = 0;

    std::size_t length() const { return end - begin; }
};

/// Frames of segments 1..observed of a video split into `segments_total`.
struct PartialVideo {
    std::string parent;
    std::size_t observed = 0;
    std::size_t segments_total = 0;
    std::vector<Tensor> frames;
    std::vector<Segment> segments;  // the observed segments only

    std::span<const Tensor> segment_frames(std::size_t k) const;
};

inline constexpr std::size_t kSampledFrames = 5;

/// Five consecutive frames I_{t-2} .. I_{t+2} drawn from one segment.
struct SampledSegment {
    std::array<Tensor, kSampledFrames> frames;
    std::size_t center = 0;  // index of the centre frame within its segment

    const Tensor& center_frame() const { return frames[2]; }
};

enum class SamplingMode { random, deterministic };

/// K contiguous segments; lengths are floor(T/K) or floor(T/K)+1 with the
/// T mod K longer ones first.
std::vector<Segment> split_segments(std::size_t frame_count, std::size_t K, const std::string& parent = {});
std::vector<Segment> split_segments(const FullVideo& video, std::size_t K);

/// r = k/K for 1 <= k <= K.
double observation_ratio(std::size_t k, std::size_t K);

/// Segments 1..k of `video` split K ways. Frames past segment k are not
/// copied or read.
PartialVideo partial(const FullVideo& video, std::size_t k, std::size_t K);

/// Random mode draws the window start uniformly; deterministic mode centres
/// it at floor((len−5)/2). Segments shorter than five frames are padded by
/// repeating the first and last frame before windowing. `rng` is only used in
/// random mode.
SampledSegment sample_frames(std::span<const Tensor> segment, SamplingMode mode, std::mt19937_64* rng = nullptr);

/// Five frames spread over the whole span: one per equal-width chunk, the
/// chunk centre in deterministic mode and a uniform pick in random mode.
SampledSegment sample_spanning(std::span<const Tensor> frames, SamplingMode mode, std::mt19937_64* rng = nullptr);

void validate_video(const FullVideo& video);

}  // namespace msap
