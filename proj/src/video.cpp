#include "msap/video.hpp"

#include <algorithm>

namespace msap {

std::span<const Tensor> PartialVideo::segment_frames(std::size_t k) const {
    if (k == 0 || k > segments.size()) {
        throw InputError("segment " + std::to_string(k) + " is not observed (observed " + std::to_string(segments.size()) + ")");
    }
    const Segment& s = segments[k - 1];
    return std::span<const Tensor>(frames).subspan(s.begin, s.length());
}

std::vector<Segment> split_segments(std::size_t frame_count, std::size_t K, const std::string& parent) {
    if (K == 0) throw InputError("segment count must be at least 1");
    if (frame_count < K) {
        throw InputError("cannot split " + std::to_string(frame_count) + " frames into " + std::to_string(K) + " segments");
    }
    const std::size_t base = frame_count / K;
    const std::size_t longer = frame_count % K;
    std::vector<Segment> out;
    out.reserve(K);
    std::size_t begin = 0;
    for (std::size_t k = 0; k < K; ++k) {
        const std::size_t len = base + (k < longer ? 1 : 0);
        out.push_back(Segment{parent, k + 1, begin, begin + len});
        begin += len;
    }
    return out;
}

std::vector<Segment> split_segments(const FullVideo& video, std::size_t K) {
    return split_segments(video.frame_count(), K, video.id);
}

double observation_ratio(std::size_t k, std::size_t K) {
    if (K == 0 || k == 0 || k > K) {
        throw InputError("observation ratio needs 1 <= k <= K, got k=" + std::to_string(k) + ", K=" + std::to_string(K));
    }
    return static_cast<double>(k) / static_cast<double>(K);
}

PartialVideo partial(const FullVideo& video, std::size_t k, std::size_t K) {
    auto segments = split_segments(video, K);
    if (k == 0 || k > K) {
        throw InputError("partial video needs 1 <= k <= K, got k=" + std::to_string(k) + ", K=" + std::to_string(K));
    }
    PartialVideo p;
    p.parent = video.id;
    p.observed = k;
    p.segments_total = K;
    p.segments.assign(segments.begin(), segments.begin() + static_cast<std::ptrdiff_t>(k));
    const std::size_t end = p.segments.back().end;
    p.frames.assign(video.frames.begin(), video.frames.begin() + static_cast<std::ptrdiff_t>(end));
    return p;
}

SampledSegment sample_frames(std::span<const Tensor> segment, SamplingMode mode, std::mt19937_64* rng) {
    if (segment.empty()) throw InputError("cannot sample frames from an empty segment");
    const std::size_t len = segment.size();
    SampledSegment out;
    if (len < kSampledFrames) {
        // Edge repetition: pad the front by floor(missing/2), the back by the rest.
        const std::size_t front = (kSampledFrames - len) / 2;
        for (std::size_t i = 0; i < kSampledFrames; ++i) {
            const std::size_t src = i < front ? 0 : std::min(i - front, len - 1);
            out.frames[i] = segment[src];
        }
        out.center = std::min(2 - std::min<std::size_t>(front, 2), len - 1);
        return out;
    }
    std::size_t start = (len - kSampledFrames) / 2;
    if (mode == SamplingMode::random) {
        if (!rng) throw ContractError("random frame sampling needs a generator");
        std::uniform_int_distribution<std::size_t> dist(0, len - kSampledFrames);
        start = dist(*rng);
    }
    for (std::size_t i = 0; i < kSampledFrames; ++i) out.frames[i] = segment[start + i];
    out.center = start + 2;
    return out;
}

SampledSegment sample_spanning(std::span<const Tensor> frames, SamplingMode mode, std::mt19937_64* rng) {
    if (frames.empty()) throw InputError("cannot sample frames from an empty prefix");
    if (mode == SamplingMode::random && !rng) throw ContractError("random frame sampling needs a generator");
    const std::size_t n = frames.size();
    SampledSegment out;
    for (std::size_t i = 0; i < kSampledFrames; ++i) {
        const std::size_t lo = std::min(i * n / kSampledFrames, n - 1);
        const std::size_t hi = std::max(lo + 1, std::min((i + 1) * n / kSampledFrames, n));
        std::size_t idx = std::min((2 * i + 1) * n / (2 * kSampledFrames), n - 1);
        if (mode == SamplingMode::random) {
            std::uniform_int_distribution<std::size_t> dist(lo, hi - 1);
            idx = dist(*rng);
        }
        out.frames[i] = frames[idx];
        if (i == 2) out.center = idx;
    }
    return out;
}

void validate_video(const FullVideo& video) {
    if (video.frames.empty()) throw InputError("video '" + video.id + "' has no frames");
    const Shape& s = video.frames.front().shape();
    if (s.size() != 3) throw InputError("video '" + video.id + "' frames must be [C,H,W], got " + shape_str(s));
    for (const auto& f : video.frames) {
        if (f.shape() != s) throw InputError("video '" + video.id + "' mixes frame shapes " + shape_str(s) + " and " + shape_str(f.shape()));
    }
}

}  // namespace msap
