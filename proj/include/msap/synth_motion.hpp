#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "msap/video.hpp"

namespace msap {

enum class SpriteKind { square, disc };

/// Constant velocity (pixels per frame) held for a fraction of the clip.
struct VelocityPhase {
    double duration = 1.0;
    double vx = 0.0;
    double vy = 0.0;
};

/// One action category: a sprite driven by a piecewise-constant velocity
/// program. Classes sharing a prefix group have identical programs and
/// sprites up to the corpus ambiguity ratio.
struct MotionClassSpec {
    std::size_t id = 0;
    std::string name;
    std::vector<VelocityPhase> program;
    SpriteKind sprite = SpriteKind::square;
    double sprite_size = 6.0;
    std::size_t prefix_group = 0;

    /// Velocity at clip fraction `tau` in [0, 1).
    std::pair<double, double> velocity_at(double tau) const;
};

struct CorpusConfig {
    std::vector<MotionClassSpec> classes;
    double ambiguity_ratio = 0.3;
    std::size_t train_per_class = 100;
    std::size_t test_per_class = 50;
    std::size_t frames = 60;
    std::size_t channels = 3;
    std::size_t height = 32;
    std::size_t width = 32;
    double noise_sigma = 0.02;
    double speed_jitter = 0.1;  // speed scale drawn from [1−j, 1+j]
    double background = 0.1;
    double foreground = 0.9;
    std::uint64_t seed = 1;

    void validate() const;
};

/// The four-class staircase: right-then-up / right-then-down and
/// left-then-up / left-then-down, paired by their first phase.
std::vector<MotionClassSpec> staircase_classes(double ambiguity_ratio = 0.3);
CorpusConfig staircase_config();

/// Renders one clip. Speed scale and start position are drawn from
/// `clip_seed` before anything class specific, and per-frame noise is seeded
/// by (clip_seed, frame), so classes in one prefix group produce bitwise
/// identical frames until their programs diverge. Pixels are clamped to
/// [0, 1] and quantised to multiples of 2^-16.
FullVideo generate_clip(const MotionClassSpec& cls, const CorpusConfig& cfg, std::uint64_t clip_seed);

struct ClipRecord {
    std::size_t label = 0;
    std::uint64_t seed = 0;
};

struct Corpus {
    std::vector<FullVideo> train;
    std::vector<FullVideo> test;
    std::vector<ClipRecord> train_records;
    std::vector<ClipRecord> test_records;
};

/// Seed of the i-th clip of a class; test indices start at 2^32 so the two
/// splits draw from disjoint seed ranges.
std::uint64_t clip_seed(const CorpusConfig& cfg, bool test_split, std::size_t index);

/// Class-balanced train and test sets. `threads` > 1 renders in parallel;
/// the result equals the serial one.
Corpus generate_corpus(const CorpusConfig& cfg, std::size_t threads = 1);

/// Best achievable accuracy at ratio r for noiseless rendering: mean over
/// classes of 1 / |classes whose program and sprite agree on [0, r)|.
double bayes_bound(const CorpusConfig& cfg, double r);

}  // namespace msap
