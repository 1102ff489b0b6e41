#include "msap/synth_motion.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <thread>

#include "msap/parameters.hpp"

namespace msap {
namespace {

constexpr double kQuantum = 1.0 / 65536.0;

// Length of [a, a+len) ∩ [b, b+1).
double overlap(double a, double len, double b) { return std::max(0.0, std::min(a + len, b + 1.0) - std::max(a, b)); }

struct Extent {
    double min_dx = 0, max_dx = 0, min_dy = 0, max_dy = 0;
};

// Displacement range over all frames of a program at unit speed scale.
Extent displacement_extent(const MotionClassSpec& cls, std::size_t frames) {
    Extent e;
    double x = 0, y = 0;
    for (std::size_t j = 0; j + 1 < frames; ++j) {
        auto [vx, vy] = cls.velocity_at(static_cast<double>(j) / static_cast<double>(frames));
        x += vx;
        y += vy;
        e.min_dx = std::min(e.min_dx, x);
        e.max_dx = std::max(e.max_dx, x);
        e.min_dy = std::min(e.min_dy, y);
        e.max_dy = std::max(e.max_dy, y);
    }
    return e;
}

bool programs_agree(const MotionClassSpec& a, const MotionClassSpec& b, double r) {
    if (a.sprite != b.sprite || a.sprite_size != b.sprite_size) return false;
    std::vector<double> cuts{0.0, r};
    for (const auto* cls : {&a, &b}) {
        double t = 0.0;
        for (const auto& p : cls->program) {
            t += p.duration;
            if (t > 0.0 && t < r) cuts.push_back(t);
        }
    }
    std::sort(cuts.begin(), cuts.end());
    for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
        if (cuts[i + 1] <= cuts[i]) continue;
        const double mid = 0.5 * (cuts[i] + cuts[i + 1]);
        if (a.velocity_at(mid) != b.velocity_at(mid)) return false;
    }
    return true;
}

double sprite_coverage(SpriteKind kind, double size, double x0, double y0, std::size_t px, std::size_t py) {
    const double fx = static_cast<double>(px), fy = static_cast<double>(py);
    if (kind == SpriteKind::square) return overlap(x0, size, fx) * overlap(y0, size, fy);
    // Disc: 4x4 supersampling of the pixel cell.
    const double cx = x0 + size / 2, cy = y0 + size / 2, r2 = size * size / 4;
    int inside = 0;
    for (int sy = 0; sy < 4; ++sy)
        for (int sx = 0; sx < 4; ++sx) {
            const double dx = fx + (sx + 0.5) / 4 - cx, dy = fy + (sy + 0.5) / 4 - cy;
            inside += dx * dx + dy * dy <= r2 ? 1 : 0;
        }
    return inside / 16.0;
}

}  // namespace

std::pair<double, double> MotionClassSpec::velocity_at(double tau) const {
    double end = 0.0;
    for (const auto& p : program) {
        end += p.duration;
        if (tau < end) return {p.vx, p.vy};
    }
    if (program.empty()) return {0.0, 0.0};
    return {program.back().vx, program.back().vy};
}

void CorpusConfig::validate() const {
    if (classes.empty()) throw ConfigError("corpus: no classes");
    if (frames == 0 || channels == 0 || height == 0 || width == 0) throw ConfigError("corpus: frame geometry must be positive");
    if (!(ambiguity_ratio >= 0.0 && ambiguity_ratio <= 1.0)) throw ConfigError("corpus: ambiguity ratio must lie in [0, 1]");
    if (noise_sigma < 0.0) throw ConfigError("corpus: noise sigma must be non-negative");
    if (!(speed_jitter >= 0.0 && speed_jitter < 1.0)) throw ConfigError("corpus: speed jitter must lie in [0, 1)");
    for (std::size_t i = 0; i < classes.size(); ++i) {
        const auto& c = classes[i];
        if (c.id != i) throw ConfigError("corpus: class ids must be 0..n-1 in order");
        double total = 0.0;
        for (const auto& p : c.program) {
            if (p.duration <= 0.0) throw ConfigError("corpus: class '" + c.name + "' has a non-positive phase duration");
            total += p.duration;
        }
        if (std::abs(total - 1.0) > 1e-9) throw ConfigError("corpus: class '" + c.name + "' phase durations do not sum to 1");
        if (c.sprite_size <= 0.0) throw ConfigError("corpus: class '" + c.name + "' sprite size must be positive");
        for (std::size_t j = 0; j < i; ++j) {
            if (classes[j].prefix_group == c.prefix_group && !programs_agree(classes[j], c, ambiguity_ratio)) {
                throw ConfigError("corpus: classes '" + classes[j].name + "' and '" + c.name +
                                  "' share a prefix group but differ before the ambiguity ratio");
            }
        }
    }
}

std::vector<MotionClassSpec> staircase_classes(double ambiguity_ratio) {
    const double a = ambiguity_ratio, b = 1.0 - ambiguity_ratio;
    const double h = 0.5, v = 0.25;
    return {
        {0, "right_then_up", {{a, h, 0.0}, {b, 0.0, -v}}, SpriteKind::square, 6.0, 0},
        {1, "right_then_down", {{a, h, 0.0}, {b, 0.0, v}}, SpriteKind::square, 6.0, 0},
        {2, "left_then_up", {{a, -h, 0.0}, {b, 0.0, -v}}, SpriteKind::square, 6.0, 1},
        {3, "left_then_down", {{a, -h, 0.0}, {b, 0.0, v}}, SpriteKind::square, 6.0, 1},
    };
}

CorpusConfig staircase_config() {
    CorpusConfig cfg;
    cfg.classes = staircase_classes(cfg.ambiguity_ratio);
    return cfg;
}

FullVideo generate_clip(const MotionClassSpec& cls, const CorpusConfig& cfg, std::uint64_t seed) {
    const std::size_t T = cfg.frames, C = cfg.channels, H = cfg.height, W = cfg.width;

    // Start range must hold every class of the prefix group, so paired
    // classes draw the same start for the same seed.
    Extent ext;
    for (const auto& other : cfg.classes) {
        if (other.prefix_group != cls.prefix_group && other.id != cls.id) continue;
        const Extent e = displacement_extent(other, T);
        ext.min_dx = std::min(ext.min_dx, e.min_dx);
        ext.max_dx = std::max(ext.max_dx, e.max_dx);
        ext.min_dy = std::min(ext.min_dy, e.min_dy);
        ext.max_dy = std::max(ext.max_dy, e.max_dy);
    }
    const double reach = 1.0 + cfg.speed_jitter;
    const double x_lo = -ext.min_dx * reach, x_hi = static_cast<double>(W) - cls.sprite_size - ext.max_dx * reach;
    const double y_lo = -ext.min_dy * reach, y_hi = static_cast<double>(H) - cls.sprite_size - ext.max_dy * reach;
    if (x_hi < x_lo || y_hi < y_lo) {
        throw ConfigError("corpus: sprite of class '" + cls.name + "' cannot stay inside a " + std::to_string(H) + "x" +
                          std::to_string(W) + " frame along its trajectory");
    }

    std::mt19937_64 rng(mix_seed(seed, {0x5eed}));
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const double speed = 1.0 + cfg.speed_jitter * (2.0 * unit(rng) - 1.0);
    double x = x_lo + (x_hi - x_lo) * unit(rng);
    double y = y_lo + (y_hi - y_lo) * unit(rng);

    FullVideo video;
    video.label = cls.id;
    video.id = cls.name + "#" + std::to_string(seed);
    video.frames.reserve(T);
    const double contrast = cfg.foreground - cfg.background;
    for (std::size_t f = 0; f < T; ++f) {
        std::mt19937_64 noise_rng(mix_seed(seed, {0x0015e, f}));
        std::normal_distribution<double> noise(0.0, cfg.noise_sigma);
        std::vector<double> plane(H * W);
        for (std::size_t py = 0; py < H; ++py)
            for (std::size_t px = 0; px < W; ++px)
                plane[py * W + px] = cfg.background + contrast * sprite_coverage(cls.sprite, cls.sprite_size, x, y, px, py);
        std::vector<double> data(C * H * W);
        for (std::size_t c = 0; c < C; ++c) {
            for (std::size_t i = 0; i < H * W; ++i) {
                double v = plane[i];
                if (cfg.noise_sigma > 0.0) v += noise(noise_rng);
                v = std::clamp(v, 0.0, 1.0);
                data[c * H * W + i] = std::nearbyint(v / kQuantum) * kQuantum;
            }
        }
        video.frames.emplace_back(Shape{C, H, W}, std::move(data));
        auto [vx, vy] = cls.velocity_at(static_cast<double>(f) / static_cast<double>(T));
        x += speed * vx;
        y += speed * vy;
    }
    return video;
}

std::uint64_t clip_seed(const CorpusConfig& cfg, bool test_split, std::size_t index) {
    const std::uint64_t offset = test_split ? (std::uint64_t{1} << 32) : 0;
    return mix_seed(cfg.seed, {offset + index});
}

Corpus generate_corpus(const CorpusConfig& cfg, std::size_t threads) {
    cfg.validate();
    Corpus corpus;
    for (int split = 0; split < 2; ++split) {
        const bool test = split == 1;
        const std::size_t per_class = test ? cfg.test_per_class : cfg.train_per_class;
        auto& records = test ? corpus.test_records : corpus.train_records;
        for (std::size_t i = 0; i < per_class; ++i)
            for (const auto& cls : cfg.classes) records.push_back(ClipRecord{cls.id, clip_seed(cfg, test, i)});
        auto& clips = test ? corpus.test : corpus.train;
        clips.resize(records.size());
        const std::size_t workers = std::max<std::size_t>(1, std::min(threads, records.size()));
        auto render = [&](std::size_t w) {
            for (std::size_t i = w; i < records.size(); i += workers) {
                clips[i] = generate_clip(cfg.classes[records[i].label], cfg, records[i].seed);
            }
        };
        if (workers == 1) {
            render(0);
        } else {
            std::vector<std::thread> pool;
            for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(render, w);
            for (auto& t : pool) t.join();
        }
    }
    return corpus;
}

double bayes_bound(const CorpusConfig& cfg, double r) {
    double total = 0.0;
    for (const auto& a : cfg.classes) {
        std::size_t same = 0;
        for (const auto& b : cfg.classes) same += programs_agree(a, b, r) ? 1 : 0;
        total += 1.0 / static_cast<double>(same);
    }
    return total / static_cast<double>(cfg.classes.size());
}

}  // namespace msap
