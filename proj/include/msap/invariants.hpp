#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "msap/predictor.hpp"
#include "msap/synth_motion.hpp"

namespace msap {

struct CheckResult {
    std::string name;
    bool passed = false;
    double measured = 0.0;  // worst error, or count of mismatches
    double limit = 0.0;
    std::string detail;
};

/// Finite-difference checks of every primitive and neural op on random
/// small inputs, plus the composed encoder + predictor loss of one clip on a
/// small model. Each entry passes when its max relative error is below `tol`.
std::vector<CheckResult> gradient_suite(std::uint64_t seed, double eps = 1e-4, double tol = 1e-4);

/// Configuration of the small model used for the composed-loss check.
ModelConfig tiny_model_config();
/// Random clip matching tiny_model_config().
FullVideo tiny_clip(std::uint64_t seed, std::size_t label);

/// Clips of random classes and seeds drawn from `corpus`'s generator.
std::vector<FullVideo> random_clips(const CorpusConfig& corpus, std::size_t count, std::uint64_t seed);

/// Streaming `step` vs fold_sequence on the same features, every step.
CheckResult streaming_fold_check(const Model& model, const std::vector<FullVideo>& clips, double tol = 1e-9);

/// For every clip and every k, frames after segment k are replaced by noise;
/// predict_partial(k) and the first k steps of predict_partial(K) must not
/// change in any bit.
CheckResult causality_check(const Model& model, const std::vector<FullVideo>& clips, std::uint64_t seed);

/// predict_partial(v, k') equals the first k' entries of predict_partial(v, K)
/// bit for bit.
CheckResult prefix_consistency_check(const Model& model, const std::vector<FullVideo>& clips);

/// Adds each offset to all frames of `count` random 5-frame segments and
/// compares the temporal-difference stacks bit for bit.
CheckResult brightness_invariance_check(std::uint64_t seed, const std::vector<double>& offsets, std::size_t count,
                                        std::size_t channels = 3, std::size_t height = 32, std::size_t width = 32);

bool all_passed(const std::vector<CheckResult>& results);

/// One line per result: `PASS name (measured vs limit) detail`.
std::string format_results(const std::vector<CheckResult>& results);

}  // namespace msap
