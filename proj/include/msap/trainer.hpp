#pragma once

#include <functional>
#include <vector>

#include "msap/config.hpp"
#include "msap/predictor.hpp"

namespace msap {

struct EpochRecord {
    std::size_t epoch = 0;  // 1-based
    double loss = 0.0;      // mean clip loss over the epoch
    double lr = 0.0;
    double train_acc = 0.0;  // last-step accuracy of the training forward passes
};

/// First-order update rules.
///
/// sgd:  v = mu·v + g, theta -= lr·v
/// adam: m = b1·m + (1−b1)·g, s = b2·s + (1−b2)·g², bias-corrected,
///       theta -= lr·m̂ / (sqrt(ŝ) + 1e-8), with b1 = 0.9, b2 = 0.999
class Optimizer {
public:
    Optimizer(const ParameterSet& params, const OptimizerConfig& cfg);
    /// `grads[i]` is the gradient of parameter i.
    void apply(ParameterSet& params, const std::vector<std::vector<double>>& grads, double lr);

private:
    OptimizerKind kind_;
    double momentum_;
    std::size_t steps_ = 0;
    std::vector<std::vector<double>> first_;
    std::vector<std::vector<double>> second_;
};

/// Summed gradient and loss of a set of clips at the current parameters.
struct BatchGradient {
    std::vector<std::vector<double>> grads;
    double loss_sum = 0.0;
    std::size_t correct = 0;
};

/// Per-clip gradients are computed independently (on up to `threads` workers)
/// and summed in clip order, so the result does not depend on `threads`.
/// `clip_seeds[i]` seeds sampling and dropout of clip i.
BatchGradient batch_gradient(const Model& model, const std::vector<const FullVideo*>& clips,
                             const std::vector<std::uint64_t>& clip_seeds, std::size_t threads);

using EpochCallback = std::function<void(const EpochRecord&)>;

/// Trains `model` in place for cfg.epochs epochs over `train`. Each epoch
/// visits the clips in an order shuffled from (cfg.seed, epoch) and updates
/// once per mini-batch with the batch-mean gradient. Throws DivergenceError
/// when a loss or parameter becomes non-finite.
std::vector<EpochRecord> train_model(Model& model, const std::vector<FullVideo>& train, const TrainConfig& cfg,
                                     const EpochCallback& on_epoch = {});

}  // namespace msap
