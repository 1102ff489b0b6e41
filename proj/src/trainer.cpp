#include "msap/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <mutex>
#include <thread>

namespace msap {

Optimizer::Optimizer(const ParameterSet& params, const OptimizerConfig& cfg) : kind_(cfg.kind), momentum_(cfg.momentum) {
    for (const auto& p : params.all()) {
        first_.emplace_back(p.value.size(), 0.0);
        if (kind_ == OptimizerKind::adam) second_.emplace_back(p.value.size(), 0.0);
    }
}

void Optimizer::apply(ParameterSet& params, const std::vector<std::vector<double>>& grads, double lr) {
    if (grads.size() != first_.size()) throw ContractError("optimizer: gradient count does not match the parameter set");
    ++steps_;
    constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(steps_));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(steps_));
    for (ParamId id = 0; id < params.size(); ++id) {
        auto& m = first_[id];
        const auto& g = grads[id];
        if (g.size() != m.size()) throw ContractError("optimizer: gradient of '" + params[id].name + "' has the wrong size");
        auto theta = params.values(id);
        if (kind_ == OptimizerKind::sgd) {
            for (std::size_t i = 0; i < m.size(); ++i) {
                m[i] = momentum_ * m[i] + g[i];
                theta[i] -= lr * m[i];
            }
        } else {
            auto& v = second_[id];
            for (std::size_t i = 0; i < m.size(); ++i) {
                m[i] = b1 * m[i] + (1.0 - b1) * g[i];
                v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
                theta[i] -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + eps);
            }
        }
    }
}

BatchGradient batch_gradient(const Model& model, const std::vector<const FullVideo*>& clips,
                             const std::vector<std::uint64_t>& clip_seeds, std::size_t threads) {
    if (clips.size() != clip_seeds.size()) throw ContractError("batch_gradient: one seed per clip is required");
    const auto& params = model.params();

    struct PerClip {
        std::vector<std::vector<double>> grads;
        double loss = 0.0;
        bool correct = false;
    };
    std::vector<PerClip> results(clips.size());

    auto run = [&](std::size_t i) {
        Tape tape;
        BoundParameters bound(params, tape);
        std::mt19937_64 rng(clip_seeds[i]);
        std::vector<double> last;
        Tensor loss = clip_loss(model, bound, *clips[i], true, rng, SamplingMode::random, &last);
        Gradients g = tape.backward(loss);
        auto& r = results[i];
        r.loss = loss.item();
        r.correct = argmax(last) == clips[i]->label;
        r.grads.reserve(params.size());
        for (const auto& p : params.all()) {
            auto d = g.at(p.name).data();
            r.grads.emplace_back(d.begin(), d.end());
        }
    };

    const std::size_t workers = std::max<std::size_t>(1, std::min(threads, clips.size()));
    if (workers == 1) {
        for (std::size_t i = 0; i < clips.size(); ++i) run(i);
    } else {
        std::vector<std::thread> pool;
        std::exception_ptr failure;
        std::mutex failure_mutex;
        for (std::size_t w = 0; w < workers; ++w) {
            pool.emplace_back([&, w] {
                try {
                    for (std::size_t i = w; i < clips.size(); i += workers) run(i);
                } catch (...) {
                    std::lock_guard lock(failure_mutex);
                    if (!failure) failure = std::current_exception();
                }
            });
        }
        for (auto& t : pool) t.join();
        if (failure) std::rethrow_exception(failure);
    }

    BatchGradient out;
    out.grads.reserve(params.size());
    for (const auto& p : params.all()) out.grads.emplace_back(p.value.size(), 0.0);
    for (const auto& r : results) {
        out.loss_sum += r.loss;
        out.correct += r.correct ? 1 : 0;
        for (std::size_t id = 0; id < r.grads.size(); ++id) {
            auto& dst = out.grads[id];
            for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += r.grads[id][i];
        }
    }
    return out;
}

std::vector<EpochRecord> train_model(Model& model, const std::vector<FullVideo>& train, const TrainConfig& cfg,
                                     const EpochCallback& on_epoch) {
    cfg.validate();
    if (train.empty()) throw ConfigError("train: no training clips");
    Optimizer opt(model.params(), cfg.optimizer);
    std::vector<EpochRecord> history;
    std::vector<std::size_t> order(train.size());

    for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
        std::iota(order.begin(), order.end(), 0);
        std::mt19937_64 shuffle_rng(mix_seed(cfg.seed, {0x5407, epoch}));
        std::shuffle(order.begin(), order.end(), shuffle_rng);
        const double lr = learning_rate_at(cfg.optimizer, epoch);

        double loss_sum = 0.0;
        std::size_t correct = 0;
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
            const std::size_t end = std::min(order.size(), start + cfg.batch_size);
            std::vector<const FullVideo*> clips;
            std::vector<std::uint64_t> seeds;
            for (std::size_t j = start; j < end; ++j) {
                clips.push_back(&train[order[j]]);
                seeds.push_back(mix_seed(cfg.seed, {0xc11b, epoch, order[j]}));
            }
            BatchGradient bg = batch_gradient(model, clips, seeds, cfg.threads);
            if (!std::isfinite(bg.loss_sum)) {
                throw DivergenceError("training diverged in epoch " + std::to_string(epoch) + ": loss is not finite");
            }
            const double inv = 1.0 / static_cast<double>(clips.size());
            for (auto& g : bg.grads)
                for (auto& x : g) x *= inv;
            opt.apply(model.params(), bg.grads, lr);
            loss_sum += bg.loss_sum;
            correct += bg.correct;
        }
        for (const auto& p : model.params().all()) {
            for (double v : p.value.data()) {
                if (!std::isfinite(v)) {
                    throw DivergenceError("training diverged in epoch " + std::to_string(epoch) + ": parameter '" + p.name +
                                          "' is not finite");
                }
            }
        }
        EpochRecord rec{epoch, loss_sum / static_cast<double>(train.size()), lr,
                        static_cast<double>(correct) / static_cast<double>(train.size())};
        history.push_back(rec);
        if (on_epoch) on_epoch(rec);
    }
    return history;
}

}  // namespace msap
