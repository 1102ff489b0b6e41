#include "msap/predictor.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>

#include "msap/ops.hpp"

namespace msap {
namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMat>;
using ConstVec = Eigen::Map<const Eigen::VectorXd>;

double logistic(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

SegmentFeature encode_segment_k(const Model& model, const BoundParameters& bound, const PartialVideo& prefix, std::size_t k,
                                SamplingMode mode, std::mt19937_64* rng) {
    auto sampled = sample_frames(prefix.segment_frames(k), mode, rng);
    return model.encoder().encode(bound, sampled, k);
}

}  // namespace

std::string to_string(ModelMode mode) { return mode == ModelMode::full ? "full" : "segment_only"; }

ModelMode parse_model_mode(const std::string& text) {
    if (text == "full") return ModelMode::full;
    if (text == "segment_only") return ModelMode::segment_only;
    throw ConfigError("unknown model mode '" + text + "' (expected full or segment_only)");
}

void ModelConfig::validate() const {
    encoder.validate();
    if (hidden_dim == 0) throw ConfigError("model: hidden size must be positive");
    if (num_classes == 0) throw ConfigError("model: class count must be positive");
    if (segments == 0) throw ConfigError("model: segment count must be positive");
    if (!(dropout_p >= 0.0 && dropout_p < 1.0)) throw ConfigError("model: dropout must lie in [0, 1)");
}

Model Model::create(const ModelConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    Model m;
    m.cfg_ = cfg;
    std::mt19937_64 rng(mix_seed(seed, {0x1417}));
    m.encoder_ = SegmentEncoder::create(m.params_, cfg.encoder, rng, "segment");
    if (cfg.mode == ModelMode::full) {
        m.lstm_ = LstmLayer::create(m.params_, "global.lstm", LstmSpec{cfg.encoder.feature_dim, cfg.hidden_dim}, rng);
        m.head_ = LinearLayer::create(m.params_, "global.head", cfg.hidden_dim, cfg.num_classes, rng);
    } else {
        m.head_ = LinearLayer::create(m.params_, "segment_only.head", cfg.encoder.feature_dim, cfg.num_classes, rng);
    }
    return m;
}

PredictorState init_state(const Model& model) {
    const std::size_t H = model.config().hidden_dim;
    return PredictorState{Tensor::zeros({H}), Tensor::zeros({H}), 0};
}

std::pair<PredictorState, StepOutput> step(const Model& model, const BoundParameters& bound, const PredictorState& state,
                                           const SegmentFeature& feature, bool training, std::mt19937_64& rng,
                                           std::optional<std::size_t> K) {
    if (model.config().mode != ModelMode::full) throw ContractError("step: segment-only models have no recurrent state");
    if (feature.vector.shape() != Shape{model.config().encoder.feature_dim}) {
        throw ConfigError("step: feature of shape " + shape_str(feature.vector.shape()) + " does not match LSTM input " +
                          std::to_string(model.config().encoder.feature_dim));
    }
    if (feature.index != 0 && feature.index != state.segments_seen + 1) {
        throw ContractError("step: feature for segment " + std::to_string(feature.index) + " after " +
                            std::to_string(state.segments_seen) + " observed segments");
    }
    const LstmLayer& lstm = model.lstm();
    auto next = lstm_cell(feature.vector, state.h, state.c, bound[lstm.w_input], bound[lstm.w_hidden], bound[lstm.bias], lstm.spec);
    Tensor logits = model.head()(bound, dropout(next.h, model.config().dropout_p, training, rng));
    const std::size_t k = state.segments_seen + 1;
    std::optional<double> ratio;
    if (K) ratio = observation_ratio(k, *K);
    return {PredictorState{std::move(next.h), std::move(next.c), k}, StepOutput{std::move(logits), ratio}};
}

std::vector<std::vector<double>> fold_sequence(const Model& model, const std::vector<SegmentFeature>& features) {
    const auto& cfg = model.config();
    if (cfg.mode != ModelMode::full) throw ContractError("fold_sequence: segment-only models have no recurrent state");
    const auto& P = model.params();
    const auto H = static_cast<Eigen::Index>(cfg.hidden_dim);
    const auto in = static_cast<Eigen::Index>(cfg.encoder.feature_dim);
    const auto steps = static_cast<Eigen::Index>(features.size());
    const auto classes = static_cast<Eigen::Index>(cfg.num_classes);

    RowMat X(in, steps);
    for (Eigen::Index t = 0; t < steps; ++t) {
        const auto& f = features[static_cast<std::size_t>(t)].vector;
        if (f.shape() != Shape{cfg.encoder.feature_dim}) throw ConfigError("fold_sequence: feature dimension mismatch");
        X.col(t) = ConstVec(f.data().data(), in);
    }
    ConstMap w_in(P[model.lstm().w_input].value.data().data(), 4 * H, in);
    ConstMap w_hid(P[model.lstm().w_hidden].value.data().data(), 4 * H, H);
    ConstVec b(P[model.lstm().bias].value.data().data(), 4 * H);
    ConstMap w_head(P[model.head().weight].value.data().data(), classes, H);
    ConstVec b_head(P[model.head().bias].value.data().data(), classes);

    RowMat projected = w_in * X;
    projected.colwise() += b;

    Eigen::VectorXd h = Eigen::VectorXd::Zero(H), c = Eigen::VectorXd::Zero(H);
    std::vector<std::vector<double>> out;
    out.reserve(features.size());
    for (Eigen::Index t = 0; t < steps; ++t) {
        Eigen::VectorXd pre = projected.col(t) + w_hid * h;
        for (Eigen::Index j = 0; j < H; ++j) {
            const double i_gate = logistic(pre(j));
            const double f_gate = logistic(pre(H + j));
            const double g = std::tanh(pre(2 * H + j));
            const double o_gate = logistic(pre(3 * H + j));
            c(j) = f_gate * c(j) + i_gate * g;
            h(j) = o_gate * std::tanh(c(j));
        }
        Eigen::VectorXd logits = w_head * h + b_head;
        out.emplace_back(logits.data(), logits.data() + classes);
    }
    return out;
}

std::vector<StepOutput> predict_partial(const Model& model, const FullVideo& video, std::size_t k, std::size_t K) {
    if (model.config().mode != ModelMode::full) throw ContractError("predict_partial: model is segment-only");
    const PartialVideo prefix = partial(video, k, K);
    const BoundParameters bound(model.params());
    std::mt19937_64 unused(0);
    PredictorState state = init_state(model);
    std::vector<StepOutput> outputs;
    outputs.reserve(k);
    for (std::size_t j = 1; j <= k; ++j) {
        auto feature = encode_segment_k(model, bound, prefix, j, SamplingMode::deterministic, nullptr);
        auto [next, out] = step(model, bound, state, feature, false, unused, K);
        state = std::move(next);
        outputs.push_back(std::move(out));
    }
    return outputs;
}

StepOutput predict_segment_only(const Model& model, const FullVideo& video, std::size_t k, std::size_t K) {
    if (model.config().mode != ModelMode::segment_only) throw ContractError("predict_segment_only: model is not segment-only");
    const PartialVideo prefix = partial(video, k, K);
    const BoundParameters bound(model.params());
    auto sampled = sample_spanning(prefix.frames, SamplingMode::deterministic);
    auto feature = model.encoder().encode(bound, sampled, k);
    return StepOutput{model.head()(bound, feature.vector), observation_ratio(k, K)};
}

std::vector<StepOutput> predict_all_ratios(const Model& model, const FullVideo& video, std::size_t K) {
    if (model.config().mode == ModelMode::full) return predict_partial(model, video, K, K);
    std::vector<StepOutput> out;
    out.reserve(K);
    for (std::size_t k = 1; k <= K; ++k) out.push_back(predict_segment_only(model, video, k, K));
    return out;
}

Tensor clip_loss(const Model& model, const BoundParameters& bound, const FullVideo& video, bool training, std::mt19937_64& rng,
                 SamplingMode sampling, std::vector<double>* last_logits) {
    const std::size_t K = model.config().segments;
    const PartialVideo whole = partial(video, K, K);
    std::mt19937_64* sampler = sampling == SamplingMode::random ? &rng : nullptr;
    Tensor total;
    if (model.config().mode == ModelMode::full) {
        PredictorState state = init_state(model);
        for (std::size_t k = 1; k <= K; ++k) {
            auto feature = encode_segment_k(model, bound, whole, k, sampling, sampler);
            auto [next, out] = step(model, bound, state, feature, training, rng, K);
            state = std::move(next);
            Tensor loss = softmax_cross_entropy(out.logits, video.label);
            if (last_logits && k == K) last_logits->assign(out.logits.data().begin(), out.logits.data().end());
            total = total.empty() ? loss : add(total, loss);
        }
    } else {
        for (std::size_t k = 1; k <= K; ++k) {
            const auto end = static_cast<std::ptrdiff_t>(whole.segments[k - 1].end);
            std::span<const Tensor> prefix(whole.frames.data(), static_cast<std::size_t>(end));
            auto sampled = sample_spanning(prefix, sampling, sampler);
            auto feature = model.encoder().encode(bound, sampled, k);
            Tensor logits = model.head()(bound, dropout(feature.vector, model.config().dropout_p, training, rng));
            Tensor loss = softmax_cross_entropy(logits, video.label);
            if (last_logits && k == K) last_logits->assign(logits.data().begin(), logits.data().end());
            total = total.empty() ? loss : add(total, loss);
        }
    }
    return scale(total, 1.0 / static_cast<double>(K));
}

std::size_t argmax(std::span<const double> values) {
    if (values.empty()) throw ContractError("argmax of an empty vector");
    std::size_t best = 0;
    for (std::size_t i = 1; i < values.size(); ++i) {
        if (values[i] > values[best]) best = i;
    }
    return best;
}

}  // namespace msap
