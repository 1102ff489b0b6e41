#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <utility>
#include <vector>

#include "msap/nn.hpp"
#include "msap/segment_encoder.hpp"
#include "msap/video.hpp"

namespace msap {

enum class ModelMode { full, segment_only };

std::string to_string(ModelMode mode);
ModelMode parse_model_mode(const std::string& text);

struct ModelConfig {
    SegmentEncoderConfig encoder;
    std::size_t hidden_dim = 64;
    std::size_t num_classes = 4;
    double dropout_p = 0.5;
    std::size_t segments = 10;  // K
    ModelMode mode = ModelMode::full;

    void validate() const;
};

/// Parameters and layer layout of one model.
///
/// Full mode: encoder -> LSTM -> dropout -> head. Segment-only mode skips the
/// recurrence and classifies one encoding of five frames spread over the
/// observed prefix.
class Model {
public:
    static Model create(const ModelConfig& cfg, std::uint64_t seed);

    const ModelConfig& config() const { return cfg_; }
    ParameterSet& params() { return params_; }
    const ParameterSet& params() const { return params_; }
    const SegmentEncoder& encoder() const { return encoder_; }
    const LstmLayer& lstm() const { return lstm_; }
    const LinearLayer& head() const { return head_; }

private:
    ModelConfig cfg_;
    ParameterSet params_;
    SegmentEncoder encoder_;
    LstmLayer lstm_;
    LinearLayer head_;
};

/// Recurrent state carried between segments.
struct PredictorState {
    Tensor h;
    Tensor c;
    std::size_t segments_seen = 0;
};

struct StepOutput {
    Tensor logits;
    std::optional<double> ratio;  // k/K when K is known
};

PredictorState init_state(const Model& model);

/// One fold of the observed-global scale: (h', c') = lstm(feature, h, c),
/// logits = head(dropout(h')). Returns a new state; `state` is untouched.
/// `feature.index`, when non-zero, must equal state.segments_seen + 1.
std::pair<PredictorState, StepOutput> step(const Model& model, const BoundParameters& bound, const PredictorState& state,
                                           const SegmentFeature& feature, bool training, std::mt19937_64& rng,
                                           std::optional<std::size_t> K = std::nullopt);

/// Whole-sequence fold in evaluation mode: input projections of every step
/// are computed in one matrix product, then the recurrence runs over them.
/// Returns the logits after each step.
std::vector<std::vector<double>> fold_sequence(const Model& model, const std::vector<SegmentFeature>& features);

/// Encodes segments 1..k of `video` split K ways with centred sampling and
/// folds them in order. Only the first k segments are read. Full mode only.
std::vector<StepOutput> predict_partial(const Model& model, const FullVideo& video, std::size_t k, std::size_t K);

/// Segment-only prediction for ratio k/K: five frames spread over the
/// observed prefix, encoded once and classified.
StepOutput predict_segment_only(const Model& model, const FullVideo& video, std::size_t k, std::size_t K);

/// Logits for every ratio 1/K .. K/K in the model's mode.
std::vector<StepOutput> predict_all_ratios(const Model& model, const FullVideo& video, std::size_t K);

/// Per-step averaged cross-entropy of one clip on `bound`'s tape, in
/// training mode with frame sampling and dropout drawn from `rng`. The logits
/// of the last step are copied to `last_logits` when given.
Tensor clip_loss(const Model& model, const BoundParameters& bound, const FullVideo& video, bool training,
                 std::mt19937_64& rng, SamplingMode sampling, std::vector<double>* last_logits = nullptr);

/// Argmax with ties broken toward the lowest index.
std::size_t argmax(std::span<const double> values);

}  // namespace msap
