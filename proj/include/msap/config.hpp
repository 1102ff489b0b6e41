#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "msap/predictor.hpp"
#include "msap/synth_motion.hpp"

namespace msap {

/// Line-based `key = value` settings with `#` comments and dotted keys.
class KeyValueConfig {
public:
    static KeyValueConfig parse(std::string_view text, const std::string& origin = "<text>");
    static KeyValueConfig load(const std::filesystem::path& path);

    void set(const std::string& key, const std::string& value) { values_[key] = value; }
    bool contains(const std::string& key) const { return values_.count(key) != 0; }
    const std::string& get(const std::string& key) const;
    const std::map<std::string, std::string>& entries() const { return values_; }

    /// Keys in sorted order, one `key = value` per line.
    std::string render() const;

private:
    std::map<std::string, std::string> values_;
};

enum class OptimizerKind { sgd, adam };

std::string to_string(OptimizerKind kind);
OptimizerKind parse_optimizer_kind(const std::string& text);

struct OptimizerConfig {
    OptimizerKind kind = OptimizerKind::adam;
    double lr = 5e-4;
    double momentum = 0.9;
    double decay_rate = 0.1;
    std::vector<std::size_t> decay_epochs{8, 11};
};

/// Learning rate of 1-based `epoch`: lr · decay_rate^(number of decay epochs
/// already passed).
double learning_rate_at(const OptimizerConfig& opt, std::size_t epoch);

struct TrainConfig {
    CorpusConfig corpus = staircase_config();
    ModelConfig model;
    OptimizerConfig optimizer;
    std::size_t epochs = 12;
    std::size_t batch_size = 8;
    std::uint64_t seed = 7;
    std::size_t threads = 1;

    /// Overlays recognised keys of `kv` onto the defaults; unknown keys are
    /// an error.
    static TrainConfig from(const KeyValueConfig& kv);
    KeyValueConfig to_key_values() const;
    /// Applies one `key = value` override.
    void apply(const std::string& key, const std::string& value);

    void validate() const;
    /// Hash of the settings that determine parameter names and shapes.
    std::uint64_t model_hash() const;
};

/// All keys understood by TrainConfig::apply.
const std::vector<std::string>& known_config_keys();

std::string format_double(double v);
std::vector<std::size_t> parse_size_list(const std::string& text);

}  // namespace msap
