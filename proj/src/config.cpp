#include "msap/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "msap/checkpoint.hpp"

namespace msap {
namespace {

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

double to_double(const std::string& key, const std::string& v) {
    double out = 0.0;
    auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc{} || ptr != v.data() + v.size() || !std::isfinite(out)) {
        throw ConfigError("config key '" + key + "': '" + v + "' is not a number");
    }
    return out;
}

std::uint64_t to_u64(const std::string& key, const std::string& v) {
    std::uint64_t out = 0;
    auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc{} || ptr != v.data() + v.size()) {
        throw ConfigError("config key '" + key + "': '" + v + "' is not a non-negative integer");
    }
    return out;
}

std::size_t to_size(const std::string& key, const std::string& v) { return static_cast<std::size_t>(to_u64(key, v)); }

std::string join(const std::vector<std::size_t>& xs) {
    std::string out;
    for (std::size_t i = 0; i < xs.size(); ++i) out += (i ? "," : "") + std::to_string(xs[i]);
    return out;
}

}  // namespace

std::string format_double(double v) {
    char buf[128];
    const double a = std::abs(v);
    const bool plain = a == 0.0 || (a >= 1e-9 && a < 1e15);
    auto [ptr, ec] = plain ? std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::fixed)
                           : std::to_chars(buf, buf + sizeof(buf), v);
    std::string s(buf, ptr);
    if (s.find_first_of(".e") == std::string::npos && s.find("inf") == std::string::npos && s.find("nan") == std::string::npos) {
        s += ".0";
    }
    return s;
}

std::vector<std::size_t> parse_size_list(const std::string& text) {
    std::vector<std::size_t> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(to_size("list", item));
    }
    return out;
}

KeyValueConfig KeyValueConfig::parse(std::string_view text, const std::string& origin) {
    KeyValueConfig cfg;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const auto nl = text.find('\n', pos);
        std::string_view line = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
        pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
        const std::string stripped = trim(line);
        if (stripped.empty()) continue;
        const auto eq = stripped.find('=');
        if (eq == std::string::npos) {
            throw ConfigError(origin + ":" + std::to_string(line_no) + ": expected 'key = value'");
        }
        std::string key = trim(std::string_view(stripped).substr(0, eq));
        std::string value = trim(std::string_view(stripped).substr(eq + 1));
        if (key.empty()) throw ConfigError(origin + ":" + std::to_string(line_no) + ": empty key");
        cfg.values_[key] = value;
    }
    return cfg;
}

KeyValueConfig KeyValueConfig::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config file '" + path.string() + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse(ss.str(), path.string());
}

const std::string& KeyValueConfig::get(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) throw ConfigError("missing config key '" + key + "'");
    return it->second;
}

std::string KeyValueConfig::render() const {
    std::string out;
    for (const auto& [k, v] : values_) out += k + " = " + v + "\n";
    return out;
}

std::string to_string(OptimizerKind kind) { return kind == OptimizerKind::sgd ? "sgd" : "adam"; }

OptimizerKind parse_optimizer_kind(const std::string& text) {
    if (text == "sgd") return OptimizerKind::sgd;
    if (text == "adam") return OptimizerKind::adam;
    throw ConfigError("unknown optimizer '" + text + "' (expected sgd or adam)");
}

double learning_rate_at(const OptimizerConfig& opt, std::size_t epoch) {
    double lr = opt.lr;
    for (auto d : opt.decay_epochs) {
        if (epoch > d) lr *= opt.decay_rate;
    }
    return lr;
}

const std::vector<std::string>& known_config_keys() {
    static const std::vector<std::string> keys{
        "seed",
        "threads",
        "corpus.preset",
        "corpus.seed",
        "corpus.ambiguity_ratio",
        "corpus.train_per_class",
        "corpus.test_per_class",
        "corpus.frames",
        "corpus.channels",
        "corpus.height",
        "corpus.width",
        "corpus.noise_sigma",
        "corpus.speed_jitter",
        "model.segments",
        "model.diff_channels",
        "model.feature_dim",
        "model.diff_gain",
        "model.hidden",
        "model.dropout",
        "optimizer.kind",
        "optimizer.lr",
        "optimizer.momentum",
        "optimizer.decay_rate",
        "optimizer.decay_epochs",
        "train.epochs",
        "train.batch_size",
        "train.mode",
    };
    return keys;
}

void TrainConfig::apply(const std::string& key, const std::string& value) {
    if (key == "seed") seed = to_u64(key, value);
    else if (key == "threads") threads = to_size(key, value);
    else if (key == "corpus.preset") {
        if (value != "staircase") throw ConfigError("unknown corpus preset '" + value + "' (available: staircase)");
    } else if (key == "corpus.seed") corpus.seed = to_u64(key, value);
    else if (key == "corpus.ambiguity_ratio") {
        corpus.ambiguity_ratio = to_double(key, value);
        corpus.classes = staircase_classes(corpus.ambiguity_ratio);
    } else if (key == "corpus.train_per_class") corpus.train_per_class = to_size(key, value);
    else if (key == "corpus.test_per_class") corpus.test_per_class = to_size(key, value);
    else if (key == "corpus.frames") corpus.frames = to_size(key, value);
    else if (key == "corpus.channels") corpus.channels = model.encoder.channels = to_size(key, value);
    else if (key == "corpus.height") corpus.height = model.encoder.height = to_size(key, value);
    else if (key == "corpus.width") corpus.width = model.encoder.width = to_size(key, value);
    else if (key == "corpus.noise_sigma") corpus.noise_sigma = to_double(key, value);
    else if (key == "corpus.speed_jitter") corpus.speed_jitter = to_double(key, value);
    else if (key == "model.segments") model.segments = to_size(key, value);
    else if (key == "model.diff_channels") model.encoder.diff_channels = to_size(key, value);
    else if (key == "model.feature_dim") model.encoder.feature_dim = to_size(key, value);
    else if (key == "model.diff_gain") model.encoder.diff_gain = to_double(key, value);
    else if (key == "model.hidden") model.hidden_dim = to_size(key, value);
    else if (key == "model.dropout") model.dropout_p = to_double(key, value);
    else if (key == "optimizer.kind") optimizer.kind = parse_optimizer_kind(value);
    else if (key == "optimizer.lr") optimizer.lr = to_double(key, value);
    else if (key == "optimizer.momentum") optimizer.momentum = to_double(key, value);
    else if (key == "optimizer.decay_rate") optimizer.decay_rate = to_double(key, value);
    else if (key == "optimizer.decay_epochs") optimizer.decay_epochs = parse_size_list(value);
    else if (key == "train.epochs") epochs = to_size(key, value);
    else if (key == "train.batch_size") batch_size = to_size(key, value);
    else if (key == "train.mode") model.mode = parse_model_mode(value);
    else throw ConfigError("unknown config key '" + key + "'");
    model.num_classes = corpus.classes.size();
}

TrainConfig TrainConfig::from(const KeyValueConfig& kv) {
    TrainConfig cfg;
    // The ambiguity ratio rebuilds the class list, so apply it first.
    if (kv.contains("corpus.ambiguity_ratio")) cfg.apply("corpus.ambiguity_ratio", kv.get("corpus.ambiguity_ratio"));
    for (const auto& [k, v] : kv.entries()) {
        if (k.rfind("sweep.", 0) == 0) continue;
        cfg.apply(k, v);
    }
    return cfg;
}

KeyValueConfig TrainConfig::to_key_values() const {
    KeyValueConfig kv;
    kv.set("seed", std::to_string(seed));
    kv.set("threads", std::to_string(threads));
    kv.set("corpus.preset", "staircase");
    kv.set("corpus.seed", std::to_string(corpus.seed));
    kv.set("corpus.ambiguity_ratio", format_double(corpus.ambiguity_ratio));
    kv.set("corpus.train_per_class", std::to_string(corpus.train_per_class));
    kv.set("corpus.test_per_class", std::to_string(corpus.test_per_class));
    kv.set("corpus.frames", std::to_string(corpus.frames));
    kv.set("corpus.channels", std::to_string(corpus.channels));
    kv.set("corpus.height", std::to_string(corpus.height));
    kv.set("corpus.width", std::to_string(corpus.width));
    kv.set("corpus.noise_sigma", format_double(corpus.noise_sigma));
    kv.set("corpus.speed_jitter", format_double(corpus.speed_jitter));
    kv.set("model.segments", std::to_string(model.segments));
    kv.set("model.diff_channels", std::to_string(model.encoder.diff_channels));
    kv.set("model.feature_dim", std::to_string(model.encoder.feature_dim));
    kv.set("model.diff_gain", format_double(model.encoder.diff_gain));
    kv.set("model.hidden", std::to_string(model.hidden_dim));
    kv.set("model.dropout", format_double(model.dropout_p));
    kv.set("optimizer.kind", to_string(optimizer.kind));
    kv.set("optimizer.lr", format_double(optimizer.lr));
    kv.set("optimizer.momentum", format_double(optimizer.momentum));
    kv.set("optimizer.decay_rate", format_double(optimizer.decay_rate));
    kv.set("optimizer.decay_epochs", join(optimizer.decay_epochs));
    kv.set("train.epochs", std::to_string(epochs));
    kv.set("train.batch_size", std::to_string(batch_size));
    kv.set("train.mode", to_string(model.mode));
    return kv;
}

void TrainConfig::validate() const {
    corpus.validate();
    model.validate();
    if (model.encoder.channels != corpus.channels || model.encoder.height != corpus.height || model.encoder.width != corpus.width) {
        throw ConfigError("model frame geometry does not match the corpus");
    }
    if (model.num_classes != corpus.classes.size()) throw ConfigError("model class count does not match the corpus");
    if (corpus.frames < model.segments) throw ConfigError("corpus clips are shorter than the segment count");
    if (!(optimizer.lr >= 0.0)) throw ConfigError("optimizer: learning rate must be non-negative");
    if (!(optimizer.momentum >= 0.0 && optimizer.momentum < 1.0)) throw ConfigError("optimizer: momentum must lie in [0, 1)");
    for (std::size_t i = 1; i < optimizer.decay_epochs.size(); ++i) {
        if (optimizer.decay_epochs[i] <= optimizer.decay_epochs[i - 1]) {
            throw ConfigError("optimizer: decay epochs must be strictly increasing");
        }
    }
    if (batch_size == 0) throw ConfigError("train: batch size must be positive");
}

std::uint64_t TrainConfig::model_hash() const {
    std::ostringstream os;
    os << "mode=" << to_string(model.mode) << ";classes=" << model.num_classes << ";frame=" << model.encoder.channels << "x"
       << model.encoder.height << "x" << model.encoder.width << ";diff=" << model.encoder.diff_channels
       << ";feature=" << model.encoder.feature_dim << ";hidden=" << model.hidden_dim << ";segments=" << model.segments;
    return fnv1a64(os.str());
}

}  // namespace msap
