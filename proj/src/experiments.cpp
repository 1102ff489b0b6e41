#include "msap/experiments.hpp"

#include <sstream>

namespace msap {
namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t");
    if (b == std::string::npos) return {};
    return s.substr(b, s.find_last_not_of(" \t") - b + 1);
}

}  // namespace

RunResult run_experiment(const TrainConfig& cfg, const Corpus& corpus, const std::string& method, const EpochCallback& on_epoch) {
    cfg.validate();
    RunResult r{Model::create(cfg.model, cfg.seed), {}, {}};
    r.history = train_model(r.model, corpus.train, cfg, on_epoch);
    r.table = evaluate(r.model, corpus.test, method, cfg.threads);
    return r;
}

std::vector<double> AblationResult::spread() const {
    std::vector<double> out;
    for (std::size_t i = 0; i < full.rows.size() && i < segment_only.rows.size(); ++i) {
        out.push_back(full.rows[i].accuracy() - segment_only.rows[i].accuracy());
    }
    return out;
}

AblationResult ablate(const TrainConfig& cfg, const Corpus& corpus,
                      const std::function<void(const std::string&, const EpochRecord&)>& on_epoch) {
    AblationResult out;
    for (ModelMode mode : {ModelMode::segment_only, ModelMode::full}) {
        TrainConfig c = cfg;
        c.model.mode = mode;
        const std::string method = to_string(mode);
        auto r = run_experiment(c, corpus, method, [&](const EpochRecord& e) {
            if (on_epoch) on_epoch(method, e);
        });
        (mode == ModelMode::full ? out.full : out.segment_only) = std::move(r.table);
    }
    return out;
}

SweepGrid default_sweep_grid() {
    return {
        {"model.hidden", {"512", "1024", "2048"}},
        {"optimizer.lr", {"0.0001", "0.0005", "0.001"}},
        {"optimizer.decay_epochs", {"20,80", "40,100", "60,100"}},
    };
}

SweepGrid sweep_grid_from(const KeyValueConfig& kv) {
    SweepGrid grid;
    for (const auto& [key, value] : kv.entries()) {
        if (key.rfind("sweep.", 0) != 0) continue;
        std::vector<std::string> values;
        std::stringstream ss(value);
        std::string item;
        while (std::getline(ss, item, ';')) {
            item = trim(item);
            if (!item.empty()) values.push_back(item);
        }
        grid.emplace_back(key.substr(6), std::move(values));
    }
    return grid;
}

std::vector<SweepPoint> sweep(const TrainConfig& base, const SweepGrid& grid, const Corpus& corpus,
                              const std::function<void(const SweepPoint&)>& on_point) {
    struct Plan {
        std::string key, value;
        TrainConfig cfg;
    };
    std::vector<Plan> plans;
    bool any = false;
    for (const auto& [key, values] : grid) {
        for (const auto& v : values) {
            TrainConfig c = base;
            c.apply(key, v);
            c.validate();
            plans.push_back({key, v, std::move(c)});
            any = true;
        }
    }
    if (!any) plans.push_back({"", "", base});

    std::vector<SweepPoint> out;
    for (const auto& p : plans) {
        SweepPoint point;
        point.key = p.key;
        point.value = p.value;
        point.label = p.key.empty() ? "base" : p.key + "=" + p.value;
        // Labels end up in CSV fields.
        for (auto& ch : point.label)
            if (ch == ',') ch = '/';
        const bool new_corpus = p.key.rfind("corpus.", 0) == 0;
        const Corpus regenerated = new_corpus ? generate_corpus(p.cfg.corpus, p.cfg.threads) : Corpus{};
        auto r = run_experiment(p.cfg, new_corpus ? regenerated : corpus, point.label);
        point.history = std::move(r.history);
        point.table = std::move(r.table);
        if (on_point) on_point(point);
        out.push_back(std::move(point));
    }
    return out;
}

}  // namespace msap
