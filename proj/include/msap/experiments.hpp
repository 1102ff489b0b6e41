#pragma once

#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "msap/config.hpp"
#include "msap/evaluation.hpp"
#include "msap/trainer.hpp"

namespace msap {

struct RunResult {
    Model model;
    std::vector<EpochRecord> history;
    AccuracyTable table;
};

/// Creates the model from cfg.seed, trains it on corpus.train and evaluates
/// it on corpus.test.
RunResult run_experiment(const TrainConfig& cfg, const Corpus& corpus, const std::string& method,
                         const EpochCallback& on_epoch = {});

struct AblationResult {
    AccuracyTable segment_only;
    AccuracyTable full;

    /// full − segment_only accuracy per ratio.
    std::vector<double> spread() const;
};

/// Trains both modes from the same corpus and seed.
AblationResult ablate(const TrainConfig& cfg, const Corpus& corpus,
                      const std::function<void(const std::string& method, const EpochRecord&)>& on_epoch = {});

/// Config key and the values it takes, one key varied at a time.
using SweepGrid = std::vector<std::pair<std::string, std::vector<std::string>>>;

/// hidden {512, 1024, 2048}; lr {1e-4, 5e-4, 1e-3}; decay epochs
/// {20,80}, {40,100}, {60,100}.
SweepGrid default_sweep_grid();

/// Reads `sweep.<key> = v1; v2; ...` entries; empty when there are none.
SweepGrid sweep_grid_from(const KeyValueConfig& kv);

struct SweepPoint {
    std::string key;    // empty for the base run
    std::string value;
    std::string label;  // "key=value" or "base"
    std::vector<EpochRecord> history;
    AccuracyTable table;
};

/// One run per (key, value); every other setting stays at `base`. An empty
/// grid gives exactly the base run.
std::vector<SweepPoint> sweep(const TrainConfig& base, const SweepGrid& grid, const Corpus& corpus,
                              const std::function<void(const SweepPoint&)>& on_point = {});

}  // namespace msap
