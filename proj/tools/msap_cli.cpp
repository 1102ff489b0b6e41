// msap: corpus generation, training, evaluation and the invariant suites.

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>

#include "msap/checkpoint.hpp"
#include "msap/config.hpp"
#include "msap/experiments.hpp"
#include "msap/invariants.hpp"
#include "msap/report.hpp"

namespace fs = std::filesystem;
using namespace msap;

namespace {

struct GlobalOptions {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::string out = "out";
    std::optional<std::size_t> threads;
    bool deterministic = false;
    std::vector<std::string> overrides;
};

struct Context {
    TrainConfig cfg;
    KeyValueConfig file;  // raw file entries, kept for sweep.* keys
    fs::path out;
};

Context resolve(const GlobalOptions& g) {
    Context ctx;
    if (!g.config_path.empty()) ctx.file = KeyValueConfig::load(g.config_path);
    for (const auto& o : g.overrides) {
        const auto eq = o.find('=');
        if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + o + "'");
        auto trim = [](std::string s) {
            s.erase(0, s.find_first_not_of(" \t"));
            s.erase(s.find_last_not_of(" \t") + 1);
            return s;
        };
        ctx.file.set(trim(o.substr(0, eq)), trim(o.substr(eq + 1)));
    }
    ctx.cfg = TrainConfig::from(ctx.file);
    if (g.seed) ctx.cfg.seed = *g.seed;
    if (g.threads) ctx.cfg.threads = *g.threads;
    if (g.deterministic) ctx.cfg.threads = 1;
    if (ctx.cfg.threads == 0) throw ConfigError("--threads must be at least 1");
    ctx.cfg.validate();
    ctx.out = g.out;
    fs::create_directories(ctx.out);

    KeyValueConfig resolved = ctx.cfg.to_key_values();
    for (const auto& [k, v] : ctx.file.entries()) {
        if (k.rfind("sweep.", 0) == 0) resolved.set(k, v);
    }
    write_text_file(ctx.out / "config.resolved", resolved.render());
    return ctx;
}

std::vector<std::string> class_names(const TrainConfig& cfg) {
    std::vector<std::string> names;
    for (const auto& c : cfg.corpus.classes) names.push_back(c.name);
    return names;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

void log_epoch(const std::string& prefix, const EpochRecord& e) {
    std::fprintf(stderr, "%sepoch %zu  loss %.5f  lr %g  train_acc %.4f\n", prefix.c_str(), e.epoch, e.loss, e.lr, e.train_acc);
}

Model load_model(const Context& ctx, const std::string& checkpoint) {
    Model model = Model::create(ctx.cfg.model, ctx.cfg.seed);
    load_checkpoint(checkpoint, model.params(), ctx.cfg.model_hash());
    return model;
}

int cmd_gen(const Context& ctx, const std::string& dump) {
    const Corpus corpus = generate_corpus(ctx.cfg.corpus, ctx.cfg.threads);
    std::string index = "split,index,label,class,seed\n";
    const auto names = class_names(ctx.cfg);
    for (int split = 0; split < 2; ++split) {
        const auto& records = split ? corpus.test_records : corpus.train_records;
        for (std::size_t i = 0; i < records.size(); ++i) {
            index += std::string(split ? "test" : "train") + "," + std::to_string(i) + "," + std::to_string(records[i].label) + "," +
                     names[records[i].label] + "," + std::to_string(records[i].seed) + "\n";
        }
    }
    write_text_file(ctx.out / "corpus.csv", index);

    std::string bounds = "ratio,bayes_bound\n";
    const std::size_t K = ctx.cfg.model.segments;
    for (std::size_t k = 1; k <= K; ++k) bounds += format_ratio(k, K) + "," + format_double(bayes_bound(ctx.cfg.corpus, observation_ratio(k, K))) + "\n";
    write_text_file(ctx.out / "bayes_bound.csv", bounds);

    if (!dump.empty()) {
        std::vector<FullVideo> clips = corpus.train;
        clips.insert(clips.end(), corpus.test.begin(), corpus.test.end());
        std::vector<ClipRecord> records = corpus.train_records;
        records.insert(records.end(), corpus.test_records.begin(), corpus.test_records.end());
        write_corpus_dump(dump, clips, records);
    }
    std::printf("generated %zu train and %zu test clips into %s\n", corpus.train.size(), corpus.test.size(), ctx.out.string().c_str());
    return 0;
}

int cmd_train(const Context& ctx) {
    const auto t0 = std::chrono::steady_clock::now();
    const Corpus corpus = generate_corpus(ctx.cfg.corpus, ctx.cfg.threads);
    const std::string method = to_string(ctx.cfg.model.mode);
    RunResult r = run_experiment(ctx.cfg, corpus, method, [](const EpochRecord& e) { log_epoch("", e); });
    save_checkpoint(ctx.out / "model.ckpt", r.model.params(), CheckpointHeader{ctx.cfg.model_hash(), ctx.cfg.seed});
    write_text_file(ctx.out / "history.csv", history_csv(r.history));
    write_text_file(ctx.out / "accuracy.csv", accuracy_csv({r.table}));
    write_text_file(ctx.out / "accuracy.txt", accuracy_text({r.table}));
    std::printf("%s", accuracy_text({r.table}).c_str());
    std::printf("trained in %.1f s\n", seconds_since(t0));
    return 0;
}

int cmd_eval(const Context& ctx, const std::string& checkpoint) {
    const Model model = load_model(ctx, checkpoint);
    const Corpus corpus = generate_corpus(ctx.cfg.corpus, ctx.cfg.threads);
    const AccuracyTable table = evaluate(model, corpus.test, to_string(ctx.cfg.model.mode), ctx.cfg.threads);
    write_text_file(ctx.out / "accuracy.csv", accuracy_csv({table}));
    write_text_file(ctx.out / "accuracy.txt", accuracy_text({table}));
    std::printf("%s", accuracy_text({table}).c_str());
    return 0;
}

int cmd_confusion(const Context& ctx, const std::string& checkpoint, std::size_t k) {
    const Model model = load_model(ctx, checkpoint);
    const Corpus corpus = generate_corpus(ctx.cfg.corpus, ctx.cfg.threads);
    const ConfusionMatrix m = confusion(model, corpus.test, k, ctx.cfg.threads);
    const std::string csv = confusion_csv(m, class_names(ctx.cfg));
    write_text_file(ctx.out / "confusion.csv", csv);
    std::printf("confusion at ratio %s\n%s", format_ratio(k, ctx.cfg.model.segments).c_str(), csv.c_str());
    return 0;
}

int cmd_ablate(const Context& ctx) {
    const Corpus corpus = generate_corpus(ctx.cfg.corpus, ctx.cfg.threads);
    const AblationResult a = ablate(ctx.cfg, corpus, [](const std::string& m, const EpochRecord& e) { log_epoch(m + ": ", e); });
    const std::vector<AccuracyTable> tables{a.segment_only, a.full};
    write_text_file(ctx.out / "accuracy.csv", accuracy_csv(tables));
    write_text_file(ctx.out / "accuracy.txt", accuracy_text(tables));
    std::string spread = "ratio,segment_only,full,spread\n";
    const auto d = a.spread();
    for (std::size_t i = 0; i < d.size(); ++i) {
        const auto& row = a.full.rows[i];
        spread += format_ratio(row.k, row.K) + "," + format_accuracy(a.segment_only.rows[i].accuracy()) + "," +
                  format_accuracy(row.accuracy()) + "," + format_accuracy(d[i]) + "\n";
    }
    write_text_file(ctx.out / "ablation.csv", spread);
    std::printf("%s", accuracy_text(tables).c_str());
    return 0;
}

int cmd_sweep(const Context& ctx) {
    const auto t0 = std::chrono::steady_clock::now();
    SweepGrid grid = sweep_grid_from(ctx.file);
    if (grid.empty()) grid = default_sweep_grid();
    const Corpus corpus = generate_corpus(ctx.cfg.corpus, ctx.cfg.threads);
    std::size_t index = 0;
    const auto points = sweep(ctx.cfg, grid, corpus, [&](const SweepPoint& p) {
        char dir[32];
        std::snprintf(dir, sizeof(dir), "point_%02zu", ++index);
        const fs::path d = ctx.out / "points" / dir;
        fs::create_directories(d);
        write_text_file(d / "accuracy.csv", accuracy_csv({p.table}));
        write_text_file(d / "history.csv", history_csv(p.history));
        std::fprintf(stderr, "%s  avg %.4f  (%.1f s)\n", p.label.c_str(), p.table.average(), seconds_since(t0));
    });
    std::vector<AccuracyTable> tables;
    std::string index_csv = "point,key,value,avg\n";
    for (std::size_t i = 0; i < points.size(); ++i) {
        tables.push_back(points[i].table);
        char dir[32];
        std::snprintf(dir, sizeof(dir), "point_%02zu", i + 1);
        std::string value = points[i].value;
        if (value.find(',') != std::string::npos) value = "\"" + value + "\"";
        index_csv += std::string(dir) + "," + points[i].key + "," + value + "," + format_accuracy(points[i].table.average()) + "\n";
    }
    write_text_file(ctx.out / "sweep.csv", index_csv);
    write_text_file(ctx.out / "accuracy.csv", accuracy_csv(tables));
    write_text_file(ctx.out / "accuracy.txt", accuracy_text(tables));
    std::printf("%s", accuracy_text(tables).c_str());
    std::printf("sweep of %zu points in %.1f s\n", points.size(), seconds_since(t0));
    return 0;
}

int cmd_gradcheck(const Context& ctx) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto results = gradient_suite(ctx.cfg.seed);
    const std::string text = format_results(results);
    write_text_file(ctx.out / "gradcheck.txt", text);
    std::printf("%sgradient suite in %.1f s\n", text.c_str(), seconds_since(t0));
    return all_passed(results) ? 0 : 1;
}

int cmd_selftest(const Context& ctx, std::size_t clips) {
    const auto t0 = std::chrono::steady_clock::now();
    auto results = gradient_suite(ctx.cfg.seed);
    const Model model = Model::create(ctx.cfg.model, ctx.cfg.seed);
    if (ctx.cfg.model.mode == ModelMode::full) {
        const auto videos = random_clips(ctx.cfg.corpus, clips, ctx.cfg.seed);
        results.push_back(streaming_fold_check(model, videos));
        results.push_back(causality_check(model, videos, ctx.cfg.seed));
        results.push_back(prefix_consistency_check(model, videos));
    }
    results.push_back(brightness_invariance_check(ctx.cfg.seed, {0.05, 0.2}, 20));
    const std::string text = format_results(results);
    write_text_file(ctx.out / "selftest.txt", text);
    std::printf("%sselftest in %.1f s\n", text.c_str(), seconds_since(t0));
    return all_passed(results) ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Multi-scale early action prediction on synthetic motion clips"};
    app.require_subcommand(1);
    GlobalOptions g;
    app.add_option("--config", g.config_path, "key = value config file")->check(CLI::ExistingFile);
    app.add_option("--seed", g.seed, "training and initialisation seed");
    app.add_option("--out", g.out, "output directory")->capture_default_str();
    app.add_option("--threads", g.threads, "worker threads");
    app.add_flag("--deterministic", g.deterministic, "force one thread");
    app.add_option("--set", g.overrides, "config override key=value (repeatable)");

    std::string dump, checkpoint;
    std::size_t k = 2, clips = 10;
    auto* gen = app.add_subcommand("gen", "generate the corpus index and optionally a binary dump");
    gen->add_option("--dump", dump, "write the corpus dump to this path");
    auto* train = app.add_subcommand("train", "train, then evaluate on the test split");
    auto* eval = app.add_subcommand("eval", "evaluate a checkpoint at every observation ratio");
    eval->add_option("--checkpoint", checkpoint, "checkpoint file")->required();
    auto* ablate_cmd = app.add_subcommand("ablate", "segment-only vs full model on the same corpus and seed");
    auto* sweep_cmd = app.add_subcommand("sweep", "one-variable-at-a-time hyperparameter sweep");
    auto* conf = app.add_subcommand("confusion", "confusion matrix of a checkpoint at ratio k/K");
    conf->add_option("--checkpoint", checkpoint, "checkpoint file")->required();
    conf->add_option("--k", k, "observed segments")->capture_default_str();
    auto* grad = app.add_subcommand("gradcheck", "finite-difference gradient suite");
    auto* self = app.add_subcommand("selftest", "gradient, causality, streaming and invariance suites");
    self->add_option("--clips", clips, "clips for the model checks")->capture_default_str();
    for (auto* sub : app.get_subcommands({})) sub->fallthrough();

    CLI11_PARSE(app, argc, argv);
    try {
        const Context ctx = resolve(g);
        if (*gen) return cmd_gen(ctx, dump);
        if (*train) return cmd_train(ctx);
        if (*eval) return cmd_eval(ctx, checkpoint);
        if (*ablate_cmd) return cmd_ablate(ctx);
        if (*sweep_cmd) return cmd_sweep(ctx);
        if (*conf) return cmd_confusion(ctx, checkpoint, k);
        if (*grad) return cmd_gradcheck(ctx);
        if (*self) return cmd_selftest(ctx, clips);
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
