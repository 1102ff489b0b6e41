#include "msap/evaluation.hpp"

#include <exception>
#include <mutex>
#include <thread>

namespace msap {

double AccuracyTable::average() const {
    if (rows.empty()) return 0.0;
    double sum = 0.0;
    for (const auto& r : rows) sum += r.accuracy();
    return sum / static_cast<double>(rows.size());
}

const AccuracyRow& AccuracyTable::at_k(std::size_t k) const {
    for (const auto& r : rows) {
        if (r.k == k) return r;
    }
    throw ContractError("accuracy table '" + method + "' has no row for k=" + std::to_string(k));
}

void ConfusionMatrix::add(std::size_t truth, std::size_t pred) {
    if (truth >= classes_ || pred >= classes_) throw ContractError("confusion: class index out of range");
    ++counts_[truth * classes_ + pred];
}

std::size_t ConfusionMatrix::row_sum(std::size_t truth) const {
    std::size_t s = 0;
    for (std::size_t p = 0; p < classes_; ++p) s += at(truth, p);
    return s;
}

std::vector<std::vector<std::size_t>> predict_test_set(const Model& model, const std::vector<FullVideo>& test,
                                                       std::size_t threads) {
    const std::size_t K = model.config().segments;
    std::vector<std::vector<std::size_t>> out(test.size());
    auto run = [&](std::size_t i) {
        auto outputs = predict_all_ratios(model, test[i], K);
        out[i].reserve(K);
        for (const auto& o : outputs) out[i].push_back(argmax(o.logits.data()));
    };
    const std::size_t workers = std::max<std::size_t>(1, std::min(threads, test.size()));
    if (workers == 1) {
        for (std::size_t i = 0; i < test.size(); ++i) run(i);
        return out;
    }
    std::exception_ptr failure;
    std::mutex m;
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
            try {
                for (std::size_t i = w; i < test.size(); i += workers) run(i);
            } catch (...) {
                std::lock_guard lock(m);
                if (!failure) failure = std::current_exception();
            }
        });
    }
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);
    return out;
}

AccuracyTable accuracy_table(const std::string& method, const std::vector<FullVideo>& test,
                             const std::vector<std::vector<std::size_t>>& predictions, std::size_t K) {
    if (predictions.size() != test.size()) throw ContractError("accuracy_table: one prediction row per clip is required");
    AccuracyTable table;
    table.method = method;
    for (std::size_t k = 1; k <= K; ++k) {
        AccuracyRow row{k, K, 0, test.size()};
        for (std::size_t i = 0; i < test.size(); ++i) row.correct += predictions[i].at(k - 1) == test[i].label ? 1 : 0;
        table.rows.push_back(row);
    }
    return table;
}

ConfusionMatrix confusion_matrix(const std::vector<FullVideo>& test, const std::vector<std::vector<std::size_t>>& predictions,
                                 std::size_t classes, std::size_t k) {
    if (predictions.size() != test.size()) throw ContractError("confusion_matrix: one prediction row per clip is required");
    if (k == 0) throw ContractError("confusion_matrix: k must be at least 1");
    ConfusionMatrix m(classes);
    for (std::size_t i = 0; i < test.size(); ++i) m.add(test[i].label, predictions[i].at(k - 1));
    return m;
}

AccuracyTable evaluate(const Model& model, const std::vector<FullVideo>& test, const std::string& method, std::size_t threads) {
    return accuracy_table(method, test, predict_test_set(model, test, threads), model.config().segments);
}

ConfusionMatrix confusion(const Model& model, const std::vector<FullVideo>& test, std::size_t k, std::size_t threads) {
    const std::size_t K = model.config().segments;
    if (k == 0 || k > K) throw ConfigError("confusion: k must lie in 1.." + std::to_string(K));
    return confusion_matrix(test, predict_test_set(model, test, threads), model.config().num_classes, k);
}

}  // namespace msap
