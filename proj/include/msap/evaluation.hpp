#pragma once

#include <string>
#include <vector>

#include "msap/predictor.hpp"

namespace msap {

struct AccuracyRow {
    std::size_t k = 0;
    std::size_t K = 0;
    std::size_t correct = 0;
    std::size_t count = 0;

    double ratio() const { return observation_ratio(k, K); }
    double accuracy() const { return count ? static_cast<double>(correct) / static_cast<double>(count) : 0.0; }
};

/// Accuracy of one method at every observation ratio k/K, k = 1..K.
struct AccuracyTable {
    std::string method;
    std::vector<AccuracyRow> rows;

    /// Mean of the per-ratio accuracies.
    double average() const;
    const AccuracyRow& at_k(std::size_t k) const;
};

/// Rows are true labels, columns predictions.
class ConfusionMatrix {
public:
    explicit ConfusionMatrix(std::size_t classes = 0) : classes_(classes), counts_(classes * classes, 0) {}

    void add(std::size_t truth, std::size_t pred);
    std::size_t at(std::size_t truth, std::size_t pred) const { return counts_.at(truth * classes_ + pred); }
    std::size_t classes() const { return classes_; }
    std::size_t row_sum(std::size_t truth) const;

private:
    std::size_t classes_;
    std::vector<std::size_t> counts_;
};

/// Predicted class of every clip at every ratio: predictions[clip][k-1].
/// Clips are split over up to `threads` workers; the result equals the
/// serial one.
std::vector<std::vector<std::size_t>> predict_test_set(const Model& model, const std::vector<FullVideo>& test,
                                                       std::size_t threads);

AccuracyTable accuracy_table(const std::string& method, const std::vector<FullVideo>& test,
                             const std::vector<std::vector<std::size_t>>& predictions, std::size_t K);

/// Confusion at ratio k/K.
ConfusionMatrix confusion_matrix(const std::vector<FullVideo>& test, const std::vector<std::vector<std::size_t>>& predictions,
                                 std::size_t classes, std::size_t k);

AccuracyTable evaluate(const Model& model, const std::vector<FullVideo>& test, const std::string& method,
                       std::size_t threads = 1);

ConfusionMatrix confusion(const Model& model, const std::vector<FullVideo>& test, std::size_t k, std::size_t threads = 1);

}  // namespace msap
