#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "msap/evaluation.hpp"
#include "msap/trainer.hpp"

namespace msap {

/// Shortest decimal of k/K, always with a fractional part: "0.1", "1.0".
std::string format_ratio(std::size_t k, std::size_t K);
/// Accuracy at fixed precision (six decimals).
std::string format_accuracy(double accuracy);

/// `method,ratio,accuracy,count`, one row per method and ratio.
std::string accuracy_csv(const std::vector<AccuracyTable>& tables);
/// `true,pred,count` for every cell, rows in label order.
std::string confusion_csv(const ConfusionMatrix& m, const std::vector<std::string>& class_names);
/// `epoch,loss,lr,train_acc`.
std::string history_csv(const std::vector<EpochRecord>& history);

/// Human-readable table: one line per method, one column per ratio, then Avg.
std::string accuracy_text(const std::vector<AccuracyTable>& tables);

/// Writes `text` verbatim (binary mode, so LF stays LF).
void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace msap
