#include "msap/report.hpp"

#include <cstdio>
#include <fstream>

#include "msap/checkpoint.hpp"
#include "msap/config.hpp"

namespace msap {
namespace {

std::string fixed(double v, int digits) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
    return buf;
}

}  // namespace

std::string format_ratio(std::size_t k, std::size_t K) { return format_double(observation_ratio(k, K)); }

std::string format_accuracy(double accuracy) { return fixed(accuracy, 6); }

std::string accuracy_csv(const std::vector<AccuracyTable>& tables) {
    std::string out = "method,ratio,accuracy,count\n";
    for (const auto& t : tables) {
        for (const auto& r : t.rows) {
            out += t.method + "," + format_ratio(r.k, r.K) + "," + format_accuracy(r.accuracy()) + "," + std::to_string(r.count) + "\n";
        }
    }
    return out;
}

std::string confusion_csv(const ConfusionMatrix& m, const std::vector<std::string>& class_names) {
    auto name = [&](std::size_t i) { return i < class_names.size() ? class_names[i] : std::to_string(i); };
    std::string out = "true,pred,count\n";
    for (std::size_t t = 0; t < m.classes(); ++t)
        for (std::size_t p = 0; p < m.classes(); ++p) out += name(t) + "," + name(p) + "," + std::to_string(m.at(t, p)) + "\n";
    return out;
}

std::string history_csv(const std::vector<EpochRecord>& history) {
    std::string out = "epoch,loss,lr,train_acc\n";
    for (const auto& h : history) {
        out += std::to_string(h.epoch) + "," + format_double(h.loss) + "," + format_double(h.lr) + "," + format_accuracy(h.train_acc) +
               "\n";
    }
    return out;
}

std::string accuracy_text(const std::vector<AccuracyTable>& tables) {
    if (tables.empty()) return {};
    std::size_t width = 6;
    for (const auto& t : tables) width = std::max(width, t.method.size());
    auto pad = [](std::string s, std::size_t w) {
        if (s.size() < w) s.append(w - s.size(), ' ');
        return s;
    };
    std::string out = pad("method", width);
    for (const auto& r : tables.front().rows) out += "  " + pad(format_ratio(r.k, r.K), 6);
    out += "  Avg\n";
    for (const auto& t : tables) {
        out += pad(t.method, width);
        for (const auto& r : t.rows) out += "  " + pad(fixed(100.0 * r.accuracy(), 2), 6);
        out += "  " + fixed(100.0 * t.average(), 2) + "\n";
    }
    return out;
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError("cannot open '" + path.string() + "' for writing");
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!out) throw FormatError("write to '" + path.string() + "' failed");
}

}  // namespace msap
