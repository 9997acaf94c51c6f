#include "lvgpt/metrics.hpp"

#include <numeric>

#include "lvgpt/error.hpp"

namespace lvgpt {

void ConfusionMatrix::add(std::int64_t label, std::int64_t prediction) {
    if (label < 0 || prediction < 0 || static_cast<std::size_t>(label) >= n_ ||
        static_cast<std::size_t>(prediction) >= n_) {
        throw ValueError("confusion matrix: class id outside [0, " + std::to_string(n_) + ")");
    }
    ++counts_[static_cast<std::size_t>(label) * n_ + static_cast<std::size_t>(prediction)];
}

ConfusionMatrix& ConfusionMatrix::operator+=(const ConfusionMatrix& other) {
    if (other.n_ != n_) throw ValueError("confusion matrix: cannot merge different class counts");
    for (std::size_t i = 0; i < counts_.size(); ++i) counts_[i] += other.counts_[i];
    return *this;
}

std::size_t ConfusionMatrix::total() const { return std::accumulate(counts_.begin(), counts_.end(), std::size_t{0}); }

std::size_t ConfusionMatrix::support(std::size_t label) const {
    std::size_t s = 0;
    for (std::size_t p = 0; p < n_; ++p) s += at(label, p);
    return s;
}

std::size_t ConfusionMatrix::predicted(std::size_t cls) const {
    std::size_t s = 0;
    for (std::size_t l = 0; l < n_; ++l) s += at(l, cls);
    return s;
}

MetricSummary summarize(const ConfusionMatrix& cm) {
    MetricSummary m;
    m.count = cm.total();
    if (m.count == 0) return m;
    std::size_t trace = 0, supported = 0;
    double recall_sum = 0.0, f_sum = 0.0;
    for (std::size_t c = 0; c < cm.num_classes(); ++c) {
        const std::size_t tp = cm.at(c, c);
        trace += tp;
        const std::size_t support = cm.support(c);
        if (support == 0) continue;
        ++supported;
        const std::size_t pred = cm.predicted(c);
        const double recall = static_cast<double>(tp) / static_cast<double>(support);
        const double precision = pred == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(pred);
        recall_sum += recall;
        f_sum += precision + recall == 0.0 ? 0.0 : 2.0 * precision * recall / (precision + recall);
    }
    m.acc = static_cast<double>(trace) / static_cast<double>(m.count);
    m.macro_recall = recall_sum / static_cast<double>(supported);
    m.macro_fscore = f_sum / static_cast<double>(supported);
    return m;
}

MetricsReport compute_metrics(std::span<const std::int64_t> preds, std::span<const std::int64_t> labels,
                              std::span<const std::string> types, std::size_t num_classes) {
    if (preds.size() != labels.size() || preds.size() != types.size()) {
        throw ValueError("compute_metrics: length mismatch (" + std::to_string(preds.size()) + " predictions, " +
                         std::to_string(labels.size()) + " labels, " + std::to_string(types.size()) + " types)");
    }
    if (preds.empty()) throw ValueError("compute_metrics: no samples");
    MetricsReport r;
    r.confusion = ConfusionMatrix(num_classes);
    std::map<std::string, ConfusionMatrix> by_type;
    for (std::size_t i = 0; i < preds.size(); ++i) {
        r.confusion.add(labels[i], preds[i]);
        by_type.try_emplace(types[i], num_classes).first->second.add(labels[i], preds[i]);
    }
    r.overall = summarize(r.confusion);
    for (const auto& [type, cm] : by_type) r.per_type[type] = summarize(cm);
    return r;
}

}  // namespace lvgpt
