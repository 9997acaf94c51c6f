#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace lvgpt {

// confusion[label][prediction]
class ConfusionMatrix {
public:
    explicit ConfusionMatrix(std::size_t num_classes = 0)
        : n_(num_classes), counts_(num_classes * num_classes, 0) {}

    void add(std::int64_t label, std::int64_t prediction);
    // Shards over disjoint sample sets merge additively.
    ConfusionMatrix& operator+=(const ConfusionMatrix& other);

    std::size_t num_classes() const { return n_; }
    std::size_t at(std::size_t label, std::size_t prediction) const { return counts_[label * n_ + prediction]; }
    std::size_t total() const;
    std::size_t support(std::size_t label) const;
    std::size_t predicted(std::size_t cls) const;

    friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;

private:
    std::size_t n_;
    std::vector<std::size_t> counts_;
};

struct MetricSummary {
    std::size_t count = 0;
    double acc = 0.0;
    double macro_recall = 0.0;  // mean over classes with support > 0
    double macro_fscore = 0.0;  // mean per-class F1 over classes with support > 0

    friend bool operator==(const MetricSummary&, const MetricSummary&) = default;
};

struct MetricsReport {
    MetricSummary overall;
    std::map<std::string, MetricSummary> per_type;
    ConfusionMatrix confusion;

    friend bool operator==(const MetricsReport&, const MetricsReport&) = default;
};

// Zero denominators in precision/recall count as 0.
MetricSummary summarize(const ConfusionMatrix& cm);

// Throws ValueError on length mismatch, empty input or out-of-range ids.
MetricsReport compute_metrics(std::span<const std::int64_t> preds, std::span<const std::int64_t> labels,
                              std::span<const std::string> types, std::size_t num_classes);

}  // namespace lvgpt
