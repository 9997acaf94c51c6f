#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>
#include <random>

#include "lvgpt/error.hpp"
#include "lvgpt/metrics.hpp"

using namespace lvgpt;

namespace {

struct Oracle {
    double acc, recall, fscore;
};

// Straight from the per-sample lists; no confusion matrix involved.
Oracle brute_force(const std::vector<std::int64_t>& p, const std::vector<std::int64_t>& l, std::size_t C) {
    std::size_t correct = 0;
    for (std::size_t i = 0; i < p.size(); ++i) correct += p[i] == l[i];
    double rs = 0, fs = 0;
    std::size_t classes = 0;
    for (std::size_t c = 0; c < C; ++c) {
        std::size_t tp = 0, support = 0, predicted = 0;
        for (std::size_t i = 0; i < p.size(); ++i) {
            support += l[i] == static_cast<std::int64_t>(c);
            predicted += p[i] == static_cast<std::int64_t>(c);
            tp += l[i] == static_cast<std::int64_t>(c) && p[i] == l[i];
        }
        if (support == 0) continue;
        ++classes;
        const double r = static_cast<double>(tp) / static_cast<double>(support);
        const double pr = predicted ? static_cast<double>(tp) / static_cast<double>(predicted) : 0.0;
        rs += r;
        fs += (pr + r) > 0 ? 2.0 * pr * r / (pr + r) : 0.0;
    }
    return {static_cast<double>(correct) / static_cast<double>(p.size()), rs / static_cast<double>(classes),
            fs / static_cast<double>(classes)};
}

TEST(Metrics, HandExampleTwoClassesAllPredictedA) {
    const std::vector<std::int64_t> labels{0, 0, 1, 1}, preds{0, 0, 0, 0};
    const std::vector<std::string> types(4, "t");
    auto r = compute_metrics(preds, labels, types, 2);
    EXPECT_DOUBLE_EQ(r.overall.acc, 0.5);
    EXPECT_DOUBLE_EQ(r.overall.macro_recall, 0.5);
    EXPECT_DOUBLE_EQ(r.overall.macro_fscore, 1.0 / 3.0);
}

TEST(Metrics, PerfectPredictions) {
    const std::vector<std::int64_t> labels{0, 2, 1, 2, 0};
    const std::vector<std::string> types(5, "t");
    auto r = compute_metrics(labels, labels, types, 4);
    EXPECT_EQ(r.overall.acc, 1.0);
    EXPECT_EQ(r.overall.macro_recall, 1.0);
    EXPECT_EQ(r.overall.macro_fscore, 1.0);
}

TEST(Metrics, MatchesBruteForceOnRandomCases) {
    std::mt19937_64 rng(1);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t C = 2 + rng() % 6, n = 1 + rng() % 60;
        std::vector<std::int64_t> p(n), l(n);
        std::vector<std::string> types(n);
        for (std::size_t i = 0; i < n; ++i) {
            l[i] = static_cast<std::int64_t>(rng() % C);
            p[i] = rng() % 3 == 0 ? l[i] : static_cast<std::int64_t>(rng() % C);
            types[i] = "t" + std::to_string(rng() % 3);
        }
        auto r = compute_metrics(p, l, types, C);
        const auto o = brute_force(p, l, C);
        EXPECT_EQ(r.overall.acc, o.acc);
        EXPECT_EQ(r.overall.macro_recall, o.recall);
        EXPECT_EQ(r.overall.macro_fscore, o.fscore);
        EXPECT_EQ(r.confusion.total(), n);
        for (const auto& [type, m] : r.per_type) {
            std::vector<std::int64_t> sp, sl;
            for (std::size_t i = 0; i < n; ++i)
                if (types[i] == type) {
                    sp.push_back(p[i]);
                    sl.push_back(l[i]);
                }
            const auto so = brute_force(sp, sl, C);
            EXPECT_EQ(m.count, sp.size());
            EXPECT_EQ(m.acc, so.acc);
            EXPECT_EQ(m.macro_recall, so.recall);
            EXPECT_EQ(m.macro_fscore, so.fscore);
        }
    }
}

TEST(Metrics, PermutationInvariantAndBounded) {
    std::mt19937_64 rng(2);
    for (int trial = 0; trial < 30; ++trial) {
        const std::size_t n = 5 + rng() % 40, C = 4;
        std::vector<std::int64_t> p(n), l(n);
        std::vector<std::string> types(n);
        for (std::size_t i = 0; i < n; ++i) {
            p[i] = static_cast<std::int64_t>(rng() % C);
            l[i] = static_cast<std::int64_t>(rng() % C);
            types[i] = rng() % 2 ? "a" : "b";
        }
        auto base = compute_metrics(p, l, types, C);
        std::vector<std::size_t> idx(n);
        std::iota(idx.begin(), idx.end(), 0);
        std::shuffle(idx.begin(), idx.end(), rng);
        std::vector<std::int64_t> p2, l2;
        std::vector<std::string> t2;
        for (auto i : idx) {
            p2.push_back(p[i]);
            l2.push_back(l[i]);
            t2.push_back(types[i]);
        }
        auto shuffled = compute_metrics(p2, l2, t2, C);
        EXPECT_EQ(shuffled.confusion, base.confusion);
        EXPECT_EQ(shuffled.overall, base.overall);
        for (double v : {base.overall.acc, base.overall.macro_recall, base.overall.macro_fscore}) {
            EXPECT_GE(v, 0.0);
            EXPECT_LE(v, 1.0);
        }
        // Support-weighted per-type accuracy recombines to the overall figure.
        double weighted = 0;
        for (const auto& [t, m] : base.per_type) weighted += m.acc * static_cast<double>(m.count);
        EXPECT_NEAR(weighted / static_cast<double>(n), base.overall.acc, 1e-12);
    }
}

TEST(Metrics, ConfusionInvariantsAndMerge) {
    const std::vector<std::int64_t> labels{0, 1, 1, 2, 2, 2}, preds{0, 2, 1, 2, 0, 2};
    const std::vector<std::string> types(6, "t");
    auto r = compute_metrics(preds, labels, types, 3);
    std::size_t trace = 0;
    for (std::size_t c = 0; c < 3; ++c) {
        std::size_t row = 0;
        for (std::size_t k = 0; k < 3; ++k) row += r.confusion.at(c, k);
        EXPECT_EQ(row, r.confusion.support(c));
        trace += r.confusion.at(c, c);
    }
    EXPECT_DOUBLE_EQ(r.overall.acc, static_cast<double>(trace) / 6.0);

    ConfusionMatrix a(3), b(3);
    for (std::size_t i = 0; i < 3; ++i) a.add(labels[i], preds[i]);
    for (std::size_t i = 3; i < 6; ++i) b.add(labels[i], preds[i]);
    a += b;
    EXPECT_EQ(a, r.confusion);
}

TEST(Metrics, Errors) {
    const std::vector<std::int64_t> two{0, 1}, one{0};
    const std::vector<std::string> t2(2, "t");
    EXPECT_THROW(compute_metrics(two, one, t2, 2), ValueError);
    EXPECT_THROW(compute_metrics({}, {}, {}, 2), ValueError);
    const std::vector<std::int64_t> oob{0, 5};
    EXPECT_THROW(compute_metrics(oob, two, t2, 2), ValueError);
}

}  // namespace
