#include "gkd/metrics.hpp"

#include "gkd/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace gkd {

double accuracy(const std::vector<int>& predicted, const std::vector<int>& truth) {
    if (predicted.size() != truth.size()) throw UsageError("accuracy: length mismatch");
    if (predicted.empty()) throw UsageError("accuracy: empty input");
    std::size_t hits = 0;
    for (std::size_t i = 0; i < predicted.size(); ++i) hits += predicted[i] == truth[i];
    return static_cast<double>(hits) / static_cast<double>(predicted.size());
}

double macro_f1(const std::vector<int>& predicted, const std::vector<int>& truth,
                std::size_t num_classes) {
    if (predicted.size() != truth.size()) throw UsageError("macro_f1: length mismatch");
    if (predicted.empty() || num_classes == 0) throw UsageError("macro_f1: empty input");
    std::vector<std::size_t> tp(num_classes, 0), fp(num_classes, 0), fn(num_classes, 0);
    for (std::size_t i = 0; i < predicted.size(); ++i) {
        const int p = predicted[i];
        const int t = truth[i];
        if (p < 0 || static_cast<std::size_t>(p) >= num_classes || t < 0 ||
            static_cast<std::size_t>(t) >= num_classes) {
            throw UsageError("macro_f1: label out of range at index " + std::to_string(i));
        }
        if (p == t) {
            ++tp[static_cast<std::size_t>(p)];
        } else {
            ++fp[static_cast<std::size_t>(p)];
            ++fn[static_cast<std::size_t>(t)];
        }
    }
    double sum = 0.0;
    for (std::size_t c = 0; c < num_classes; ++c) {
        const double denom = static_cast<double>(2 * tp[c] + fp[c] + fn[c]);
        // no true and no predicted positives: F1 contributes 0
        if (denom > 0.0) sum += 2.0 * static_cast<double>(tp[c]) / denom;
    }
    return sum / static_cast<double>(num_classes);
}

double auc_binary(const std::vector<double>& scores, const std::vector<int>& truth) {
    if (scores.size() != truth.size()) throw UsageError("auc_binary: length mismatch");
    const std::size_t n = scores.size();
    std::size_t positives = 0;
    for (int t : truth) {
        if (t != 0 && t != 1) throw UsageError("auc_binary: labels must be 0/1");
        positives += t;
    }
    const std::size_t negatives = n - positives;
    if (positives == 0 || negatives == 0) {
        throw UndefinedMetricError("auc_binary: both classes must be present");
    }

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

    // midranks over tie groups; rank sum of positives gives the U statistic
    double positive_rank_sum = 0.0;
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && scores[order[j + 1]] == scores[order[i]]) ++j;
        const double midrank = static_cast<double>(i + j) / 2.0 + 1.0;
        for (std::size_t k = i; k <= j; ++k) {
            if (truth[order[k]] == 1) positive_rank_sum += midrank;
        }
        i = j + 1;
    }
    const double u = positive_rank_sum -
                     static_cast<double>(positives) * static_cast<double>(positives + 1) / 2.0;
    return u / (static_cast<double>(positives) * static_cast<double>(negatives));
}

MetricAggregate aggregate_values(const std::vector<double>& values) {
    MetricAggregate agg;
    if (values.empty()) return agg;
    agg.mean = std::accumulate(values.begin(), values.end(), 0.0) /
               static_cast<double>(values.size());
    if (values.size() > 1) {
        double sq = 0.0;
        for (double v : values) sq += (v - agg.mean) * (v - agg.mean);
        agg.stddev = std::sqrt(sq / static_cast<double>(values.size() - 1));
    }
    return agg;
}

std::size_t MetricsReport::completed() const {
    std::size_t n = 0;
    for (const auto& s : per_seed) n += !s.failed;
    return n;
}

MetricsReport MetricsReport::aggregate(std::vector<SeedMetrics> per_seed, std::string fingerprint) {
    MetricsReport report;
    report.per_seed = std::move(per_seed);
    report.config_fingerprint = std::move(fingerprint);
    std::vector<double> acc, f1, auc;
    for (const auto& s : report.per_seed) {
        if (s.failed) continue;
        acc.push_back(s.accuracy);
        f1.push_back(s.macro_f1);
        auc.push_back(s.auc);
    }
    report.accuracy = aggregate_values(acc);
    report.macro_f1 = aggregate_values(f1);
    report.auc = aggregate_values(auc);
    return report;
}

} // namespace gkd
