#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace gkd {

// Fraction of exact matches.
double accuracy(const std::vector<int>& predicted, const std::vector<int>& truth);

// Unweighted mean of per-class F1; a class with no true and no predicted
// positives contributes 0.
double macro_f1(const std::vector<int>& predicted, const std::vector<int>& truth,
                std::size_t num_classes);

// P(random positive outscores random negative), ties counted 0.5; computed
// via the Mann-Whitney rank statistic with midranks. Labels must be 0/1 and
// both classes present.
double auc_binary(const std::vector<double>& scores, const std::vector<int>& truth);

struct SeedMetrics {
    std::uint64_t seed = 0;
    double accuracy = 0.0;
    double macro_f1 = 0.0;
    double auc = 0.0;
    bool failed = false;
    std::string error;
};

struct MetricAggregate {
    double mean = 0.0;
    double stddev = 0.0; // sample (n-1); 0 for a single value
};

struct MetricsReport {
    std::vector<SeedMetrics> per_seed;
    MetricAggregate accuracy;
    MetricAggregate macro_f1;
    MetricAggregate auc;
    std::string config_fingerprint;

    std::size_t completed() const;
    bool all_completed() const { return completed() == per_seed.size(); }

    // Aggregates mean +/- sample stddev over the non-failed seeds.
    static MetricsReport aggregate(std::vector<SeedMetrics> per_seed, std::string fingerprint);
};

MetricAggregate aggregate_values(const std::vector<double>& values);

} // namespace gkd
