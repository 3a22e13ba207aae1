#pragma once

#include "gkd/autoencoder.hpp"
#include "gkd/dataset.hpp"
#include "gkd/graph.hpp"
#include "gkd/lpa.hpp"
#include "gkd/metrics.hpp"
#include "gkd/mlp.hpp"
#include "gkd/pipeline.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace gkd {

enum class Method { kGKD, kDNN, kDNNJFC, kGCN };

Method parse_method(const std::string& name);
std::string method_name(Method method);

// Architecture/optimizer grid, expanded in a fixed deterministic order.
struct GridSpec {
    std::vector<std::size_t> hidden_layer_counts = {1, 2};
    std::vector<std::size_t> hidden_widths = {64};
    std::vector<double> learning_rates = {1e-2};
    std::vector<double> dropouts = {0.1, 0.3};
    std::size_t epochs = 200;

    std::vector<TrainConfig> expand() const;

    // Full search space used in the experiments: {1,2,3} hidden layers x
    // widths {16,64,256} x lr {5e-3,1e-2} x dropout {0.1,0.3,0.5}.
    static GridSpec paper_grid();
};

struct GraphSpec {
    enum class Mode { kThreshold, kSimilarity };
    Mode mode = Mode::kThreshold;
    // Per graph feature; a single value broadcasts to every feature. Empty
    // falls back to default_threshold.
    std::vector<double> thresholds;
    double default_threshold = 0.5;
    // Similarity mode: autoencoder latent + cosine threshold.
    double similarity_threshold = 0.9;
    AutoencoderConfig autoencoder;
};

struct DataSource {
    bool synthetic = true;
    SyntheticSpec synth;
    std::string features_path;
    std::string labels_path;
    std::string graph_features_path;
};

struct ExperimentConfig {
    DataSource data;
    SplitSpec split;
    GraphSpec graph;
    Method method = Method::kGKD;
    GridSpec teacher_grid;   // GKD teacher search space
    GridSpec student_grid;   // GKD student and all baseline search space
    std::vector<double> alpha_grid = {0.1, 0.3, 0.5, 0.7, 0.9};
    LPAConfig lpa;           // iteration budget/tolerance; alpha comes from the grid
    std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5};
    bool transductive = false; // graph (and graph features) visible at inference
    std::size_t workers = 0;   // 0 = hardware concurrency
    std::string out_dir;

    // Stable hash of everything that affects results (no paths/timestamps).
    std::string fingerprint() const;
};

struct SelectedConfig {
    TrainConfig teacher;  // meaningful for GKD only
    TrainConfig student;  // the classifier config for every method
    double alpha = 0.0;   // meaningful for GKD only
    double mean_val_accuracy = 0.0;
    std::string describe(Method method) const;
};

struct TrialRun {
    MetricsReport report;
    SelectedConfig selected;
    std::uint64_t best_seed = 0; // completed seed with the best validation accuracy
    std::vector<std::string> warnings;
};

// Loads/generates the dataset and applies splits. The split seed comes from
// cfg.split.seed; trial seeds only drive model initialization and dropout.
Dataset prepare_dataset(const ExperimentConfig& cfg);

// Builds the population graph over the given rows from their graph-modality
// features, per cfg.graph. `seed` drives the autoencoder in similarity mode.
SparseGraph build_population_graph(const Dataset& ds, const std::vector<std::size_t>& rows,
                                   const GraphSpec& spec, std::uint64_t seed);

// Grid search selected by mean validation accuracy across seeds, then
// per-seed test metrics for the selected configuration. Failed seeds are
// marked in the report and skipped in the aggregate.
TrialRun run_trials(const ExperimentConfig& cfg, const std::vector<std::uint64_t>& seeds);

// Same, on a caller-supplied dataset (splits must be present). An optional
// fingerprint override tags reports of derived datasets (e.g. sweep cells).
TrialRun run_trials_on_dataset(const ExperimentConfig& cfg, const Dataset& ds,
                               const std::vector<std::uint64_t>& seeds,
                               const std::string& fingerprint_override = "");

struct SweepCell {
    double p_missing = 0.0;
    Method method = Method::kGKD;
    TrialRun run;
};

struct SweepResult {
    std::vector<double> p_values;
    std::vector<Method> methods;
    std::vector<SweepCell> cells; // p-major, then method, matching request order
};

// Fig.-4-style sweep: re-applies each missing rate to the base dataset's
// graph features and evaluates every requested method on it.
SweepResult sweep_missing(const ExperimentConfig& cfg, const std::vector<double>& p_list,
                          const std::vector<Method>& methods);

// ---- command-level entry points used by the CLI ----
// Each writes its artifacts under the directory given in the config and
// returns 0 on full success (any failed trial gives a nonzero code).

int cmd_synth(const SyntheticSpec& spec, const std::string& out_dir);
int cmd_train(const ExperimentConfig& cfg);
int cmd_sweep_missing(const ExperimentConfig& cfg, const std::vector<double>& p_list,
                      const std::vector<Method>& methods);
int cmd_evaluate(const std::string& model_path, const std::string& features_path,
                 const std::string& labels_path, const std::string& report_path);

// JSON config file support; unknown keys are rejected.
ExperimentConfig load_experiment_config(const std::string& path);
void write_experiment_config(const ExperimentConfig& cfg, const std::string& path);

// Report files (JSON + CSV). The JSON carries per-seed metrics, aggregates,
// the selected configuration and the config fingerprint; the timestamp lives
// in its own field so reruns are comparable.
void write_report_json(const TrialRun& run, const ExperimentConfig& cfg, const std::string& path);
void write_report_csv(const TrialRun& run, const ExperimentConfig& cfg, const std::string& path,
                      double p_missing = -1.0, bool append = false);
void write_sweep_report(const SweepResult& sweep, const ExperimentConfig& cfg,
                        const std::string& json_path, const std::string& csv_path);

} // namespace gkd
