// Experiment runner: synthesize data, build population graphs, train GKD and
// the baselines, sweep missing rates, evaluate saved models.

#include "gkd/errors.hpp"
#include "gkd/experiment.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

namespace {

using namespace gkd;

std::vector<Method> parse_methods(const std::vector<std::string>& names) {
    std::vector<Method> methods;
    methods.reserve(names.size());
    for (const auto& n : names) methods.push_back(parse_method(n));
    return methods;
}

struct TrainFlags {
    std::string config_path;
    bool synthetic = false;
    SyntheticSpec synth;
    std::string features, labels, graph_features;
    std::string method = "gkd";
    std::string out_dir;
    std::vector<std::uint64_t> seeds;
    std::vector<double> alpha_grid;
    std::vector<std::size_t> layers, widths;
    std::vector<double> lrs, dropouts;
    std::size_t epochs = 0;
    bool paper_grid = false;
    double train_frac = -1, val_frac = -1, test_frac = -1, labeled_frac = -1;
    std::uint64_t split_seed = 0;
    std::string graph_mode;
    std::vector<double> thresholds;
    double graph_threshold = -1, sim_threshold = -1;
    std::size_t latent_dim = 0;
    double recon_weight = -1;
    bool transductive = false;
    std::size_t workers = 0;
};

void add_train_flags(CLI::App* cmd, TrainFlags& f) {
    cmd->add_option("--config", f.config_path, "JSON config file; flags override its values");
    cmd->add_flag("--synthetic", f.synthetic, "generate the synthetic dataset instead of reading CSVs");
    cmd->add_option("--n", f.synth.n, "synthetic: sample count (even)");
    cmd->add_option("--d-node", f.synth.node_dim, "synthetic: node feature dim");
    cmd->add_option("--d-graph", f.synth.graph_dim, "synthetic: graph feature dim");
    cmd->add_option("--informative", f.synth.informative_dims, "synthetic: informative node dims");
    cmd->add_option("--class-sep", f.synth.class_sep, "synthetic: class separation");
    cmd->add_option("--p-missing", f.synth.p_missing, "synthetic: missing rate for graph features");
    cmd->add_option("--data-seed", f.synth.seed, "synthetic: generator seed");
    cmd->add_option("--features", f.features, "node features CSV");
    cmd->add_option("--labels", f.labels, "labels CSV");
    cmd->add_option("--graph-features", f.graph_features, "graph-modality features CSV");
    cmd->add_option("--method", f.method, "gkd | dnn | dnn-jfc | gcn");
    cmd->add_option("--out", f.out_dir, "output directory");
    cmd->add_option("--seeds", f.seeds, "initialization seeds")->delimiter(',');
    cmd->add_option("--alpha-grid", f.alpha_grid, "LPA alpha candidates")->delimiter(',');
    cmd->add_option("--layers", f.layers, "hidden layer counts to search")->delimiter(',');
    cmd->add_option("--widths", f.widths, "hidden widths to search")->delimiter(',');
    cmd->add_option("--lrs", f.lrs, "learning rates to search")->delimiter(',');
    cmd->add_option("--dropouts", f.dropouts, "dropout rates to search")->delimiter(',');
    cmd->add_option("--epochs", f.epochs, "training epochs");
    cmd->add_flag("--paper-grid", f.paper_grid,
                  "use the full search grid ({1,2,3} layers x {16,64,256} x lr x dropout)");
    cmd->add_option("--train-frac", f.train_frac, "train split fraction");
    cmd->add_option("--val-frac", f.val_frac, "validation split fraction");
    cmd->add_option("--test-frac", f.test_frac, "test split fraction");
    cmd->add_option("--labeled-frac", f.labeled_frac, "labeled fraction of the train split");
    cmd->add_option("--split-seed", f.split_seed, "split shuffle seed");
    cmd->add_option("--graph-mode", f.graph_mode, "threshold | similarity");
    cmd->add_option("--thresholds", f.thresholds, "per-feature connection thresholds")->delimiter(',');
    cmd->add_option("--graph-threshold", f.graph_threshold, "threshold applied to every graph feature");
    cmd->add_option("--sim-threshold", f.sim_threshold, "cosine similarity threshold");
    cmd->add_option("--latent-dim", f.latent_dim, "autoencoder latent dim (similarity mode)");
    cmd->add_option("--recon-weight", f.recon_weight, "autoencoder reconstruction weight");
    cmd->add_flag("--transductive", f.transductive,
                  "graph and graph features stay available at inference time");
    cmd->add_option("--workers", f.workers, "parallel seed workers (0 = hardware)");
}

ExperimentConfig resolve_config(const CLI::App* cmd, const TrainFlags& f) {
    ExperimentConfig cfg;
    if (!f.config_path.empty()) cfg = load_experiment_config(f.config_path);

    auto given = [&](const std::string& name) { return cmd->count(name) > 0; };

    if (given("--synthetic")) cfg.data.synthetic = true;
    if (given("--features") || given("--labels") || given("--graph-features")) {
        cfg.data.synthetic = false;
        cfg.data.features_path = f.features;
        cfg.data.labels_path = f.labels;
        cfg.data.graph_features_path = f.graph_features;
    }
    if (given("--n")) cfg.data.synth.n = f.synth.n;
    if (given("--d-node")) cfg.data.synth.node_dim = f.synth.node_dim;
    if (given("--d-graph")) cfg.data.synth.graph_dim = f.synth.graph_dim;
    if (given("--informative")) cfg.data.synth.informative_dims = f.synth.informative_dims;
    if (given("--class-sep")) cfg.data.synth.class_sep = f.synth.class_sep;
    if (given("--p-missing")) cfg.data.synth.p_missing = f.synth.p_missing;
    if (given("--data-seed")) cfg.data.synth.seed = f.synth.seed;
    if (!cfg.data.synthetic &&
        (cfg.data.features_path.empty() || cfg.data.labels_path.empty() ||
         cfg.data.graph_features_path.empty())) {
        throw UsageError("either --synthetic or all of --features/--labels/--graph-features");
    }

    if (given("--method")) cfg.method = parse_method(f.method);
    if (given("--out")) cfg.out_dir = f.out_dir;
    if (given("--seeds")) cfg.seeds = f.seeds;
    if (given("--alpha-grid")) cfg.alpha_grid = f.alpha_grid;

    if (f.paper_grid) {
        cfg.teacher_grid = GridSpec::paper_grid();
        cfg.student_grid = GridSpec::paper_grid();
    }
    auto apply_grid = [&](GridSpec& grid) {
        if (given("--layers")) grid.hidden_layer_counts = f.layers;
        if (given("--widths")) grid.hidden_widths = f.widths;
        if (given("--lrs")) grid.learning_rates = f.lrs;
        if (given("--dropouts")) grid.dropouts = f.dropouts;
        if (given("--epochs")) grid.epochs = f.epochs;
    };
    apply_grid(cfg.teacher_grid);
    apply_grid(cfg.student_grid);

    if (given("--train-frac")) cfg.split.train_fraction = f.train_frac;
    if (given("--val-frac")) cfg.split.val_fraction = f.val_frac;
    if (given("--test-frac")) cfg.split.test_fraction = f.test_frac;
    if (given("--labeled-frac")) cfg.split.labeled_fraction = f.labeled_frac;
    if (given("--split-seed")) cfg.split.seed = f.split_seed;

    if (given("--graph-mode")) {
        if (f.graph_mode == "threshold") cfg.graph.mode = GraphSpec::Mode::kThreshold;
        else if (f.graph_mode == "similarity") cfg.graph.mode = GraphSpec::Mode::kSimilarity;
        else throw UsageError("unknown graph mode \"" + f.graph_mode + "\"");
    }
    if (given("--thresholds")) cfg.graph.thresholds = f.thresholds;
    if (given("--graph-threshold")) cfg.graph.default_threshold = f.graph_threshold;
    if (given("--sim-threshold")) cfg.graph.similarity_threshold = f.sim_threshold;
    if (given("--latent-dim")) cfg.graph.autoencoder.latent_dim = f.latent_dim;
    if (given("--recon-weight")) cfg.graph.autoencoder.recon_weight = f.recon_weight;
    if (given("--transductive")) cfg.transductive = true;
    if (given("--workers")) cfg.workers = f.workers;
    return cfg;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"GKD: graph knowledge distillation for graph-free disease prediction"};
    app.require_subcommand(1);

    // synth
    SyntheticSpec synth_spec;
    std::string synth_out;
    auto* synth = app.add_subcommand("synth", "generate the synthetic multi-modal dataset as CSVs");
    synth->add_option("--out", synth_out, "output directory")->required();
    synth->add_option("--n", synth_spec.n, "sample count (even)");
    synth->add_option("--d-node", synth_spec.node_dim, "node feature dim");
    synth->add_option("--d-graph", synth_spec.graph_dim, "graph feature dim");
    synth->add_option("--informative", synth_spec.informative_dims, "informative node dims");
    synth->add_option("--class-sep", synth_spec.class_sep, "class separation");
    synth->add_option("--p-missing", synth_spec.p_missing, "missing rate for graph features");
    synth->add_option("--seed", synth_spec.seed, "generator seed");

    // build-graph
    std::string bg_features, bg_labels, bg_out, bg_mode = "threshold";
    std::vector<double> bg_thresholds;
    double bg_threshold = 0.5, bg_sim = 0.9;
    AutoencoderConfig bg_ae;
    std::uint64_t bg_seed = 0;
    bool bg_autoencode = false;
    auto* bg = app.add_subcommand("build-graph", "build a population graph from graph features");
    bg->add_option("--graph-features", bg_features, "graph-modality features CSV")->required();
    bg->add_option("--out", bg_out, "edge-list output file")->required();
    bg->add_option("--mode", bg_mode, "threshold | similarity");
    bg->add_option("--thresholds", bg_thresholds, "per-feature thresholds")->delimiter(',');
    bg->add_option("--threshold", bg_threshold, "threshold applied to every feature");
    bg->add_option("--sim-threshold", bg_sim, "cosine similarity threshold");
    bg->add_flag("--autoencode", bg_autoencode, "embed with the autoencoder before cosine");
    bg->add_option("--labels", bg_labels, "labels CSV for the autoencoder classifier head");
    bg->add_option("--latent-dim", bg_ae.latent_dim, "autoencoder latent dim");
    bg->add_option("--recon-weight", bg_ae.recon_weight, "autoencoder reconstruction weight");
    bg->add_option("--ae-epochs", bg_ae.epochs, "autoencoder epochs");
    bg->add_option("--seed", bg_seed, "autoencoder seed");

    // train
    TrainFlags train_flags;
    auto* train = app.add_subcommand("train", "grid search + multi-seed evaluation of one method");
    add_train_flags(train, train_flags);

    // sweep-missing
    TrainFlags sweep_flags;
    std::vector<double> sweep_p;
    std::vector<std::string> sweep_methods = {"gkd", "dnn", "dnn-jfc", "gcn"};
    auto* sweep = app.add_subcommand("sweep-missing", "evaluate methods across missing-value rates");
    add_train_flags(sweep, sweep_flags);
    sweep->add_option("--p-list", sweep_p, "missing rates to sweep")->delimiter(',')->required();
    sweep->add_option("--methods", sweep_methods, "methods to compare")->delimiter(',');

    // evaluate
    std::string eval_model, eval_features, eval_labels, eval_out;
    auto* eval = app.add_subcommand("evaluate", "graph-free evaluation of a saved model on a CSV pair");
    eval->add_option("--model", eval_model, "model file")->required();
    eval->add_option("--features", eval_features, "features CSV")->required();
    eval->add_option("--labels", eval_labels, "labels CSV")->required();
    eval->add_option("--out", eval_out, "JSON report path");

    CLI11_PARSE(app, argc, argv);

    try {
        if (synth->parsed()) return cmd_synth(synth_spec, synth_out);

        if (bg->parsed()) {
            DenseMatrix values;
            std::vector<std::uint8_t> observed;
            load_csv_matrix_with_missing(bg_features, values, observed);
            SparseGraph graph;
            if (bg_mode == "threshold") {
                std::vector<double> thresholds = bg_thresholds;
                if (thresholds.empty()) thresholds.assign(values.cols(), bg_threshold);
                if (thresholds.size() == 1) thresholds.assign(values.cols(), thresholds.front());
                if (thresholds.size() != values.cols()) {
                    throw UsageError("got " + std::to_string(thresholds.size()) +
                                     " thresholds for " + std::to_string(values.cols()) +
                                     " features");
                }
                std::vector<SparseGraph> parts;
                for (std::size_t j = 0; j < values.cols(); ++j) {
                    std::vector<std::optional<double>> column(values.rows());
                    for (std::size_t i = 0; i < values.rows(); ++i) {
                        if (observed[i * values.cols() + j]) column[i] = values(i, j);
                    }
                    parts.push_back(threshold_graph(column, thresholds[j]));
                }
                graph = union_graphs(parts);
            } else if (bg_mode == "similarity") {
                // impute missing cells with per-column observed means
                std::vector<double> mean(values.cols(), 0.0);
                std::vector<std::size_t> count(values.cols(), 0);
                for (std::size_t i = 0; i < values.rows(); ++i) {
                    for (std::size_t j = 0; j < values.cols(); ++j) {
                        if (!observed[i * values.cols() + j]) continue;
                        mean[j] += values(i, j);
                        ++count[j];
                    }
                }
                for (std::size_t j = 0; j < values.cols(); ++j) {
                    if (count[j] == 0) {
                        throw UsageError("feature " + std::to_string(j) + " has no observed value");
                    }
                    mean[j] /= static_cast<double>(count[j]);
                }
                for (std::size_t i = 0; i < values.rows(); ++i) {
                    for (std::size_t j = 0; j < values.cols(); ++j) {
                        if (!observed[i * values.cols() + j]) values(i, j) = mean[j];
                    }
                }
                DenseMatrix embedded = values;
                if (bg_autoencode) {
                    if (bg_labels.empty()) {
                        throw UsageError("--autoencode requires --labels for the classifier head");
                    }
                    const std::vector<int> ids = load_csv_labels(bg_labels);
                    if (ids.size() != values.rows()) {
                        throw UsageError("labels row count does not match features");
                    }
                    int max_class = 0;
                    for (int c : ids) max_class = std::max(max_class, c);
                    bg_ae.seed = bg_seed;
                    embedded = autoencoder_embed(
                                   values,
                                   LabelMatrix::one_hot(ids, static_cast<std::size_t>(max_class) + 1),
                                   full_mask(values.rows()), bg_ae)
                                   .latent;
                }
                graph = similarity_graph(embedded, bg_sim);
            } else {
                throw UsageError("unknown graph mode \"" + bg_mode + "\"");
            }
            graph.save_edge_list(bg_out);
            std::cout << "wrote " << bg_out << " (" << graph.node_count() << " nodes, "
                      << graph.edge_count() << " edges)\n";
            return 0;
        }

        if (train->parsed()) {
            ExperimentConfig cfg = resolve_config(train, train_flags);
            if (cfg.out_dir.empty()) throw UsageError("train: --out is required");
            return cmd_train(cfg);
        }

        if (sweep->parsed()) {
            ExperimentConfig cfg = resolve_config(sweep, sweep_flags);
            if (cfg.out_dir.empty()) throw UsageError("sweep-missing: --out is required");
            return cmd_sweep_missing(cfg, sweep_p, parse_methods(sweep_methods));
        }

        if (eval->parsed()) return cmd_evaluate(eval_model, eval_features, eval_labels, eval_out);
    } catch (const std::exception& e) {
        std::cerr << "gkd: error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
