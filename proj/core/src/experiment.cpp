#include "gkd/experiment.hpp"

#include "gkd/errors.hpp"
#include "gkd/rng.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <thread>

namespace gkd {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr std::uint64_t kAutoencoderStream = 31;
constexpr std::uint64_t kSweepMissingStream = 7700;

std::string fnv1a_hex(const std::string& text) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    std::ostringstream out;
    out << std::hex << std::setw(16) << std::setfill('0') << h;
    return out.str();
}

std::string iso_timestamp() {
    const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

json train_config_json(const TrainConfig& cfg) {
    return json{{"hidden", cfg.hidden},
                {"learning_rate", cfg.learning_rate},
                {"dropout", cfg.dropout},
                {"epochs", cfg.epochs}};
}

json grid_json(const GridSpec& grid) {
    return json{{"hidden_layer_counts", grid.hidden_layer_counts},
                {"hidden_widths", grid.hidden_widths},
                {"learning_rates", grid.learning_rates},
                {"dropouts", grid.dropouts},
                {"epochs", grid.epochs}};
}

GridSpec grid_from_json(const json& j, const GridSpec& defaults) {
    GridSpec grid = defaults;
    for (const auto& [key, value] : j.items()) {
        if (key == "hidden_layer_counts") {
            grid.hidden_layer_counts = value.get<std::vector<std::size_t>>();
        } else if (key == "hidden_widths") {
            grid.hidden_widths = value.get<std::vector<std::size_t>>();
        } else if (key == "learning_rates") {
            grid.learning_rates = value.get<std::vector<double>>();
        } else if (key == "dropouts") {
            grid.dropouts = value.get<std::vector<double>>();
        } else if (key == "epochs") {
            grid.epochs = value.get<std::size_t>();
        } else {
            throw ParseError("config: unknown grid key \"" + key + "\"");
        }
    }
    return grid;
}

// Runs fn(0..count-1) on a bounded pool; fn must not throw.
void parallel_for(std::size_t count, std::size_t workers, const std::function<void(std::size_t)>& fn) {
    if (workers == 0) workers = std::max<std::size_t>(1, std::thread::hardware_concurrency());
    workers = std::min(workers, count);
    if (workers <= 1) {
        for (std::size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&]() {
            for (std::size_t i = next.fetch_add(1); i < count; i = next.fetch_add(1)) fn(i);
        });
    }
    for (auto& t : pool) t.join();
}

struct EvalRows {
    std::vector<std::size_t> indices;
    DenseMatrix x;
    std::vector<int> truth;
};

EvalRows gather_rows(const Dataset& ds, const Mask& mask) {
    EvalRows rows;
    rows.indices = mask_indices(mask);
    rows.x = select_rows(ds.features, rows.indices);
    rows.truth.reserve(rows.indices.size());
    for (std::size_t i : rows.indices) rows.truth.push_back(ds.class_ids[i]);
    return rows;
}

SeedMetrics metrics_from_probs(const LabelMatrix& probs, const std::vector<int>& truth,
                               std::uint64_t seed) {
    SeedMetrics m;
    m.seed = seed;
    const std::vector<int> predicted = probs.argmax_rows();
    m.accuracy = accuracy(predicted, truth);
    m.macro_f1 = macro_f1(predicted, truth, probs.cols());
    // binary AUC only; multi-class AUC is out of scope and reported as 0
    m.auc = probs.cols() == 2 ? auc_binary(probs.column(1), truth) : 0.0;
    return m;
}

double val_accuracy_from_probs(const LabelMatrix& probs, const std::vector<int>& truth) {
    return accuracy(probs.argmax_rows(), truth);
}

// Per-seed outcome across every grid cell.
struct SeedOutcome {
    bool failed = false;
    std::string error;
    std::vector<double> val_acc;
    std::vector<SeedMetrics> test;
};

std::vector<TrainConfig> gcn_configs(const GridSpec& grid) {
    // the GCN is fixed at two layers, so the layer-count axis collapses
    std::vector<TrainConfig> out;
    for (const TrainConfig& cfg : grid.expand()) {
        TrainConfig reduced = cfg;
        reduced.hidden = {cfg.hidden.front()};
        const bool seen = std::any_of(out.begin(), out.end(), [&](const TrainConfig& c) {
            return c.hidden == reduced.hidden && c.learning_rate == reduced.learning_rate &&
                   c.dropout == reduced.dropout;
        });
        if (!seen) out.push_back(std::move(reduced));
    }
    return out;
}

DenseMatrix imputed_graph_features(const Dataset& ds, const std::vector<std::size_t>& rows) {
    const std::size_t d_g = ds.graph_dim();
    std::vector<double> means(d_g, 0.0);
    std::vector<std::size_t> counts(d_g, 0);
    for (std::size_t row : rows) {
        for (std::size_t j = 0; j < d_g; ++j) {
            if (!ds.graph_entry_observed(row, j)) continue;
            means[j] += ds.graph_features(row, j);
            ++counts[j];
        }
    }
    for (std::size_t j = 0; j < d_g; ++j) {
        if (counts[j] == 0) {
            throw UsageError("graph feature " + std::to_string(j) + " is observed in no given row");
        }
        means[j] /= static_cast<double>(counts[j]);
    }
    DenseMatrix out(rows.size(), d_g);
    for (std::size_t k = 0; k < rows.size(); ++k) {
        for (std::size_t j = 0; j < d_g; ++j) {
            out(k, j) = ds.graph_entry_observed(rows[k], j) ? ds.graph_features(rows[k], j) : means[j];
        }
    }
    return out;
}

std::vector<double> resolve_thresholds(const GraphSpec& spec, std::size_t d_g) {
    if (spec.thresholds.empty()) return std::vector<double>(d_g, spec.default_threshold);
    if (spec.thresholds.size() == 1) return std::vector<double>(d_g, spec.thresholds.front());
    if (spec.thresholds.size() != d_g) {
        throw UsageError("graph: got " + std::to_string(spec.thresholds.size()) +
                         " thresholds for " + std::to_string(d_g) + " graph features");
    }
    return spec.thresholds;
}

} // namespace

Method parse_method(const std::string& name) {
    if (name == "gkd") return Method::kGKD;
    if (name == "dnn") return Method::kDNN;
    if (name == "dnn-jfc") return Method::kDNNJFC;
    if (name == "gcn") return Method::kGCN;
    throw UsageError("unknown method \"" + name + "\" (expected gkd|dnn|dnn-jfc|gcn)");
}

std::string method_name(Method method) {
    switch (method) {
        case Method::kGKD: return "gkd";
        case Method::kDNN: return "dnn";
        case Method::kDNNJFC: return "dnn-jfc";
        case Method::kGCN: return "gcn";
    }
    return "unknown";
}

std::vector<TrainConfig> GridSpec::expand() const {
    if (hidden_layer_counts.empty() || hidden_widths.empty() || learning_rates.empty() ||
        dropouts.empty()) {
        throw UsageError("grid: every axis needs at least one value");
    }
    std::vector<TrainConfig> out;
    for (std::size_t layers : hidden_layer_counts) {
        if (layers < 1 || layers > 3) throw UsageError("grid: hidden layer count must be 1-3");
        for (std::size_t width : hidden_widths) {
            for (double lr : learning_rates) {
                for (double dropout : dropouts) {
                    TrainConfig cfg;
                    cfg.hidden.assign(layers, width);
                    cfg.learning_rate = lr;
                    cfg.dropout = dropout;
                    cfg.epochs = epochs;
                    cfg.validate();
                    out.push_back(std::move(cfg));
                }
            }
        }
    }
    return out;
}

GridSpec GridSpec::paper_grid() {
    GridSpec grid;
    grid.hidden_layer_counts = {1, 2, 3};
    grid.hidden_widths = {16, 64, 256};
    grid.learning_rates = {5e-3, 1e-2};
    grid.dropouts = {0.1, 0.3, 0.5};
    return grid;
}

std::string SelectedConfig::describe(Method method) const {
    std::ostringstream out;
    auto arch = [](const TrainConfig& cfg) {
        std::ostringstream s;
        s << "layers=[";
        for (std::size_t i = 0; i < cfg.hidden.size(); ++i) s << (i ? "," : "") << cfg.hidden[i];
        s << "] lr=" << cfg.learning_rate << " dropout=" << cfg.dropout;
        return s.str();
    };
    if (method == Method::kGKD) {
        out << "teacher{" << arch(teacher) << "} alpha=" << alpha << " student{" << arch(student)
            << "}";
    } else {
        out << arch(student);
    }
    return out.str();
}

Dataset prepare_dataset(const ExperimentConfig& cfg) {
    Dataset ds = cfg.data.synthetic
                     ? generate_synthetic(cfg.data.synth)
                     : load_csv_dataset(cfg.data.features_path, cfg.data.labels_path,
                                        cfg.data.graph_features_path);
    ds.splits = make_splits(ds.n(), cfg.split);
    ds.validate();
    return ds;
}

SparseGraph build_population_graph(const Dataset& ds, const std::vector<std::size_t>& rows,
                                   const GraphSpec& spec, std::uint64_t seed) {
    if (spec.mode == GraphSpec::Mode::kThreshold) {
        const std::vector<double> thresholds = resolve_thresholds(spec, ds.graph_dim());
        std::vector<SparseGraph> graphs;
        graphs.reserve(ds.graph_dim());
        for (std::size_t j = 0; j < ds.graph_dim(); ++j) {
            std::vector<std::optional<double>> values(rows.size());
            for (std::size_t k = 0; k < rows.size(); ++k) {
                if (ds.graph_entry_observed(rows[k], j)) values[k] = ds.graph_features(rows[k], j);
            }
            graphs.push_back(threshold_graph(values, thresholds[j]));
        }
        return union_graphs(graphs);
    }

    // similarity mode: autoencoder latent of the (imputed) graph features
    const DenseMatrix x_aux = imputed_graph_features(ds, rows);
    const LabelMatrix y = LabelMatrix::from_matrix(select_rows(ds.labels.matrix(), rows));
    Mask labeled(rows.size());
    for (std::size_t k = 0; k < rows.size(); ++k) labeled[k] = ds.splits.labeled[rows[k]];
    AutoencoderConfig ae = spec.autoencoder;
    ae.seed = mix_seed(seed, kAutoencoderStream);
    const AutoencoderResult embedded = autoencoder_embed(x_aux, y, labeled, ae);
    return similarity_graph(embedded.latent, spec.similarity_threshold);
}

std::string ExperimentConfig::fingerprint() const {
    json j;
    j["data"] = data.synthetic
                    ? json{{"synthetic", true},
                           {"n", data.synth.n},
                           {"d_node", data.synth.node_dim},
                           {"d_graph", data.synth.graph_dim},
                           {"informative_dims", data.synth.informative_dims},
                           {"class_sep", data.synth.class_sep},
                           {"p_missing", data.synth.p_missing},
                           {"seed", data.synth.seed}}
                    : json{{"synthetic", false},
                           {"features", data.features_path},
                           {"labels", data.labels_path},
                           {"graph_features", data.graph_features_path}};
    j["split"] = {{"train", split.train_fraction},
                  {"val", split.val_fraction},
                  {"test", split.test_fraction},
                  {"labeled", split.labeled_fraction},
                  {"seed", split.seed}};
    j["graph"] = {{"mode", graph.mode == GraphSpec::Mode::kThreshold ? "threshold" : "similarity"},
                  {"thresholds", graph.thresholds},
                  {"default_threshold", graph.default_threshold},
                  {"similarity_threshold", graph.similarity_threshold},
                  {"latent_dim", graph.autoencoder.latent_dim},
                  {"recon_weight", graph.autoencoder.recon_weight},
                  {"ae_lr", graph.autoencoder.learning_rate},
                  {"ae_epochs", graph.autoencoder.epochs}};
    j["method"] = method_name(method);
    j["teacher_grid"] = grid_json(teacher_grid);
    j["student_grid"] = grid_json(student_grid);
    j["alpha_grid"] = alpha_grid;
    j["lpa"] = {{"max_iterations", lpa.max_iterations}, {"tolerance", lpa.tolerance}};
    j["seeds"] = seeds;
    j["transductive"] = transductive;
    return fnv1a_hex(j.dump());
}

TrialRun run_trials(const ExperimentConfig& cfg, const std::vector<std::uint64_t>& seeds) {
    return run_trials_on_dataset(cfg, prepare_dataset(cfg), seeds);
}

TrialRun run_trials_on_dataset(const ExperimentConfig& cfg, const Dataset& ds,
                               const std::vector<std::uint64_t>& seeds,
                               const std::string& fingerprint_override) {
    if (seeds.empty()) throw UsageError("run_trials: at least one seed required");
    cfg.lpa.validate();
    for (double a : cfg.alpha_grid) {
        if (!(a > 0.0 && a <= 1.0)) throw UsageError("alpha grid values must be in (0, 1]");
    }
    ds.validate();
    if (ds.splits.empty()) throw UsageError("run_trials: dataset has no splits");
    const std::string fingerprint =
        fingerprint_override.empty() ? cfg.fingerprint() : fingerprint_override;

    TrialRun run;
    if (ds.num_classes() != 2) {
        run.warnings.push_back("binary AUC is undefined for " + std::to_string(ds.num_classes()) +
                               " classes; reported as 0");
    }

    const TrainView view = make_train_view(ds);
    const EvalRows val_rows = gather_rows(ds, ds.splits.val);
    const EvalRows test_rows = gather_rows(ds, ds.splits.test);
    const std::vector<std::size_t> all_rows = [&]() {
        std::vector<std::size_t> idx(ds.n());
        for (std::size_t i = 0; i < ds.n(); ++i) idx[i] = i;
        return idx;
    }();

    const bool needs_graph = cfg.method == Method::kGKD || cfg.method == Method::kGCN;
    const std::vector<std::size_t>& graph_rows = cfg.transductive ? all_rows : view.train_indices;
    const bool graph_per_seed = cfg.graph.mode == GraphSpec::Mode::kSimilarity;
    SparseGraph shared_graph;
    if (needs_graph && !graph_per_seed) {
        shared_graph = build_population_graph(ds, graph_rows, cfg.graph, 0);
    }

    const std::vector<TrainConfig> teacher_cfgs =
        cfg.method == Method::kGKD ? cfg.teacher_grid.expand() : std::vector<TrainConfig>{};
    const std::vector<TrainConfig> student_cfgs =
        cfg.method == Method::kGCN ? gcn_configs(cfg.student_grid) : cfg.student_grid.expand();
    const std::vector<double> alphas =
        cfg.method == Method::kGKD ? cfg.alpha_grid : std::vector<double>{0.0};

    std::size_t cell_count = 0;
    switch (cfg.method) {
        case Method::kGKD:
            cell_count = cfg.transductive ? teacher_cfgs.size() * alphas.size()
                                          : teacher_cfgs.size() * alphas.size() * student_cfgs.size();
            break;
        default:
            cell_count = student_cfgs.size();
            break;
    }

    std::vector<SeedOutcome> outcomes(seeds.size());
    auto evaluate_seed = [&](std::size_t seed_idx) {
        SeedOutcome& outcome = outcomes[seed_idx];
        const std::uint64_t seed = seeds[seed_idx];
        try {
            outcome.val_acc.reserve(cell_count);
            outcome.test.reserve(cell_count);
            SparseGraph local_graph;
            const SparseGraph* graph = &shared_graph;
            if (needs_graph && graph_per_seed) {
                local_graph = build_population_graph(ds, graph_rows, cfg.graph, seed);
                graph = &local_graph;
            }

            auto record = [&](const LabelMatrix& val_probs, const LabelMatrix& test_probs) {
                outcome.val_acc.push_back(val_accuracy_from_probs(val_probs, val_rows.truth));
                outcome.test.push_back(metrics_from_probs(test_probs, test_rows.truth, seed));
            };

            switch (cfg.method) {
                case Method::kGKD: {
                    const PropagationOperator p = row_normalize(*graph);
                    for (const TrainConfig& t_base : teacher_cfgs) {
                        TrainConfig t_cfg = t_base;
                        t_cfg.seed = seed;
                        const MLPParams teacher =
                            train_teacher(view.x, view.y, view.labeled, t_cfg);
                        const LabelMatrix y0 =
                            cfg.transductive
                                ? pseudo_label(teacher, ds.features, ds.labels, ds.splits.labeled)
                                : pseudo_label(teacher, view.x, view.y, view.labeled);
                        for (double alpha : alphas) {
                            LPAConfig lpa = cfg.lpa;
                            lpa.alpha = alpha;
                            if (cfg.transductive) {
                                // graph available at inference: the propagated
                                // teacher labels are the predictions
                                const LabelMatrix yt =
                                    propagate(p, y0, ds.labels, ds.splits.labeled, lpa);
                                DenseMatrix val_m = select_rows(yt.matrix(), val_rows.indices);
                                DenseMatrix test_m = select_rows(yt.matrix(), test_rows.indices);
                                record(LabelMatrix::from_matrix(std::move(val_m)),
                                       LabelMatrix::from_matrix(std::move(test_m)));
                                continue;
                            }
                            const LabelMatrix yt = propagate(p, y0, view.y, view.labeled, lpa);
                            for (const TrainConfig& s_base : student_cfgs) {
                                TrainConfig s_cfg = s_base;
                                s_cfg.seed = seed;
                                const MLPParams student =
                                    train_mlp(view.x, yt, full_mask(view.x.rows()), s_cfg);
                                record(predict_mlp(student, val_rows.x),
                                       predict_mlp(student, test_rows.x));
                            }
                        }
                    }
                    break;
                }
                case Method::kDNN: {
                    for (const TrainConfig& base : student_cfgs) {
                        TrainConfig c = base;
                        c.seed = seed;
                        const MLPParams net = train_teacher(view.x, view.y, view.labeled, c);
                        record(predict_mlp(net, val_rows.x), predict_mlp(net, test_rows.x));
                    }
                    break;
                }
                case Method::kDNNJFC: {
                    const std::size_t d_g = ds.graph_dim();
                    auto gather_graph = [&](const std::vector<std::size_t>& idx, DenseMatrix& g,
                                            std::vector<std::uint8_t>& obs) {
                        g = DenseMatrix(idx.size(), d_g);
                        obs.assign(idx.size() * d_g, 0);
                        for (std::size_t k = 0; k < idx.size(); ++k) {
                            for (std::size_t j = 0; j < d_g; ++j) {
                                g(k, j) = ds.graph_features(idx[k], j);
                                obs[k * d_g + j] = ds.graph_observed[idx[k] * d_g + j];
                            }
                        }
                    };
                    DenseMatrix g_val, g_test;
                    std::vector<std::uint8_t> obs_val, obs_test;
                    if (cfg.transductive) {
                        gather_graph(val_rows.indices, g_val, obs_val);
                        gather_graph(test_rows.indices, g_test, obs_test);
                    }
                    for (const TrainConfig& base : student_cfgs) {
                        TrainConfig c = base;
                        c.seed = seed;
                        const JFCModel model = dnn_jfc_baseline(ds, c);
                        if (cfg.transductive) {
                            record(predict_jfc(model, val_rows.x, &g_val, &obs_val),
                                   predict_jfc(model, test_rows.x, &g_test, &obs_test));
                        } else {
                            // graph modality unavailable at inference
                            record(predict_jfc(model, val_rows.x), predict_jfc(model, test_rows.x));
                        }
                    }
                    break;
                }
                case Method::kGCN: {
                    const PropagationOperator a_hat = sym_normalize(*graph);
                    for (const TrainConfig& base : student_cfgs) {
                        TrainConfig c = base;
                        c.seed = seed;
                        if (cfg.transductive) {
                            Mask supervised(ds.n(), 0);
                            for (std::size_t i = 0; i < ds.n(); ++i) {
                                supervised[i] = ds.splits.labeled[i];
                            }
                            const GCNModel model =
                                train_gcn(ds.features, ds.labels, supervised, a_hat, c);
                            const LabelMatrix full =
                                gcn_predict_with_graph(model, a_hat, ds.features);
                            DenseMatrix val_m = select_rows(full.matrix(), val_rows.indices);
                            DenseMatrix test_m = select_rows(full.matrix(), test_rows.indices);
                            record(LabelMatrix::from_matrix(std::move(val_m)),
                                   LabelMatrix::from_matrix(std::move(test_m)));
                        } else {
                            const GCNModel model = gcn_baseline(ds, *graph, c);
                            record(gcn_predict_isolated(model, val_rows.x),
                                   gcn_predict_isolated(model, test_rows.x));
                        }
                    }
                    break;
                }
            }
        } catch (const std::exception& e) {
            outcome = SeedOutcome{};
            outcome.failed = true;
            outcome.error = e.what();
        }
    };

    parallel_for(seeds.size(), cfg.workers, evaluate_seed);

    // select the cell with the best mean validation accuracy over completed seeds
    std::size_t best_cell = 0;
    double best_mean = -1.0;
    std::size_t completed = 0;
    for (const auto& o : outcomes) completed += !o.failed;
    if (completed > 0) {
        for (std::size_t cell = 0; cell < cell_count; ++cell) {
            double sum = 0.0;
            for (const auto& o : outcomes) {
                if (!o.failed) sum += o.val_acc[cell];
            }
            const double mean = sum / static_cast<double>(completed);
            if (mean > best_mean) {
                best_mean = mean;
                best_cell = cell;
            }
        }
    }

    std::vector<SeedMetrics> per_seed(seeds.size());
    for (std::size_t i = 0; i < seeds.size(); ++i) {
        if (outcomes[i].failed) {
            per_seed[i].seed = seeds[i];
            per_seed[i].failed = true;
            per_seed[i].error = outcomes[i].error;
            run.warnings.push_back("seed " + std::to_string(seeds[i]) +
                                   " failed: " + outcomes[i].error);
        } else {
            per_seed[i] = outcomes[i].test[best_cell];
        }
    }
    run.report = MetricsReport::aggregate(std::move(per_seed), fingerprint);

    run.selected.mean_val_accuracy = std::max(best_mean, 0.0);
    switch (cfg.method) {
        case Method::kGKD: {
            if (cfg.transductive) {
                const std::size_t t = best_cell / alphas.size();
                const std::size_t a = best_cell % alphas.size();
                run.selected.teacher = teacher_cfgs[t];
                run.selected.alpha = alphas[a];
                run.selected.student = teacher_cfgs[t];
            } else {
                const std::size_t per_teacher = alphas.size() * student_cfgs.size();
                const std::size_t t = best_cell / per_teacher;
                const std::size_t a = (best_cell % per_teacher) / student_cfgs.size();
                const std::size_t s = best_cell % student_cfgs.size();
                run.selected.teacher = teacher_cfgs[t];
                run.selected.alpha = alphas[a];
                run.selected.student = student_cfgs[s];
            }
            break;
        }
        default:
            run.selected.student = student_cfgs[best_cell];
            break;
    }

    // best seed for model export: highest validation accuracy of the chosen cell
    run.best_seed = seeds.front();
    double best_seed_val = -1.0;
    for (std::size_t i = 0; i < seeds.size(); ++i) {
        if (outcomes[i].failed) continue;
        if (outcomes[i].val_acc[best_cell] > best_seed_val) {
            best_seed_val = outcomes[i].val_acc[best_cell];
            run.best_seed = seeds[i];
        }
    }

    for (const auto& w : run.warnings) std::cerr << "gkd: warning: " << w << "\n";
    return run;
}

SweepResult sweep_missing(const ExperimentConfig& cfg, const std::vector<double>& p_list,
                          const std::vector<Method>& methods) {
    if (p_list.empty()) throw UsageError("sweep: p list is empty");
    if (methods.empty()) throw UsageError("sweep: method list is empty");
    for (double p : p_list) {
        if (!(p >= 0.0 && p < 1.0)) throw UsageError("sweep: p values must be in [0, 1)");
    }

    const Dataset base = prepare_dataset(cfg);
    SweepResult result;
    result.p_values = p_list;
    result.methods = methods;
    for (std::size_t pi = 0; pi < p_list.size(); ++pi) {
        Dataset ds = base;
        apply_missing(ds.graph_features, ds.graph_observed, p_list[pi],
                      mix_seed(cfg.split.seed, kSweepMissingStream + pi));
        for (Method method : methods) {
            ExperimentConfig cell_cfg = cfg;
            cell_cfg.method = method;
            SweepCell cell;
            cell.p_missing = p_list[pi];
            cell.method = method;
            std::ostringstream tag;
            tag << cell_cfg.fingerprint() << "+p=" << std::setprecision(17) << p_list[pi];
            cell.run = run_trials_on_dataset(cell_cfg, ds, cell_cfg.seeds, fnv1a_hex(tag.str()));
            result.cells.push_back(std::move(cell));
        }
    }
    return result;
}

// ---- config file ----

namespace {

json config_to_json(const ExperimentConfig& cfg) {
    json j;
    if (cfg.data.synthetic) {
        j["data"] = {{"synthetic", true},
                     {"n", cfg.data.synth.n},
                     {"d_node", cfg.data.synth.node_dim},
                     {"d_graph", cfg.data.synth.graph_dim},
                     {"informative_dims", cfg.data.synth.informative_dims},
                     {"class_sep", cfg.data.synth.class_sep},
                     {"p_missing", cfg.data.synth.p_missing},
                     {"seed", cfg.data.synth.seed}};
    } else {
        j["data"] = {{"synthetic", false},
                     {"features", cfg.data.features_path},
                     {"labels", cfg.data.labels_path},
                     {"graph_features", cfg.data.graph_features_path}};
    }
    j["split"] = {{"train", cfg.split.train_fraction},
                  {"val", cfg.split.val_fraction},
                  {"test", cfg.split.test_fraction},
                  {"labeled", cfg.split.labeled_fraction},
                  {"seed", cfg.split.seed}};
    j["graph"] = {
        {"mode", cfg.graph.mode == GraphSpec::Mode::kThreshold ? "threshold" : "similarity"},
        {"thresholds", cfg.graph.thresholds},
        {"default_threshold", cfg.graph.default_threshold},
        {"similarity_threshold", cfg.graph.similarity_threshold},
        {"autoencoder",
         {{"latent_dim", cfg.graph.autoencoder.latent_dim},
          {"recon_weight", cfg.graph.autoencoder.recon_weight},
          {"learning_rate", cfg.graph.autoencoder.learning_rate},
          {"epochs", cfg.graph.autoencoder.epochs}}}};
    j["method"] = method_name(cfg.method);
    j["teacher_grid"] = grid_json(cfg.teacher_grid);
    j["student_grid"] = grid_json(cfg.student_grid);
    j["alpha_grid"] = cfg.alpha_grid;
    j["lpa"] = {{"max_iterations", cfg.lpa.max_iterations}, {"tolerance", cfg.lpa.tolerance}};
    j["seeds"] = cfg.seeds;
    j["transductive"] = cfg.transductive;
    j["workers"] = cfg.workers;
    j["out_dir"] = cfg.out_dir;
    return j;
}

ExperimentConfig config_from_json(const json& j) {
    ExperimentConfig cfg;
    for (const auto& [key, value] : j.items()) {
        if (key == "data") {
            for (const auto& [dk, dv] : value.items()) {
                if (dk == "synthetic") cfg.data.synthetic = dv.get<bool>();
                else if (dk == "n") cfg.data.synth.n = dv.get<std::size_t>();
                else if (dk == "d_node") cfg.data.synth.node_dim = dv.get<std::size_t>();
                else if (dk == "d_graph") cfg.data.synth.graph_dim = dv.get<std::size_t>();
                else if (dk == "informative_dims") cfg.data.synth.informative_dims = dv.get<std::size_t>();
                else if (dk == "class_sep") cfg.data.synth.class_sep = dv.get<double>();
                else if (dk == "p_missing") cfg.data.synth.p_missing = dv.get<double>();
                else if (dk == "seed") cfg.data.synth.seed = dv.get<std::uint64_t>();
                else if (dk == "features") cfg.data.features_path = dv.get<std::string>();
                else if (dk == "labels") cfg.data.labels_path = dv.get<std::string>();
                else if (dk == "graph_features") cfg.data.graph_features_path = dv.get<std::string>();
                else throw ParseError("config: unknown data key \"" + dk + "\"");
            }
        } else if (key == "split") {
            for (const auto& [sk, sv] : value.items()) {
                if (sk == "train") cfg.split.train_fraction = sv.get<double>();
                else if (sk == "val") cfg.split.val_fraction = sv.get<double>();
                else if (sk == "test") cfg.split.test_fraction = sv.get<double>();
                else if (sk == "labeled") cfg.split.labeled_fraction = sv.get<double>();
                else if (sk == "seed") cfg.split.seed = sv.get<std::uint64_t>();
                else throw ParseError("config: unknown split key \"" + sk + "\"");
            }
        } else if (key == "graph") {
            for (const auto& [gk, gv] : value.items()) {
                if (gk == "mode") {
                    const std::string mode = gv.get<std::string>();
                    if (mode == "threshold") cfg.graph.mode = GraphSpec::Mode::kThreshold;
                    else if (mode == "similarity") cfg.graph.mode = GraphSpec::Mode::kSimilarity;
                    else throw ParseError("config: unknown graph mode \"" + mode + "\"");
                } else if (gk == "thresholds") {
                    cfg.graph.thresholds = gv.get<std::vector<double>>();
                } else if (gk == "default_threshold") {
                    cfg.graph.default_threshold = gv.get<double>();
                } else if (gk == "similarity_threshold") {
                    cfg.graph.similarity_threshold = gv.get<double>();
                } else if (gk == "autoencoder") {
                    for (const auto& [ak, av] : gv.items()) {
                        if (ak == "latent_dim") cfg.graph.autoencoder.latent_dim = av.get<std::size_t>();
                        else if (ak == "recon_weight") cfg.graph.autoencoder.recon_weight = av.get<double>();
                        else if (ak == "learning_rate") cfg.graph.autoencoder.learning_rate = av.get<double>();
                        else if (ak == "epochs") cfg.graph.autoencoder.epochs = av.get<std::size_t>();
                        else throw ParseError("config: unknown autoencoder key \"" + ak + "\"");
                    }
                } else {
                    throw ParseError("config: unknown graph key \"" + gk + "\"");
                }
            }
        } else if (key == "method") {
            cfg.method = parse_method(value.get<std::string>());
        } else if (key == "teacher_grid") {
            cfg.teacher_grid = grid_from_json(value, cfg.teacher_grid);
        } else if (key == "student_grid") {
            cfg.student_grid = grid_from_json(value, cfg.student_grid);
        } else if (key == "alpha_grid") {
            cfg.alpha_grid = value.get<std::vector<double>>();
        } else if (key == "lpa") {
            for (const auto& [lk, lv] : value.items()) {
                if (lk == "max_iterations") cfg.lpa.max_iterations = lv.get<std::size_t>();
                else if (lk == "tolerance") cfg.lpa.tolerance = lv.get<double>();
                else throw ParseError("config: unknown lpa key \"" + lk + "\"");
            }
        } else if (key == "seeds") {
            cfg.seeds = value.get<std::vector<std::uint64_t>>();
        } else if (key == "transductive") {
            cfg.transductive = value.get<bool>();
        } else if (key == "workers") {
            cfg.workers = value.get<std::size_t>();
        } else if (key == "out_dir") {
            cfg.out_dir = value.get<std::string>();
        } else {
            throw ParseError("config: unknown key \"" + key + "\"");
        }
    }
    return cfg;
}

json seed_metrics_json(const SeedMetrics& m) {
    json j{{"seed", m.seed}, {"failed", m.failed}};
    if (m.failed) {
        j["error"] = m.error;
    } else {
        j["accuracy"] = m.accuracy;
        j["macro_f1"] = m.macro_f1;
        j["auc"] = m.auc;
    }
    return j;
}

json aggregate_json(const MetricsReport& report) {
    return json{
        {"accuracy", {{"mean", report.accuracy.mean}, {"stddev", report.accuracy.stddev}}},
        {"macro_f1", {{"mean", report.macro_f1.mean}, {"stddev", report.macro_f1.stddev}}},
        {"auc", {{"mean", report.auc.mean}, {"stddev", report.auc.stddev}}},
        {"completed_seeds", report.completed()}};
}

json trial_run_json(const TrialRun& run, const ExperimentConfig& cfg) {
    json j;
    j["method"] = method_name(cfg.method);
    j["config_fingerprint"] = run.report.config_fingerprint;
    json selected{{"student", train_config_json(run.selected.student)},
                  {"mean_val_accuracy", run.selected.mean_val_accuracy}};
    if (cfg.method == Method::kGKD) {
        selected["teacher"] = train_config_json(run.selected.teacher);
        selected["alpha"] = run.selected.alpha;
    }
    j["selected_config"] = selected;
    j["per_seed"] = json::array();
    for (const auto& m : run.report.per_seed) j["per_seed"].push_back(seed_metrics_json(m));
    j["aggregate"] = aggregate_json(run.report);
    j["warnings"] = run.warnings;
    return j;
}

void write_json_file(const json& j, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open for writing: " + path);
    out << j.dump(2) << "\n";
    if (!out) throw IoError("write failed: " + path);
}

json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open: " + path);
    json j;
    try {
        in >> j;
    } catch (const json::parse_error& e) {
        throw ParseError(path + ": " + e.what());
    }
    return j;
}

void append_csv_rows(std::ostream& out, const TrialRun& run, const ExperimentConfig& cfg,
                     double p_missing) {
    for (const auto& m : run.report.per_seed) {
        out << method_name(cfg.method) << ",";
        if (p_missing >= 0.0) out << std::setprecision(17) << p_missing;
        out << "," << run.report.config_fingerprint << "," << m.seed << ",";
        if (m.failed) {
            out << ",,,failed\n";
        } else {
            out << std::setprecision(17) << m.accuracy << "," << m.macro_f1 << "," << m.auc
                << ",ok\n";
        }
    }
}

constexpr const char* kCsvHeader = "method,p_missing,config_fingerprint,seed,accuracy,macro_f1,auc,status\n";

} // namespace

ExperimentConfig load_experiment_config(const std::string& path) {
    return config_from_json(read_json_file(path));
}

void write_experiment_config(const ExperimentConfig& cfg, const std::string& path) {
    write_json_file(config_to_json(cfg), path);
}

void write_report_json(const TrialRun& run, const ExperimentConfig& cfg, const std::string& path) {
    json j = trial_run_json(run, cfg);
    j["schema"] = "gkd-report-v1";
    j["timestamp"] = iso_timestamp();
    write_json_file(j, path);
}

void write_report_csv(const TrialRun& run, const ExperimentConfig& cfg, const std::string& path,
                      double p_missing, bool append) {
    std::ofstream out(path, append ? std::ios::app : std::ios::trunc);
    if (!out) throw IoError("cannot open for writing: " + path);
    if (!append) out << kCsvHeader;
    append_csv_rows(out, run, cfg, p_missing);
    if (!out) throw IoError("write failed: " + path);
}

void write_sweep_report(const SweepResult& sweep, const ExperimentConfig& cfg,
                        const std::string& json_path, const std::string& csv_path) {
    json j;
    j["schema"] = "gkd-sweep-v1";
    j["timestamp"] = iso_timestamp();
    j["p_values"] = sweep.p_values;
    j["methods"] = json::array();
    for (Method m : sweep.methods) j["methods"].push_back(method_name(m));
    j["cells"] = json::array();
    for (const auto& cell : sweep.cells) {
        ExperimentConfig cell_cfg = cfg;
        cell_cfg.method = cell.method;
        json c = trial_run_json(cell.run, cell_cfg);
        c["p_missing"] = cell.p_missing;
        j["cells"].push_back(std::move(c));
    }
    write_json_file(j, json_path);

    std::ofstream out(csv_path);
    if (!out) throw IoError("cannot open for writing: " + csv_path);
    out << kCsvHeader;
    for (const auto& cell : sweep.cells) {
        ExperimentConfig cell_cfg = cfg;
        cell_cfg.method = cell.method;
        append_csv_rows(out, cell.run, cell_cfg, cell.p_missing);
    }
    if (!out) throw IoError("write failed: " + csv_path);
}

// ---- CLI command bodies ----

int cmd_synth(const SyntheticSpec& spec, const std::string& out_dir) {
    fs::create_directories(out_dir);
    const Dataset ds = generate_synthetic(spec);
    const std::string features = (fs::path(out_dir) / "features.csv").string();
    const std::string labels = (fs::path(out_dir) / "labels.csv").string();
    const std::string graph = (fs::path(out_dir) / "graph_features.csv").string();
    save_csv_dataset(ds, features, labels, graph);
    std::cout << "wrote " << features << ", " << labels << ", " << graph << " (" << ds.n()
              << " rows)\n";
    return 0;
}

namespace {

void save_best_model(const TrialRun& run, const ExperimentConfig& cfg, const Dataset& ds,
                     const std::string& path) {
    TrainConfig student = run.selected.student;
    student.seed = run.best_seed;
    switch (cfg.method) {
        case Method::kGKD: {
            TrainConfig teacher = run.selected.teacher;
            teacher.seed = run.best_seed;
            LPAConfig lpa = cfg.lpa;
            lpa.alpha = run.selected.alpha;
            const TrainView view = make_train_view(ds);
            const SparseGraph graph =
                build_population_graph(ds, view.train_indices, cfg.graph, run.best_seed);
            save_model(SavedModel::wrap(gkd_train(ds, graph, teacher, lpa, student)), path);
            break;
        }
        case Method::kDNN:
            save_model(SavedModel::wrap(dnn_baseline(ds, student)), path);
            break;
        case Method::kDNNJFC:
            save_model(SavedModel::wrap(dnn_jfc_baseline(ds, student)), path);
            break;
        case Method::kGCN: {
            const TrainView view = make_train_view(ds);
            const SparseGraph graph =
                build_population_graph(ds, view.train_indices, cfg.graph, run.best_seed);
            save_model(SavedModel::wrap(gcn_baseline(ds, graph, student)), path);
            break;
        }
    }
}

void write_seed_logs(const TrialRun& run, const ExperimentConfig& cfg, const std::string& dir) {
    fs::create_directories(dir);
    for (const auto& m : run.report.per_seed) {
        json j = seed_metrics_json(m);
        j["method"] = method_name(cfg.method);
        j["config_fingerprint"] = run.report.config_fingerprint;
        j["selected_config"] = run.selected.describe(cfg.method);
        write_json_file(j, (fs::path(dir) / ("seed_" + std::to_string(m.seed) + ".json")).string());
    }
}

} // namespace

int cmd_train(const ExperimentConfig& cfg) {
    if (cfg.out_dir.empty()) throw UsageError("train: an output directory is required");
    fs::create_directories(cfg.out_dir);
    write_experiment_config(cfg, (fs::path(cfg.out_dir) / "config.json").string());

    const Dataset ds = prepare_dataset(cfg);
    const TrialRun run = run_trials_on_dataset(cfg, ds, cfg.seeds);

    write_report_json(run, cfg, (fs::path(cfg.out_dir) / "report.json").string());
    const double p = cfg.data.synthetic ? cfg.data.synth.p_missing : -1.0;
    write_report_csv(run, cfg, (fs::path(cfg.out_dir) / "report.csv").string(), p);
    write_seed_logs(run, cfg, (fs::path(cfg.out_dir) / "logs").string());

    if (run.report.completed() > 0 && !cfg.transductive) {
        save_best_model(run, cfg, ds, (fs::path(cfg.out_dir) / "model.gkd").string());
    }
    std::cout << method_name(cfg.method) << ": accuracy " << run.report.accuracy.mean << " +/- "
              << run.report.accuracy.stddev << ", macro_f1 " << run.report.macro_f1.mean
              << " +/- " << run.report.macro_f1.stddev << ", auc " << run.report.auc.mean
              << " +/- " << run.report.auc.stddev << " (" << run.report.completed() << "/"
              << run.report.per_seed.size() << " seeds)\n";
    return run.report.all_completed() ? 0 : 3;
}

int cmd_sweep_missing(const ExperimentConfig& cfg, const std::vector<double>& p_list,
                      const std::vector<Method>& methods) {
    if (cfg.out_dir.empty()) throw UsageError("sweep: an output directory is required");
    fs::create_directories(cfg.out_dir);
    write_experiment_config(cfg, (fs::path(cfg.out_dir) / "config.json").string());

    const SweepResult sweep = sweep_missing(cfg, p_list, methods);
    write_sweep_report(sweep, cfg, (fs::path(cfg.out_dir) / "sweep_report.json").string(),
                       (fs::path(cfg.out_dir) / "sweep_report.csv").string());

    bool all_ok = true;
    for (const auto& cell : sweep.cells) {
        std::ostringstream name;
        name << "cell_p" << cell.p_missing << "_" << method_name(cell.method);
        const fs::path dir = fs::path(cfg.out_dir) / name.str();
        fs::create_directories(dir);
        ExperimentConfig cell_cfg = cfg;
        cell_cfg.method = cell.method;
        write_report_json(cell.run, cell_cfg, (dir / "report.json").string());
        write_report_csv(cell.run, cell_cfg, (dir / "report.csv").string(), cell.p_missing);
        write_seed_logs(cell.run, cell_cfg, (dir / "logs").string());
        all_ok = all_ok && cell.run.report.all_completed();
        std::cout << method_name(cell.method) << " p=" << cell.p_missing << ": accuracy "
                  << cell.run.report.accuracy.mean << ", macro_f1 "
                  << cell.run.report.macro_f1.mean << ", auc " << cell.run.report.auc.mean << "\n";
    }
    return all_ok ? 0 : 3;
}

int cmd_evaluate(const std::string& model_path, const std::string& features_path,
                 const std::string& labels_path, const std::string& report_path) {
    const SavedModel model = load_model(model_path);
    const DenseMatrix x = load_csv_matrix(features_path);
    const std::vector<int> truth = load_csv_labels(labels_path);
    if (truth.size() != x.rows()) {
        throw UsageError("evaluate: labels row count does not match features");
    }
    const LabelMatrix probs = predict_model(model, x);
    const SeedMetrics m = metrics_from_probs(probs, truth, 0);

    json j;
    j["schema"] = "gkd-eval-v1";
    j["timestamp"] = iso_timestamp();
    j["model"] = model_path;
    j["model_kind"] = model_kind_name(model.kind);
    j["rows"] = x.rows();
    j["accuracy"] = m.accuracy;
    j["macro_f1"] = m.macro_f1;
    j["auc"] = m.auc;
    std::cout << "accuracy " << m.accuracy << ", macro_f1 " << m.macro_f1 << ", auc " << m.auc
              << "\n";
    if (!report_path.empty()) write_json_file(j, report_path);
    return 0;
}

} // namespace gkd

