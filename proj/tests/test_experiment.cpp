#include "gkd/errors.hpp"
#include "gkd/experiment.hpp"

#include <doctest.h>
#include <json.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>

using namespace gkd;
using nlohmann::json;

namespace {

struct TempDir {
    std::filesystem::path path;
    explicit TempDir(const std::string& name)
        : path(std::filesystem::temp_directory_path() / name) {
        std::filesystem::remove_all(path);
        std::filesystem::create_directories(path);
    }
    ~TempDir() { std::filesystem::remove_all(path); }
    std::string file(const std::string& name) const { return (path / name).string(); }
};

// small, fast, separable experiment configuration
ExperimentConfig small_experiment(Method method) {
    ExperimentConfig cfg;
    cfg.method = method;
    cfg.data.synth.n = 100;
    cfg.data.synth.node_dim = 6;
    cfg.data.synth.graph_dim = 2;
    cfg.data.synth.informative_dims = 3;
    cfg.data.synth.class_sep = 1.5;
    cfg.data.synth.seed = 7;
    cfg.split.labeled_fraction = 0.5;
    cfg.split.seed = 3;
    cfg.teacher_grid.hidden_layer_counts = {1};
    cfg.teacher_grid.hidden_widths = {8};
    cfg.teacher_grid.dropouts = {0.1};
    cfg.teacher_grid.epochs = 40;
    cfg.student_grid = cfg.teacher_grid;
    cfg.alpha_grid = {0.5};
    cfg.graph.default_threshold = 0.8;
    cfg.seeds = {1, 2};
    cfg.workers = 1;
    return cfg;
}

json read_json(const std::string& path) {
    std::ifstream in(path);
    REQUIRE(in);
    json j;
    in >> j;
    return j;
}

} // namespace

TEST_CASE("grid expansion order and paper grid dimensions") {
    GridSpec grid;
    grid.hidden_layer_counts = {1, 2};
    grid.hidden_widths = {4, 8};
    grid.learning_rates = {0.01};
    grid.dropouts = {0.1, 0.3};
    const auto configs = grid.expand();
    CHECK(configs.size() == 8);
    CHECK(configs[0].hidden == std::vector<std::size_t>{4});
    CHECK(configs[0].dropout == 0.1);
    CHECK(configs[1].dropout == 0.3);
    CHECK(configs[2].hidden == std::vector<std::size_t>{8});
    CHECK(configs[4].hidden == std::vector<std::size_t>{4, 4});

    CHECK(GridSpec::paper_grid().expand().size() == 3 * 3 * 2 * 3);

    GridSpec bad;
    bad.hidden_layer_counts = {4};
    CHECK_THROWS_AS(bad.expand(), UsageError);
}

TEST_CASE("run_trials: single seed has zero stddev, duplicate seeds are identical") {
    ExperimentConfig cfg = small_experiment(Method::kDNN);

    cfg.seeds = {5};
    const TrialRun one = run_trials(cfg, cfg.seeds);
    CHECK(one.report.per_seed.size() == 1);
    CHECK(one.report.accuracy.stddev == 0.0);
    CHECK(one.report.accuracy.mean == one.report.per_seed[0].accuracy);

    cfg.seeds = {5, 5};
    const TrialRun dup = run_trials(cfg, cfg.seeds);
    CHECK(dup.report.per_seed[0].accuracy == dup.report.per_seed[1].accuracy);
    CHECK(dup.report.per_seed[0].auc == dup.report.per_seed[1].auc);
    CHECK(dup.report.per_seed[0].accuracy == one.report.per_seed[0].accuracy);
}

TEST_CASE("run_trials aggregate equals hand recomputation over per-seed values") {
    ExperimentConfig cfg = small_experiment(Method::kDNN);
    cfg.seeds = {1, 2, 3, 4, 5};
    const TrialRun run = run_trials(cfg, cfg.seeds);
    REQUIRE(run.report.completed() == 5);
    double mean = 0.0;
    for (const auto& m : run.report.per_seed) mean += m.accuracy;
    mean /= 5.0;
    double sq = 0.0;
    for (const auto& m : run.report.per_seed) sq += (m.accuracy - mean) * (m.accuracy - mean);
    CHECK(run.report.accuracy.mean == doctest::Approx(mean).epsilon(1e-15));
    CHECK(run.report.accuracy.stddev == doctest::Approx(std::sqrt(sq / 4.0)).epsilon(1e-12));
}

TEST_CASE("GKD with alpha 1 and full labels matches the DNN report bitwise") {
    ExperimentConfig dnn_cfg = small_experiment(Method::kDNN);
    dnn_cfg.split.labeled_fraction = 1.0;
    const TrialRun dnn = run_trials(dnn_cfg, dnn_cfg.seeds);

    ExperimentConfig gkd_cfg = small_experiment(Method::kGKD);
    gkd_cfg.split.labeled_fraction = 1.0;
    gkd_cfg.alpha_grid = {1.0};
    const TrialRun gkd = run_trials(gkd_cfg, gkd_cfg.seeds);

    REQUIRE(gkd.report.per_seed.size() == dnn.report.per_seed.size());
    for (std::size_t i = 0; i < gkd.report.per_seed.size(); ++i) {
        CHECK(gkd.report.per_seed[i].accuracy == dnn.report.per_seed[i].accuracy);
        CHECK(gkd.report.per_seed[i].macro_f1 == dnn.report.per_seed[i].macro_f1);
        CHECK(gkd.report.per_seed[i].auc == dnn.report.per_seed[i].auc);
    }
}

TEST_CASE("run_trials marks failing seeds and aggregates the rest") {
    ExperimentConfig cfg = small_experiment(Method::kDNN);
    Dataset ds = prepare_dataset(cfg);
    // remove class 1 from the labeled rows: every seed must fail
    for (std::size_t i = 0; i < ds.n(); ++i) {
        if (ds.class_ids[i] == 1) ds.splits.labeled[i] = 0;
    }
    const TrialRun run = run_trials_on_dataset(cfg, ds, {1, 2});
    CHECK(run.report.completed() == 0);
    for (const auto& m : run.report.per_seed) {
        CHECK(m.failed);
        CHECK(!m.error.empty());
    }
    CHECK(!run.warnings.empty());
}

TEST_CASE("every method runs end to end, inductive and transductive") {
    for (Method method : {Method::kGKD, Method::kDNN, Method::kDNNJFC, Method::kGCN}) {
        for (bool transductive : {false, true}) {
            ExperimentConfig cfg = small_experiment(method);
            cfg.seeds = {1};
            cfg.transductive = transductive;
            const TrialRun run = run_trials(cfg, cfg.seeds);
            REQUIRE(run.report.completed() == 1);
            CHECK(run.report.per_seed[0].accuracy >= 0.0);
            CHECK(run.report.per_seed[0].accuracy <= 1.0);
            CHECK(run.report.per_seed[0].auc >= 0.0);
            CHECK(run.report.per_seed[0].auc <= 1.0);
        }
    }
}

TEST_CASE("gcn grid deduplicates the layer-count axis") {
    ExperimentConfig cfg = small_experiment(Method::kGCN);
    cfg.student_grid.hidden_layer_counts = {1, 2, 3};
    cfg.seeds = {1};
    const TrialRun run = run_trials(cfg, cfg.seeds); // 3 configs collapse to 1
    CHECK(run.report.completed() == 1);
    CHECK(run.selected.student.hidden.size() == 1);
}

TEST_CASE("similarity-mode graph building and autoencoder config flow") {
    ExperimentConfig cfg = small_experiment(Method::kGKD);
    cfg.graph.mode = GraphSpec::Mode::kSimilarity;
    cfg.graph.similarity_threshold = 0.5;
    cfg.graph.autoencoder.latent_dim = 1; // graph features are 2-dimensional
    cfg.graph.autoencoder.epochs = 30;
    cfg.seeds = {1};
    const TrialRun run = run_trials(cfg, cfg.seeds);
    CHECK(run.report.completed() == 1);

    const Dataset ds = prepare_dataset(cfg);
    const auto rows = mask_indices(ds.splits.train);
    const SparseGraph g = build_population_graph(ds, rows, cfg.graph, 1);
    CHECK(g.node_count() == rows.size());
}

TEST_CASE("threshold broadcasting and arity errors") {
    ExperimentConfig cfg = small_experiment(Method::kGKD);
    const Dataset ds = prepare_dataset(cfg);
    const auto rows = mask_indices(ds.splits.train);

    GraphSpec one = cfg.graph;
    one.thresholds = {0.7}; // broadcasts over both graph features
    CHECK(build_population_graph(ds, rows, one, 1).node_count() == rows.size());

    GraphSpec wrong = cfg.graph;
    wrong.thresholds = {0.7, 0.7, 0.7};
    CHECK_THROWS_AS(build_population_graph(ds, rows, wrong, 1), UsageError);
}

TEST_CASE("sweep: single-point sweep equals the train report; cardinality checks") {
    ExperimentConfig cfg = small_experiment(Method::kDNN);
    cfg.seeds = {1, 2};

    const TrialRun direct = run_trials(cfg, cfg.seeds);
    const SweepResult sweep = sweep_missing(cfg, {0.0}, {Method::kDNN});
    REQUIRE(sweep.cells.size() == 1);
    for (std::size_t i = 0; i < cfg.seeds.size(); ++i) {
        CHECK(sweep.cells[0].run.report.per_seed[i].accuracy ==
              direct.report.per_seed[i].accuracy);
        CHECK(sweep.cells[0].run.report.per_seed[i].auc == direct.report.per_seed[i].auc);
    }

    const SweepResult grid = sweep_missing(cfg, {0.0, 0.4}, {Method::kDNN, Method::kGKD});
    CHECK(grid.cells.size() == 4);
    CHECK(grid.cells[0].method == Method::kDNN);
    CHECK(grid.cells[1].method == Method::kGKD);
    CHECK(grid.cells[2].p_missing == 0.4);

    CHECK_THROWS_AS(sweep_missing(cfg, {}, {Method::kDNN}), UsageError);
    CHECK_THROWS_AS(sweep_missing(cfg, {1.0}, {Method::kDNN}), UsageError);
}

TEST_CASE("config file round trip preserves every field; unknown keys rejected") {
    TempDir dir("gkd_test_config");
    ExperimentConfig cfg = small_experiment(Method::kGKD);
    cfg.graph.mode = GraphSpec::Mode::kSimilarity;
    cfg.graph.thresholds = {0.4, 0.6};
    cfg.alpha_grid = {0.3, 0.7};
    cfg.transductive = true;
    cfg.out_dir = "somewhere";
    write_experiment_config(cfg, dir.file("config.json"));
    const ExperimentConfig loaded = load_experiment_config(dir.file("config.json"));
    CHECK(loaded.fingerprint() == cfg.fingerprint());
    CHECK(loaded.out_dir == cfg.out_dir);
    CHECK(loaded.transductive == cfg.transductive);
    CHECK(loaded.graph.thresholds == cfg.graph.thresholds);
    CHECK(loaded.alpha_grid == cfg.alpha_grid);
    CHECK(loaded.seeds == cfg.seeds);

    {
        std::ofstream out(dir.file("bad.json"));
        out << R"({"methodz": "gkd"})";
    }
    CHECK_THROWS_AS(load_experiment_config(dir.file("bad.json")), ParseError);

    // fingerprint reacts to result-affecting changes only
    ExperimentConfig changed = cfg;
    changed.alpha_grid = {0.9};
    CHECK(changed.fingerprint() != cfg.fingerprint());
    ExperimentConfig cosmetic = cfg;
    cosmetic.out_dir = "elsewhere";
    cosmetic.workers = 7;
    CHECK(cosmetic.fingerprint() == cfg.fingerprint());
}

TEST_CASE("cmd_synth writes the CSV triple deterministically") {
    TempDir dir("gkd_test_synth");
    SyntheticSpec spec;
    spec.n = 40;
    spec.node_dim = 4;
    spec.graph_dim = 2;
    spec.informative_dims = 2;
    spec.seed = 11;
    CHECK(cmd_synth(spec, dir.file("a")) == 0);
    CHECK(cmd_synth(spec, dir.file("b")) == 0);
    for (const char* name : {"features.csv", "labels.csv", "graph_features.csv"}) {
        std::ifstream fa(dir.file("a") + "/" + name), fb(dir.file("b") + "/" + name);
        const std::string ca((std::istreambuf_iterator<char>(fa)), std::istreambuf_iterator<char>());
        const std::string cb((std::istreambuf_iterator<char>(fb)), std::istreambuf_iterator<char>());
        REQUIRE(!ca.empty());
        CHECK(ca == cb);
    }
    // p_missing = 0: no empty cells in the graph file
    std::ifstream gf(dir.file("a") + "/graph_features.csv");
    std::string line;
    while (std::getline(gf, line)) {
        CHECK(line.find(",,") == std::string::npos);
        CHECK(!line.empty());
    }
}

TEST_CASE("cmd_train writes a parseable report whose aggregate recomputes") {
    TempDir dir("gkd_test_train");
    ExperimentConfig cfg = small_experiment(Method::kDNN);
    cfg.split.labeled_fraction = 0.8;
    cfg.out_dir = dir.file("run");
    CHECK(cmd_train(cfg) == 0);

    const json report = read_json(dir.file("run") + "/report.json");
    CHECK(report["schema"] == "gkd-report-v1");
    CHECK(report["method"] == "dnn");
    // separable synthetic: high accuracy
    CHECK(report["aggregate"]["accuracy"]["mean"].get<double>() > 0.9);
    double mean = 0.0;
    for (const auto& m : report["per_seed"]) mean += m["accuracy"].get<double>();
    mean /= report["per_seed"].size();
    CHECK(report["aggregate"]["accuracy"]["mean"].get<double>() ==
          doctest::Approx(mean).epsilon(1e-15));

    CHECK(std::filesystem::exists(dir.file("run") + "/config.json"));
    CHECK(std::filesystem::exists(dir.file("run") + "/report.csv"));
    CHECK(std::filesystem::exists(dir.file("run") + "/model.gkd"));
    CHECK(std::filesystem::exists(dir.file("run") + "/logs/seed_1.json"));
    CHECK(std::filesystem::exists(dir.file("run") + "/logs/seed_2.json"));
}

TEST_CASE("cmd_train rerun reproduces per-seed metrics exactly") {
    TempDir dir("gkd_test_rerun");
    ExperimentConfig cfg = small_experiment(Method::kGKD);
    cfg.out_dir = dir.file("run1");
    CHECK(cmd_train(cfg) == 0);
    cfg.out_dir = dir.file("run2");
    CHECK(cmd_train(cfg) == 0);

    json a = read_json(dir.file("run1") + "/report.json");
    json b = read_json(dir.file("run2") + "/report.json");
    a.erase("timestamp");
    b.erase("timestamp");
    CHECK(a == b);
}

TEST_CASE("cmd_evaluate consumes a saved model without any graph artifact") {
    TempDir dir("gkd_test_eval");
    ExperimentConfig cfg = small_experiment(Method::kGKD);
    cfg.out_dir = dir.file("run");
    REQUIRE(cmd_train(cfg) == 0);

    // export the test split as CSVs
    const Dataset ds = prepare_dataset(cfg);
    const auto test_idx = mask_indices(ds.splits.test);
    Dataset test_only;
    test_only.features = select_rows(ds.features, test_idx);
    std::vector<int> ids;
    for (std::size_t i : test_idx) ids.push_back(ds.class_ids[i]);
    test_only.class_ids = ids;
    test_only.labels = LabelMatrix::one_hot(ids, 2);
    test_only.graph_features = DenseMatrix(test_idx.size(), 1, 0.0);
    test_only.graph_observed.assign(test_idx.size(), 1);
    save_csv_dataset(test_only, dir.file("tf.csv"), dir.file("tl.csv"), dir.file("tg.csv"));
    std::filesystem::remove(dir.file("tg.csv")); // no graph modality at inference

    CHECK(cmd_evaluate(dir.file("run") + "/model.gkd", dir.file("tf.csv"), dir.file("tl.csv"),
                       dir.file("eval.json")) == 0);
    const json eval = read_json(dir.file("eval.json"));
    CHECK(eval["model_kind"] == "gkd");
    CHECK(eval["accuracy"].get<double>() >= 0.5);
}

TEST_CASE("cmd_sweep_missing writes the combined table and per-cell reports") {
    TempDir dir("gkd_test_sweep");
    ExperimentConfig cfg = small_experiment(Method::kDNN);
    cfg.seeds = {1};
    cfg.out_dir = dir.file("sweep");
    CHECK(cmd_sweep_missing(cfg, {0.0, 0.5}, {Method::kDNN, Method::kGKD}) == 0);

    const json combined = read_json(dir.file("sweep") + "/sweep_report.json");
    CHECK(combined["schema"] == "gkd-sweep-v1");
    CHECK(combined["cells"].size() == 4);
    CHECK(std::filesystem::exists(dir.file("sweep") + "/sweep_report.csv"));
    CHECK(std::filesystem::exists(dir.file("sweep") + "/cell_p0_dnn/report.json"));
    CHECK(std::filesystem::exists(dir.file("sweep") + "/cell_p0.5_gkd/report.json"));

    // csv has one row per (method, p, seed)
    std::ifstream csv(dir.file("sweep") + "/sweep_report.csv");
    std::string line;
    std::size_t rows = 0;
    while (std::getline(csv, line)) ++rows;
    CHECK(rows == 1 + 4);
}
