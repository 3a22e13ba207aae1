#include "gkd/errors.hpp"
#include "gkd/pipeline.hpp"
#include "gkd/rng.hpp"

#include <doctest.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <optional>
#include <vector>

using namespace gkd;

namespace {

bool params_bitwise_equal(const MLPParams& a, const MLPParams& b) {
    if (a.layers.size() != b.layers.size()) return false;
    for (std::size_t l = 0; l < a.layers.size(); ++l) {
        if (!a.layers[l].weight.same_shape(b.layers[l].weight)) return false;
        const auto av = a.layers[l].weight.values();
        const auto bv = b.layers[l].weight.values();
        if (std::memcmp(av.data(), bv.data(), av.size() * sizeof(double)) != 0) return false;
        if (a.layers[l].bias != b.layers[l].bias) return false;
    }
    return true;
}

bool matrices_bitwise_equal(const DenseMatrix& a, const DenseMatrix& b) {
    return a.same_shape(b) &&
           std::memcmp(a.values().data(), b.values().data(), a.size() * sizeof(double)) == 0;
}

// small separable two-class dataset with splits
Dataset toy_dataset(std::size_t n, double labeled_fraction, std::uint64_t seed,
                    double class_sep = 1.5) {
    SyntheticSpec spec;
    spec.n = n;
    spec.node_dim = 6;
    spec.graph_dim = 2;
    spec.informative_dims = 3;
    spec.class_sep = class_sep;
    spec.seed = seed;
    Dataset ds = generate_synthetic(spec);
    SplitSpec split;
    split.labeled_fraction = labeled_fraction;
    split.seed = seed + 1;
    ds.splits = make_splits(ds.n(), split);
    return ds;
}

SparseGraph train_graph_from_features(const Dataset& ds, double threshold) {
    const TrainView view = make_train_view(ds);
    std::vector<SparseGraph> parts;
    for (std::size_t j = 0; j < ds.graph_dim(); ++j) {
        std::vector<std::optional<double>> values(view.train_indices.size());
        for (std::size_t k = 0; k < view.train_indices.size(); ++k) {
            const std::size_t row = view.train_indices[k];
            if (ds.graph_entry_observed(row, j)) values[k] = ds.graph_features(row, j);
        }
        parts.push_back(threshold_graph(values, threshold));
    }
    return union_graphs(parts);
}

TrainConfig small_config(std::uint64_t seed, std::size_t epochs = 60) {
    TrainConfig cfg;
    cfg.hidden = {8};
    cfg.epochs = epochs;
    cfg.dropout = 0.1;
    cfg.seed = seed;
    return cfg;
}

} // namespace

TEST_CASE("train_teacher reaches labeled accuracy 1.0 on a separable set") {
    const Dataset ds = toy_dataset(80, 0.5, 3, 2.5);
    const TrainView view = make_train_view(ds);
    TrainConfig cfg = small_config(1, 150);
    cfg.dropout = 0.0;
    const MLPParams teacher = train_teacher(view.x, view.y, view.labeled, cfg);
    const std::vector<int> pred = predict_mlp(teacher, view.x).argmax_rows();
    for (std::size_t k = 0; k < view.labeled.size(); ++k) {
        if (view.labeled[k]) CHECK(pred[k] == view.class_ids[k]);
    }
}

TEST_CASE("train_teacher equals plain train_mlp when every row is labeled") {
    const Dataset ds = toy_dataset(60, 1.0, 5);
    const TrainView view = make_train_view(ds);
    const TrainConfig cfg = small_config(9);
    const MLPParams a = train_teacher(view.x, view.y, view.labeled, cfg);
    const MLPParams b = train_mlp(view.x, view.y, view.labeled, cfg);
    CHECK(params_bitwise_equal(a, b));

    const MLPParams again = train_teacher(view.x, view.y, view.labeled, cfg);
    CHECK(params_bitwise_equal(a, again)); // determinism
}

TEST_CASE("train_teacher rejects a class with no labeled rows") {
    const Dataset ds = toy_dataset(60, 0.5, 7);
    const TrainView view = make_train_view(ds);
    Mask one_class = view.labeled;
    for (std::size_t k = 0; k < one_class.size(); ++k) {
        if (view.class_ids[k] == 1) one_class[k] = 0;
    }
    CHECK_THROWS_AS(train_teacher(view.x, view.y, one_class, small_config(1)), UsageError);
}

TEST_CASE("pseudo_label dispatches rows between Y_L and the teacher softmax") {
    const Dataset ds = toy_dataset(60, 0.5, 11);
    const TrainView view = make_train_view(ds);
    const MLPParams teacher = train_teacher(view.x, view.y, view.labeled, small_config(2));
    const LabelMatrix soft = softmax_rows(mlp_forward(teacher, view.x, RunMode::kEval));

    SUBCASE("all rows labeled: output is Y_L") {
        const LabelMatrix out = pseudo_label(teacher, view.x, view.y, full_mask(view.x.rows()));
        CHECK(matrices_bitwise_equal(out.matrix(), view.y.matrix()));
    }

    SUBCASE("no rows labeled: output is the softmax everywhere") {
        const LabelMatrix out = pseudo_label(teacher, view.x, view.y, Mask(view.x.rows(), 0));
        CHECK(matrices_bitwise_equal(out.matrix(), soft.matrix()));
    }

    SUBCASE("mixed mask: per-row recomposition oracle") {
        const LabelMatrix out = pseudo_label(teacher, view.x, view.y, view.labeled);
        for (std::size_t i = 0; i < out.rows(); ++i) {
            const auto expected = view.labeled[i] ? view.y.row(i) : soft.row(i);
            for (std::size_t j = 0; j < out.cols(); ++j) CHECK(out.row(i)[j] == expected[j]);
        }
    }
}

TEST_CASE("gkd_train with an edgeless graph keeps Y^T = Y^T0 exactly") {
    const Dataset ds = toy_dataset(60, 0.4, 13);
    const TrainView view = make_train_view(ds);
    const SparseGraph empty(view.x.rows());
    const TrainConfig teacher_cfg = small_config(3);
    LPAConfig lpa;
    lpa.alpha = 0.4;
    const GKDModel model = gkd_train(ds, empty, teacher_cfg, lpa, small_config(4));
    const MLPParams teacher = train_teacher(view.x, view.y, view.labeled, teacher_cfg);
    const LabelMatrix y0 = pseudo_label(teacher, view.x, view.y, view.labeled);
    CHECK(matrices_bitwise_equal(model.teacher_labels.matrix(), y0.matrix()));
}

TEST_CASE("degenerate GKD (alpha = 1, all labeled) equals the DNN baseline bitwise") {
    const Dataset ds = toy_dataset(60, 1.0, 17);
    const SparseGraph graph = train_graph_from_features(ds, 0.8);
    const TrainConfig cfg = small_config(21);
    LPAConfig lpa;
    lpa.alpha = 1.0;
    const GKDModel gkd = gkd_train(ds, graph, cfg, lpa, cfg);
    const TrainView view = make_train_view(ds);

    // student targets collapse to Y_L
    CHECK(matrices_bitwise_equal(gkd.teacher_labels.matrix(), view.y.matrix()));

    const MLPParams dnn = dnn_baseline(ds, cfg);
    CHECK(params_bitwise_equal(gkd.student, dnn));

    const std::vector<std::size_t> test_idx = mask_indices(ds.splits.test);
    const DenseMatrix x_test = select_rows(ds.features, test_idx);
    CHECK(matrices_bitwise_equal(predict(gkd, x_test).matrix(), predict_mlp(dnn, x_test).matrix()));
}

TEST_CASE("gkd_train validates the graph size") {
    const Dataset ds = toy_dataset(60, 0.5, 19);
    const SparseGraph wrong(7);
    CHECK_THROWS_AS(gkd_train(ds, wrong, small_config(1), LPAConfig{}, small_config(1)),
                    UsageError);
}

TEST_CASE("predict consistency, single row, and graph-artifact independence") {
    const Dataset ds = toy_dataset(60, 0.5, 23);
    const SparseGraph graph = train_graph_from_features(ds, 0.8);
    const GKDModel model = gkd_train(ds, graph, small_config(5), LPAConfig{}, small_config(6));
    const TrainView view = make_train_view(ds);

    // predictions on the training features equal the student's softmax output
    const LabelMatrix on_train = predict(model, view.x);
    CHECK(matrices_bitwise_equal(on_train.matrix(),
                                 softmax_rows(mlp_forward(model.student, view.x, RunMode::kEval)).matrix()));

    // one test row gives one valid simplex row
    DenseMatrix single(1, ds.feature_dim());
    for (std::size_t j = 0; j < ds.feature_dim(); ++j) single(0, j) = ds.features(0, j);
    const LabelMatrix one = predict(model, single);
    CHECK(one.rows() == 1);
    double sum = 0.0;
    for (double v : one.row(0)) sum += v;
    CHECK(std::abs(sum - 1.0) <= 1e-12);

    // deleting every graph artifact between training and inference changes nothing
    const auto tmp = std::filesystem::temp_directory_path() / "gkd_test_graph.edges";
    graph.save_edge_list(tmp.string());
    const LabelMatrix before = predict(model, view.x);
    std::filesystem::remove(tmp);
    const LabelMatrix after = predict(model, view.x);
    CHECK(matrices_bitwise_equal(before.matrix(), after.matrix()));
}

TEST_CASE("building the model never reads rows outside the train split") {
    Dataset ds = toy_dataset(60, 0.5, 29);
    const SparseGraph graph = train_graph_from_features(ds, 0.8);
    const GKDModel base = gkd_train(ds, graph, small_config(7), LPAConfig{}, small_config(8));

    // scramble every non-train row's features and graph features
    Dataset scrambled = ds;
    Rng rng(999);
    for (std::size_t i = 0; i < ds.n(); ++i) {
        if (ds.splits.train[i]) continue;
        for (std::size_t j = 0; j < ds.feature_dim(); ++j) scrambled.features(i, j) = rng.normal() * 50.0;
        for (std::size_t j = 0; j < ds.graph_dim(); ++j) {
            scrambled.graph_features(i, j) = rng.normal() * 50.0;
        }
    }
    const GKDModel poisoned = gkd_train(scrambled, graph, small_config(7), LPAConfig{}, small_config(8));
    CHECK(params_bitwise_equal(base.student, poisoned.student));
    CHECK(params_bitwise_equal(base.teacher, poisoned.teacher));
}

TEST_CASE("dnn_baseline equals train_teacher for the same inputs and seed") {
    const Dataset ds = toy_dataset(60, 0.6, 31);
    const TrainView view = make_train_view(ds);
    const TrainConfig cfg = small_config(11);
    CHECK(params_bitwise_equal(dnn_baseline(ds, cfg), train_teacher(view.x, view.y, view.labeled, cfg)));
}

TEST_CASE("dnn_jfc imputation means and prediction paths") {
    SUBCASE("feature observed as {1, 3} imputes 2 elsewhere") {
        Dataset ds = toy_dataset(20, 1.0, 37);
        // rebuild graph features: one column, observed only on two train rows
        ds.graph_features = DenseMatrix(ds.n(), 1, 0.0);
        ds.graph_observed.assign(ds.n(), 0);
        const std::vector<std::size_t> train = mask_indices(ds.splits.train);
        REQUIRE(train.size() >= 2);
        ds.graph_features(train[0], 0) = 1.0;
        ds.graph_observed[train[0]] = 1;
        ds.graph_features(train[1], 0) = 3.0;
        ds.graph_observed[train[1]] = 1;
        const JFCModel model = dnn_jfc_baseline(ds, small_config(1, 5));
        CHECK(model.imputation_means == std::vector<double>{2.0});

        const DenseMatrix inputs = jfc_inputs(model, select_rows(ds.features, train), nullptr, nullptr);
        CHECK(inputs.cols() == ds.feature_dim() + 1);
        CHECK(inputs(2, ds.feature_dim()) == 2.0);
    }

    SUBCASE("no missing values: equivalent to an MLP on the plain concatenation") {
        const Dataset ds = toy_dataset(60, 1.0, 41);
        const TrainConfig cfg = small_config(13);
        const JFCModel model = dnn_jfc_baseline(ds, cfg);
        const TrainView view = make_train_view(ds);
        DenseMatrix concat(view.x.rows(), ds.feature_dim() + ds.graph_dim());
        for (std::size_t k = 0; k < view.train_indices.size(); ++k) {
            for (std::size_t j = 0; j < ds.feature_dim(); ++j) concat(k, j) = view.x(k, j);
            for (std::size_t j = 0; j < ds.graph_dim(); ++j) {
                concat(k, ds.feature_dim() + j) = ds.graph_features(view.train_indices[k], j);
            }
        }
        const MLPParams direct = train_mlp(concat, view.y, view.labeled, cfg);
        CHECK(params_bitwise_equal(model.params, direct));
    }

    SUBCASE("fully missing graph features at test still give valid simplex rows") {
        SyntheticSpec spec;
        spec.n = 60;
        spec.node_dim = 6;
        spec.graph_dim = 2;
        spec.informative_dims = 3;
        spec.p_missing = 0.5;
        spec.seed = 43;
        Dataset ds = generate_synthetic(spec);
        SplitSpec split;
        split.labeled_fraction = 0.8;
        ds.splits = make_splits(ds.n(), split);
        const JFCModel model = dnn_jfc_baseline(ds, small_config(15, 40));
        const DenseMatrix x_test = select_rows(ds.features, mask_indices(ds.splits.test));
        const LabelMatrix probs = predict_jfc(model, x_test); // no graph modality at all
        for (std::size_t i = 0; i < probs.rows(); ++i) {
            double sum = 0.0;
            for (double v : probs.row(i)) {
                CHECK(std::isfinite(v));
                sum += v;
            }
            CHECK(std::abs(sum - 1.0) <= 1e-12);
        }
    }

    SUBCASE("a feature observed nowhere in training is an error") {
        Dataset ds = toy_dataset(20, 1.0, 47);
        for (std::size_t i = 0; i < ds.n(); ++i) {
            ds.graph_observed[i * ds.graph_dim()] = 0; // column 0 never observed
        }
        CHECK_THROWS_AS(dnn_jfc_baseline(ds, small_config(1, 5)), UsageError);
    }
}

TEST_CASE("gcn with an empty graph reduces to a two-layer MLP") {
    const Dataset ds = toy_dataset(40, 1.0, 53);
    const TrainView view = make_train_view(ds);
    const SparseGraph empty(view.x.rows());
    GCNModel model;
    model.params = init_mlp({ds.feature_dim(), 8, 2}, 77);
    const DenseMatrix gcn_logits =
        gcn_forward(model, sym_normalize(empty), view.x, RunMode::kEval);
    const DenseMatrix mlp_logits = mlp_forward(model.params, view.x, RunMode::kEval);
    for (std::size_t k = 0; k < gcn_logits.size(); ++k) {
        CHECK(gcn_logits.values()[k] ==
              doctest::Approx(mlp_logits.values()[k]).epsilon(1e-12));
    }
}

TEST_CASE("gcn gradients match finite differences on a 6-node toy instance") {
    Rng rng(59);
    SparseGraph g(6);
    g.add_edge(0, 1);
    g.add_edge(1, 2);
    g.add_edge(2, 3);
    g.add_edge(3, 4);
    g.add_edge(0, 5);
    const PropagationOperator a_hat = sym_normalize(g);
    DenseMatrix x(6, 3);
    for (double& v : x.values()) v = rng.normal();
    GCNModel model;
    model.params.layers.push_back({DenseMatrix(3, 4), {}});
    model.params.layers.push_back({DenseMatrix(4, 2), {}});
    for (auto& layer : model.params.layers) {
        for (double& v : layer.weight.values()) v = 0.6 * rng.normal();
        layer.bias.assign(layer.weight.cols(), 0.0);
        for (double& b : layer.bias) b = 0.2 * rng.normal();
    }
    const LabelMatrix target = LabelMatrix::one_hot({0, 1, 0, 1, 0, 1}, 2);
    Mask mask{1, 1, 0, 1, 0, 1};

    const MLPGrads grads = gcn_backward(model, a_hat, x, target, mask);
    auto loss_at = [&]() {
        return cross_entropy_soft(softmax_rows(gcn_forward(model, a_hat, x, RunMode::kEval)),
                                  target, mask);
    };
    const double h = 1e-5;
    for (std::size_t l = 0; l < 2; ++l) {
        auto w = model.params.layers[l].weight.values();
        const auto gw = grads.layers[l].weight.values();
        for (std::size_t k = 0; k < w.size(); ++k) {
            const double saved = w[k];
            w[k] = saved + h;
            const double up = loss_at();
            w[k] = saved - h;
            const double down = loss_at();
            w[k] = saved;
            const double fd = (up - down) / (2.0 * h);
            const double denom = std::max({std::abs(gw[k]), std::abs(fd), 1e-5});
            CHECK(std::abs(gw[k] - fd) <= 1e-4 * denom);
        }
        for (std::size_t k = 0; k < model.params.layers[l].bias.size(); ++k) {
            double& slot = model.params.layers[l].bias[k];
            const double saved = slot;
            slot = saved + h;
            const double up = loss_at();
            slot = saved - h;
            const double down = loss_at();
            slot = saved;
            const double fd = (up - down) / (2.0 * h);
            const double denom = std::max({std::abs(grads.layers[l].bias[k]), std::abs(fd), 1e-5});
            CHECK(std::abs(grads.layers[l].bias[k] - fd) <= 1e-4 * denom);
        }
    }
}

TEST_CASE("isolated gcn prediction equals a hand-traced single-row forward") {
    Rng rng(61);
    GCNModel model;
    model.params.layers.push_back({DenseMatrix(2, 3), {}});
    model.params.layers.push_back({DenseMatrix(3, 2), {}});
    for (auto& layer : model.params.layers) {
        for (double& v : layer.weight.values()) v = rng.normal();
        layer.bias.assign(layer.weight.cols(), 0.0);
        for (double& b : layer.bias) b = rng.normal() * 0.1;
    }
    const DenseMatrix x = DenseMatrix::from_rows({{0.8, -1.2}});

    // hand trace: isolated node keeps exactly its self-loop, A^ row = 1
    std::vector<double> hidden(3);
    for (std::size_t j = 0; j < 3; ++j) {
        double z = model.params.layers[0].bias[j];
        for (std::size_t k = 0; k < 2; ++k) z += x(0, k) * model.params.layers[0].weight(k, j);
        hidden[j] = z > 0 ? z : 0;
    }
    std::vector<double> logits(2);
    for (std::size_t j = 0; j < 2; ++j) {
        double z = model.params.layers[1].bias[j];
        for (std::size_t k = 0; k < 3; ++k) z += hidden[k] * model.params.layers[1].weight(k, j);
        logits[j] = z;
    }
    const double m = std::max(logits[0], logits[1]);
    const double e0 = std::exp(logits[0] - m);
    const double e1 = std::exp(logits[1] - m);

    const LabelMatrix pred = gcn_predict_isolated(model, x);
    CHECK(pred.row(0)[0] == doctest::Approx(e0 / (e0 + e1)).epsilon(1e-14));
    CHECK(pred.row(0)[1] == doctest::Approx(e1 / (e0 + e1)).epsilon(1e-14));
}

TEST_CASE("gcn_baseline trains deterministically on the train graph") {
    const Dataset ds = toy_dataset(60, 0.6, 67);
    const SparseGraph graph = train_graph_from_features(ds, 0.8);
    const TrainConfig cfg = small_config(19, 40);
    const GCNModel a = gcn_baseline(ds, graph, cfg);
    const GCNModel b = gcn_baseline(ds, graph, cfg);
    CHECK(params_bitwise_equal(a.params, b.params));
    const SparseGraph wrong(3);
    CHECK_THROWS_AS(gcn_baseline(ds, wrong, cfg), UsageError);
}

TEST_CASE("model save/load round trip for every kind") {
    const Dataset ds = toy_dataset(60, 0.5, 71);
    const SparseGraph graph = train_graph_from_features(ds, 0.8);
    const DenseMatrix x_test = select_rows(ds.features, mask_indices(ds.splits.test));
    const auto dir = std::filesystem::temp_directory_path() / "gkd_test_models";
    std::filesystem::create_directories(dir);

    const GKDModel gkd = gkd_train(ds, graph, small_config(23, 30), LPAConfig{}, small_config(24, 30));
    const MLPParams dnn = dnn_baseline(ds, small_config(25, 30));
    const JFCModel jfc = dnn_jfc_baseline(ds, small_config(26, 30));
    const GCNModel gcn = gcn_baseline(ds, graph, small_config(27, 30));

    const SavedModel models[] = {SavedModel::wrap(gkd), SavedModel::wrap(dnn),
                                 SavedModel::wrap(jfc), SavedModel::wrap(gcn)};
    for (const SavedModel& m : models) {
        const std::string path = (dir / (model_kind_name(m.kind) + ".gkd")).string();
        save_model(m, path);
        const SavedModel loaded = load_model(path);
        CHECK(loaded.kind == m.kind);
        CHECK(matrices_bitwise_equal(predict_model(loaded, x_test).matrix(),
                                     predict_model(m, x_test).matrix()));
    }

    // Y^T survives the round trip bitwise
    const std::string gkd_path = (dir / "gkd.gkd").string();
    const SavedModel reloaded = load_model(gkd_path);
    CHECK(matrices_bitwise_equal(reloaded.gkd.teacher_labels.matrix(),
                                 gkd.teacher_labels.matrix()));
    CHECK(reloaded.gkd.lpa.alpha == gkd.lpa.alpha);

    // the header is checked
    const std::string bogus = (dir / "bogus.gkd").string();
    {
        std::ofstream out(bogus);
        out << "NOPE\n";
    }
    CHECK_THROWS_AS(load_model(bogus), ParseError);
    std::filesystem::remove_all(dir);
}
