#include "gkd/pipeline.hpp"

#include "gkd/errors.hpp"
#include "gkd/rng.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <utility>

namespace gkd {

namespace {

std::vector<double> column_sums(const DenseMatrix& m) {
    std::vector<double> sums(m.cols(), 0.0);
    for (std::size_t i = 0; i < m.rows(); ++i) {
        const auto row = m.row(i);
        for (std::size_t j = 0; j < m.cols(); ++j) sums[j] += row[j];
    }
    return sums;
}

void add_bias(DenseMatrix& z, const std::vector<double>& bias) {
    for (std::size_t i = 0; i < z.rows(); ++i) {
        auto row = z.row(i);
        for (std::size_t j = 0; j < z.cols(); ++j) row[j] += bias[j];
    }
}

void check_two_layers(const GCNModel& model) {
    model.params.validate();
    if (model.params.layers.size() != 2) {
        throw ShapeError("gcn: model must have exactly two layers");
    }
}

struct GCNTrace {
    DenseMatrix ax;     // A^ X
    DenseMatrix z1;     // pre-activation
    DenseMatrix hidden; // post-ReLU (and post-dropout)
    DenseMatrix ah;     // A^ hidden
    DenseMatrix logits;
};

GCNTrace gcn_trace(const GCNModel& model, const PropagationOperator& a_hat, const DenseMatrix& x,
                   const DenseMatrix* dropout_mask) {
    GCNTrace t;
    t.ax = a_hat.apply(x);
    t.z1 = matmul(t.ax, model.params.layers[0].weight);
    add_bias(t.z1, model.params.layers[0].bias);
    t.hidden = t.z1;
    for (double& v : t.hidden.values()) v = v > 0.0 ? v : 0.0;
    if (dropout_mask) {
        auto hv = t.hidden.values();
        const auto mv = dropout_mask->values();
        for (std::size_t k = 0; k < hv.size(); ++k) hv[k] *= mv[k];
    }
    t.ah = a_hat.apply(t.hidden);
    t.logits = matmul(t.ah, model.params.layers[1].weight);
    add_bias(t.logits, model.params.layers[1].bias);
    return t;
}

MLPGrads gcn_grads_from_trace(const GCNModel& model, const PropagationOperator& a_hat,
                              const GCNTrace& t, const LabelMatrix& target, const Mask& row_mask,
                              const DenseMatrix* dropout_mask) {
    const std::size_t count = mask_count(row_mask);
    if (count == 0) throw UsageError("gcn: row mask selects no rows");
    const double inv = 1.0 / static_cast<double>(count);
    const LabelMatrix pred = softmax_rows(t.logits);
    DenseMatrix d_logits(t.logits.rows(), t.logits.cols());
    for (std::size_t i = 0; i < d_logits.rows(); ++i) {
        if (!row_mask[i]) continue;
        const auto p = pred.row(i);
        const auto y = target.row(i);
        auto g = d_logits.row(i);
        for (std::size_t j = 0; j < d_logits.cols(); ++j) g[j] = (p[j] - y[j]) * inv;
    }

    MLPGrads grads;
    grads.layers.resize(2);
    grads.layers[1].weight = matmul_at_b(t.ah, d_logits);
    grads.layers[1].bias = column_sums(d_logits);

    // A^ is symmetric, so A^T d = A^ d
    DenseMatrix d_hidden = a_hat.apply(matmul_a_bt(d_logits, model.params.layers[1].weight));
    if (dropout_mask) {
        auto dv = d_hidden.values();
        const auto mv = dropout_mask->values();
        for (std::size_t k = 0; k < dv.size(); ++k) dv[k] *= mv[k];
    }
    {
        auto dv = d_hidden.values();
        const auto zv = t.z1.values();
        for (std::size_t k = 0; k < dv.size(); ++k) {
            if (zv[k] <= 0.0) dv[k] = 0.0;
        }
    }
    grads.layers[0].weight = matmul_at_b(t.ax, d_hidden);
    grads.layers[0].bias = column_sums(d_hidden);
    return grads;
}

DenseMatrix draw_mask(std::size_t rows, std::size_t cols, double p, std::uint64_t seed) {
    DenseMatrix mask(rows, cols);
    Rng rng(seed);
    const double scale = 1.0 / (1.0 - p);
    for (double& v : mask.values()) v = rng.uniform() < p ? 0.0 : scale;
    return mask;
}

void require_class_coverage(const LabelMatrix& y_l, const Mask& labeled_mask) {
    std::vector<bool> seen(y_l.cols(), false);
    for (std::size_t i = 0; i < y_l.rows(); ++i) {
        if (!labeled_mask[i]) continue;
        const auto row = y_l.row(i);
        for (std::size_t c = 0; c < row.size(); ++c) {
            if (row[c] == 1.0) seen[c] = true;
        }
    }
    for (std::size_t c = 0; c < seen.size(); ++c) {
        if (!seen[c]) {
            throw UsageError("class " + std::to_string(c) + " has no labeled training row");
        }
    }
}

} // namespace

TrainView make_train_view(const Dataset& ds) {
    if (ds.splits.empty()) throw UsageError("dataset has no splits; call make_splits first");
    ds.splits.validate(ds.n());
    TrainView view;
    view.train_indices = mask_indices(ds.splits.train);
    view.x = select_rows(ds.features, view.train_indices);
    view.y = LabelMatrix::from_matrix(select_rows(ds.labels.matrix(), view.train_indices));
    view.labeled.resize(view.train_indices.size());
    view.class_ids.resize(view.train_indices.size());
    for (std::size_t k = 0; k < view.train_indices.size(); ++k) {
        view.labeled[k] = ds.splits.labeled[view.train_indices[k]];
        view.class_ids[k] = ds.class_ids[view.train_indices[k]];
    }
    return view;
}

MLPParams train_teacher(const DenseMatrix& x, const LabelMatrix& y_l, const Mask& labeled_mask,
                        const TrainConfig& cfg) {
    if (mask_count(labeled_mask) == 0) throw UsageError("train_teacher: no labeled rows");
    require_class_coverage(y_l, labeled_mask);
    return train_mlp(x, y_l, labeled_mask, cfg);
}

LabelMatrix pseudo_label(const MLPParams& teacher, const DenseMatrix& x, const LabelMatrix& y_l,
                         const Mask& labeled_mask) {
    if (y_l.rows() != x.rows() || labeled_mask.size() != x.rows()) {
        throw ShapeError("pseudo_label: labels/mask row count mismatch");
    }
    const LabelMatrix soft = softmax_rows(mlp_forward(teacher, x, RunMode::kEval));
    DenseMatrix out(x.rows(), y_l.cols());
    for (std::size_t i = 0; i < x.rows(); ++i) {
        const auto src = labeled_mask[i] ? y_l.row(i) : soft.row(i);
        auto dst = out.row(i);
        std::copy(src.begin(), src.end(), dst.begin());
    }
    return LabelMatrix::from_matrix(std::move(out));
}

GKDModel gkd_train(const Dataset& ds, const SparseGraph& graph, const TrainConfig& teacher_cfg,
                   const LPAConfig& lpa_cfg, const TrainConfig& student_cfg) {
    const TrainView view = make_train_view(ds);
    if (graph.node_count() != view.x.rows()) {
        throw UsageError("gkd_train: graph has " + std::to_string(graph.node_count()) +
                         " nodes but the train split has " + std::to_string(view.x.rows()));
    }
    GKDModel model;
    model.lpa = lpa_cfg;
    model.teacher = train_teacher(view.x, view.y, view.labeled, teacher_cfg);
    const LabelMatrix y0 = pseudo_label(model.teacher, view.x, view.y, view.labeled);
    model.teacher_labels = propagate(row_normalize(graph), y0, view.y, view.labeled, lpa_cfg);
    model.student =
        train_mlp(view.x, model.teacher_labels, full_mask(view.x.rows()), student_cfg);
    return model;
}

LabelMatrix predict(const GKDModel& model, const DenseMatrix& x_test) {
    return predict_mlp(model.student, x_test);
}

LabelMatrix predict_mlp(const MLPParams& params, const DenseMatrix& x) {
    return softmax_rows(mlp_forward(params, x, RunMode::kEval));
}

MLPParams dnn_baseline(const Dataset& ds, const TrainConfig& cfg) {
    const TrainView view = make_train_view(ds);
    return train_teacher(view.x, view.y, view.labeled, cfg);
}

DenseMatrix jfc_inputs(const JFCModel& model, const DenseMatrix& x, const DenseMatrix* graph_features,
                       const std::vector<std::uint8_t>* observed) {
    const std::size_t d_g = model.imputation_means.size();
    if (graph_features &&
        (graph_features->rows() != x.rows() || graph_features->cols() != d_g)) {
        throw ShapeError("jfc_inputs: graph feature shape mismatch");
    }
    DenseMatrix out(x.rows(), x.cols() + d_g);
    for (std::size_t i = 0; i < x.rows(); ++i) {
        const auto src = x.row(i);
        auto dst = out.row(i);
        std::copy(src.begin(), src.end(), dst.begin());
        for (std::size_t j = 0; j < d_g; ++j) {
            const bool have = graph_features && (!observed || (*observed)[i * d_g + j] != 0);
            dst[x.cols() + j] = have ? (*graph_features)(i, j) : model.imputation_means[j];
        }
    }
    return out;
}

JFCModel dnn_jfc_baseline(const Dataset& ds, const TrainConfig& cfg) {
    const TrainView view = make_train_view(ds);
    const std::size_t d_g = ds.graph_dim();

    JFCModel model;
    model.imputation_means.assign(d_g, 0.0);
    std::vector<std::size_t> observed_count(d_g, 0);
    for (std::size_t k = 0; k < view.train_indices.size(); ++k) {
        const std::size_t row = view.train_indices[k];
        for (std::size_t j = 0; j < d_g; ++j) {
            if (!ds.graph_entry_observed(row, j)) continue;
            model.imputation_means[j] += ds.graph_features(row, j);
            ++observed_count[j];
        }
    }
    for (std::size_t j = 0; j < d_g; ++j) {
        if (observed_count[j] == 0) {
            throw UsageError("dnn_jfc: graph feature " + std::to_string(j) +
                             " is observed nowhere in training");
        }
        model.imputation_means[j] /= static_cast<double>(observed_count[j]);
    }

    DenseMatrix g_train(view.train_indices.size(), d_g);
    std::vector<std::uint8_t> g_observed(view.train_indices.size() * d_g, 0);
    for (std::size_t k = 0; k < view.train_indices.size(); ++k) {
        const std::size_t row = view.train_indices[k];
        for (std::size_t j = 0; j < d_g; ++j) {
            g_train(k, j) = ds.graph_features(row, j);
            g_observed[k * d_g + j] = ds.graph_observed[row * d_g + j];
        }
    }
    const DenseMatrix inputs = jfc_inputs(model, view.x, &g_train, &g_observed);
    require_class_coverage(view.y, view.labeled);
    model.params = train_mlp(inputs, view.y, view.labeled, cfg);
    return model;
}

LabelMatrix predict_jfc(const JFCModel& model, const DenseMatrix& x,
                        const DenseMatrix* graph_features,
                        const std::vector<std::uint8_t>* observed) {
    return predict_mlp(model.params, jfc_inputs(model, x, graph_features, observed));
}

DenseMatrix gcn_forward(const GCNModel& model, const PropagationOperator& a_hat,
                        const DenseMatrix& x, RunMode mode, std::uint64_t seed, double dropout) {
    check_two_layers(model);
    if (x.cols() != model.params.input_dim()) throw ShapeError("gcn_forward: input dim mismatch");
    if (mode == RunMode::kTrain && dropout > 0.0) {
        const DenseMatrix mask =
            draw_mask(x.rows(), model.params.layers[0].weight.cols(), dropout, seed);
        return gcn_trace(model, a_hat, x, &mask).logits;
    }
    return gcn_trace(model, a_hat, x, nullptr).logits;
}

MLPGrads gcn_backward(const GCNModel& model, const PropagationOperator& a_hat, const DenseMatrix& x,
                      const LabelMatrix& target, const Mask& row_mask) {
    check_two_layers(model);
    const GCNTrace trace = gcn_trace(model, a_hat, x, nullptr);
    return gcn_grads_from_trace(model, a_hat, trace, target, row_mask, nullptr);
}

GCNModel train_gcn(const DenseMatrix& x, const LabelMatrix& y, const Mask& supervised,
                   const PropagationOperator& a_hat, const TrainConfig& cfg) {
    cfg.validate();
    if (cfg.hidden.empty()) throw UsageError("gcn: a hidden width is required");
    if (a_hat.node_count() != x.rows()) throw ShapeError("gcn: operator does not cover the rows");
    require_class_coverage(y, supervised);

    GCNModel model;
    model.params = init_mlp({x.cols(), cfg.hidden.front(), y.cols()}, cfg.seed);
    AdamState state = AdamState::like(model.params);
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        GCNTrace trace;
        MLPGrads grads;
        if (cfg.dropout > 0.0) {
            const DenseMatrix mask = draw_mask(x.rows(), cfg.hidden.front(), cfg.dropout,
                                               mix_seed(cfg.seed, 1 + epoch));
            trace = gcn_trace(model, a_hat, x, &mask);
            grads = gcn_grads_from_trace(model, a_hat, trace, y, supervised, &mask);
        } else {
            trace = gcn_trace(model, a_hat, x, nullptr);
            grads = gcn_grads_from_trace(model, a_hat, trace, y, supervised, nullptr);
        }
        adam_step(model.params, grads, state, cfg.learning_rate);
    }
    return model;
}

GCNModel gcn_baseline(const Dataset& ds, const SparseGraph& graph, const TrainConfig& cfg) {
    const TrainView view = make_train_view(ds);
    if (graph.node_count() != view.x.rows()) {
        throw UsageError("gcn: graph does not cover the train split");
    }
    return train_gcn(view.x, view.y, view.labeled, sym_normalize(graph), cfg);
}

LabelMatrix gcn_predict_isolated(const GCNModel& model, const DenseMatrix& x_test) {
    check_two_layers(model);
    // isolated node: A~ = I, D~ = I, so A^ rows are exactly the identity
    return predict_mlp(model.params, x_test);
}

LabelMatrix gcn_predict_with_graph(const GCNModel& model, const PropagationOperator& a_hat,
                                   const DenseMatrix& x) {
    return softmax_rows(gcn_forward(model, a_hat, x, RunMode::kEval));
}

// ---- serialization ----

namespace {

constexpr const char* kMagic = "GKD1";

void write_matrix(std::ostream& out, const DenseMatrix& m) {
    out << m.rows() << " " << m.cols() << "\n" << std::setprecision(17);
    for (std::size_t i = 0; i < m.rows(); ++i) {
        const auto row = m.row(i);
        for (std::size_t j = 0; j < row.size(); ++j) out << (j ? " " : "") << row[j];
        out << "\n";
    }
}

DenseMatrix read_matrix(std::istream& in, const std::string& what) {
    std::size_t rows = 0;
    std::size_t cols = 0;
    if (!(in >> rows >> cols)) throw ParseError("model file: bad " + what + " header");
    DenseMatrix m(rows, cols);
    for (double& v : m.values()) {
        if (!(in >> v)) throw ParseError("model file: truncated " + what);
    }
    return m;
}

void write_mlp(std::ostream& out, const std::string& name, const MLPParams& params) {
    out << "mlp " << name << " " << params.layers.size() << "\n";
    for (const auto& layer : params.layers) {
        write_matrix(out, layer.weight);
        out << std::setprecision(17);
        for (std::size_t j = 0; j < layer.bias.size(); ++j) out << (j ? " " : "") << layer.bias[j];
        out << "\n";
    }
}

MLPParams read_mlp(std::istream& in, const std::string& expected_name) {
    std::string tag;
    std::string name;
    std::size_t layer_count = 0;
    if (!(in >> tag >> name >> layer_count) || tag != "mlp" || name != expected_name) {
        throw ParseError("model file: expected mlp block \"" + expected_name + "\"");
    }
    MLPParams params;
    for (std::size_t l = 0; l < layer_count; ++l) {
        LinearLayer layer;
        layer.weight = read_matrix(in, "weight");
        layer.bias.resize(layer.weight.cols());
        for (double& v : layer.bias) {
            if (!(in >> v)) throw ParseError("model file: truncated bias");
        }
        params.layers.push_back(std::move(layer));
    }
    params.validate();
    return params;
}

} // namespace

SavedModel SavedModel::wrap(GKDModel model) {
    SavedModel out;
    out.kind = ModelKind::kGKD;
    out.gkd = std::move(model);
    return out;
}
SavedModel SavedModel::wrap(MLPParams model) {
    SavedModel out;
    out.kind = ModelKind::kDNN;
    out.dnn = std::move(model);
    return out;
}
SavedModel SavedModel::wrap(JFCModel model) {
    SavedModel out;
    out.kind = ModelKind::kJFC;
    out.jfc = std::move(model);
    return out;
}
SavedModel SavedModel::wrap(GCNModel model) {
    SavedModel out;
    out.kind = ModelKind::kGCN;
    out.gcn = std::move(model);
    return out;
}

std::string model_kind_name(ModelKind kind) {
    switch (kind) {
        case ModelKind::kGKD: return "gkd";
        case ModelKind::kDNN: return "dnn";
        case ModelKind::kJFC: return "dnn-jfc";
        case ModelKind::kGCN: return "gcn";
    }
    return "unknown";
}

void save_model(const SavedModel& model, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open for writing: " + path);
    out << kMagic << "\n" << "kind " << model_kind_name(model.kind) << "\n";
    switch (model.kind) {
        case ModelKind::kGKD:
            out << "lpa " << std::setprecision(17) << model.gkd.lpa.alpha << " "
                << model.gkd.lpa.max_iterations << " " << model.gkd.lpa.tolerance << "\n";
            out << "teacher-labels\n";
            write_matrix(out, model.gkd.teacher_labels.matrix());
            write_mlp(out, "teacher", model.gkd.teacher);
            write_mlp(out, "student", model.gkd.student);
            break;
        case ModelKind::kDNN:
            write_mlp(out, "net", model.dnn);
            break;
        case ModelKind::kJFC:
            out << "means " << model.jfc.imputation_means.size() << "\n" << std::setprecision(17);
            for (std::size_t j = 0; j < model.jfc.imputation_means.size(); ++j) {
                out << (j ? " " : "") << model.jfc.imputation_means[j];
            }
            out << "\n";
            write_mlp(out, "net", model.jfc.params);
            break;
        case ModelKind::kGCN:
            write_mlp(out, "net", model.gcn.params);
            break;
    }
    if (!out) throw IoError("write failed: " + path);
}

SavedModel load_model(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open: " + path);
    std::string magic;
    if (!(in >> magic) || magic != kMagic) {
        throw ParseError(path + ": not a " + std::string(kMagic) + " model file");
    }
    std::string tag;
    std::string kind_name;
    if (!(in >> tag >> kind_name) || tag != "kind") throw ParseError(path + ": missing kind");

    SavedModel model;
    if (kind_name == "gkd") {
        model.kind = ModelKind::kGKD;
        std::string lpa_tag;
        if (!(in >> lpa_tag >> model.gkd.lpa.alpha >> model.gkd.lpa.max_iterations >>
              model.gkd.lpa.tolerance) ||
            lpa_tag != "lpa") {
            throw ParseError(path + ": missing lpa block");
        }
        std::string labels_tag;
        if (!(in >> labels_tag) || labels_tag != "teacher-labels") {
            throw ParseError(path + ": missing teacher-labels block");
        }
        model.gkd.teacher_labels = LabelMatrix::from_matrix(read_matrix(in, "teacher-labels"));
        model.gkd.teacher = read_mlp(in, "teacher");
        model.gkd.student = read_mlp(in, "student");
    } else if (kind_name == "dnn") {
        model.kind = ModelKind::kDNN;
        model.dnn = read_mlp(in, "net");
    } else if (kind_name == "dnn-jfc") {
        model.kind = ModelKind::kJFC;
        std::string means_tag;
        std::size_t d_g = 0;
        if (!(in >> means_tag >> d_g) || means_tag != "means") {
            throw ParseError(path + ": missing means block");
        }
        model.jfc.imputation_means.resize(d_g);
        for (double& v : model.jfc.imputation_means) {
            if (!(in >> v)) throw ParseError(path + ": truncated means");
        }
        model.jfc.params = read_mlp(in, "net");
    } else if (kind_name == "gcn") {
        model.kind = ModelKind::kGCN;
        model.gcn.params = read_mlp(in, "net");
    } else {
        throw ParseError(path + ": unknown model kind \"" + kind_name + "\"");
    }
    return model;
}

LabelMatrix predict_model(const SavedModel& model, const DenseMatrix& x_test) {
    switch (model.kind) {
        case ModelKind::kGKD: return predict(model.gkd, x_test);
        case ModelKind::kDNN: return predict_mlp(model.dnn, x_test);
        case ModelKind::kJFC: return predict_jfc(model.jfc, x_test);
        case ModelKind::kGCN: return gcn_predict_isolated(model.gcn, x_test);
    }
    throw UsageError("predict_model: unknown model kind");
}

} // namespace gkd
