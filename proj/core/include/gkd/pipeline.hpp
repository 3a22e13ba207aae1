#pragma once

#include "gkd/dataset.hpp"
#include "gkd/graph.hpp"
#include "gkd/lpa.hpp"
#include "gkd/mlp.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace gkd {

struct GKDModel {
    MLPParams teacher;
    MLPParams student;       // input dim is the node-feature dim, never graph features
    LPAConfig lpa;
    LabelMatrix teacher_labels; // Y^T over the training rows, retained for audit
};

// The training rows of a dataset in ascending row order, with the labeled
// mask re-indexed into the train subspace. Graph nodes follow this order.
struct TrainView {
    std::vector<std::size_t> train_indices;
    DenseMatrix x;
    LabelMatrix y;
    Mask labeled;
    std::vector<int> class_ids;
};
TrainView make_train_view(const Dataset& ds);

// Supervised MLP on the labeled rows (hard one-hot cross-entropy). Every
// class must appear among the labeled rows.
MLPParams train_teacher(const DenseMatrix& x, const LabelMatrix& y_l, const Mask& labeled_mask,
                        const TrainConfig& cfg);

// Y^{T0}: labeled rows copied from y_l, unlabeled rows from the teacher's
// softmax output.
LabelMatrix pseudo_label(const MLPParams& teacher, const DenseMatrix& x, const LabelMatrix& y_l,
                         const Mask& labeled_mask);

// teacher -> pseudo-labels -> propagation -> student trained on all training
// rows against Y^T. The graph must cover exactly the training rows (node i
// is the i-th training row in ascending dataset order).
GKDModel gkd_train(const Dataset& ds, const SparseGraph& graph, const TrainConfig& teacher_cfg,
                   const LPAConfig& lpa_cfg, const TrainConfig& student_cfg);

// Graph-free inference: softmax of the student's eval-mode forward pass.
LabelMatrix predict(const GKDModel& model, const DenseMatrix& x_test);

LabelMatrix predict_mlp(const MLPParams& params, const DenseMatrix& x);

// Feature-only DNN baseline (same procedure as train_teacher).
MLPParams dnn_baseline(const Dataset& ds, const TrainConfig& cfg);

struct JFCModel {
    MLPParams params;
    std::vector<double> imputation_means; // per graph feature, over observed training entries
};

// DNN-JFC: MLP on [node features || graph features]; missing graph entries
// are imputed with the per-feature mean over observed training entries.
JFCModel dnn_jfc_baseline(const Dataset& ds, const TrainConfig& cfg);

// Builds the concatenated input block. Passing null graph features models
// inference without the graph modality: every graph column is imputed with
// the stored training means.
DenseMatrix jfc_inputs(const JFCModel& model, const DenseMatrix& x, const DenseMatrix* graph_features,
                       const std::vector<std::uint8_t>* observed);
LabelMatrix predict_jfc(const JFCModel& model, const DenseMatrix& x,
                        const DenseMatrix* graph_features = nullptr,
                        const std::vector<std::uint8_t>* observed = nullptr);

// Two-layer GCN baseline, H2 = A^ ReLU(A^ X W1 + b1) W2 + b2 with
// A^ = sym_normalize(graph).
struct GCNModel {
    MLPParams params; // exactly two layers
};

DenseMatrix gcn_forward(const GCNModel& model, const PropagationOperator& a_hat,
                        const DenseMatrix& x, RunMode mode, std::uint64_t seed = 0,
                        double dropout = 0.0);

// Analytic gradients of the masked soft cross-entropy through the eval-mode
// GCN forward pass.
MLPGrads gcn_backward(const GCNModel& model, const PropagationOperator& a_hat, const DenseMatrix& x,
                      const LabelMatrix& target, const Mask& row_mask);

// Full-batch Adam training of the two-layer GCN over an explicit propagation
// matrix, supervised on the masked rows.
GCNModel train_gcn(const DenseMatrix& x, const LabelMatrix& y, const Mask& supervised,
                   const PropagationOperator& a_hat, const TrainConfig& cfg);

GCNModel gcn_baseline(const Dataset& ds, const SparseGraph& graph, const TrainConfig& cfg);

// Inference for isolated nodes: A^ rows reduce to the self-loop, so the
// forward pass is the plain MLP through the learned weights.
LabelMatrix gcn_predict_isolated(const GCNModel& model, const DenseMatrix& x_test);

// Transductive inference over a graph that includes the query nodes.
LabelMatrix gcn_predict_with_graph(const GCNModel& model, const PropagationOperator& a_hat,
                                   const DenseMatrix& x);

// Model files: versioned text serialization with magic header "GKD1".
enum class ModelKind { kGKD, kDNN, kJFC, kGCN };

struct SavedModel {
    ModelKind kind = ModelKind::kDNN;
    GKDModel gkd;
    MLPParams dnn;
    JFCModel jfc;
    GCNModel gcn;

    static SavedModel wrap(GKDModel model);
    static SavedModel wrap(MLPParams model);
    static SavedModel wrap(JFCModel model);
    static SavedModel wrap(GCNModel model);
};

void save_model(const SavedModel& model, const std::string& path);
SavedModel load_model(const std::string& path);

// Graph-free inference for any saved model kind.
LabelMatrix predict_model(const SavedModel& model, const DenseMatrix& x_test);

std::string model_kind_name(ModelKind kind);

} // namespace gkd
