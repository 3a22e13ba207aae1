#include "gkd/dataset.hpp"

#include "gkd/errors.hpp"
#include "gkd/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <sstream>
#include <string>

namespace gkd {

namespace {

constexpr std::uint64_t kNodeStream = 0;
constexpr std::uint64_t kGraphStream = 1;
constexpr std::uint64_t kMissingStream = 2;

void write_double(std::ostream& out, double v) { out << std::setprecision(17) << v; }

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> cells;
    if (line.empty()) {
        cells.emplace_back(); // a single empty cell
        return cells;
    }
    std::string cell;
    std::istringstream in(line);
    while (std::getline(in, cell, ',')) cells.push_back(cell);
    if (line.back() == ',') cells.emplace_back();
    return cells;
}

std::string chomp(std::string line) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return line;
}

double parse_cell_double(const std::string& cell, const std::string& path, std::size_t line_no) {
    const char* begin = cell.c_str();
    char* end = nullptr;
    const double v = std::strtod(begin, &end);
    if (end == begin || *end != '\0') {
        throw ParseError(path, line_no, "non-numeric cell \"" + cell + "\"");
    }
    if (!std::isfinite(v)) throw ParseError(path, line_no, "non-finite cell \"" + cell + "\"");
    return v;
}

long parse_cell_int(const std::string& cell, const std::string& path, std::size_t line_no) {
    const char* begin = cell.c_str();
    char* end = nullptr;
    const long v = std::strtol(begin, &end, 10);
    if (end == begin || *end != '\0') {
        throw ParseError(path, line_no, "expected integer, got \"" + cell + "\"");
    }
    return v;
}

struct CsvTable {
    std::size_t cols = 0;
    std::vector<std::string> cells; // row-major
    std::size_t rows() const { return cols == 0 ? 0 : cells.size() / cols; }
};

CsvTable read_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open: " + path);
    CsvTable table;
    std::string line;
    std::size_t line_no = 0;
    if (!std::getline(in, line)) throw ParseError(path, 1, "missing header row");
    ++line_no;
    table.cols = split_csv_line(chomp(line)).size();
    if (table.cols == 0) throw ParseError(path, 1, "empty header row");
    while (std::getline(in, line)) {
        ++line_no;
        line = chomp(line);
        auto cells = split_csv_line(line);
        if (cells.size() != table.cols) {
            throw ParseError(path, line_no,
                             "expected " + std::to_string(table.cols) + " cells, got " +
                                 std::to_string(cells.size()));
        }
        for (auto& c : cells) table.cells.push_back(std::move(c));
    }
    return table;
}

} // namespace

void SplitMasks::validate(std::size_t n) const {
    if (train.size() != n || val.size() != n || test.size() != n || labeled.size() != n) {
        throw ValidationError("split masks must all have length n");
    }
    for (std::size_t i = 0; i < n; ++i) {
        const int assigned = (train[i] != 0) + (val[i] != 0) + (test[i] != 0);
        if (assigned != 1) {
            throw ValidationError("row " + std::to_string(i) +
                                  " must belong to exactly one of train/val/test");
        }
        if (labeled[i] && !train[i]) {
            throw ValidationError("row " + std::to_string(i) + " is labeled but not in train");
        }
    }
}

void SplitSpec::validate() const {
    if (!(train_fraction > 0.0 && val_fraction > 0.0 && test_fraction > 0.0)) {
        throw UsageError("split fractions must be positive");
    }
    if (std::abs(train_fraction + val_fraction + test_fraction - 1.0) > 1e-9) {
        throw UsageError("split fractions must sum to 1");
    }
    if (!(labeled_fraction > 0.0 && labeled_fraction <= 1.0)) {
        throw UsageError("labeled fraction must be in (0, 1]");
    }
}

void Dataset::validate() const {
    const std::size_t rows = features.rows();
    if (labels.rows() != rows || class_ids.size() != rows) {
        throw ValidationError("dataset: label rows must match feature rows");
    }
    if (graph_features.rows() != rows) {
        throw ValidationError("dataset: graph-feature rows must match feature rows");
    }
    if (graph_observed.size() != graph_features.size()) {
        throw ValidationError("dataset: observed flags must cover every graph entry");
    }
    for (std::size_t i = 0; i < rows; ++i) {
        const auto row = labels.row(i);
        std::size_t ones = 0;
        for (double v : row) {
            if (v == 1.0) {
                ++ones;
            } else if (v != 0.0) {
                throw ValidationError("dataset: label row " + std::to_string(i) +
                                      " is not exact one-hot");
            }
        }
        const int c = class_ids[i];
        if (ones != 1 || c < 0 || static_cast<std::size_t>(c) >= labels.cols() ||
            row[static_cast<std::size_t>(c)] != 1.0) {
            throw ValidationError("dataset: label row " + std::to_string(i) +
                                  " disagrees with class id");
        }
    }
    if (!splits.empty()) splits.validate(rows);
}

Dataset generate_synthetic(const SyntheticSpec& spec) {
    if (spec.n < 2 || spec.n % 2 != 0) throw UsageError("synthetic: n must be even and >= 2");
    if (spec.node_dim < 2) throw UsageError("synthetic: node dim must be >= 2");
    if (spec.graph_dim < 1) throw UsageError("synthetic: graph dim must be >= 1");
    if (spec.informative_dims < 1 || spec.informative_dims > spec.node_dim) {
        throw UsageError("synthetic: informative dims must be in [1, node dim]");
    }
    if (!(spec.p_missing >= 0.0 && spec.p_missing < 1.0)) {
        throw UsageError("synthetic: p_missing must be in [0, 1)");
    }

    Dataset ds;
    std::vector<int> class_ids(spec.n);
    for (std::size_t i = spec.n / 2; i < spec.n; ++i) class_ids[i] = 1;

    // node features: normal clouds around opposite hypercube vertices on the
    // informative dims, standard noise on the rest
    Rng node_rng(mix_seed(spec.seed, kNodeStream));
    ds.features = DenseMatrix(spec.n, spec.node_dim);
    for (std::size_t i = 0; i < spec.n; ++i) {
        const double vertex = class_ids[i] == 0 ? -spec.class_sep : spec.class_sep;
        auto row = ds.features.row(i);
        for (std::size_t j = 0; j < spec.node_dim; ++j) {
            row[j] = node_rng.normal() + (j < spec.informative_dims ? vertex : 0.0);
        }
    }

    // graph-modality features: N(mu_c, I) with mu = -/+ class_sep * 1
    Rng graph_rng(mix_seed(spec.seed, kGraphStream));
    ds.graph_features = DenseMatrix(spec.n, spec.graph_dim);
    for (std::size_t i = 0; i < spec.n; ++i) {
        const double mu = class_ids[i] == 0 ? -spec.class_sep : spec.class_sep;
        auto row = ds.graph_features.row(i);
        for (std::size_t j = 0; j < spec.graph_dim; ++j) row[j] = mu + graph_rng.normal();
    }
    ds.graph_observed.assign(spec.n * spec.graph_dim, 1);
    apply_missing(ds.graph_features, ds.graph_observed, spec.p_missing,
                  mix_seed(spec.seed, kMissingStream));

    ds.labels = LabelMatrix::one_hot(class_ids, 2);
    ds.class_ids = std::move(class_ids);
    return ds;
}

SplitMasks make_splits(std::size_t n, const SplitSpec& spec) {
    spec.validate();
    std::size_t n_train = static_cast<std::size_t>(std::floor(spec.train_fraction * static_cast<double>(n)));
    const std::size_t n_val = static_cast<std::size_t>(std::floor(spec.val_fraction * static_cast<double>(n)));
    const std::size_t n_test = static_cast<std::size_t>(std::floor(spec.test_fraction * static_cast<double>(n)));
    n_train += n - (n_train + n_val + n_test); // remainder goes to train
    if (n_train == 0 || n_val == 0 || n_test == 0) {
        throw UsageError("make_splits: a split is empty at n = " + std::to_string(n));
    }
    const std::size_t n_labeled =
        static_cast<std::size_t>(std::floor(spec.labeled_fraction * static_cast<double>(n_train)));
    if (n_labeled == 0) throw UsageError("make_splits: labeled subset is empty");

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    Rng rng(spec.seed);
    rng.shuffle(order);

    SplitMasks masks;
    masks.train.assign(n, 0);
    masks.val.assign(n, 0);
    masks.test.assign(n, 0);
    masks.labeled.assign(n, 0);
    for (std::size_t k = 0; k < n_train; ++k) masks.train[order[k]] = 1;
    for (std::size_t k = n_train; k < n_train + n_val; ++k) masks.val[order[k]] = 1;
    for (std::size_t k = n_train + n_val; k < n; ++k) masks.test[order[k]] = 1;
    // the shuffled prefix is already a uniform subset of train
    for (std::size_t k = 0; k < n_labeled; ++k) masks.labeled[order[k]] = 1;
    masks.validate(n);
    return masks;
}

void apply_missing(DenseMatrix& graph_features, std::vector<std::uint8_t>& observed,
                   double p_missing, std::uint64_t seed) {
    if (!(p_missing >= 0.0 && p_missing < 1.0)) {
        throw UsageError("apply_missing: p_missing must be in [0, 1)");
    }
    if (observed.size() != graph_features.size()) {
        throw ShapeError("apply_missing: observed flags must cover every entry");
    }
    Rng rng(seed);
    auto vals = graph_features.values();
    for (std::size_t k = 0; k < observed.size(); ++k) {
        const double u = rng.uniform();
        if (observed[k] && u < p_missing) {
            observed[k] = 0;
            vals[k] = 0.0;
        }
    }
}

Dataset load_csv_dataset(const std::string& features_path, const std::string& labels_path,
                         const std::string& graph_features_path) {
    const CsvTable feat = read_csv(features_path);
    const CsvTable lab = read_csv(labels_path);
    const CsvTable graph = read_csv(graph_features_path);

    if (lab.cols != 1) throw ParseError(labels_path, 1, "labels file must have one column");
    const std::size_t n = feat.rows();
    if (lab.rows() != n) {
        throw ParseError(labels_path, lab.rows() + 1,
                         "row count " + std::to_string(lab.rows()) + " does not match features (" +
                             std::to_string(n) + ")");
    }
    if (graph.rows() != n) {
        throw ParseError(graph_features_path, graph.rows() + 1,
                         "row count " + std::to_string(graph.rows()) + " does not match features (" +
                             std::to_string(n) + ")");
    }

    Dataset ds;
    ds.features = DenseMatrix(n, feat.cols);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < feat.cols; ++j) {
            const std::string& cell = feat.cells[i * feat.cols + j];
            if (cell.empty()) {
                throw ParseError(features_path, i + 2, "node features cannot be missing");
            }
            ds.features(i, j) = parse_cell_double(cell, features_path, i + 2);
        }
    }

    ds.class_ids.resize(n);
    long max_class = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const long c = parse_cell_int(lab.cells[i], labels_path, i + 2);
        if (c < 0) throw ParseError(labels_path, i + 2, "class ids must be non-negative");
        ds.class_ids[i] = static_cast<int>(c);
        max_class = std::max(max_class, c);
    }
    ds.labels = LabelMatrix::one_hot(ds.class_ids, static_cast<std::size_t>(max_class) + 1);

    ds.graph_features = DenseMatrix(n, graph.cols);
    ds.graph_observed.assign(n * graph.cols, 0);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < graph.cols; ++j) {
            const std::string& cell = graph.cells[i * graph.cols + j];
            if (cell.empty()) continue; // missing entry
            ds.graph_features(i, j) = parse_cell_double(cell, graph_features_path, i + 2);
            ds.graph_observed[i * graph.cols + j] = 1;
        }
    }
    ds.validate();
    return ds;
}

DenseMatrix load_csv_matrix(const std::string& path) {
    const CsvTable table = read_csv(path);
    DenseMatrix m(table.rows(), table.cols);
    for (std::size_t i = 0; i < table.rows(); ++i) {
        for (std::size_t j = 0; j < table.cols; ++j) {
            const std::string& cell = table.cells[i * table.cols + j];
            if (cell.empty()) throw ParseError(path, i + 2, "missing value not allowed here");
            m(i, j) = parse_cell_double(cell, path, i + 2);
        }
    }
    return m;
}

std::vector<int> load_csv_labels(const std::string& path) {
    const CsvTable table = read_csv(path);
    if (table.cols != 1) throw ParseError(path, 1, "labels file must have one column");
    std::vector<int> out(table.rows());
    for (std::size_t i = 0; i < table.rows(); ++i) {
        const long c = parse_cell_int(table.cells[i], path, i + 2);
        if (c < 0) throw ParseError(path, i + 2, "class ids must be non-negative");
        out[i] = static_cast<int>(c);
    }
    return out;
}

void load_csv_matrix_with_missing(const std::string& path, DenseMatrix& values,
                                  std::vector<std::uint8_t>& observed) {
    const CsvTable table = read_csv(path);
    values = DenseMatrix(table.rows(), table.cols);
    observed.assign(table.rows() * table.cols, 0);
    for (std::size_t i = 0; i < table.rows(); ++i) {
        for (std::size_t j = 0; j < table.cols; ++j) {
            const std::string& cell = table.cells[i * table.cols + j];
            if (cell.empty()) continue;
            values(i, j) = parse_cell_double(cell, path, i + 2);
            observed[i * table.cols + j] = 1;
        }
    }
}

void save_csv_dataset(const Dataset& ds, const std::string& features_path,
                      const std::string& labels_path, const std::string& graph_features_path) {
    {
        std::ofstream out(features_path);
        if (!out) throw IoError("cannot open for writing: " + features_path);
        for (std::size_t j = 0; j < ds.feature_dim(); ++j) out << (j ? "," : "") << "f" << j;
        out << "\n";
        for (std::size_t i = 0; i < ds.n(); ++i) {
            const auto row = ds.features.row(i);
            for (std::size_t j = 0; j < row.size(); ++j) {
                if (j) out << ",";
                write_double(out, row[j]);
            }
            out << "\n";
        }
        if (!out) throw IoError("write failed: " + features_path);
    }
    {
        std::ofstream out(labels_path);
        if (!out) throw IoError("cannot open for writing: " + labels_path);
        out << "label\n";
        for (std::size_t i = 0; i < ds.n(); ++i) out << ds.class_ids[i] << "\n";
        if (!out) throw IoError("write failed: " + labels_path);
    }
    {
        std::ofstream out(graph_features_path);
        if (!out) throw IoError("cannot open for writing: " + graph_features_path);
        for (std::size_t j = 0; j < ds.graph_dim(); ++j) out << (j ? "," : "") << "g" << j;
        out << "\n";
        for (std::size_t i = 0; i < ds.n(); ++i) {
            for (std::size_t j = 0; j < ds.graph_dim(); ++j) {
                if (j) out << ",";
                if (ds.graph_entry_observed(i, j)) write_double(out, ds.graph_features(i, j));
            }
            out << "\n";
        }
        if (!out) throw IoError("write failed: " + graph_features_path);
    }
}

} // namespace gkd
