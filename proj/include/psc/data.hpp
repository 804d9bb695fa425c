#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <array>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "psc/model.hpp"
#include "psc/sampler.hpp"

namespace psc {

struct CsvSchema {
    bool has_header = true;
    std::string label_column;        // by name (requires header) ...
    int label_index = -1;            // ... or by 0-based index
    std::map<std::string, int> label_map; // raw label value -> class in {1..c}; empty = auto
};

struct SplitSpec {
    double test_fraction = 0.0; // either fraction ...
    int test_count = 0;         // ... or absolute count
    std::uint64_t seed = 1;
    bool stratified = false;

    void validate(Eigen::Index n) const {
        if (test_count > 0) {
            if (test_count >= n) throw std::invalid_argument("SplitSpec: test_count too large");
        } else {
            if (test_fraction <= 0.0 || test_fraction >= 1.0)
                throw std::invalid_argument("SplitSpec: test_fraction must be in (0,1)");
        }
    }
};

struct SyntheticSpec {
    int m = 5, k = 2, c = 2;
    Eigen::Index n = 500;
    int num_atoms = 3;
    double atom_spread = 4.0; // separation scale of the random atom locations
    Vector sigma;             // k kernel scales; empty = all 1
    double sigma0 = 0.5;
    std::uint64_t seed = 1;
    std::vector<Atom> atoms;  // explicit atoms; empty = random

    void validate() const {
        if (k < 1 || k > m) throw std::invalid_argument("SyntheticSpec: need 1 <= k <= m");
        if (c < 2) throw std::invalid_argument("SyntheticSpec: need c >= 2");
        if (n < 1) throw std::invalid_argument("SyntheticSpec: need n >= 1");
        if (sigma0 <= 0.0) throw std::invalid_argument("SyntheticSpec: sigma0 > 0");
    }
};

namespace data_io {

namespace detail {

inline std::vector<std::string> split_line(const std::string& line, char sep = ',') {
    std::vector<std::string> out;
    std::string cur;
    std::stringstream ss(line);
    while (std::getline(ss, cur, sep)) out.push_back(cur);
    if (!line.empty() && line.back() == sep) out.emplace_back();
    return out;
}

inline std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r\n");
    size_t b = s.find_last_not_of(" \t\r\n");
    return a == std::string::npos ? "" : s.substr(a, b - a + 1);
}

inline double parse_cell(const std::string& cell, size_t row, size_t col) {
    try {
        size_t pos = 0;
        double v = std::stod(cell, &pos);
        if (pos != cell.size()) throw std::invalid_argument("trailing characters");
        return v;
    } catch (const std::exception&) {
        throw std::runtime_error("load_csv: unparseable cell at row " + std::to_string(row + 1) +
                                 ", column " + std::to_string(col + 1) + ": '" + cell + "'");
    }
}

} // namespace detail

/// Generic CSV ingestion. The schema names the label column; raw label
/// values are mapped to {1..c} either through an explicit map or by sorted
/// order of the distinct values seen.
inline LabeledDataset load_csv(const std::string& path, const CsvSchema& schema) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("load_csv: cannot open " + path);
    std::string line;
    std::vector<std::string> header;
    if (schema.has_header) {
        if (!std::getline(in, line)) throw std::runtime_error("load_csv: empty file " + path);
        header = detail::split_line(line);
        for (auto& h : header) h = detail::trim(h);
    }
    int label_idx = schema.label_index;
    if (label_idx < 0) {
        if (schema.label_column.empty())
            throw std::invalid_argument("load_csv: schema must name the label column");
        auto it = std::find(header.begin(), header.end(), schema.label_column);
        if (it == header.end())
            throw std::runtime_error("load_csv: label column '" + schema.label_column +
                                     "' not in header");
        label_idx = int(it - header.begin());
    }

    std::vector<std::vector<double>> rows;
    std::vector<std::string> raw_labels;
    size_t row_no = schema.has_header ? 1 : 0;
    while (std::getline(in, line)) {
        if (detail::trim(line).empty()) { ++row_no; continue; }
        auto cells = detail::split_line(line);
        if (label_idx >= int(cells.size()))
            throw std::runtime_error("load_csv: row " + std::to_string(row_no + 1) +
                                     " has no label column");
        std::vector<double> feats;
        for (size_t c = 0; c < cells.size(); ++c) {
            if (int(c) == label_idx) continue;
            feats.push_back(detail::parse_cell(detail::trim(cells[c]), row_no, c));
        }
        rows.push_back(std::move(feats));
        raw_labels.push_back(detail::trim(cells[size_t(label_idx)]));
        ++row_no;
    }
    if (rows.empty()) throw std::runtime_error("load_csv: no data rows in " + path);

    std::map<std::string, int> lmap = schema.label_map;
    if (lmap.empty()) {
        std::vector<std::string> uniq = raw_labels;
        std::sort(uniq.begin(), uniq.end());
        uniq.erase(std::unique(uniq.begin(), uniq.end()), uniq.end());
        for (size_t i = 0; i < uniq.size(); ++i) lmap[uniq[i]] = int(i) + 1;
    }

    LabeledDataset d;
    const size_t m = rows.front().size();
    d.X.resize(Eigen::Index(rows.size()), Eigen::Index(m));
    d.y.resize(rows.size());
    for (size_t i = 0; i < rows.size(); ++i) {
        if (rows[i].size() != m)
            throw std::runtime_error("load_csv: inconsistent column count at row " +
                                     std::to_string(i + 1));
        for (size_t j = 0; j < m; ++j) d.X(Eigen::Index(i), Eigen::Index(j)) = rows[i][j];
        auto it = lmap.find(raw_labels[i]);
        if (it == lmap.end())
            throw std::runtime_error("load_csv: unknown label '" + raw_labels[i] + "' at row " +
                                     std::to_string(i + 1));
        d.y[i] = it->second;
    }
    d.c = 0;
    for (auto& [_, v] : lmap) d.c = std::max(d.c, v);
    for (size_t j = 0; j < m; ++j) {
        size_t hj = size_t(label_idx) <= j ? j + 1 : j;
        d.feature_names.push_back(hj < header.size() ? header[hj] : "x" + std::to_string(j + 1));
    }
    if (!d.X.allFinite()) throw std::runtime_error("load_csv: non-finite entries in " + path);
    return d;
}

inline const std::vector<std::string>& wbc_feature_names() {
    static const std::vector<std::string> names = {
        "clump thickness",       "uniformity of cell size", "uniformity of cell shape",
        "marginal adhesion",     "single epithelial cell size", "bare nuclei",
        "bland chromatin",       "normal nucleoli",         "mitosis"};
    return names;
}

struct WbcLoadInfo {
    size_t raw_rows = 0;
    size_t dropped_missing = 0;
};

/// Loader for the UCI breast-cancer-wisconsin original format: id column,
/// nine 1-10 attributes with '?' for missing, class coded 2 (benign) / 4
/// (malignant). Rows with any missing attribute are dropped.
inline LabeledDataset load_wbc(const std::string& path, WbcLoadInfo* info = nullptr) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("load_wbc: cannot open " + path);
    std::vector<std::array<double, 9>> rows;
    std::vector<int> labels;
    WbcLoadInfo li;
    std::string line;
    size_t row_no = 0;
    while (std::getline(in, line)) {
        ++row_no;
        if (detail::trim(line).empty()) continue;
        ++li.raw_rows;
        auto cells = detail::split_line(line);
        if (cells.size() != 11)
            throw std::runtime_error("load_wbc: malformed row " + std::to_string(row_no) +
                                     " (expected 11 fields, got " + std::to_string(cells.size()) +
                                     ")");
        bool missing = false;
        for (size_t c = 1; c <= 9; ++c)
            if (detail::trim(cells[c]) == "?") missing = true;
        if (missing) {
            ++li.dropped_missing;
            continue;
        }
        std::array<double, 9> feats{};
        for (size_t c = 1; c <= 9; ++c)
            feats[c - 1] = detail::parse_cell(detail::trim(cells[c]), row_no - 1, c);
        std::string cls = detail::trim(cells[10]);
        if (cls == "2") labels.push_back(1);
        else if (cls == "4") labels.push_back(2);
        else
            throw std::runtime_error("load_wbc: unknown class '" + cls + "' at row " +
                                     std::to_string(row_no));
        rows.push_back(feats);
    }
    if (rows.empty()) throw std::runtime_error("load_wbc: no usable rows in " + path);
    LabeledDataset d;
    d.c = 2;
    d.feature_names = wbc_feature_names();
    d.X.resize(Eigen::Index(rows.size()), 9);
    d.y = std::move(labels);
    for (size_t i = 0; i < rows.size(); ++i)
        for (int j = 0; j < 9; ++j) d.X(Eigen::Index(i), j) = rows[i][size_t(j)];
    if (info) *info = li;
    return d;
}

/// Center and scale each feature to unit variance; the transform is recorded
/// on the dataset and reapplied to prediction inputs. Zero-variance features
/// keep scale 1.
inline LabeledDataset standardize(const LabeledDataset& data,
                                  std::vector<std::string>* warnings = nullptr) {
    LabeledDataset out = data;
    const Eigen::Index n = data.n(), m = data.m();
    out.transform.center = data.X.colwise().mean().transpose();
    out.transform.scale.resize(m);
    for (Eigen::Index j = 0; j < m; ++j) {
        double var = (data.X.col(j).array() - out.transform.center(j)).square().sum() /
                     double(std::max<Eigen::Index>(n - 1, 1));
        double sd = std::sqrt(var);
        if (sd < 1e-12) {
            out.transform.scale(j) = 1.0;
            if (warnings)
                warnings->push_back("feature " + std::to_string(j + 1) +
                                    " has zero variance; left unscaled");
        } else {
            out.transform.scale(j) = sd;
        }
    }
    out.X = (data.X.rowwise() - out.transform.center.transpose()).array().rowwise() /
            out.transform.scale.transpose().array();
    return out;
}

/// Apply a recorded transform to new predictors (for prediction inputs).
inline Matrix apply_transform(const Standardization& t, const Matrix& X) {
    if (t.center.size() == 0) return X;
    if (X.cols() != t.center.size())
        throw std::invalid_argument("apply_transform: dimension mismatch");
    return (X.rowwise() - t.center.transpose()).array().rowwise() /
           t.scale.transpose().array();
}

inline LabeledDataset take_rows(const LabeledDataset& data, const std::vector<Eigen::Index>& idx) {
    LabeledDataset out;
    out.c = data.c;
    out.feature_names = data.feature_names;
    out.transform = data.transform;
    out.X.resize(Eigen::Index(idx.size()), data.m());
    out.y.resize(idx.size());
    for (size_t i = 0; i < idx.size(); ++i) {
        out.X.row(Eigen::Index(i)) = data.X.row(idx[i]);
        out.y[i] = data.y[size_t(idx[i])];
    }
    return out;
}

/// Deterministic, disjoint, exhaustive train/test split; the stratified
/// option preserves class ratios within one observation per class.
inline std::pair<LabeledDataset, LabeledDataset> split(const LabeledDataset& data,
                                                       const SplitSpec& spec) {
    spec.validate(data.n());
    const Eigen::Index n = data.n();
    Eigen::Index n_test = spec.test_count > 0
                              ? spec.test_count
                              : Eigen::Index(std::llround(spec.test_fraction * double(n)));
    n_test = std::max<Eigen::Index>(1, std::min(n_test, n - 1));
    Rng g(spec.seed);
    std::vector<Eigen::Index> test_idx, train_idx;

    if (spec.stratified) {
        std::vector<std::vector<Eigen::Index>> by_class(size_t(data.c));
        for (Eigen::Index i = 0; i < n; ++i) by_class[size_t(data.y[size_t(i)] - 1)].push_back(i);
        double frac = double(n_test) / double(n);
        for (auto& members : by_class) {
            if (members.empty()) continue;
            std::shuffle(members.begin(), members.end(), g);
            Eigen::Index take = Eigen::Index(std::llround(frac * double(members.size())));
            take = std::min<Eigen::Index>(take, Eigen::Index(members.size()) - 1);
            if (take < 1 && members.size() > 1) take = 1;
            for (size_t i = 0; i < members.size(); ++i)
                (Eigen::Index(i) < take ? test_idx : train_idx).push_back(members[i]);
        }
        if (test_idx.empty() || train_idx.empty())
            throw std::runtime_error("split: impossible stratification");
    } else {
        std::vector<Eigen::Index> perm(static_cast<size_t>(n));
        for (Eigen::Index i = 0; i < n; ++i) perm[size_t(i)] = i;
        std::shuffle(perm.begin(), perm.end(), g);
        test_idx.assign(perm.begin(), perm.begin() + n_test);
        train_idx.assign(perm.begin() + n_test, perm.end());
    }
    std::sort(test_idx.begin(), test_idx.end());
    std::sort(train_idx.begin(), train_idx.end());
    return {take_rows(data, train_idx), take_rows(data, test_idx)};
}

/// Draw a ground-truth state and a dataset from it. The true state is
/// returned for recovery experiments.
inline std::pair<LabeledDataset, ModelState> generate_synthetic(const SyntheticSpec& spec) {
    spec.validate();
    Rng g(spec.seed);
    ModelState truth;
    truth.k = spec.k;
    truth.U = priors::sample_uniform_frame(g, spec.m, spec.k);
    if (spec.k < spec.m) truth.eta = rng::gaussian_vector(g, spec.m - spec.k, 1.0);
    else truth.eta.resize(0);
    truth.sync_frame();
    truth.scales.sigma = spec.sigma.size() == spec.k ? spec.sigma : Vector::Ones(spec.k);
    truth.scales.sigma0 = spec.sigma0;

    int T = spec.atoms.empty() ? spec.num_atoms : int(spec.atoms.size());
    if (T < 1) throw std::invalid_argument("generate_synthetic: need at least one atom");
    truth.mixing.weights = Vector::Constant(T, 1.0 / double(T));
    if (!spec.atoms.empty()) {
        truth.mixing.atoms = spec.atoms;
    } else {
        truth.mixing.atoms.resize(size_t(T));
        for (int j = 0; j < T; ++j) {
            truth.mixing.atoms[size_t(j)].mu =
                rng::gaussian_vector(g, spec.k, spec.atom_spread);
            Vector alpha = Vector::Constant(spec.c, 0.3); // sparse class vectors
            truth.mixing.atoms[size_t(j)].nu = rng::dirichlet(g, alpha);
        }
        // Degeneracy guard for recovery experiments: all atoms at one point
        // make k unidentifiable from the data.
        bool all_same = true;
        for (int j = 1; j < T; ++j)
            if ((truth.mixing.atoms[size_t(j)].mu - truth.mixing.atoms[0].mu).norm() > 1e-9)
                all_same = false;
        if (all_same && T > 1)
            throw std::runtime_error("generate_synthetic: degenerate atoms");
    }
    LabeledDataset d = sampler::sample_dataset(truth, spec.n, g);
    d.feature_names.clear();
    for (int j = 0; j < spec.m; ++j) d.feature_names.push_back("x" + std::to_string(j + 1));
    return {std::move(d), std::move(truth)};
}

// ---- chain serialization (line-delimited JSON, bit-exact round trip) ----

inline nlohmann::json vector_to_json(const Vector& v) {
    nlohmann::json a = nlohmann::json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
    return a;
}

inline Vector vector_from_json(const nlohmann::json& a) {
    Vector v(a.size());
    for (size_t i = 0; i < a.size(); ++i) v(Eigen::Index(i)) = a[i].get<double>();
    return v;
}

inline nlohmann::json state_to_json(const ModelState& s, int iter) {
    nlohmann::json j;
    j["iter"] = iter;
    j["k"] = s.k;
    j["m"] = s.m();
    nlohmann::json ucols = nlohmann::json::array();
    for (Eigen::Index c = 0; c < s.U.cols(); ++c) ucols.push_back(vector_to_json(s.U.col(c)));
    j["U"] = ucols; // column-major
    j["theta"] = vector_to_json(s.theta);
    j["eta"] = vector_to_json(s.eta);
    j["sigma0"] = s.scales.sigma0;
    j["sigma"] = vector_to_json(s.scales.sigma);
    j["weights"] = vector_to_json(s.mixing.weights);
    nlohmann::json atoms = nlohmann::json::array();
    for (const auto& a : s.mixing.atoms)
        atoms.push_back({{"mu", vector_to_json(a.mu)}, {"nu", vector_to_json(a.nu)}});
    j["atoms"] = atoms;
    return j;
}

inline ModelState state_from_json(const nlohmann::json& j) {
    ModelState s;
    s.k = j.at("k").get<int>();
    Eigen::Index m = j.at("m").get<Eigen::Index>();
    s.U.resize(m, s.k);
    const auto& ucols = j.at("U");
    for (int c = 0; c < s.k; ++c) s.U.col(c) = vector_from_json(ucols[size_t(c)]);
    s.theta = vector_from_json(j.at("theta"));
    s.eta = vector_from_json(j.at("eta"));
    s.scales.sigma0 = j.at("sigma0").get<double>();
    s.scales.sigma = vector_from_json(j.at("sigma"));
    s.mixing.weights = vector_from_json(j.at("weights"));
    for (const auto& a : j.at("atoms"))
        s.mixing.atoms.push_back({vector_from_json(a.at("mu")), vector_from_json(a.at("nu"))});
    s.V = s.k < m ? geometry::complete_frame(s.U) : Matrix(m, 0);
    return s;
}

inline void save_chain(const PosteriorChain& chain, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("save_chain: cannot write " + path);
    for (size_t i = 0; i < chain.draws.size(); ++i) {
        nlohmann::json j = state_to_json(chain.draws[i], chain.burn_in + int(i) * chain.thin);
        double lj_idx = double(chain.burn_in + int(i) * chain.thin);
        size_t ti = size_t(lj_idx);
        if (ti < chain.diagnostics.log_joint_trace.size())
            j["log_joint"] = chain.diagnostics.log_joint_trace[ti];
        out << j.dump() << "\n";
    }
}

inline PosteriorChain load_chain(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("load_chain: cannot open " + path);
    PosteriorChain chain;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        nlohmann::json j = nlohmann::json::parse(line);
        chain.draws.push_back(state_from_json(j));
        if (j.contains("log_joint"))
            chain.diagnostics.log_joint_trace.push_back(j["log_joint"].get<double>());
    }
    if (chain.draws.empty()) throw std::runtime_error("load_chain: no draws in " + path);
    return chain;
}

} // namespace data_io
} // namespace psc
