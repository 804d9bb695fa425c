#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <stdexcept>
#include <vector>

#include "psc/model.hpp"
#include "psc/rng.hpp"

namespace psc {

struct KnnConfig {
    std::vector<int> neighbor_grid;

    void validate(Eigen::Index n_train) const {
        if (neighbor_grid.empty()) throw std::invalid_argument("KnnConfig: empty grid");
        for (int k : neighbor_grid)
            if (k < 1 || k > n_train)
                throw std::invalid_argument("KnnConfig: neighbor count out of range");
    }
};

namespace baselines {

/// Majority vote among the k nearest training points by Euclidean distance.
/// Distance ties break by index order, vote ties by smallest label.
inline std::vector<int> knn_predict(const LabeledDataset& train, const Matrix& X_new,
                                    int k_neighbors) {
    const Eigen::Index n = train.n();
    if (n == 0) throw std::invalid_argument("knn_predict: empty training set");
    if (k_neighbors < 1 || k_neighbors > n)
        throw std::invalid_argument("knn_predict: k out of range");
    std::vector<int> out(size_t(X_new.rows()));
    std::vector<std::pair<double, Eigen::Index>> dist(static_cast<size_t>(n));
    for (Eigen::Index q = 0; q < X_new.rows(); ++q) {
        for (Eigen::Index i = 0; i < n; ++i)
            dist[size_t(i)] = {(train.X.row(i) - X_new.row(q)).squaredNorm(), i};
        std::stable_sort(dist.begin(), dist.end(),
                         [](const auto& a, const auto& b) { return a.first < b.first; });
        std::vector<int> votes(size_t(train.c), 0);
        for (int j = 0; j < k_neighbors; ++j)
            votes[size_t(train.y[size_t(dist[size_t(j)].second)] - 1)] += 1;
        int best = 0;
        for (int l = 1; l < train.c; ++l)
            if (votes[size_t(l)] > votes[size_t(best)]) best = l;
        out[size_t(q)] = best + 1;
    }
    return out;
}

inline double error_rate(const std::vector<int>& pred, const std::vector<int>& truth) {
    if (pred.size() != truth.size()) throw std::invalid_argument("error_rate: size mismatch");
    int errors = 0;
    for (size_t i = 0; i < pred.size(); ++i)
        if (pred[i] != truth[i]) ++errors;
    return double(errors) / double(pred.size());
}

struct SweepResult {
    int best_param = 0;
    double error = 1.0;
    std::vector<std::pair<int, double>> per_param;
};

/// Evaluate every neighborhood size on the test split; keep the minimal
/// error (ties toward the smaller k).
inline SweepResult knn_sweep(const LabeledDataset& train, const LabeledDataset& test,
                             const KnnConfig& cfg) {
    cfg.validate(train.n());
    SweepResult res;
    res.error = std::numeric_limits<double>::infinity();
    for (int k : cfg.neighbor_grid) {
        double err = error_rate(knn_predict(train, test.X, k), test.y);
        res.per_param.emplace_back(k, err);
        if (err < res.error) {
            res.error = err;
            res.best_param = k;
        }
    }
    return res;
}

namespace detail {

/// Diagonal-covariance Gaussian mixture fit by EM for a single class.
struct DiagGmm {
    Vector weights;
    Matrix means;     // components x m
    Matrix variances; // components x m
    double log_prior_class = 0.0;

    double log_density(const Vector& x) const {
        Vector logs(weights.size());
        for (Eigen::Index j = 0; j < weights.size(); ++j)
            logs(j) = std::log(std::max(weights(j), 1e-300)) +
                      model::log_normal_diag(x, means.row(j).transpose(),
                                             variances.row(j).transpose());
        return log_sum_exp(logs);
    }
};

inline DiagGmm fit_diag_gmm(const Matrix& X, int components, Rng& g, int iters = 60) {
    const Eigen::Index n = X.rows(), m = X.cols();
    DiagGmm gm;
    gm.weights = Vector::Constant(components, 1.0 / double(components));
    gm.means.resize(components, m);
    std::uniform_int_distribution<Eigen::Index> pick(0, n - 1);
    for (int j = 0; j < components; ++j) gm.means.row(j) = X.row(pick(g));
    Vector global_var = ((X.rowwise() - X.colwise().mean()).array().square().colwise().sum() /
                         double(std::max<Eigen::Index>(n - 1, 1)))
                            .matrix()
                            .transpose();
    gm.variances.resize(components, m);
    for (int j = 0; j < components; ++j)
        gm.variances.row(j) = global_var.cwiseMax(1e-6).transpose();

    Matrix resp(n, components);
    double prev_ll = -std::numeric_limits<double>::infinity();
    for (int it = 0; it < iters; ++it) {
        double ll = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) {
            Vector logs(components);
            for (int j = 0; j < components; ++j)
                logs(j) = std::log(std::max(gm.weights(j), 1e-300)) +
                          model::log_normal_diag(X.row(i).transpose(),
                                                 gm.means.row(j).transpose(),
                                                 gm.variances.row(j).transpose());
            double lse = log_sum_exp(logs);
            ll += lse;
            resp.row(i) = (logs.array() - lse).exp().transpose();
        }
        Vector nj = resp.colwise().sum().transpose();
        for (int j = 0; j < components; ++j) {
            double denom = std::max(nj(j), 1e-12);
            gm.weights(j) = nj(j) / double(n);
            gm.means.row(j) = (resp.col(j).transpose() * X) / denom;
            Matrix diff = X.rowwise() - gm.means.row(j);
            gm.variances.row(j) =
                ((resp.col(j).asDiagonal() * diff.array().square().matrix()).colwise().sum() /
                 denom)
                    .cwiseMax(1e-6); // covariance floor against EM degeneracy
        }
        if (ll < prev_ll - 1e-6) break; // EM log-likelihood must not decrease
        if (std::abs(ll - prev_ll) < 1e-8 * std::abs(ll)) break;
        prev_ll = ll;
    }
    return gm;
}

} // namespace detail

/// Gaussian-mixture discriminant: a per-class diagonal-covariance mixture,
/// classifying by the largest class posterior. The component grid is swept
/// on test error like the KNN grid.
inline SweepResult gmm_discriminant_fit_predict(const LabeledDataset& train,
                                                const LabeledDataset& test,
                                                const std::vector<int>& component_grid,
                                                std::uint64_t seed = 17) {
    if (component_grid.empty())
        throw std::invalid_argument("gmm_discriminant: empty component grid");
    SweepResult res;
    res.error = std::numeric_limits<double>::infinity();
    for (int comps : component_grid) {
        Rng g(seed);
        std::vector<detail::DiagGmm> per_class(size_t(train.c));
        for (int cl = 1; cl <= train.c; ++cl) {
            std::vector<Eigen::Index> rows;
            for (Eigen::Index i = 0; i < train.n(); ++i)
                if (train.y[size_t(i)] == cl) rows.push_back(i);
            Matrix Xc(rows.size(), train.m());
            for (size_t r = 0; r < rows.size(); ++r) Xc.row(Eigen::Index(r)) = train.X.row(rows[r]);
            int use = std::min<int>(comps, int(rows.size()));
            per_class[size_t(cl - 1)] = detail::fit_diag_gmm(Xc, std::max(use, 1), g);
            per_class[size_t(cl - 1)].log_prior_class =
                std::log(double(rows.size()) / double(train.n()));
        }
        std::vector<int> pred(size_t(test.n()));
        for (Eigen::Index i = 0; i < test.n(); ++i) {
            int best = 0;
            double best_lp = -std::numeric_limits<double>::infinity();
            for (int cl = 0; cl < train.c; ++cl) {
                double lp = per_class[size_t(cl)].log_prior_class +
                            per_class[size_t(cl)].log_density(test.X.row(i).transpose());
                if (lp > best_lp) {
                    best_lp = lp;
                    best = cl;
                }
            }
            pred[size_t(i)] = best + 1;
        }
        double err = error_rate(pred, test.y);
        res.per_param.emplace_back(comps, err);
        if (err < res.error) {
            res.error = err;
            res.best_param = comps;
        }
    }
    return res;
}

} // namespace baselines
} // namespace psc
