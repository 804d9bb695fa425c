#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <stdexcept>
#include <string>
#include <vector>

#include "psc/geometry.hpp"
#include "psc/sampler.hpp"

namespace psc {

/// Bayes point estimate of the principal subspace under the squared
/// projection-plus-origin loss, with the eigenvalue diagnostics used for
/// rank selection.
struct SubspaceEstimate {
    Matrix R_hat;
    Vector theta_hat;
    int k_hat = 0;
    Vector eigenvalues;  // descending
    Matrix eigenvectors; // columns match eigenvalues
    Vector objective;    // m+1 values of k - sum_{j<=k} lambda_j, k = 0..m
    bool unique = true;
};

struct FeatureImportance {
    std::vector<std::string> names;
    Vector scores;   // diagonal of R_hat, equals squared row norms
    Vector norms;    // Euclidean row norms of the k_hat loading columns
    Matrix loadings; // m x k_hat
};

namespace estimator {

/// Posterior means of R = UU' and theta over the stored draws.
inline std::pair<Matrix, Vector> posterior_means(const PosteriorChain& chain) {
    if (chain.draws.empty()) throw std::invalid_argument("posterior_means: empty chain");
    const Eigen::Index m = chain.draws.front().m();
    Matrix Rbar = Matrix::Zero(m, m);
    Vector tbar = Vector::Zero(m);
    for (const auto& s : chain.draws) {
        if (s.m() != m) throw std::invalid_argument("posterior_means: mixed-dimension chain");
        Rbar += s.U * s.U.transpose();
        tbar += s.theta;
    }
    Rbar /= double(chain.draws.size());
    tbar /= double(chain.draws.size());
    return {std::move(Rbar), std::move(tbar)};
}

/// Minimizer of the posterior expected loss: eigendecompose 2*Rbar -
/// tbar*tbar', keep the eigenvectors with eigenvalue > 1 (equivalently the k
/// minimizing k - sum of the top k eigenvalues), and project tbar onto the
/// complement. Ties are reported via unique=false with the smallest
/// minimizing k.
inline SubspaceEstimate estimate_subspace(const Matrix& Rbar, const Vector& tbar) {
    const Eigen::Index m = Rbar.rows();
    if (Rbar.cols() != m || tbar.size() != m)
        throw std::invalid_argument("estimate_subspace: dimension mismatch");
    Matrix M = 2.0 * Rbar - tbar * tbar.transpose();
    Eigen::SelfAdjointEigenSolver<Matrix> eig(M);

    SubspaceEstimate est;
    est.eigenvalues.resize(m);
    est.eigenvectors.resize(m, m);
    for (Eigen::Index j = 0; j < m; ++j) { // descending order
        est.eigenvalues(j) = eig.eigenvalues()(m - 1 - j);
        est.eigenvectors.col(j) = eig.eigenvectors().col(m - 1 - j);
    }
    geometry::detail::fix_column_signs(est.eigenvectors);

    est.objective.resize(m + 1);
    est.objective(0) = 0.0;
    double cum = 0.0;
    for (Eigen::Index k = 1; k <= m; ++k) {
        cum += est.eigenvalues(k - 1);
        est.objective(k) = double(k) - cum;
    }
    Eigen::Index best = 0;
    for (Eigen::Index k = 1; k <= m; ++k)
        if (est.objective(k) < est.objective(best) - 1e-12) best = k;
    est.k_hat = int(best);

    // Uniqueness: single minimizer and a strict eigenvalue gap at the cut.
    const double tie_tol = 1e-9;
    int num_min = 0;
    for (Eigen::Index k = 0; k <= m; ++k)
        if (est.objective(k) <= est.objective(best) + tie_tol) ++num_min;
    bool gap = true;
    if (best > 0 && best < m) gap = est.eigenvalues(best - 1) > est.eigenvalues(best) + tie_tol;
    est.unique = (num_min == 1) && gap;

    est.R_hat = Matrix::Zero(m, m);
    for (Eigen::Index j = 0; j < best; ++j)
        est.R_hat += est.eigenvectors.col(j) * est.eigenvectors.col(j).transpose();
    est.theta_hat = tbar - est.R_hat * tbar;
    return est;
}

inline SubspaceEstimate estimate_subspace(const PosteriorChain& chain) {
    auto [Rbar, tbar] = posterior_means(chain);
    return estimate_subspace(Rbar, tbar);
}

/// Per-feature importance: the diagonal of R_hat, with the row norms of the
/// loading columns (score = norm^2).
inline FeatureImportance feature_importance(const SubspaceEstimate& est,
                                            const std::vector<std::string>& names) {
    const Eigen::Index m = est.R_hat.rows();
    FeatureImportance fi;
    fi.names = names;
    if (fi.names.size() != size_t(m)) {
        fi.names.resize(size_t(m));
        for (Eigen::Index i = 0; i < m; ++i)
            if (fi.names[size_t(i)].empty()) fi.names[size_t(i)] = "x" + std::to_string(i + 1);
    }
    fi.loadings = est.eigenvectors.leftCols(est.k_hat);
    fi.scores = est.R_hat.diagonal();
    fi.norms = fi.loadings.rowwise().norm();
    return fi;
}

/// Squared loss on the space of (projection, origin) pairs:
/// ||R1 - R2||_F^2 + ||theta1 - theta2||^2.
inline double loss(const geometry::AffineSubspace& a, const geometry::AffineSubspace& b) {
    if (a.R.rows() != b.R.rows() || a.theta.size() != b.theta.size())
        throw std::invalid_argument("loss: dimension mismatch");
    return (a.R - b.R).squaredNorm() + (a.theta - b.theta).squaredNorm();
}

} // namespace estimator
} // namespace psc
