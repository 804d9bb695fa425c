#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>

#include "psc/model.hpp"
#include "psc/rng.hpp"

namespace psc {

/// Hyperparameters for every parameter block. Defaults are weakly
/// informative for data standardized to unit scale.
struct PriorConfig {
    double w0 = 1.0;           // DP concentration
    Vector base_mu_mean;       // m0; empty means zero
    double base_mu_tau = 3.0;  // tau, scale of the k-variate Normal base measure
    Vector base_alpha;         // Dirichlet parameter; empty means all-ones
    double sigma0_shape = 2.0, sigma0_rate = 1.0; // inverse-Gamma on sigma0^2
    double sigma_shape = 2.0, sigma_rate = 1.0;   // inverse-Gamma on each sigma_j^2
    double theta_scale = 10.0;                    // sd of the Normal on eta
    // Bingham-von Mises-Fisher parameters on U: density proportional to
    // exp(Tr(AU) + Tr(UBU'C)) with A k x m, B k x k, C m x m.
    // Empty matrices mean zero, i.e. a uniform prior on the Stiefel manifold.
    Matrix bmf_A, bmf_B, bmf_C;

    Vector mu_mean(int k) const {
        if (base_mu_mean.size() == 0) return Vector::Zero(k);
        if (base_mu_mean.size() != k) throw std::invalid_argument("base_mu_mean has wrong size");
        return base_mu_mean;
    }
    Vector alpha(int c) const {
        if (base_alpha.size() == 0) return Vector::Ones(c);
        if (base_alpha.size() != c) throw std::invalid_argument("base_alpha has wrong size");
        return base_alpha;
    }
    bool uniform_frame_prior() const {
        return (bmf_A.size() == 0 || bmf_A.isZero(0.0)) &&
               (bmf_B.size() == 0 || bmf_B.isZero(0.0)) &&
               (bmf_C.size() == 0 || bmf_C.isZero(0.0));
    }

    void validate() const {
        if (w0 <= 0.0 || base_mu_tau <= 0.0 || theta_scale <= 0.0 ||
            sigma0_shape <= 0.0 || sigma0_rate <= 0.0 ||
            sigma_shape <= 0.0 || sigma_rate <= 0.0)
            throw std::invalid_argument("PriorConfig: scale/shape/rate/concentration must be positive");
        if (base_alpha.size() > 0 && (base_alpha.array() <= 0.0).any())
            throw std::invalid_argument("PriorConfig: Dirichlet alpha entries must be positive");
    }
};

namespace priors {

/// Unnormalized log BMF density Tr(AU) + Tr(UBU'C). All-zero parameters give
/// the uniform prior (returns 0).
inline double log_bmf_density_unnormalized(const Matrix& U, const PriorConfig& cfg) {
    double out = 0.0;
    if (cfg.bmf_A.size() > 0 && !cfg.bmf_A.isZero(0.0)) {
        if (cfg.bmf_A.rows() != U.cols() || cfg.bmf_A.cols() != U.rows())
            throw std::invalid_argument("bmf_A must be k x m");
        out += (cfg.bmf_A * U).trace();
    }
    bool haveB = cfg.bmf_B.size() > 0 && !cfg.bmf_B.isZero(0.0);
    bool haveC = cfg.bmf_C.size() > 0 && !cfg.bmf_C.isZero(0.0);
    if (haveB || haveC) {
        Matrix B = cfg.bmf_B.size() > 0 ? cfg.bmf_B : Matrix::Zero(U.cols(), U.cols());
        Matrix C = cfg.bmf_C.size() > 0 ? cfg.bmf_C : Matrix::Zero(U.rows(), U.rows());
        if (B.rows() != U.cols() || B.cols() != U.cols())
            throw std::invalid_argument("bmf_B must be k x k");
        if (C.rows() != U.rows() || C.cols() != U.rows())
            throw std::invalid_argument("bmf_C must be m x m");
        out += (U * B * U.transpose() * C).trace();
    }
    return out;
}

/// Haar-uniform frame on the Stiefel manifold via QR of a Gaussian matrix
/// with the R-diagonal sign correction.
inline Matrix sample_uniform_frame(Rng& g, Eigen::Index m, Eigen::Index k) {
    Matrix G = rng::gaussian_matrix(g, m, k);
    Eigen::HouseholderQR<Matrix> qr(G);
    Matrix Q = Matrix(qr.householderQ()).leftCols(k);
    Matrix R = qr.matrixQR().topLeftCorner(k, k);
    for (Eigen::Index j = 0; j < k; ++j)
        if (R(j, j) < 0.0) Q.col(j) = -Q.col(j);
    return Q;
}

/// Stick-breaking weights truncated at T; the last stick absorbs the
/// remaining mass so the weights sum to 1 exactly.
inline Vector sample_stick_weights(Rng& g, int T, double w0) {
    Vector w(T);
    double remaining = 1.0;
    for (int j = 0; j + 1 < T; ++j) {
        double v = rng::beta(g, 1.0, w0);
        w(j) = v * remaining;
        remaining *= (1.0 - v);
    }
    w(T - 1) = remaining;
    return w;
}

inline ModelState sample_prior(const PriorConfig& cfg, int k, int m, int c, int truncation,
                               Rng& g) {
    if (k < 1 || k > m) throw std::invalid_argument("sample_prior: need 1 <= k <= m");
    cfg.validate();
    ModelState s;
    s.k = k;
    s.U = sample_uniform_frame(g, m, k);
    if (k < m) {
        s.eta = rng::gaussian_vector(g, m - k, cfg.theta_scale);
    } else {
        s.eta.resize(0);
    }
    s.sync_frame();
    s.scales.sigma0 = std::sqrt(rng::inverse_gamma(g, cfg.sigma0_shape, cfg.sigma0_rate));
    s.scales.sigma.resize(k);
    for (int j = 0; j < k; ++j)
        s.scales.sigma(j) = std::sqrt(rng::inverse_gamma(g, cfg.sigma_shape, cfg.sigma_rate));
    s.mixing.weights = sample_stick_weights(g, truncation, cfg.w0);
    Vector m0 = cfg.mu_mean(k);
    Vector alpha = cfg.alpha(c);
    s.mixing.atoms.resize(truncation);
    for (int j = 0; j < truncation; ++j) {
        s.mixing.atoms[j].mu = m0 + rng::gaussian_vector(g, k, cfg.base_mu_tau);
        s.mixing.atoms[j].nu = rng::dirichlet(g, alpha);
    }
    return s;
}

inline double log_inverse_gamma(double x, double shape, double rate) {
    return shape * std::log(rate) - std::lgamma(shape) - (shape + 1.0) * std::log(x) - rate / x;
}

inline double log_beta_density(double x, double a, double b) {
    return (a - 1.0) * std::log(x) + (b - 1.0) * std::log1p(-x) + std::lgamma(a + b) -
           std::lgamma(a) - std::lgamma(b);
}

inline double log_dirichlet(const Vector& x, const Vector& alpha) {
    double out = std::lgamma(alpha.sum());
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        out -= std::lgamma(alpha(i));
        out += (alpha(i) - 1.0) * std::log(std::max(x(i), 1e-300));
    }
    return out;
}

/// Recover the stick variables v_j from truncated weights.
inline Vector sticks_from_weights(const Vector& w) {
    const int T = int(w.size());
    Vector v(std::max(T - 1, 0));
    double remaining = 1.0;
    for (int j = 0; j + 1 < T; ++j) {
        v(j) = remaining > 0.0 ? std::min(std::max(w(j) / remaining, 0.0), 1.0) : 0.0;
        remaining -= w(j);
    }
    return v;
}

/// Log prior over all blocks (BMF term unnormalized; sufficient for
/// Metropolis ratios). Evaluated on the sampled representation: the frame,
/// eta, the variances, the stick variables and the atoms.
inline double log_prior(const ModelState& s, const PriorConfig& cfg) {
    double out = log_bmf_density_unnormalized(s.U, cfg);
    if (s.eta.size() > 0) {
        Vector zero = Vector::Zero(s.eta.size());
        Vector var = Vector::Constant(s.eta.size(), cfg.theta_scale * cfg.theta_scale);
        out += model::log_normal_diag(s.eta, zero, var);
    }
    out += log_inverse_gamma(s.scales.sigma0 * s.scales.sigma0, cfg.sigma0_shape, cfg.sigma0_rate);
    for (Eigen::Index j = 0; j < s.scales.sigma.size(); ++j)
        out += log_inverse_gamma(s.scales.sigma(j) * s.scales.sigma(j), cfg.sigma_shape,
                                 cfg.sigma_rate);
    Vector v = sticks_from_weights(s.mixing.weights);
    for (Eigen::Index j = 0; j < v.size(); ++j) {
        double vj = std::min(std::max(v(j), 1e-12), 1.0 - 1e-12);
        out += log_beta_density(vj, 1.0, cfg.w0);
    }
    Vector m0 = cfg.mu_mean(s.k);
    Vector tau2 = Vector::Constant(s.k, cfg.base_mu_tau * cfg.base_mu_tau);
    Vector alpha = cfg.alpha(s.num_classes());
    for (const auto& a : s.mixing.atoms) {
        out += model::log_normal_diag(a.mu, m0, tau2);
        out += log_dirichlet(a.nu, alpha);
    }
    return out;
}

} // namespace priors
} // namespace psc
