#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include "psc/geometry.hpp"
#include "psc/rng.hpp"

namespace psc {

/// One mixture atom: kernel location in projected coordinates plus a class
/// probability vector on the simplex.
struct Atom {
    Vector mu; // k-vector
    Vector nu; // c-vector, nonnegative, sums to 1
};

/// Truncated stick-breaking representation of the mixing measure.
struct MixingMeasure {
    Vector weights;
    std::vector<Atom> atoms;

    int truncation() const { return int(atoms.size()); }
};

struct NoiseScales {
    double sigma0 = 1.0; // residual scale on the orthogonal complement
    Vector sigma;        // k scales along the subspace
};

/// Full parameter state for one MCMC draw. theta is carried through its
/// complement coordinates eta, so U'theta = 0 holds structurally.
struct ModelState {
    int k = 0;
    Matrix U;           // m x k, orthonormal columns
    Matrix V;           // m x (m-k), deterministic complement of U
    Vector theta;       // m-vector, theta = V * eta
    Vector eta;         // (m-k)-vector
    NoiseScales scales;
    MixingMeasure mixing;

    Eigen::Index m() const { return U.rows(); }
    int num_classes() const {
        return mixing.atoms.empty() ? 0 : int(mixing.atoms.front().nu.size());
    }

    /// Recompute V and theta after U changes; eta is held fixed.
    void sync_frame() {
        if (k < U.rows()) {
            V = geometry::complete_frame(U);
            theta = V * eta;
        } else {
            V.resize(U.rows(), 0);
            eta.resize(0);
            theta = Vector::Zero(U.rows());
        }
    }
};

/// Labeled data with labels in {1..c} and the standardization applied at ingestion.
struct Standardization {
    Vector center;
    Vector scale;

    Vector apply(const Vector& x) const {
        return ((x - center).array() / scale.array()).matrix();
    }
    Vector invert(const Vector& z) const {
        return (z.array() * scale.array()).matrix() + center;
    }
};

struct LabeledDataset {
    Matrix X;                 // n x m
    std::vector<int> y;       // labels in {1..c}
    int c = 0;
    std::vector<std::string> feature_names;
    Standardization transform; // identity (empty) until standardize() is applied

    Eigen::Index n() const { return X.rows(); }
    Eigen::Index m() const { return X.cols(); }
    bool standardized() const { return transform.center.size() == X.cols(); }
};

namespace model {

/// log N(x; mu, diag(var)) for a diagonal Gaussian.
inline double log_normal_diag(const Vector& x, const Vector& mu, const Vector& var) {
    constexpr double log2pi = 1.8378770664093454836;
    double out = -0.5 * double(x.size()) * log2pi;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        double d = x(i) - mu(i);
        out -= 0.5 * (std::log(var(i)) + d * d / var(i));
    }
    return out;
}

/// log N(r; 0, s2 * I) for an isotropic Gaussian.
inline double log_normal_isotropic(const Vector& r, double s2) {
    constexpr double log2pi = 1.8378770664093454836;
    double n = double(r.size());
    return -0.5 * (n * log2pi + n * std::log(s2) + r.squaredNorm() / s2);
}

inline Vector kernel_variances(const ModelState& state) {
    return state.scales.sigma.array().square();
}

/// Dense m x m covariance U(Sigma1 - sigma0^2 I)U' + sigma0^2 I.
inline Matrix assemble_covariance(const ModelState& state) {
    const Eigen::Index m = state.m();
    Vector s1 = kernel_variances(state);
    double s0 = state.scales.sigma0 * state.scales.sigma0;
    Matrix D = (s1.array() - s0).matrix().asDiagonal();
    return state.U * D * state.U.transpose() + s0 * Matrix::Identity(m, m);
}

/// Per-atom log w_j + log N_k(U'x; mu_j, Sigma1), the in-subspace part of the
/// mixture. Shared by the marginal, conditional and joint densities.
inline Vector atom_log_terms(const ModelState& state, const Vector& projected) {
    const int T = state.mixing.truncation();
    Vector s1 = kernel_variances(state);
    Vector out(T);
    for (int j = 0; j < T; ++j) {
        double lw = state.mixing.weights(j) > 0.0
                        ? std::log(state.mixing.weights(j))
                        : -std::numeric_limits<double>::infinity();
        out(j) = lw + log_normal_diag(projected, state.mixing.atoms[j].mu, s1);
    }
    return out;
}

inline double residual_log_term(const ModelState& state, const Vector& x) {
    if (state.k == state.m()) return 0.0;
    Vector resid = state.V.transpose() * (x - state.theta);
    return log_normal_isotropic(resid, state.scales.sigma0 * state.scales.sigma0);
}

/// Marginal log density of x under the mixture, evaluated in factorized form:
/// the k-dimensional kernel mixture times the isotropic residual density.
/// Never assembles an m x m covariance.
inline double log_marginal_density_x(const ModelState& state, const Vector& x) {
    if (!x.allFinite()) throw std::invalid_argument("log_marginal_density_x: non-finite input");
    Vector projected = state.U.transpose() * x;
    return log_sum_exp(atom_log_terms(state, projected)) + residual_log_term(state, x);
}

/// Conditional class probabilities P(Y = y | X = x). Depends on x only
/// through U'x. If every kernel density underflows, falls back to the raw
/// atom weights.
inline Vector conditional_class_prob(const ModelState& state, const Vector& x) {
    const int T = state.mixing.truncation();
    const int c = state.num_classes();
    Vector logits = atom_log_terms(state, state.U.transpose() * x);
    double lse = log_sum_exp(logits);
    Vector resp(T);
    if (std::isfinite(lse)) {
        resp = (logits.array() - lse).exp();
    } else {
        resp = state.mixing.weights;
    }
    Vector p = Vector::Zero(c);
    for (int j = 0; j < T; ++j) p += resp(j) * state.mixing.atoms[j].nu;
    double s = p.sum();
    if (s > 0.0) p /= s;
    return p;
}

/// log of the joint density of (x, y).
inline double joint_log_density(const ModelState& state, const Vector& x, int y) {
    const int c = state.num_classes();
    if (y < 1 || y > c) throw std::invalid_argument("joint_log_density: label out of range");
    Vector logits = atom_log_terms(state, state.U.transpose() * x);
    for (int j = 0; j < state.mixing.truncation(); ++j) {
        double nu = state.mixing.atoms[j].nu(y - 1);
        logits(j) += nu > 0.0 ? std::log(nu) : -std::numeric_limits<double>::infinity();
    }
    return log_sum_exp(logits) + residual_log_term(state, x);
}

/// Invariant checks used by the sampler and the test suites.
inline bool state_valid(const ModelState& state, double tol = 1e-8) {
    if (!geometry::is_orthonormal(state.U, tol)) return false;
    if (state.k < state.m()) {
        if ((state.U.transpose() * state.theta).norm() > tol) return false;
        if ((state.theta - state.V * state.eta).norm() > tol) return false;
    }
    if (state.scales.sigma0 <= 0.0) return false;
    if ((state.scales.sigma.array() <= 0.0).any()) return false;
    if (std::abs(state.mixing.weights.sum() - 1.0) > 1e-9) return false;
    if ((state.mixing.weights.array() < -1e-15).any()) return false;
    for (const auto& a : state.mixing.atoms) {
        if ((a.nu.array() < -1e-15).any()) return false;
        if (std::abs(a.nu.sum() - 1.0) > 1e-9) return false;
    }
    return true;
}

} // namespace model
} // namespace psc
