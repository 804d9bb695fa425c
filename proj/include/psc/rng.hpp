#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <vector>

namespace psc {

using Rng = std::mt19937_64;

namespace rng {

inline double standard_normal(Rng& g) {
    std::normal_distribution<double> d(0.0, 1.0);
    return d(g);
}

inline Eigen::VectorXd gaussian_vector(Rng& g, Eigen::Index n, double sd = 1.0) {
    Eigen::VectorXd v(n);
    std::normal_distribution<double> d(0.0, sd);
    for (Eigen::Index i = 0; i < n; ++i) v(i) = d(g);
    return v;
}

inline Eigen::MatrixXd gaussian_matrix(Rng& g, Eigen::Index rows, Eigen::Index cols) {
    Eigen::MatrixXd M(rows, cols);
    std::normal_distribution<double> d(0.0, 1.0);
    for (Eigen::Index j = 0; j < cols; ++j)
        for (Eigen::Index i = 0; i < rows; ++i) M(i, j) = d(g);
    return M;
}

/// Gamma(shape, rate) draw, mean shape/rate.
inline double gamma(Rng& g, double shape, double rate) {
    std::gamma_distribution<double> d(shape, 1.0 / rate);
    return d(g);
}

/// Inverse-Gamma(shape, rate) draw; density proportional to x^{-shape-1} exp(-rate/x).
inline double inverse_gamma(Rng& g, double shape, double rate) {
    double x = gamma(g, shape, rate);
    if (x <= 0.0) x = std::numeric_limits<double>::min();
    return 1.0 / x;
}

inline double beta(Rng& g, double a, double b) {
    double x = gamma(g, a, 1.0);
    double y = gamma(g, b, 1.0);
    double s = x + y;
    if (s <= 0.0) return 0.5;
    return x / s;
}

inline Eigen::VectorXd dirichlet(Rng& g, const Eigen::VectorXd& alpha) {
    Eigen::VectorXd v(alpha.size());
    for (Eigen::Index i = 0; i < alpha.size(); ++i) v(i) = gamma(g, alpha(i), 1.0);
    double s = v.sum();
    if (s <= 0.0) return Eigen::VectorXd::Constant(alpha.size(), 1.0 / double(alpha.size()));
    return v / s;
}

/// Categorical draw from unnormalized log-weights (log-sum-exp guarded).
inline int categorical_from_logits(Rng& g, const Eigen::VectorXd& logits) {
    double mx = logits.maxCoeff();
    Eigen::VectorXd w = (logits.array() - mx).exp();
    std::uniform_real_distribution<double> u(0.0, 1.0);
    double target = u(g) * w.sum();
    double acc = 0.0;
    for (Eigen::Index i = 0; i < w.size(); ++i) {
        acc += w(i);
        if (target <= acc) return int(i);
    }
    return int(w.size()) - 1;
}

inline int categorical(Rng& g, const Eigen::VectorXd& probs) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    double target = u(g) * probs.sum();
    double acc = 0.0;
    for (Eigen::Index i = 0; i < probs.size(); ++i) {
        acc += probs(i);
        if (target <= acc) return int(i);
    }
    return int(probs.size()) - 1;
}

} // namespace rng

/// Numerically stable log(sum(exp(v))).
inline double log_sum_exp(const Eigen::VectorXd& v) {
    if (v.size() == 0) return -std::numeric_limits<double>::infinity();
    double mx = v.maxCoeff();
    if (!std::isfinite(mx)) return mx;
    return mx + std::log((v.array() - mx).exp().sum());
}

} // namespace psc
