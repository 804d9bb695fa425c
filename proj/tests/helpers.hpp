#pragma once

#include <psc/psc.hpp>

namespace psc::test {

/// Dense multivariate Gaussian log density with a full covariance matrix.
/// Independent oracle for the factorized evaluation path.
inline double dense_log_gaussian(const Vector& x, const Vector& mean, const Matrix& cov) {
    constexpr double log2pi = 1.8378770664093454836;
    Eigen::LLT<Matrix> llt(cov);
    Matrix L = llt.matrixL();
    double logdet = 0.0;
    for (Eigen::Index i = 0; i < L.rows(); ++i) logdet += 2.0 * std::log(L(i, i));
    Vector d = llt.matrixL().solve(x - mean);
    return -0.5 * (double(x.size()) * log2pi + logdet + d.squaredNorm());
}

/// Dense mixture log density: log sum_j w_j N_m(x; U mu_j + theta, Sigma).
inline double dense_log_marginal(const ModelState& s, const Vector& x) {
    Matrix cov = model::assemble_covariance(s);
    Vector logs(s.mixing.truncation());
    for (int j = 0; j < s.mixing.truncation(); ++j) {
        Vector mean = s.U * s.mixing.atoms[size_t(j)].mu + s.theta;
        logs(j) = std::log(s.mixing.weights(j)) + dense_log_gaussian(x, mean, cov);
    }
    return log_sum_exp(logs);
}

inline double dense_log_joint(const ModelState& s, const Vector& x, int y) {
    Matrix cov = model::assemble_covariance(s);
    Vector logs(s.mixing.truncation());
    for (int j = 0; j < s.mixing.truncation(); ++j) {
        const Atom& a = s.mixing.atoms[size_t(j)];
        Vector mean = s.U * a.mu + s.theta;
        logs(j) = std::log(s.mixing.weights(j)) + dense_log_gaussian(x, mean, cov) +
                  std::log(a.nu(y - 1));
    }
    return log_sum_exp(logs);
}

/// Random valid model state for property tests.
inline ModelState random_state(Rng& g, int m, int k, int c, int T) {
    PriorConfig cfg;
    cfg.base_mu_tau = 1.5;
    cfg.theta_scale = 1.0;
    return priors::sample_prior(cfg, k, m, c, T, g);
}

inline LabeledDataset tiny_synthetic(std::uint64_t seed = 7, Eigen::Index n = 40, int m = 3,
                                     int k = 1, int c = 2) {
    SyntheticSpec spec;
    spec.m = m;
    spec.k = k;
    spec.c = c;
    spec.n = n;
    spec.num_atoms = 2;
    spec.seed = seed;
    return data_io::generate_synthetic(spec).first;
}

} // namespace psc::test
