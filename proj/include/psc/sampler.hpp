#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <sstream>
#include <stdexcept>
#include <vector>

#include "psc/model.hpp"
#include "psc/priors.hpp"
#include "psc/rng.hpp"

namespace psc {

struct SamplerConfig {
    int iterations = 2000;
    int burn_in = 500;
    int thin = 1;
    int truncation = 20;
    double metropolis_step = 0.05; // initial Stiefel proposal scale
    double adapt_target = 0.3;     // acceptance-rate target during burn-in
    std::uint64_t seed = 1;

    void validate() const {
        if (iterations <= 0 || burn_in < 0 || burn_in >= iterations)
            throw std::invalid_argument("SamplerConfig: need 0 <= burn_in < iterations");
        if (thin < 1) throw std::invalid_argument("SamplerConfig: thin >= 1");
        if (truncation < 1) throw std::invalid_argument("SamplerConfig: truncation >= 1");
        if (metropolis_step <= 0.0) throw std::invalid_argument("SamplerConfig: step > 0");
        if (adapt_target <= 0.0 || adapt_target >= 1.0)
            throw std::invalid_argument("SamplerConfig: adapt_target in (0,1)");
    }
};

/// Latent atom index per observation, 0-based internally.
using Allocation = std::vector<int>;

struct ChainDiagnostics {
    std::vector<double> log_joint_trace;
    double frame_acceptance_rate = 0.0;
    double final_step = 0.0;
};

struct PosteriorChain {
    std::vector<ModelState> draws;
    int burn_in = 0;
    int thin = 1;
    ChainDiagnostics diagnostics;
};

namespace sampler {

/// Sample one observation (x, y) from the generative model.
inline std::pair<Vector, int> sample_observation(const ModelState& s, Rng& g) {
    int j = rng::categorical(g, s.mixing.weights);
    const Atom& a = s.mixing.atoms[size_t(j)];
    Vector coords(s.k);
    for (int l = 0; l < s.k; ++l)
        coords(l) = a.mu(l) + s.scales.sigma(l) * rng::standard_normal(g);
    Vector x = s.U * coords + s.theta;
    if (s.k < s.m())
        x += s.V * rng::gaussian_vector(g, s.m() - s.k, s.scales.sigma0);
    int y = rng::categorical(g, a.nu) + 1;
    return {std::move(x), y};
}

inline LabeledDataset sample_dataset(const ModelState& s, Eigen::Index n, Rng& g) {
    LabeledDataset d;
    d.c = s.num_classes();
    d.X.resize(n, s.m());
    d.y.resize(size_t(n));
    for (Eigen::Index i = 0; i < n; ++i) {
        auto [x, y] = sample_observation(s, g);
        d.X.row(i) = x.transpose();
        d.y[size_t(i)] = y;
    }
    return d;
}

/// z_i ~ Categorical with log-probabilities log w_j + log N_k(U'x_i; mu_j, Sigma1)
/// + log nu_{j, y_i}.
inline Allocation update_allocations(const ModelState& s, const LabeledDataset& data, Rng& g) {
    const int T = s.mixing.truncation();
    Allocation z(size_t(data.n()));
    Vector s1 = model::kernel_variances(s);
    Matrix proj = data.X * s.U; // n x k
    for (Eigen::Index i = 0; i < data.n(); ++i) {
        Vector logits(T);
        Vector pi = proj.row(i).transpose();
        for (int j = 0; j < T; ++j) {
            const Atom& a = s.mixing.atoms[size_t(j)];
            double lw = s.mixing.weights(j) > 0.0 ? std::log(s.mixing.weights(j))
                                                  : -std::numeric_limits<double>::infinity();
            double nu = a.nu(data.y[size_t(i)] - 1);
            logits(j) = lw + model::log_normal_diag(pi, a.mu, s1) +
                        (nu > 0.0 ? std::log(nu) : -std::numeric_limits<double>::infinity());
        }
        z[size_t(i)] = rng::categorical_from_logits(g, logits);
    }
    return z;
}

inline Eigen::VectorXi cluster_counts(const Allocation& z, int T) {
    Eigen::VectorXi n = Eigen::VectorXi::Zero(T);
    for (int zi : z) n(zi) += 1;
    return n;
}

/// Blocked stick-breaking update: v_j ~ Beta(1 + n_j, w0 + sum_{l>j} n_l),
/// last stick absorbs the remaining mass.
inline Vector update_sticks(const Allocation& z, int T, double w0, Rng& g) {
    Eigen::VectorXi n = cluster_counts(z, T);
    Vector w(T);
    double remaining = 1.0;
    int total = int(z.size());
    int seen = 0;
    for (int j = 0; j + 1 < T; ++j) {
        seen += n(j);
        double v = rng::beta(g, 1.0 + n(j), w0 + double(total - seen));
        w(j) = v * remaining;
        remaining *= (1.0 - v);
    }
    w(T - 1) = remaining;
    return w;
}

/// Conjugate updates for atom locations and class vectors; empty clusters
/// draw from the base measure.
inline void update_atoms(ModelState& s, const LabeledDataset& data, const Allocation& z,
                         const PriorConfig& cfg, Rng& g) {
    const int T = s.mixing.truncation();
    const int k = s.k;
    const int c = data.c;
    Vector s1 = model::kernel_variances(s);
    Vector m0 = cfg.mu_mean(k);
    Vector alpha = cfg.alpha(c);
    double tau2 = cfg.base_mu_tau * cfg.base_mu_tau;

    Matrix proj = data.X * s.U; // n x k
    std::vector<Vector> sums(size_t(T), Vector::Zero(k));
    Matrix class_counts = Matrix::Zero(T, c);
    Eigen::VectorXi n = Eigen::VectorXi::Zero(T);
    for (Eigen::Index i = 0; i < data.n(); ++i) {
        int j = z[size_t(i)];
        sums[size_t(j)] += proj.row(i).transpose();
        class_counts(j, data.y[size_t(i)] - 1) += 1.0;
        n(j) += 1;
    }
    for (int j = 0; j < T; ++j) {
        Atom& a = s.mixing.atoms[size_t(j)];
        a.mu.resize(k);
        for (int l = 0; l < k; ++l) {
            double prec = 1.0 / tau2 + double(n(j)) / s1(l);
            double mean = (m0(l) / tau2 + sums[size_t(j)](l) / s1(l)) / prec;
            a.mu(l) = mean + rng::standard_normal(g) / std::sqrt(prec);
        }
        a.nu = rng::dirichlet(g, alpha + class_counts.row(j).transpose());
    }
}

/// Inverse-Gamma conjugate updates for the kernel scales and the residual scale.
inline void update_scales(ModelState& s, const LabeledDataset& data, const Allocation& z,
                          const PriorConfig& cfg, Rng& g) {
    const Eigen::Index n = data.n();
    const int k = s.k;
    Matrix proj = data.X * s.U;
    for (int l = 0; l < k; ++l) {
        double ss = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) {
            double d = proj(i, l) - s.mixing.atoms[size_t(z[size_t(i)])].mu(l);
            ss += d * d;
        }
        double var = rng::inverse_gamma(g, cfg.sigma_shape + 0.5 * double(n),
                                        cfg.sigma_rate + 0.5 * ss);
        s.scales.sigma(l) = std::sqrt(var);
    }
    if (k < s.m()) {
        Matrix resid = (data.X.rowwise() - s.theta.transpose()) * s.V; // n x (m-k)
        double ss = resid.squaredNorm();
        double var = rng::inverse_gamma(g, cfg.sigma0_shape + 0.5 * double(n) * double(s.m() - k),
                                        cfg.sigma0_rate + 0.5 * ss);
        s.scales.sigma0 = std::sqrt(var);
    }
}

/// Conjugate Normal update for eta = V'theta; theta is reassembled as V*eta
/// so U'theta = 0 holds exactly.
inline void update_origin(ModelState& s, const LabeledDataset& data, const PriorConfig& cfg,
                          Rng& g) {
    if (s.k == s.m()) return;
    const Eigen::Index n = data.n();
    double s02 = s.scales.sigma0 * s.scales.sigma0;
    double prec = double(n) / s02 + 1.0 / (cfg.theta_scale * cfg.theta_scale);
    Vector post_mean = Vector::Zero(s.m() - s.k);
    if (n > 0) // mean of V'x_i, shrunk toward the prior mean 0
        post_mean = (double(n) / s02) / prec * (data.X * s.V).colwise().mean().transpose();
    double sd = 1.0 / std::sqrt(prec);
    s.eta = post_mean + rng::gaussian_vector(g, s.m() - s.k, sd);
    s.theta = s.V * s.eta;
}

/// Log-likelihood of the data conditional on the allocations, as a function
/// of the frame. The full conditional of U is proportional to this times the
/// BMF prior.
inline double allocated_log_likelihood(const ModelState& s, const LabeledDataset& data,
                                       const Allocation& z) {
    Vector s1 = model::kernel_variances(s);
    double s02 = s.scales.sigma0 * s.scales.sigma0;
    Matrix proj = data.X * s.U;
    double out = 0.0;
    for (Eigen::Index i = 0; i < data.n(); ++i) {
        Vector pi = proj.row(i).transpose();
        out += model::log_normal_diag(pi, s.mixing.atoms[size_t(z[size_t(i)])].mu, s1);
    }
    if (s.k < s.m()) {
        Matrix resid = (data.X.rowwise() - s.theta.transpose()) * s.V;
        constexpr double log2pi = 1.8378770664093454836;
        double d = double(s.m() - s.k);
        out += -0.5 * double(data.n()) * d * (log2pi + std::log(s02)) -
               0.5 * resid.squaredNorm() / s02;
    }
    return out;
}

struct FrameUpdateResult {
    bool accepted = false;
};

/// Metropolis step on the Stiefel manifold: U* = polar(U + step * G) with G
/// standard Gaussian; eta held fixed, theta* = V(U*) eta. Targets the exact
/// full conditional of U given everything else.
inline FrameUpdateResult update_frame(ModelState& s, const LabeledDataset& data,
                                      const Allocation& z, const PriorConfig& cfg, double step,
                                      Rng& g) {
    Matrix G = rng::gaussian_matrix(g, s.m(), s.k);
    ModelState prop = s;
    prop.U = geometry::polar_retraction(s.U + step * G);
    prop.sync_frame();

    double cur = allocated_log_likelihood(s, data, z) +
                 priors::log_bmf_density_unnormalized(s.U, cfg);
    double nxt = allocated_log_likelihood(prop, data, z) +
                 priors::log_bmf_density_unnormalized(prop.U, cfg);
    double log_ratio = nxt - cur;
    std::uniform_real_distribution<double> u(0.0, 1.0);
    if (std::log(u(g)) < log_ratio) {
        s.U = std::move(prop.U);
        s.V = std::move(prop.V);
        s.theta = std::move(prop.theta);
        return {true};
    }
    return {false};
}

/// One full Gibbs sweep: allocations, sticks, atoms, scales, origin, frame.
/// Returns whether the frame proposal was accepted.
inline bool gibbs_sweep(ModelState& s, const LabeledDataset& data, const PriorConfig& cfg,
                        double step, Rng& g, Allocation* z_out = nullptr) {
    Allocation z = update_allocations(s, data, g);
    s.mixing.weights = update_sticks(z, s.mixing.truncation(), cfg.w0, g);
    update_atoms(s, data, z, cfg, g);
    update_scales(s, data, z, cfg, g);
    update_origin(s, data, cfg, g);
    bool acc = update_frame(s, data, z, cfg, step, g).accepted;
    if (z_out) *z_out = std::move(z);
    return acc;
}

namespace detail {

/// Plain Lloyd k-means on projected coordinates, used only for initialization.
inline std::vector<int> kmeans_assign(const Matrix& P, int T, Rng& g, Matrix* centers_out) {
    const Eigen::Index n = P.rows(), k = P.cols();
    Matrix centers(T, k);
    std::uniform_int_distribution<Eigen::Index> pick(0, n - 1);
    for (int j = 0; j < T; ++j) centers.row(j) = P.row(pick(g));
    std::vector<int> assign(size_t(n), 0);
    for (int iter = 0; iter < 20; ++iter) {
        for (Eigen::Index i = 0; i < n; ++i) {
            double best = std::numeric_limits<double>::infinity();
            for (int j = 0; j < T; ++j) {
                double d = (P.row(i) - centers.row(j)).squaredNorm();
                if (d < best) { best = d; assign[size_t(i)] = j; }
            }
        }
        Matrix sums = Matrix::Zero(T, k);
        Eigen::VectorXi counts = Eigen::VectorXi::Zero(T);
        for (Eigen::Index i = 0; i < n; ++i) {
            sums.row(assign[size_t(i)]) += P.row(i);
            counts(assign[size_t(i)]) += 1;
        }
        for (int j = 0; j < T; ++j)
            if (counts(j) > 0) centers.row(j) = sums.row(j) / double(counts(j));
    }
    if (centers_out) *centers_out = centers;
    return assign;
}

} // namespace detail

/// Data-driven initialization: frame from the top-k principal components,
/// origin from the complement component of the sample mean, atoms by k-means
/// on the projected coordinates.
inline ModelState initialize_state(const LabeledDataset& data, int k, int truncation,
                                   const PriorConfig& cfg, Rng& g) {
    const Eigen::Index m = data.m(), n = data.n();
    Vector mean = data.X.colwise().mean().transpose();
    Matrix centered = data.X.rowwise() - mean.transpose();
    Matrix cov = centered.transpose() * centered / double(std::max<Eigen::Index>(n - 1, 1));
    Eigen::SelfAdjointEigenSolver<Matrix> eig(cov);
    ModelState s;
    s.k = k;
    s.U.resize(m, k);
    for (int j = 0; j < k; ++j) s.U.col(j) = eig.eigenvectors().col(m - 1 - j);
    geometry::detail::fix_column_signs(s.U);
    if (k < m) {
        Matrix V = geometry::complete_frame(s.U);
        s.eta = V.transpose() * mean;
    } else {
        s.eta.resize(0);
    }
    s.sync_frame();

    Matrix proj = data.X * s.U;
    Matrix centers;
    std::vector<int> assign = detail::kmeans_assign(proj, truncation, g, &centers);
    Eigen::VectorXi counts = Eigen::VectorXi::Zero(truncation);
    Matrix class_counts = Matrix::Zero(truncation, data.c);
    for (Eigen::Index i = 0; i < n; ++i) {
        counts(assign[size_t(i)]) += 1;
        class_counts(assign[size_t(i)], data.y[size_t(i)] - 1) += 1.0;
    }
    Vector alpha = cfg.alpha(data.c);
    s.mixing.atoms.resize(size_t(truncation));
    s.mixing.weights.resize(truncation);
    for (int j = 0; j < truncation; ++j) {
        s.mixing.atoms[size_t(j)].mu = counts(j) > 0
                                           ? Vector(centers.row(j).transpose())
                                           : Vector(cfg.mu_mean(k));
        Vector post_alpha = alpha + class_counts.row(j).transpose();
        s.mixing.atoms[size_t(j)].nu = post_alpha / post_alpha.sum();
        s.mixing.weights(j) = (double(counts(j)) + 1.0) / (double(n) + double(truncation));
    }
    s.mixing.weights /= s.mixing.weights.sum();

    s.scales.sigma.resize(k);
    for (int l = 0; l < k; ++l) {
        double ss = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) {
            double d = proj(i, l) - centers(assign[size_t(i)], l);
            ss += d * d;
        }
        s.scales.sigma(l) = std::sqrt(std::max(ss / double(n), 1e-4));
    }
    if (k < m) {
        Matrix resid = (data.X.rowwise() - s.theta.transpose()) * s.V;
        s.scales.sigma0 =
            std::sqrt(std::max(resid.squaredNorm() / double(n * (m - k)), 1e-4));
    } else {
        s.scales.sigma0 = 1.0;
    }
    return s;
}

inline double log_joint(const ModelState& s, const LabeledDataset& data,
                        const PriorConfig& cfg) {
    double out = priors::log_prior(s, cfg);
    for (Eigen::Index i = 0; i < data.n(); ++i)
        out += model::joint_log_density(s, data.X.row(i).transpose(), data.y[size_t(i)]);
    return out;
}

/// Run one blocked Gibbs chain at fixed k. Deterministic given the seed.
inline PosteriorChain run_chain(const LabeledDataset& data, int k, const PriorConfig& prior_cfg,
                                const SamplerConfig& cfg) {
    cfg.validate();
    prior_cfg.validate();
    if (k < 1 || k > data.m()) throw std::invalid_argument("run_chain: need 1 <= k <= m");
    Rng g(cfg.seed);
    ModelState s = initialize_state(data, k, cfg.truncation, prior_cfg, g);

    PosteriorChain chain;
    chain.burn_in = cfg.burn_in;
    chain.thin = cfg.thin;
    double step = cfg.metropolis_step;
    int accepted = 0, proposals = 0;
    const double adapt_rate = 0.1;

    for (int it = 0; it < cfg.iterations; ++it) {
        bool acc = gibbs_sweep(s, data, prior_cfg, step, g);
        // Step size adapted during burn-in only; constant afterwards so the
        // post-burn-in kernel is time-homogeneous.
        if (it < cfg.burn_in) {
            step *= std::exp(adapt_rate * ((acc ? 1.0 : 0.0) - cfg.adapt_target));
            step = std::min(std::max(step, 1e-6), 10.0);
        } else {
            accepted += acc ? 1 : 0;
            ++proposals;
        }
        double lj = log_joint(s, data, prior_cfg);
        if (!std::isfinite(lj)) {
            std::ostringstream oss;
            oss << "run_chain: non-finite log joint at iteration " << it
                << " (sigma0=" << s.scales.sigma0 << ", step=" << step << ")";
            throw std::runtime_error(oss.str());
        }
        chain.diagnostics.log_joint_trace.push_back(lj);
        if (it >= cfg.burn_in && (it - cfg.burn_in) % cfg.thin == 0) {
            if (geometry::orthonormality_defect(s.U) > geometry::kDriftTol) {
                s.U = geometry::polar_retraction(s.U);
                s.sync_frame();
            }
            chain.draws.push_back(s);
        }
    }
    chain.diagnostics.frame_acceptance_rate =
        proposals > 0 ? double(accepted) / double(proposals) : 0.0;
    chain.diagnostics.final_step = step;
    return chain;
}

} // namespace sampler
} // namespace psc
