// Acceptance suite: one pass/fail line per criterion, exit nonzero on any
// failure. Criteria needing the UCI breast-cancer-wisconsin file look for it
// at $PSC_WBC_PATH or data/breast-cancer-wisconsin.data and are skipped with
// a notice when the file is absent.

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "helpers.hpp"

using namespace psc;
using Clock = std::chrono::steady_clock;

namespace {

int g_failures = 0;

void report(int criterion, bool pass, const std::string& what, const std::string& detail) {
    std::cout << (pass ? "[PASS] " : "[FAIL] ") << "criterion " << criterion << ": " << what;
    if (!detail.empty()) std::cout << " (" << detail << ")";
    std::cout << std::endl;
    if (!pass) ++g_failures;
}

void report_skip(int criterion, const std::string& what, const std::string& why) {
    std::cout << "[SKIP] criterion " << criterion << ": " << what << " (" << why << ")"
              << std::endl;
}

std::string find_wbc_file() {
    if (const char* env = std::getenv("PSC_WBC_PATH")) {
        if (std::filesystem::exists(env)) return env;
    }
    for (const char* p : {"data/breast-cancer-wisconsin.data", "../data/breast-cancer-wisconsin.data",
                          "../../data/breast-cancer-wisconsin.data"}) {
        if (std::filesystem::exists(p)) return p;
    }
    return {};
}

struct WbcRun {
    double psc_error = 1.0;
    double knn_error = 1.0;
    bool ranking_ok = false;
};

WbcRun run_wbc_once(const LabeledDataset& full, std::uint64_t seed) {
    SplitSpec split_spec;
    split_spec.test_fraction = 1.0 / 3.0;
    split_spec.stratified = true;
    split_spec.seed = seed;
    auto [train_raw, test_raw] = data_io::split(full, split_spec);
    LabeledDataset train = data_io::standardize(train_raw);
    Matrix X_test = data_io::apply_transform(train.transform, test_raw.X);

    PriorConfig prior;
    SamplerConfig cfg;
    cfg.iterations = 5000;
    cfg.burn_in = 1000;
    cfg.thin = 5;
    cfg.truncation = 20;
    cfg.seed = seed;
    PosteriorChain chain = sampler::run_chain(train, 3, prior, cfg);

    WbcRun out;
    auto pred = classify::posterior_predict(chain, X_test);
    out.psc_error = classify::evaluate(pred, test_raw.y, 2).error_rate;

    LabeledDataset test_std = test_raw;
    test_std.X = X_test;
    KnnConfig knn;
    for (int k = 1; k <= 21; k += 2) knn.neighbor_grid.push_back(k);
    out.knn_error = baselines::knn_sweep(train, test_std, knn).error;

    auto est = estimator::estimate_subspace(chain);
    auto fi = estimator::feature_importance(est, train.feature_names);
    std::vector<int> order(9);
    for (int i = 0; i < 9; ++i) order[size_t(i)] = i;
    std::sort(order.begin(), order.end(),
              [&](int a, int b) { return fi.scores(a) > fi.scores(b); });
    bool bare = false, nucleoli = false;
    for (int r = 0; r < 3; ++r) {
        if (order[size_t(r)] == 5) bare = true;     // bare nuclei
        if (order[size_t(r)] == 7) nucleoli = true; // normal nucleoli
    }
    out.ranking_ok = bare && nucleoli;
    return out;
}

void criteria_1_2_wbc() {
    const std::string what1 = "WBC out-of-sample error and KNN sweep";
    const std::string what2 = "WBC feature ranking (bare nuclei, normal nucleoli in top 3)";
    std::string path = find_wbc_file();
    if (path.empty()) {
        const std::string why =
            "breast-cancer-wisconsin.data not present; place the UCI file at "
            "data/breast-cancer-wisconsin.data or set PSC_WBC_PATH";
        report_skip(1, what1, why);
        report_skip(2, what2, why);
        return;
    }
    auto t0 = Clock::now();
    LabeledDataset full = data_io::load_wbc(path);
    double err_sum = 0.0, knn_sum = 0.0;
    int rank_ok = 0;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        WbcRun r = run_wbc_once(full, seed);
        err_sum += r.psc_error;
        knn_sum += r.knn_error;
        rank_ok += r.ranking_ok ? 1 : 0;
    }
    double mean_err = err_sum / 5.0, mean_knn = knn_sum / 5.0;
    double secs = std::chrono::duration<double>(Clock::now() - t0).count();
    std::ostringstream d1;
    d1 << std::fixed << std::setprecision(4) << "mean PSC error " << mean_err
       << ", mean KNN error " << mean_knn << ", " << std::setprecision(1) << secs << "s";
    bool pass1 = mean_err <= 0.05 && std::abs(mean_knn - 0.035) <= 0.02 && secs < 600.0;
    report(1, pass1, what1, d1.str());
    std::ostringstream d2;
    d2 << rank_ok << " of 5 runs";
    report(2, rank_ok >= 4, what2, d2.str());
}

void criterion_3_recovery() {
    auto t0 = Clock::now();
    // Fixed ground truth: m=10, k=2, well-separated atoms, sigma=(1.5,1.5),
    // sigma0=0.5.
    SyntheticSpec spec;
    spec.m = 10;
    spec.k = 2;
    spec.c = 2;
    spec.n = 2000;
    spec.sigma = Vector::Constant(2, 1.5);
    spec.sigma0 = 0.5;
    spec.seed = 999;
    Vector nu1(2), nu2(2), nu3(2);
    nu1 << 0.9, 0.1;
    nu2 << 0.1, 0.9;
    nu3 << 0.5, 0.5;
    spec.atoms = {{(Vector(2) << 0.0, 0.0).finished(), nu1},
                  {(Vector(2) << 8.0, 0.0).finished(), nu2},
                  {(Vector(2) << 0.0, 8.0).finished(), nu3}}; // separations >= 8 > 4*sigma
    auto [unused, truth] = data_io::generate_synthetic(spec);
    (void)unused;
    Matrix R_true = truth.U * truth.U.transpose();

    PriorConfig prior;
    SamplerConfig cfg;
    cfg.iterations = 600;
    cfg.burn_in = 200;
    cfg.thin = 2;
    cfg.truncation = 10;

    int ok = 0;
    double worst = 0.0;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        Rng g(1000 + seed);
        LabeledDataset data = sampler::sample_dataset(truth, spec.n, g);
        cfg.seed = seed;
        PosteriorChain chain = sampler::run_chain(data, 2, prior, cfg);
        auto est = estimator::estimate_subspace(chain);
        double dist = (est.R_hat - R_true).norm();
        worst = std::max(worst, dist);
        if (dist <= 0.35 && est.k_hat == 2) ++ok;
    }
    double secs = std::chrono::duration<double>(Clock::now() - t0).count();
    std::ostringstream d;
    d << ok << " of 5 seeds recovered, worst ||R_hat - R_true||_F " << std::fixed
      << std::setprecision(3) << worst << ", " << std::setprecision(1) << secs << "s";
    report(3, ok >= 4 && secs < 300.0, "synthetic subspace recovery (m=10, k=2, n=2000)",
           d.str());
}

struct RunningStats {
    double sum = 0.0, sumsq = 0.0;
    long n = 0;
    void add(double x) {
        sum += x;
        sumsq += x * x;
        ++n;
    }
    double mean() const { return sum / double(n); }
    double se_iid() const {
        double var = sumsq / double(n) - mean() * mean();
        return std::sqrt(std::max(var, 0.0) / double(n));
    }
};

double batch_se(const std::vector<double>& v, int batches = 50) {
    size_t len = v.size() / size_t(batches);
    double grand = 0.0;
    std::vector<double> bm(size_t(batches), 0.0);
    for (int b = 0; b < batches; ++b) {
        for (size_t i = 0; i < len; ++i) bm[size_t(b)] += v[size_t(b) * len + i];
        bm[size_t(b)] /= double(len);
        grand += bm[size_t(b)];
    }
    grand /= batches;
    double var = 0.0;
    for (double x : bm) var += (x - grand) * (x - grand);
    var /= double(batches - 1);
    return std::sqrt(var / double(batches));
}

void criterion_4_geweke() {
    auto t0 = Clock::now();
    const int m = 3, k = 1, c = 2, n = 20, T = 5;
    PriorConfig prior;
    prior.theta_scale = 2.0; // moderate prior scale keeps both runs comparable

    struct Stat {
        const char* name;
        RunningStats prior_run;
        std::vector<double> gibbs_run;
    };
    std::vector<Stat> stats = {{"theta_1"}, {"log sigma0^2"}, {"w_1"}, {"R_11"}};
    auto observe = [&](const ModelState& s, auto&& sink) {
        sink(0, s.theta(0));
        sink(1, 2.0 * std::log(s.scales.sigma0));
        sink(2, s.mixing.weights(0));
        sink(3, s.U(0, 0) * s.U(0, 0));
    };

    // (a) marginal-conditional: independent prior draws
    Rng ga(2024);
    const int M = 40000;
    for (int it = 0; it < M; ++it) {
        ModelState s = priors::sample_prior(prior, k, m, c, T, ga);
        observe(s, [&](int i, double x) { stats[size_t(i)].prior_run.add(x); });
    }

    // (b) successive-conditional: Gibbs sweep followed by data regeneration
    Rng gb(4048);
    ModelState s = priors::sample_prior(prior, k, m, c, T, gb);
    const int N = 60000;
    const double step = 0.8; // fixed step: the kernel must be time-homogeneous
    for (int it = 0; it < N; ++it) {
        LabeledDataset data = sampler::sample_dataset(s, n, gb);
        sampler::gibbs_sweep(s, data, prior, step, gb);
        observe(s, [&](int i, double x) { stats[size_t(i)].gibbs_run.push_back(x); });
    }

    bool pass = true;
    std::ostringstream d;
    d << std::fixed << std::setprecision(2);
    for (auto& st : stats) {
        double ma = st.prior_run.mean();
        double mb = 0.0;
        for (double x : st.gibbs_run) mb += x;
        mb /= double(st.gibbs_run.size());
        double se = std::sqrt(st.prior_run.se_iid() * st.prior_run.se_iid() +
                              batch_se(st.gibbs_run) * batch_se(st.gibbs_run));
        double zscore = (mb - ma) / se;
        d << st.name << " z=" << zscore << "; ";
        if (std::abs(zscore) > 3.0) pass = false;
    }
    double secs = std::chrono::duration<double>(Clock::now() - t0).count();
    d << std::setprecision(1) << secs << "s";
    report(4, pass, "Geweke joint-distribution test (m=3, k=1, c=2, n=20, T=5)", d.str());
}

void criterion_5_factorization() {
    Rng g(77);
    double worst = 0.0;
    for (int rep = 0; rep < 1000; ++rep) {
        int m = 2 + int(g() % 19); // m <= 20
        int kk = 1 + int(g() % size_t(m));
        ModelState s = psc::test::random_state(g, m, kk, 2, 4);
        Vector x = rng::gaussian_vector(g, m, 2.0);
        double diff = std::abs(model::log_marginal_density_x(s, x) -
                               psc::test::dense_log_marginal(s, x));
        worst = std::max(worst, diff);
    }
    std::ostringstream d;
    d << "1000 states, worst |factorized - dense| = " << std::scientific
      << std::setprecision(2) << worst;
    report(5, worst <= 1e-8, "density factorization matches dense m x m evaluation", d.str());
}

geometry::AffineSubspace random_pair(Rng& g, int m) {
    int kk = int(g() % size_t(m + 1));
    geometry::AffineSubspace p;
    if (kk == 0) {
        p.R = Matrix::Zero(m, m);
        p.theta = rng::gaussian_vector(g, m);
    } else {
        Matrix U = priors::sample_uniform_frame(g, m, kk);
        p.R = U * U.transpose();
        Vector raw = rng::gaussian_vector(g, m);
        p.theta = raw - p.R * raw;
    }
    return p;
}

void criterion_6_optimality() {
    Rng g(101);
    bool pass = true;
    for (int rep = 0; rep < 100 && pass; ++rep) {
        int m = 2 + int(g() % 2); // m <= 3
        int n_draws = 1 + int(g() % 5);
        std::vector<geometry::AffineSubspace> posterior;
        Matrix Rbar = Matrix::Zero(m, m);
        Vector tbar = Vector::Zero(m);
        for (int i = 0; i < n_draws; ++i) {
            posterior.push_back(random_pair(g, m));
            Rbar += posterior.back().R;
            tbar += posterior.back().theta;
        }
        Rbar /= double(n_draws);
        tbar /= double(n_draws);
        auto est = estimator::estimate_subspace(Rbar, tbar);
        geometry::AffineSubspace est_pair{est.R_hat, est.theta_hat};
        auto expected_loss = [&](const geometry::AffineSubspace& cand) {
            double s = 0.0;
            for (const auto& p : posterior) s += estimator::loss(cand, p);
            return s / double(posterior.size());
        };
        double est_loss = expected_loss(est_pair);
        for (int cand = 0; cand < 10000; ++cand) {
            if (est_loss > expected_loss(random_pair(g, m)) + 1e-9) {
                pass = false;
                break;
            }
        }
    }
    report(6, pass, "subspace estimator beats 10^4 random candidates on 100 small posteriors",
           "");
}

void criterion_7_properties() {
    bool pass = true;
    std::ostringstream d;

    // projection idempotence / symmetry
    Rng g(55);
    for (int rep = 0; rep < 200; ++rep) {
        int m = 2 + int(g() % 7);
        int kk = 1 + int(g() % size_t(m));
        Matrix U = priors::sample_uniform_frame(g, m, kk);
        Matrix R = U * U.transpose();
        if ((R * R - R).norm() > 1e-10 || (R - R.transpose()).norm() > 1e-10) pass = false;
    }
    if (!pass) d << "projection idempotence failed; ";

    // U'theta = 0 across a full chain + bit-exact round trip
    {
        PriorConfig prior;
        SamplerConfig cfg;
        cfg.iterations = 120;
        cfg.burn_in = 20;
        cfg.truncation = 5;
        LabeledDataset data = data_io::standardize(psc::test::tiny_synthetic(3, 60, 4, 2, 2));
        PosteriorChain chain = sampler::run_chain(data, 2, prior, cfg);
        for (const auto& s : chain.draws)
            if ((s.U.transpose() * s.theta).norm() > 1e-10) pass = false;
        std::string path = "/tmp/psc_acceptance_chain.jsonl";
        data_io::save_chain(chain, path);
        PosteriorChain loaded = data_io::load_chain(path);
        std::remove(path.c_str());
        for (size_t i = 0; i < chain.draws.size(); ++i) {
            if (!(chain.draws[i].U.array() == loaded.draws[i].U.array()).all() ||
                !(chain.draws[i].theta.array() == loaded.draws[i].theta.array()).all() ||
                chain.draws[i].scales.sigma0 != loaded.draws[i].scales.sigma0)
                pass = false;
        }
        // probability normalization of the posterior predictive
        auto pred = classify::posterior_predict(chain, data.X.topRows(10));
        for (int i = 0; i < 10; ++i)
            if (std::abs(pred.probs.row(i).sum() - 1.0) > 1e-8) pass = false;
    }

    // AUC equals the normalized Mann-Whitney statistic on small instances
    {
        std::uniform_real_distribution<double> u(0.0, 1.0);
        for (int rep = 0; rep < 300; ++rep) {
            int n = 4 + int(g() % 9);
            std::vector<double> scores(static_cast<size_t>(n));
            std::vector<int> y(static_cast<size_t>(n));
            bool has1 = false, has2 = false;
            for (int i = 0; i < n; ++i) {
                scores[size_t(i)] = std::round(u(g) * 4.0) / 4.0;
                y[size_t(i)] = 1 + int(g() % 2);
                (y[size_t(i)] == 1 ? has1 : has2) = true;
            }
            if (!has1 || !has2) continue;
            PredictiveResult pr;
            pr.probs.resize(n, 2);
            pr.labels.assign(size_t(n), 1);
            for (int i = 0; i < n; ++i) {
                pr.probs(i, 1) = scores[size_t(i)];
                pr.probs(i, 0) = 1.0 - scores[size_t(i)];
            }
            double auc = classify::evaluate(pr, y, 2).auc;
            double num = 0.0, pairs = 0.0;
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < n; ++j) {
                    if (y[size_t(i)] != 2 || y[size_t(j)] != 1) continue;
                    pairs += 1.0;
                    if (scores[size_t(i)] > scores[size_t(j)]) num += 1.0;
                    else if (scores[size_t(i)] == scores[size_t(j)]) num += 0.5;
                }
            if (std::abs(auc - num / pairs) > 1e-10) pass = false;
        }
    }

    // split determinism
    {
        LabeledDataset data = psc::test::tiny_synthetic(9, 30, 3, 1, 2);
        for (std::uint64_t seed = 1; seed <= 50; ++seed) {
            SplitSpec spec;
            spec.test_fraction = 0.25;
            spec.seed = seed;
            auto [tr1, te1] = data_io::split(data, spec);
            auto [tr2, te2] = data_io::split(data, spec);
            if ((tr1.X - tr2.X).norm() != 0.0 || (te1.X - te2.X).norm() != 0.0) pass = false;
            if (tr1.n() + te1.n() != data.n()) pass = false;
        }
    }

    report(7, pass, "property suites (projection, chain invariants, normalization, AUC, split, round trip)",
           d.str());
}

void criterion_8_bci() {
    std::cout << "[N/A ] criterion 8: BCI error rates (PSC 0.205, KNN 0.51, MDA 0.25, SVM 0.23) "
                 "are out of scope at desk scale: the 117-feature EEG-derived dataset is not "
                 "redistributable here. The generic CSV path (psc fit --csv ...) accepts the "
                 "feature matrix for users holding the data."
              << std::endl;
}

} // namespace

int main() {
    std::cout << "principal subspace classifier acceptance suite" << std::endl;
    criterion_5_factorization();
    criterion_6_optimality();
    criterion_7_properties();
    criterion_4_geweke();
    criterion_3_recovery();
    criteria_1_2_wbc();
    criterion_8_bci();
    if (g_failures > 0) {
        std::cout << g_failures << " criterion(s) failed" << std::endl;
        return 1;
    }
    std::cout << "all executed criteria passed" << std::endl;
    return 0;
}
