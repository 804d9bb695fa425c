#include <catch2/catch_amalgamated.hpp>

#include "helpers.hpp"

using namespace psc;
using psc::test::random_state;

namespace {

PosteriorChain chain_of(std::vector<ModelState> draws) {
    PosteriorChain c;
    c.draws = std::move(draws);
    return c;
}

PredictiveResult result_from_scores(const std::vector<double>& pos_scores) {
    PredictiveResult pr;
    pr.probs.resize(Eigen::Index(pos_scores.size()), 2);
    pr.labels.resize(pos_scores.size());
    for (size_t i = 0; i < pos_scores.size(); ++i) {
        pr.probs(Eigen::Index(i), 1) = pos_scores[i];
        pr.probs(Eigen::Index(i), 0) = 1.0 - pos_scores[i];
        pr.labels[i] = pos_scores[i] > 0.5 ? 2 : 1;
    }
    return pr;
}

/// Mann-Whitney AUC oracle: fraction of positive/negative pairs ranked
/// correctly, half credit for score ties.
double mann_whitney_auc(const std::vector<double>& scores, const std::vector<int>& y,
                        int positive = 2) {
    double num = 0.0, pairs = 0.0;
    for (size_t i = 0; i < scores.size(); ++i) {
        if (y[i] != positive) continue;
        for (size_t j = 0; j < scores.size(); ++j) {
            if (y[j] == positive) continue;
            pairs += 1.0;
            if (scores[i] > scores[j]) num += 1.0;
            else if (scores[i] == scores[j]) num += 0.5;
        }
    }
    return num / pairs;
}

} // namespace

TEST_CASE("posterior_predict") {
    Rng g(3);
    SECTION("single-draw chain equals the draw's conditional") {
        ModelState s = random_state(g, 3, 1, 2, 3);
        Matrix X = rng::gaussian_matrix(g, 5, 3);
        auto pred = classify::posterior_predict(chain_of({s}), X);
        for (int i = 0; i < 5; ++i) {
            Vector expected = model::conditional_class_prob(s, X.row(i).transpose());
            REQUIRE((pred.probs.row(i).transpose() - expected).norm() < 1e-12);
        }
    }
    SECTION("identical draws average to themselves") {
        ModelState s = random_state(g, 3, 1, 2, 2);
        Matrix X = rng::gaussian_matrix(g, 4, 3);
        auto one = classify::posterior_predict(chain_of({s}), X);
        auto three = classify::posterior_predict(chain_of({s, s, s}), X);
        REQUIRE((one.probs - three.probs).norm() < 1e-12);
    }
    SECTION("two-draw chain averages the probability vectors") {
        ModelState a = random_state(g, 3, 1, 2, 2);
        ModelState b = random_state(g, 3, 1, 2, 2);
        Matrix X = rng::gaussian_matrix(g, 6, 3);
        auto pa = classify::posterior_predict(chain_of({a}), X);
        auto pb = classify::posterior_predict(chain_of({b}), X);
        auto pab = classify::posterior_predict(chain_of({a, b}), X);
        REQUIRE((pab.probs - 0.5 * (pa.probs + pb.probs)).norm() < 1e-12);
    }
    SECTION("rows sum to one on random chains") {
        for (int rep = 0; rep < 10; ++rep) {
            std::vector<ModelState> draws;
            for (int i = 0; i < 3; ++i) draws.push_back(random_state(g, 4, 2, 3, 3));
            Matrix X = rng::gaussian_matrix(g, 7, 4);
            auto pred = classify::posterior_predict(chain_of(draws), X);
            for (int i = 0; i < 7; ++i)
                REQUIRE(pred.probs.row(i).sum() == Catch::Approx(1.0).margin(1e-8));
        }
    }
    SECTION("errors") {
        ModelState s = random_state(g, 3, 1, 2, 2);
        REQUIRE_THROWS_AS(classify::posterior_predict(chain_of({}), Matrix::Zero(1, 3)),
                          std::invalid_argument);
        REQUIRE_THROWS_AS(classify::posterior_predict(chain_of({s}), Matrix::Zero(1, 4)),
                          std::invalid_argument);
    }
}

TEST_CASE("evaluate") {
    SECTION("perfect probabilities") {
        auto pr = result_from_scores({0.99, 0.95, 0.02, 0.01});
        std::vector<int> y = {2, 2, 1, 1};
        auto rep = classify::evaluate(pr, y, 2);
        REQUIRE(rep.error_rate == 0.0);
        REQUIRE(rep.auc == Catch::Approx(1.0).margin(1e-12));
    }
    SECTION("constant score gives chance AUC") {
        auto pr = result_from_scores({0.5, 0.5, 0.5, 0.5});
        std::vector<int> y = {2, 1, 2, 1};
        auto rep = classify::evaluate(pr, y, 2);
        REQUIRE(rep.auc == Catch::Approx(0.5).margin(1e-12));
    }
    SECTION("4-point hand case") {
        auto pr = result_from_scores({0.9, 0.8, 0.3, 0.1});
        std::vector<int> y = {2, 2, 1, 1};
        auto rep = classify::evaluate(pr, y, 2);
        REQUIRE(rep.auc == Catch::Approx(1.0).margin(1e-12));
        REQUIRE(rep.error_rate == 0.0);
        // ROC monotone nondecreasing in both coordinates
        for (size_t i = 1; i < rep.roc_points.size(); ++i) {
            REQUIRE(rep.roc_points[i].first >= rep.roc_points[i - 1].first);
            REQUIRE(rep.roc_points[i].second >= rep.roc_points[i - 1].second);
        }
        REQUIRE(rep.roc_points.back().first == Catch::Approx(1.0));
        REQUIRE(rep.roc_points.back().second == Catch::Approx(1.0));
    }
    SECTION("AUC equals the normalized Mann-Whitney statistic on small instances") {
        Rng g(7);
        std::uniform_real_distribution<double> u(0.0, 1.0);
        for (int rep = 0; rep < 200; ++rep) {
            int n = 4 + int(g() % 9); // n <= 12
            std::vector<double> scores(static_cast<size_t>(n));
            std::vector<int> y(static_cast<size_t>(n));
            bool has1 = false, has2 = false;
            for (int i = 0; i < n; ++i) {
                // coarse grid so score ties actually occur
                scores[size_t(i)] = std::round(u(g) * 4.0) / 4.0;
                y[size_t(i)] = 1 + int(g() % 2);
                (y[size_t(i)] == 1 ? has1 : has2) = true;
            }
            if (!has1 || !has2) continue;
            auto pr = result_from_scores(scores);
            auto report = classify::evaluate(pr, y, 2);
            REQUIRE(report.auc ==
                    Catch::Approx(mann_whitney_auc(scores, y)).margin(1e-10));
            // trapezoidal integration of the stored ROC points reproduces auc
            double trap = 0.0;
            for (size_t i = 1; i < report.roc_points.size(); ++i)
                trap += (report.roc_points[i].first - report.roc_points[i - 1].first) *
                        0.5 * (report.roc_points[i].second + report.roc_points[i - 1].second);
            REQUIRE(trap == Catch::Approx(report.auc).margin(1e-10));
        }
    }
    SECTION("permutation invariance") {
        Rng g(11);
        std::vector<double> scores = {0.9, 0.1, 0.6, 0.4, 0.7, 0.2};
        std::vector<int> y = {2, 1, 2, 1, 1, 2};
        auto base = classify::evaluate(result_from_scores(scores), y, 2);
        std::vector<size_t> perm = {3, 0, 5, 1, 4, 2};
        std::vector<double> s2(6);
        std::vector<int> y2(6);
        for (size_t i = 0; i < 6; ++i) {
            s2[i] = scores[perm[i]];
            y2[i] = y[perm[i]];
        }
        auto shuffled = classify::evaluate(result_from_scores(s2), y2, 2);
        REQUIRE(base.error_rate == shuffled.error_rate);
        REQUIRE(base.auc == Catch::Approx(shuffled.auc).margin(1e-12));
    }
    SECTION("AUC requires a binary problem") {
        PredictiveResult pr;
        pr.probs = Matrix::Constant(3, 3, 1.0 / 3.0);
        pr.labels = {1, 2, 3};
        std::vector<int> y = {1, 2, 3};
        auto rep = classify::evaluate(pr, y, 3);
        REQUIRE_THROWS_AS(classify::auc_or_throw(rep), std::invalid_argument);
    }
}

TEST_CASE("select_k") {
    auto mk = [](double auc, double err) {
        EvalReport r;
        r.auc = auc;
        r.error_rate = err;
        return r;
    };
    SECTION("single candidate") {
        std::vector<std::pair<int, EvalReport>> reports = {{4, mk(0.8, 0.2)}};
        REQUIRE(classify::select_k(reports, 25) == 4);
    }
    SECTION("argmax of auc minus error") {
        std::vector<std::pair<int, EvalReport>> reports = {
            {1, mk(0.6, 0.3)}, {2, mk(0.9, 0.2)}, {3, mk(0.8, 0.3)}};
        REQUIRE(classify::select_k(reports, 25) == 2);
    }
    SECTION("k_max is respected") {
        std::vector<std::pair<int, EvalReport>> reports = {
            {1, mk(0.6, 0.3)}, {30, mk(0.99, 0.01)}};
        REQUIRE(classify::select_k(reports, 25) == 1);
        REQUIRE_THROWS_AS(classify::select_k({{30, mk(0.9, 0.1)}}, 25), std::invalid_argument);
    }
    SECTION("non-binary falls back to minimal error") {
        EvalReport a, b;
        a.error_rate = 0.4;
        b.error_rate = 0.1;
        std::vector<std::pair<int, EvalReport>> reports = {{1, a}, {2, b}};
        REQUIRE(classify::select_k(reports, 25) == 2);
    }
}
