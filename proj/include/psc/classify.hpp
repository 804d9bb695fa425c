#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <stdexcept>
#include <vector>

#include "psc/model.hpp"
#include "psc/sampler.hpp"

namespace psc {

struct PredictiveResult {
    Matrix probs;            // n x c, rows sum to 1
    std::vector<int> labels; // argmax labels in {1..c}, ties toward smaller label
    int draws_used = 0;
};

struct EvalReport {
    double error_rate = 0.0;
    Eigen::MatrixXi confusion; // true x predicted
    std::vector<std::pair<double, double>> roc_points; // (fpr, tpr)
    double auc = std::numeric_limits<double>::quiet_NaN(); // binary only
};

namespace classify {

/// Posterior-predictive class probabilities: the plain average of the
/// per-draw conditional class probabilities.
inline PredictiveResult posterior_predict(const PosteriorChain& chain, const Matrix& X_new) {
    if (chain.draws.empty()) throw std::invalid_argument("posterior_predict: empty chain");
    const auto& first = chain.draws.front();
    if (X_new.cols() != first.m())
        throw std::invalid_argument("posterior_predict: feature dimension mismatch");
    const int c = first.num_classes();
    PredictiveResult out;
    out.draws_used = int(chain.draws.size());
    out.probs = Matrix::Zero(X_new.rows(), c);
    for (const auto& s : chain.draws)
        for (Eigen::Index i = 0; i < X_new.rows(); ++i)
            out.probs.row(i) += model::conditional_class_prob(s, X_new.row(i).transpose());
    out.probs /= double(chain.draws.size());
    out.labels.resize(size_t(X_new.rows()));
    for (Eigen::Index i = 0; i < X_new.rows(); ++i) {
        int best = 0;
        for (int l = 1; l < c; ++l)
            if (out.probs(i, l) > out.probs(i, best)) best = l;
        out.labels[size_t(i)] = best + 1;
    }
    return out;
}

/// ROC curve and AUC for binary problems, scoring by the probability of the
/// positive class. Ties grouped, so AUC equals the normalized Mann-Whitney
/// statistic with half credit for ties.
inline void binary_roc(const Vector& scores, const std::vector<int>& y_true, int positive_label,
                       std::vector<std::pair<double, double>>& roc, double& auc) {
    const Eigen::Index n = scores.size();
    std::vector<Eigen::Index> order(static_cast<size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) order[size_t(i)] = i;
    std::sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
        return scores(a) > scores(b);
    });
    double P = 0.0, N = 0.0;
    for (int yi : y_true) (yi == positive_label ? P : N) += 1.0;
    if (P == 0.0 || N == 0.0) throw std::invalid_argument("binary_roc: need both classes present");

    roc.clear();
    roc.emplace_back(0.0, 0.0);
    auc = 0.0;
    double tp = 0.0, fp = 0.0;
    size_t i = 0;
    while (i < order.size()) {
        double sc = scores(order[i]);
        double dtp = 0.0, dfp = 0.0;
        while (i < order.size() && scores(order[i]) == sc) {
            if (y_true[size_t(order[i])] == positive_label) dtp += 1.0; else dfp += 1.0;
            ++i;
        }
        double tp2 = tp + dtp, fp2 = fp + dfp;
        auc += (fp2 - fp) / N * (tp + tp2) / (2.0 * P); // trapezoid
        tp = tp2; fp = fp2;
        roc.emplace_back(fp / N, tp / P);
    }
}

/// Misclassification rate, confusion matrix, and (for c = 2) ROC/AUC with
/// class 2 as the positive class by default.
inline EvalReport evaluate(const PredictiveResult& pred, const std::vector<int>& y_true,
                           int num_classes, int positive_label = 2) {
    if (pred.labels.size() != y_true.size())
        throw std::invalid_argument("evaluate: size mismatch");
    EvalReport rep;
    rep.confusion = Eigen::MatrixXi::Zero(num_classes, num_classes);
    int errors = 0;
    for (size_t i = 0; i < y_true.size(); ++i) {
        if (y_true[i] < 1 || y_true[i] > num_classes)
            throw std::invalid_argument("evaluate: label out of range");
        rep.confusion(y_true[i] - 1, pred.labels[i] - 1) += 1;
        if (pred.labels[i] != y_true[i]) ++errors;
    }
    rep.error_rate = double(errors) / double(y_true.size());
    if (num_classes == 2) {
        Vector scores = pred.probs.col(positive_label - 1);
        binary_roc(scores, y_true, positive_label, rep.roc_points, rep.auc);
    }
    return rep;
}

inline double auc_or_throw(const EvalReport& rep) {
    if (!std::isfinite(rep.auc))
        throw std::invalid_argument("AUC is binary only");
    return rep.auc;
}

/// k-selection rule: maximize AUC minus error rate over the candidate grid
/// (ties toward the smaller k). For non-binary tasks, where no AUC exists,
/// falls back to minimizing the error rate.
inline int select_k(const std::vector<std::pair<int, EvalReport>>& reports, int k_max) {
    int best_k = -1;
    double best_val = -std::numeric_limits<double>::infinity();
    bool binary = !reports.empty() && std::isfinite(reports.front().second.auc);
    for (const auto& [k, rep] : reports) {
        if (k > k_max) continue;
        double val = binary ? rep.auc - rep.error_rate : -rep.error_rate;
        if (val > best_val || (val == best_val && best_k > 0 && k < best_k)) {
            best_val = val;
            best_k = k;
        }
    }
    if (best_k < 0) throw std::invalid_argument("select_k: no candidate with k <= k_max");
    return best_k;
}

} // namespace classify
} // namespace psc
