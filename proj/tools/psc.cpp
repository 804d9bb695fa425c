// Command-line front end for the principal subspace classifier.
//
// A "run directory" produced by `fit` or `select-k` contains:
//   config.json            sampler settings, standardization, feature names
//   chains/k=<k>.jsonl     one posterior draw per line
//   metrics.csv            per-k holdout metrics (select-k only)
//   estimate/subspace.csv  eigenvalues, objective, projection matrix
//   estimate/importance.csv feature scores
//   report.txt             human-readable loading table

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <mutex>
#include <thread>

#include <psc/psc.hpp>

namespace fs = std::filesystem;
using namespace psc;
using nlohmann::json;

namespace {

struct DataArgs {
    std::string csv;
    std::string wbc;
    std::string label_column;
    int label_index = -1;

    void attach(CLI::App* cmd, bool required = true) {
        auto* a = cmd->add_option("--csv", csv, "labeled CSV input");
        auto* b = cmd->add_option("--wbc", wbc,
                                  "UCI breast-cancer-wisconsin.data file (11-field format)");
        cmd->add_option("--label-column", label_column, "label column name (CSV input)");
        cmd->add_option("--label-index", label_index, "0-based label column index (CSV input)");
        a->excludes(b);
        if (required) cmd->require_option();
    }

    LabeledDataset load() const {
        if (!wbc.empty()) return data_io::load_wbc(wbc);
        if (csv.empty()) throw std::invalid_argument("need --csv or --wbc");
        CsvSchema schema;
        schema.label_column = label_column;
        schema.label_index = label_index;
        if (label_column.empty() && label_index < 0)
            schema.label_column = "label";
        return data_io::load_csv(csv, schema);
    }
};

struct SamplerArgs {
    SamplerConfig cfg;

    void attach(CLI::App* cmd) {
        cmd->add_option("--iterations", cfg.iterations, "total Gibbs sweeps");
        cmd->add_option("--burn-in", cfg.burn_in, "sweeps discarded before storing");
        cmd->add_option("--thin", cfg.thin, "keep every thin-th sweep");
        cmd->add_option("--truncation", cfg.truncation, "stick-breaking truncation level");
        cmd->add_option("--step", cfg.metropolis_step, "initial frame Metropolis step");
        cmd->add_option("--seed", cfg.seed, "random seed");
    }
};

json transform_to_json(const Standardization& t) {
    json j;
    j["center"] = std::vector<double>(t.center.data(), t.center.data() + t.center.size());
    j["scale"] = std::vector<double>(t.scale.data(), t.scale.data() + t.scale.size());
    return j;
}

Standardization transform_from_json(const json& j) {
    Standardization t;
    auto c = j.at("center").get<std::vector<double>>();
    auto s = j.at("scale").get<std::vector<double>>();
    t.center = Eigen::Map<const Vector>(c.data(), Eigen::Index(c.size()));
    t.scale = Eigen::Map<const Vector>(s.data(), Eigen::Index(s.size()));
    return t;
}

void write_config(const fs::path& run_dir, const LabeledDataset& train, const SamplerConfig& cfg,
                  const std::vector<int>& ks) {
    json j;
    j["sampler"] = {{"iterations", cfg.iterations}, {"burn_in", cfg.burn_in},
                    {"thin", cfg.thin},            {"truncation", cfg.truncation},
                    {"step", cfg.metropolis_step}, {"seed", cfg.seed}};
    j["k"] = ks;
    j["c"] = train.c;
    j["m"] = train.X.cols();
    j["n_train"] = train.n();
    j["feature_names"] = train.feature_names;
    j["transform"] = transform_to_json(train.transform);
    std::ofstream out(run_dir / "config.json");
    out << j.dump(2) << "\n";
}

json read_config(const fs::path& run_dir) {
    std::ifstream in(run_dir / "config.json");
    if (!in) throw std::runtime_error("missing " + (run_dir / "config.json").string());
    json j;
    in >> j;
    return j;
}

fs::path chain_path(const fs::path& run_dir, int k) {
    return run_dir / "chains" / ("k=" + std::to_string(k) + ".jsonl");
}

PosteriorChain fit_one(const LabeledDataset& train, int k, const SamplerConfig& cfg,
                       const fs::path& run_dir) {
    PriorConfig prior;
    PosteriorChain chain = sampler::run_chain(train, k, prior, cfg);
    fs::create_directories(run_dir / "chains");
    data_io::save_chain(chain, chain_path(run_dir, k).string());
    return chain;
}

/// Features-only CSV reader used by `predict` when no labels are available.
Matrix read_matrix_csv(const std::string& path, bool has_header) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::vector<std::vector<double>> rows;
    std::string line;
    size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (data_io::detail::trim(line).empty()) continue;
        if (has_header && lineno == 1) continue;
        auto cells = data_io::detail::split_line(line);
        std::vector<double> row;
        for (size_t c = 0; c < cells.size(); ++c)
            row.push_back(data_io::detail::parse_cell(data_io::detail::trim(cells[c]), lineno - 1, c));
        if (!rows.empty() && row.size() != rows.front().size())
            throw std::runtime_error("ragged row " + std::to_string(lineno) + " in " + path);
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw std::runtime_error("no data rows in " + path);
    Matrix X(Eigen::Index(rows.size()), Eigen::Index(rows.front().size()));
    for (Eigen::Index i = 0; i < X.rows(); ++i)
        for (Eigen::Index j = 0; j < X.cols(); ++j) X(i, j) = rows[size_t(i)][size_t(j)];
    return X;
}

void write_report(const fs::path& run_dir, const SubspaceEstimate& est,
                  const FeatureImportance& fi, const std::vector<std::string>& names) {
    std::ofstream out(run_dir / "report.txt");
    out << "estimated subspace dimension k_hat = " << est.k_hat
        << (est.unique ? "" : " (minimizer not unique)") << "\n\n";
    out << std::left << std::setw(24) << "feature";
    for (int j = 0; j < est.k_hat; ++j) out << std::right << std::setw(10) << ("u" + std::to_string(j + 1));
    out << std::setw(10) << "norm" << std::setw(10) << "score" << "\n";
    Matrix load = est.eigenvectors.leftCols(est.k_hat);
    for (Eigen::Index i = 0; i < fi.scores.size(); ++i) {
        std::string name = i < Eigen::Index(names.size()) ? names[size_t(i)]
                                                          : "x" + std::to_string(i + 1);
        out << std::left << std::setw(24) << name << std::fixed << std::setprecision(4);
        for (int j = 0; j < est.k_hat; ++j) out << std::right << std::setw(10) << load(i, j);
        out << std::setw(10) << fi.norms(i) << std::setw(10) << fi.scores(i) << "\n";
        out.unsetf(std::ios::fixed);
    }
    out << "\neigenvalues:";
    for (Eigen::Index j = 0; j < est.eigenvalues.size(); ++j)
        out << " " << std::setprecision(4) << est.eigenvalues(j);
    out << "\n";
}

void run_estimate(const fs::path& run_dir, int k) {
    json cfg = read_config(run_dir);
    if (k < 0) k = cfg.at("k").get<std::vector<int>>().front();
    PosteriorChain chain = data_io::load_chain(chain_path(run_dir, k).string());
    auto est = estimator::estimate_subspace(chain);
    auto names = cfg.at("feature_names").get<std::vector<std::string>>();
    auto fi = estimator::feature_importance(est, names);

    fs::create_directories(run_dir / "estimate");
    {
        std::ofstream out(run_dir / "estimate" / "subspace.csv");
        out << "k_hat," << est.k_hat << "\nunique," << (est.unique ? 1 : 0) << "\n";
        out << "eigenvalues";
        for (Eigen::Index j = 0; j < est.eigenvalues.size(); ++j) out << "," << est.eigenvalues(j);
        out << "\nobjective";
        for (Eigen::Index j = 0; j < est.objective.size(); ++j) out << "," << est.objective(j);
        out << "\n";
        for (Eigen::Index i = 0; i < est.R_hat.rows(); ++i) {
            out << "R_hat";
            for (Eigen::Index j = 0; j < est.R_hat.cols(); ++j) out << "," << est.R_hat(i, j);
            out << "\n";
        }
        out << "theta_hat";
        for (Eigen::Index i = 0; i < est.theta_hat.size(); ++i) out << "," << est.theta_hat(i);
        out << "\n";
    }
    {
        std::ofstream out(run_dir / "estimate" / "importance.csv");
        out << "feature,score,norm\n";
        for (Eigen::Index i = 0; i < fi.scores.size(); ++i) {
            std::string name = i < Eigen::Index(names.size()) ? names[size_t(i)]
                                                              : "x" + std::to_string(i + 1);
            out << name << "," << fi.scores(i) << "," << fi.norms(i) << "\n";
        }
    }
    write_report(run_dir, est, fi, names);
    std::cout << "k_hat = " << est.k_hat << (est.unique ? "" : " (not unique)") << "\n";
    std::ifstream rep(run_dir / "report.txt");
    std::cout << rep.rdbuf();
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"principal subspace classifier"};
    app.require_subcommand(1);

    // ---- synth -----------------------------------------------------------
    auto* synth = app.add_subcommand("synth", "generate a synthetic dataset CSV");
    SyntheticSpec sspec;
    std::string synth_out = "synthetic.csv";
    synth->add_option("--m", sspec.m);
    synth->add_option("--k", sspec.k);
    synth->add_option("--c", sspec.c);
    synth->add_option("--n", sspec.n);
    synth->add_option("--atoms", sspec.num_atoms);
    synth->add_option("--spread", sspec.atom_spread);
    synth->add_option("--sigma0", sspec.sigma0);
    synth->add_option("--seed", sspec.seed);
    synth->add_option("--out", synth_out, "output CSV path");

    // ---- fit -------------------------------------------------------------
    auto* fit = app.add_subcommand("fit", "fit a chain at fixed subspace dimension");
    DataArgs fit_data;
    fit_data.attach(fit);
    SamplerArgs fit_sampler;
    fit_sampler.attach(fit);
    int fit_k = 2;
    std::string fit_out = "run";
    fit->add_option("--k", fit_k, "subspace dimension");
    fit->add_option("--out", fit_out, "run directory");

    // ---- select-k --------------------------------------------------------
    auto* sel = app.add_subcommand("select-k", "fit k = 1..k_max and pick by holdout AUC - error");
    DataArgs sel_data;
    sel_data.attach(sel);
    SamplerArgs sel_sampler;
    sel_sampler.attach(sel);
    int sel_kmax = 3;
    double sel_frac = 0.25;
    std::string sel_out = "run";
    int sel_jobs = int(std::max(1u, std::thread::hardware_concurrency()));
    sel->add_option("--k-max", sel_kmax, "largest candidate dimension (capped at 25)");
    sel->add_option("--test-fraction", sel_frac, "holdout fraction");
    sel->add_option("--jobs", sel_jobs, "chains fit concurrently");
    sel->add_option("--out", sel_out, "run directory");

    // ---- predict ---------------------------------------------------------
    auto* pred = app.add_subcommand("predict", "posterior predictive labels for new data");
    std::string pred_run = "run", pred_csv, pred_out = "predictions.csv", pred_label;
    int pred_k = -1, pred_label_idx = -1;
    bool pred_no_header = false;
    pred->add_option("--run", pred_run, "run directory from fit/select-k");
    pred->add_option("--csv", pred_csv, "input CSV")->required();
    pred->add_option("--k", pred_k, "which stored chain (default: first)");
    pred->add_option("--label-column", pred_label, "label column for evaluation");
    pred->add_option("--label-index", pred_label_idx, "0-based label column index");
    pred->add_flag("--no-header", pred_no_header, "input CSV has no header row");
    pred->add_option("--out", pred_out, "predictions CSV path");

    // ---- estimate / report ----------------------------------------------
    auto* est_cmd = app.add_subcommand("estimate", "closed-form subspace estimate from a chain");
    std::string est_run = "run";
    int est_k = -1;
    est_cmd->add_option("--run", est_run, "run directory");
    est_cmd->add_option("--k", est_k, "which stored chain (default: first)");

    auto* rep_cmd = app.add_subcommand("report", "print the loading/importance report");
    std::string rep_run = "run";
    int rep_k = -1;
    rep_cmd->add_option("--run", rep_run, "run directory");
    rep_cmd->add_option("--k", rep_k, "which stored chain (default: first)");

    // ---- baseline --------------------------------------------------------
    auto* base = app.add_subcommand("baseline", "KNN sweep and Gaussian-mixture discriminant");
    DataArgs base_data;
    base_data.attach(base);
    double base_frac = 1.0 / 3.0;
    std::uint64_t base_seed = 1;
    base->add_option("--test-fraction", base_frac);
    base->add_option("--seed", base_seed);

    CLI11_PARSE(app, argc, argv);

    try {
        if (*synth) {
            auto [data, truth] = data_io::generate_synthetic(sspec);
            (void)truth;
            std::ofstream out(synth_out);
            for (Eigen::Index j = 0; j < data.X.cols(); ++j) out << "x" << (j + 1) << ",";
            out << "label\n";
            out << std::setprecision(17);
            for (Eigen::Index i = 0; i < data.n(); ++i) {
                for (Eigen::Index j = 0; j < data.X.cols(); ++j) out << data.X(i, j) << ",";
                out << data.y[size_t(i)] << "\n";
            }
            std::cout << "wrote " << data.n() << " rows to " << synth_out << "\n";
        } else if (*fit) {
            LabeledDataset train = data_io::standardize(fit_data.load());
            fs::create_directories(fit_out);
            write_config(fit_out, train, fit_sampler.cfg, {fit_k});
            PosteriorChain chain = fit_one(train, fit_k, fit_sampler.cfg, fit_out);
            std::cout << "stored " << chain.draws.size() << " draws at " << chain_path(fit_out, fit_k)
                      << "\nframe acceptance rate "
                      << std::fixed << std::setprecision(3)
                      << chain.diagnostics.frame_acceptance_rate << "\n";
        } else if (*sel) {
            if (sel_kmax < 1 || sel_kmax > 25)
                throw std::invalid_argument("select-k: need 1 <= k_max <= 25");
            LabeledDataset full = sel_data.load();
            SplitSpec split_spec;
            split_spec.test_fraction = sel_frac;
            split_spec.stratified = true;
            split_spec.seed = sel_sampler.cfg.seed;
            auto [train_raw, test_raw] = data_io::split(full, split_spec);
            LabeledDataset train = data_io::standardize(train_raw);
            Matrix X_test = data_io::apply_transform(train.transform, test_raw.X);
            sel_kmax = std::min<int>(sel_kmax, int(train.X.cols()));

            fs::create_directories(sel_out);
            std::vector<int> ks;
            for (int k = 1; k <= sel_kmax; ++k) ks.push_back(k);
            write_config(sel_out, train, sel_sampler.cfg, ks);

            std::vector<std::pair<int, EvalReport>> reports(ks.size());
            std::mutex mtx;
            std::exception_ptr error;
            std::atomic<size_t> next{0};
            auto worker = [&] {
                for (size_t i = next.fetch_add(1); i < ks.size(); i = next.fetch_add(1)) {
                    try {
                        PosteriorChain chain = fit_one(train, ks[i], sel_sampler.cfg, sel_out);
                        auto p = classify::posterior_predict(chain, X_test);
                        auto rep = classify::evaluate(p, test_raw.y, 2);
                        std::lock_guard<std::mutex> lock(mtx);
                        reports[i] = {ks[i], rep};
                    } catch (...) {
                        std::lock_guard<std::mutex> lock(mtx);
                        if (!error) error = std::current_exception();
                    }
                }
            };
            std::vector<std::thread> pool;
            for (int t = 0; t < std::min<int>(sel_jobs, int(ks.size())); ++t)
                pool.emplace_back(worker);
            for (auto& t : pool) t.join();
            if (error) std::rethrow_exception(error);

            std::ofstream metrics(sel_out + "/metrics.csv");
            metrics << "k,error,auc\n";
            for (auto& [k, rep] : reports)
                metrics << k << "," << rep.error_rate << "," << rep.auc << "\n";
            int chosen = classify::select_k(reports, 25);
            std::cout << "selected k = " << chosen << " (metrics in " << sel_out
                      << "/metrics.csv)\n";
        } else if (*pred) {
            json cfg = read_config(pred_run);
            if (pred_k < 0) pred_k = cfg.at("k").get<std::vector<int>>().front();
            PosteriorChain chain = data_io::load_chain(chain_path(pred_run, pred_k).string());
            Standardization t = transform_from_json(cfg.at("transform"));

            Matrix X;
            std::vector<int> y;
            if (!pred_label.empty() || pred_label_idx >= 0) {
                CsvSchema schema;
                schema.has_header = !pred_no_header;
                schema.label_column = pred_label;
                schema.label_index = pred_label_idx;
                LabeledDataset d = data_io::load_csv(pred_csv, schema);
                X = d.X;
                y = d.y;
            } else {
                X = read_matrix_csv(pred_csv, !pred_no_header);
            }
            auto result = classify::posterior_predict(chain, data_io::apply_transform(t, X));
            std::ofstream out(pred_out);
            out << "label";
            for (Eigen::Index c = 0; c < result.probs.cols(); ++c) out << ",p" << (c + 1);
            out << "\n" << std::setprecision(17);
            for (Eigen::Index i = 0; i < result.probs.rows(); ++i) {
                out << result.labels[size_t(i)];
                for (Eigen::Index c = 0; c < result.probs.cols(); ++c)
                    out << "," << result.probs(i, c);
                out << "\n";
            }
            std::cout << "wrote " << result.probs.rows() << " predictions to " << pred_out << "\n";
            if (!y.empty()) {
                auto rep = classify::evaluate(result, y, 2);
                std::cout << std::fixed << std::setprecision(4) << "error " << rep.error_rate;
                if (std::isfinite(rep.auc)) std::cout << ", AUC " << rep.auc;
                std::cout << "\n";
            }
        } else if (*est_cmd) {
            run_estimate(est_run, est_k);
        } else if (*rep_cmd) {
            fs::path p = fs::path(rep_run) / "report.txt";
            if (!fs::exists(p)) run_estimate(rep_run, rep_k);
            else {
                std::ifstream in(p);
                std::cout << in.rdbuf();
            }
        } else if (*base) {
            LabeledDataset full = base_data.load();
            SplitSpec split_spec;
            split_spec.test_fraction = base_frac;
            split_spec.stratified = true;
            split_spec.seed = base_seed;
            auto [train_raw, test_raw] = data_io::split(full, split_spec);
            LabeledDataset train = data_io::standardize(train_raw);
            LabeledDataset test = test_raw;
            test.X = data_io::apply_transform(train.transform, test_raw.X);

            KnnConfig knn;
            for (int k = 1; k <= 21; k += 2) knn.neighbor_grid.push_back(k);
            auto kr = baselines::knn_sweep(train, test, knn);
            auto gr = baselines::gmm_discriminant_fit_predict(train, test, {1, 2, 3});
            std::cout << std::fixed << std::setprecision(4)
                      << "knn: error " << kr.error << " (k = " << kr.best_param << ")\n"
                      << "gmm: error " << gr.error << " (components = " << gr.best_param << ")\n";
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
