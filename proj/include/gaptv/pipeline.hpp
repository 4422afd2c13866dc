#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "gaptv/crisp.hpp"
#include "gaptv/dataset.hpp"
#include "gaptv/gap.hpp"
#include "gaptv/grid.hpp"
#include "gaptv/rng.hpp"
#include "gaptv/tv_solver.hpp"

namespace gaptv {

enum class FitMethod { gaptv, gapcrisp, crisp_fixed_q };

inline const char* to_string(FitMethod m) {
    switch (m) {
        case FitMethod::gaptv: return "gaptv";
        case FitMethod::gapcrisp: return "gapcrisp";
        default: return "crisp_fixed_q";
    }
}

inline FitMethod method_from_string(const std::string& s) {
    if (s == "gaptv") return FitMethod::gaptv;
    if (s == "gapcrisp") return FitMethod::gapcrisp;
    if (s == "crisp_fixed_q" || s == "crisp") return FitMethod::crisp_fixed_q;
    throw std::invalid_argument("unknown method: " + s);
}

struct FitConfig {
    GapConfig gap;
    int folds = 5;
    int n_lambda = 50;
    double lambda_min_ratio = 1e-4;
    double plateau_rel_tol = 1e-4;
    SolverSettings solver;
    FitMethod method = FitMethod::gaptv;
    std::uint64_t seed = 0;
    int crisp_q = 0;           // 0: default min(n, 100)
    int q_override = 0;        // 0: choose q by the gap statistic
    bool lambda_by_aic = false;  // pick lambda by AIC over the path instead of CV

    void validate() const {
        if (folds < 2) throw std::invalid_argument("config: folds must be >= 2");
        if (n_lambda < 2) {
            throw std::invalid_argument("config: n_lambda must be >= 2");
        }
        if (!(lambda_min_ratio > 0.0) || !(lambda_min_ratio < 1.0)) {
            throw std::invalid_argument("config: lambda_min_ratio in (0,1)");
        }
        if (!(plateau_rel_tol >= 0.0)) {
            throw std::invalid_argument("config: plateau_rel_tol >= 0");
        }
        if (!(solver.tol > 0.0)) {
            throw std::invalid_argument("config: solver tol must be > 0");
        }
    }
};

struct Model {
    FitMethod method = FitMethod::gaptv;
    LossKind loss = LossKind::gaussian;
    QuantileGrid grid;
    std::vector<double> beta;
    double lambda = 0.0;
    int plateau_count = 0;
    double aic = 0.0;
    GapScan gap_scan;
    std::vector<std::pair<double, double>> cv_table;  // (lambda, mean CV loss)
    bool converged = true;
    bool degenerate_constant = false;
    bool rss_floored = false;
};

/// Connected components of the grid after dropping edges whose endpoint
/// values differ by more than rel_tol * max(range(beta), 1e-12).
inline int count_plateaus(std::span<const double> beta, const GridGraph& graph,
                          double rel_tol) {
    const int m = graph.cells();
    if (static_cast<int>(beta.size()) != m) {
        throw std::invalid_argument("count_plateaus: size mismatch");
    }
    for (double b : beta) {
        if (!std::isfinite(b)) {
            throw std::invalid_argument("count_plateaus: non-finite beta");
        }
    }
    double lo = beta[0], hi = beta[0];
    for (double b : beta) {
        lo = std::min(lo, b);
        hi = std::max(hi, b);
    }
    const double tol = rel_tol * std::max(hi - lo, 1e-12);

    // adjacency over kept edges, then BFS labelling
    std::vector<int> head(static_cast<std::size_t>(m), -1);
    std::vector<int> next, to;
    next.reserve(2 * graph.edges.size());
    to.reserve(2 * graph.edges.size());
    auto add_arc = [&](int a, int b) {
        to.push_back(b);
        next.push_back(head[static_cast<std::size_t>(a)]);
        head[static_cast<std::size_t>(a)] = static_cast<int>(to.size()) - 1;
    };
    for (const auto& [r, s] : graph.edges) {
        if (std::abs(beta[static_cast<std::size_t>(r)] -
                     beta[static_cast<std::size_t>(s)]) <= tol) {
            add_arc(r, s);
            add_arc(s, r);
        }
    }
    std::vector<char> seen(static_cast<std::size_t>(m), 0);
    std::vector<int> stack;
    int components = 0;
    for (int i = 0; i < m; ++i) {
        if (seen[static_cast<std::size_t>(i)]) continue;
        ++components;
        stack.push_back(i);
        seen[static_cast<std::size_t>(i)] = 1;
        while (!stack.empty()) {
            const int u = stack.back();
            stack.pop_back();
            for (int e = head[static_cast<std::size_t>(u)]; e >= 0;
                 e = next[static_cast<std::size_t>(e)]) {
                const int v = to[static_cast<std::size_t>(e)];
                if (!seen[static_cast<std::size_t>(v)]) {
                    seen[static_cast<std::size_t>(v)] = 1;
                    stack.push_back(v);
                }
            }
        }
    }
    return components;
}

inline double predict_one(const Model& model, double x1, double x2) {
    const int cell = assign_cell(x1, x2, model.grid);
    const double b = model.beta[static_cast<std::size_t>(cell)];
    return model.loss == LossKind::binomial ? detail::sigmoid(b) : b;
}

inline std::vector<double> predict(const Model& model,
                                   std::span<const DataPoint> points) {
    std::vector<double> out;
    out.reserve(points.size());
    for (const DataPoint& p : points) out.push_back(predict_one(model, p.x1, p.x2));
    return out;
}

namespace detail {

/// One solver interface over the TV and CRISP backends so the lambda-path
/// code is written once.
class PathSolver {
public:
    PathSolver(const CellAggregates& agg, const GridGraph& graph,
               LossKind loss, FitMethod method)
        : method_(method) {
        if (method == FitMethod::gaptv) {
            tv_.emplace(agg, graph, loss);
        } else {
            crisp_.emplace(agg);
        }
    }

    TvSolution solve(double lambda, const SolverSettings& s, bool warm) {
        return method_ == FitMethod::gaptv ? tv_->solve(lambda, s, warm)
                                           : crisp_->solve(lambda, s, warm);
    }

private:
    FitMethod method_;
    std::optional<TvGridSolver> tv_;
    std::optional<CrispSolver> crisp_;
};

inline double heldout_loss(const Model& model,
                           std::span<const DataPoint> points) {
    double total = 0.0;
    for (const DataPoint& p : points) {
        const int cell = assign_cell(p.x1, p.x2, model.grid);
        const double b = model.beta[static_cast<std::size_t>(cell)];
        if (model.loss == LossKind::gaussian) {
            const double d = p.y - b;
            total += d * d;
        } else {
            total += log1p_exp(b) - p.y * b;  // per-point negative log-lik
        }
    }
    return total;
}

}  // namespace detail

/// Descending log-spaced lambda grid. lambda_max is found by doubling the
/// gradient-scale seed lambda_0 = max_i eta_i |ytilde_i - weighted mean|
/// until the solution is a single plateau (at most 10 doublings). Constant
/// data degenerates to the single-entry grid {0}.
inline std::vector<double> lambda_grid(const CellAggregates& agg,
                                       const GridGraph& graph, LossKind loss,
                                       int n_lambda, double lambda_min_ratio,
                                       FitMethod method = FitMethod::gaptv,
                                       const SolverSettings& solver = {},
                                       double plateau_rel_tol = 1e-4) {
    const double center = loss == LossKind::binomial ? agg.pooled_rate()
                                                     : agg.weighted_mean();
    double lambda0 = 0.0;
    for (int i = 0; i < agg.cells(); ++i) {
        if (agg.counts[i] == 0) continue;
        const double ytilde =
            loss == LossKind::binomial
                ? static_cast<double>(agg.successes[i]) /
                      static_cast<double>(agg.counts[i])
                : agg.means[i];
        lambda0 = std::max(lambda0, static_cast<double>(agg.counts[i]) *
                                        std::abs(ytilde - center));
    }
    if (lambda0 == 0.0) return {0.0};

    // the probes only have to count plateaus, so they run warm-started at a
    // loosened tolerance
    SolverSettings probe_settings = solver;
    probe_settings.tol = std::max(solver.tol, 1e-6);
    probe_settings.max_iters = std::min(solver.max_iters, 2500);
    detail::PathSolver probe(agg, graph, loss, method);
    double lambda_max = lambda0;
    for (int j = 0; j <= 10; ++j) {
        lambda_max = std::ldexp(lambda0, j);
        const TvSolution sol = probe.solve(lambda_max, probe_settings, j > 0);
        if (count_plateaus(sol.beta, graph, plateau_rel_tol) == 1) break;
    }

    std::vector<double> grid;
    grid.reserve(static_cast<std::size_t>(n_lambda));
    const double factor =
        std::pow(lambda_min_ratio, 1.0 / static_cast<double>(n_lambda - 1));
    double lam = lambda_max;
    for (int i = 0; i < n_lambda; ++i) {
        grid.push_back(lam);
        lam *= factor;
    }
    return grid;
}

struct CvResult {
    double lambda = 0.0;
    std::vector<std::pair<double, double>> table;
};

/// K-fold cross-validation over a descending lambda path. Quantile breaks are
/// frozen from the full fit; folds only rebuild cell aggregates. Solves are
/// warm-started along the path. Held-out loss is MSE (Gaussian) or mean
/// negative log-likelihood (binomial); ties prefer the larger lambda.
inline CvResult cv_lambda(const Dataset& data, const QuantileGrid& grid,
                          const std::vector<double>& lambdas,
                          const FitConfig& cfg) {
    const std::size_t n = data.size();
    const int folds = cfg.folds;
    if (folds < 2) throw std::invalid_argument("cv_lambda: folds must be >= 2");
    if (n < static_cast<std::size_t>(folds)) {
        throw std::invalid_argument("cv_lambda: fewer points than folds");
    }

    std::vector<int> cell_of(n);
    for (std::size_t i = 0; i < n; ++i) {
        cell_of[i] = assign_cell(data.points[i].x1, data.points[i].x2, grid);
    }

    auto make_folds = [&](std::uint64_t seed) {
        std::vector<int> fold(n);
        std::vector<std::size_t> order(n);
        for (std::size_t i = 0; i < n; ++i) order[i] = i;
        rng::Engine eng(rng::derive_seed(seed, 0x666f6c64 /*"fold"*/));
        rng::shuffle(order, eng);
        for (std::size_t pos = 0; pos < n; ++pos) {
            fold[order[pos]] = static_cast<int>(pos % static_cast<std::size_t>(folds));
        }
        return fold;
    };
    std::vector<int> fold = make_folds(cfg.seed);
    {
        std::vector<std::size_t> sizes(static_cast<std::size_t>(folds), 0);
        for (int f : fold) ++sizes[static_cast<std::size_t>(f)];
        if (std::find(sizes.begin(), sizes.end(), std::size_t{0}) != sizes.end()) {
            fold = make_folds(cfg.seed + 1);
            std::vector<std::size_t> sizes2(static_cast<std::size_t>(folds), 0);
            for (int f : fold) ++sizes2[static_cast<std::size_t>(f)];
            if (std::find(sizes2.begin(), sizes2.end(), std::size_t{0}) !=
                sizes2.end()) {
                throw std::runtime_error("cv_lambda: empty fold after reshuffle");
            }
        }
    }

    const GridGraph graph = grid_edges(grid.q);
    std::vector<double> total_loss(lambdas.size(), 0.0);

    for (int f = 0; f < folds; ++f) {
        // training aggregates on the frozen grid
        CellAggregates agg;
        agg.q = grid.q;
        agg.loss = data.loss;
        const int m = grid.cells();
        agg.counts.assign(static_cast<std::size_t>(m), 0);
        std::vector<double> sums(static_cast<std::size_t>(m), 0.0);
        if (data.loss == LossKind::binomial) {
            agg.successes.assign(static_cast<std::size_t>(m), 0);
        }
        std::vector<DataPoint> heldout;
        for (std::size_t i = 0; i < n; ++i) {
            if (fold[i] == f) {
                heldout.push_back(data.points[i]);
                continue;
            }
            const std::size_t c = static_cast<std::size_t>(cell_of[i]);
            agg.counts[c] += 1;
            sums[c] += data.points[i].y;
            if (data.loss == LossKind::binomial && data.points[i].y == 1.0) {
                agg.successes[c] += 1;
            }
        }
        agg.means.assign(static_cast<std::size_t>(m),
                         std::numeric_limits<double>::quiet_NaN());
        for (int i = 0; i < m; ++i) {
            if (agg.counts[i] > 0) {
                agg.means[static_cast<std::size_t>(i)] =
                    sums[static_cast<std::size_t>(i)] /
                    static_cast<double>(agg.counts[i]);
            }
        }

        // path solves feed held-out loss estimates only; cap their budget so
        // the slow high-lambda end of large grids cannot dominate
        SolverSettings path_settings = cfg.solver;
        path_settings.tol = std::max(cfg.solver.tol, 1e-6);
        path_settings.max_iters = std::min(cfg.solver.max_iters, 2500);
        detail::PathSolver solver(agg, graph, data.loss, cfg.method);
        Model fold_model;
        fold_model.loss = data.loss;
        fold_model.grid = grid;
        for (std::size_t li = 0; li < lambdas.size(); ++li) {
            const TvSolution sol =
                solver.solve(lambdas[li], path_settings, /*warm=*/li > 0);
            fold_model.beta = sol.beta;
            total_loss[li] += detail::heldout_loss(fold_model, heldout);
        }
    }

    CvResult result;
    result.table.reserve(lambdas.size());
    std::size_t best = 0;
    for (std::size_t li = 0; li < lambdas.size(); ++li) {
        const double mean_loss = total_loss[li] / static_cast<double>(n);
        result.table.emplace_back(lambdas[li], mean_loss);
        if (mean_loss < result.table[best].second) best = li;
    }
    result.lambda = result.table[best].first;
    return result;
}

/// AIC with the plateau count as the degrees-of-freedom surrogate:
/// n log(RSS/n) + 2k for Gaussian, 2 NLL + 2k for binomial, evaluated on the
/// fitting data. RSS/n is floored at 1e-12 (flagged on the model).
inline double aic(const Model& model, const Dataset& data) {
    const double n = static_cast<double>(data.size());
    const int k = model.plateau_count;
    if (model.loss == LossKind::gaussian) {
        double rss = 0.0;
        for (const DataPoint& p : data.points) {
            const int cell = assign_cell(p.x1, p.x2, model.grid);
            const double d = p.y - model.beta[static_cast<std::size_t>(cell)];
            rss += d * d;
        }
        const double mean_rss = std::max(rss / n, 1e-12);
        return n * std::log(mean_rss) + 2.0 * k;
    }
    double nll = 0.0;
    for (const DataPoint& p : data.points) {
        const int cell = assign_cell(p.x1, p.x2, model.grid);
        const double b = model.beta[static_cast<std::size_t>(cell)];
        nll += detail::log1p_exp(b) - p.y * b;
    }
    return 2.0 * nll + 2.0 * k;
}

/// End-to-end fit: q by the gap statistic (or fixed), lambda by CV (or AIC),
/// final solve on the full data, plateau count and AIC attached.
inline Model fit(const Dataset& data, const FitConfig& cfg) {
    data.validate();
    cfg.validate();
    const std::size_t n = data.size();
    if (n < static_cast<std::size_t>(cfg.folds)) {
        throw std::invalid_argument("fit: dataset smaller than fold count");
    }
    const bool crisp_method = cfg.method != FitMethod::gaptv;
    if (crisp_method && data.loss != LossKind::gaussian) {
        throw std::invalid_argument("fit: CRISP methods require Gaussian loss");
    }

    Model model;
    model.method = cfg.method;
    model.loss = data.loss;

    int q = 0;
    if (cfg.method == FitMethod::crisp_fixed_q) {
        q = cfg.crisp_q > 0
                ? cfg.crisp_q
                : static_cast<int>(std::min<std::size_t>(n, 100));
        q = std::max(q, 1);
    } else if (cfg.q_override > 0) {
        q = cfg.q_override;
    } else {
        GapConfig gap_cfg = cfg.gap;
        gap_cfg.loss = data.loss;
        QSelection sel = select_q(data, gap_cfg);
        q = sel.q;
        model.gap_scan = std::move(sel.scan);
        model.degenerate_constant = sel.degenerate_constant;
    }

    model.grid = build_grid(data, q);
    const CellAggregates agg = aggregate(data, model.grid);
    const GridGraph graph = grid_edges(q);

    const FitMethod solver_kind = crisp_method ? FitMethod::crisp_fixed_q
                                               : FitMethod::gaptv;
    const std::vector<double> lambdas =
        lambda_grid(agg, graph, data.loss, cfg.n_lambda, cfg.lambda_min_ratio,
                    solver_kind, cfg.solver, cfg.plateau_rel_tol);

    if (lambdas.size() == 1) {
        model.lambda = lambdas.front();  // constant data
        model.cv_table.emplace_back(lambdas.front(), 0.0);
        model.degenerate_constant = true;
    } else if (cfg.lambda_by_aic) {
        // path on the full data scored by AIC; ties toward larger lambda
        SolverSettings path_settings = cfg.solver;
        path_settings.tol = std::max(cfg.solver.tol, 1e-6);
        path_settings.max_iters = std::min(cfg.solver.max_iters, 2500);
        detail::PathSolver solver(agg, graph, data.loss, solver_kind);
        double best_score = std::numeric_limits<double>::infinity();
        for (std::size_t li = 0; li < lambdas.size(); ++li) {
            const TvSolution sol = solver.solve(lambdas[li], path_settings, li > 0);
            Model tmp;
            tmp.loss = data.loss;
            tmp.grid = model.grid;
            tmp.beta = sol.beta;
            tmp.plateau_count =
                count_plateaus(sol.beta, graph, cfg.plateau_rel_tol);
            const double score = aic(tmp, data);
            model.cv_table.emplace_back(lambdas[li], score);
            if (score < best_score) {
                best_score = score;
                model.lambda = lambdas[li];
            }
        }
    } else {
        FitConfig cv_cfg = cfg;
        cv_cfg.method = solver_kind;
        CvResult cv = cv_lambda(data, model.grid, lambdas, cv_cfg);
        model.lambda = cv.lambda;
        model.cv_table = std::move(cv.table);
    }

    detail::PathSolver solver(agg, graph, data.loss, solver_kind);
    const TvSolution sol = solver.solve(model.lambda, cfg.solver, false);
    model.beta = sol.beta;
    model.converged = sol.converged;
    model.plateau_count = count_plateaus(model.beta, graph, cfg.plateau_rel_tol);

    if (model.loss == LossKind::gaussian) {
        double rss = 0.0;
        for (const DataPoint& p : data.points) {
            const int cell = assign_cell(p.x1, p.x2, model.grid);
            const double d = p.y - model.beta[static_cast<std::size_t>(cell)];
            rss += d * d;
        }
        model.rss_floored = rss / static_cast<double>(n) < 1e-12;
    }
    model.aic = aic(model, data);
    return model;
}

}  // namespace gaptv
