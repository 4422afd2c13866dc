#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

#include "gaptv/fused_lasso.hpp"
#include "gaptv/grid.hpp"

namespace gaptv {

struct SolverSettings {
    double tol = 1e-8;
    int max_iters = 10000;
    double admm_rho = 1.0;       // initial value; adapted by residual balancing
    double over_relax = 1.7;     // ADMM relaxation, in [1, 2)
};

struct TvProblem {
    const CellAggregates& aggregates;
    const GridGraph& graph;
    double lambda = 0.0;
    LossKind loss = LossKind::gaussian;
};

struct TvSolution {
    std::vector<double> beta;
    int iterations = 0;
    bool converged = false;
    double objective = 0.0;
};

inline double tv_penalty(std::span<const double> beta, const GridGraph& graph) {
    if (static_cast<int>(beta.size()) != graph.cells()) {
        throw std::invalid_argument("tv_penalty: size mismatch");
    }
    double total = 0.0;
    for (const auto& [r, s] : graph.edges) {
        total += std::abs(beta[static_cast<std::size_t>(r)] -
                          beta[static_cast<std::size_t>(s)]);
    }
    return total;
}

namespace detail {
/// log(1 + exp(b)) without overflow.
inline double log1p_exp(double b) {
    return b > 0.0 ? b + std::log1p(std::exp(-b)) : std::log1p(std::exp(b));
}

inline double sigmoid(double b) {
    return b >= 0.0 ? 1.0 / (1.0 + std::exp(-b))
                    : std::exp(b) / (1.0 + std::exp(b));
}

inline double clamped_logit(double p, double bound) {
    if (p <= 0.0) return -bound;
    if (p >= 1.0) return bound;
    return std::clamp(std::log(p / (1.0 - p)), -bound, bound);
}
}  // namespace detail

/// Eq.-style objective: weighted squared error (Gaussian) or cell-wise
/// binomial deviance on the logit scale, plus lambda * TV. Empty cells
/// contribute no loss.
inline double objective(std::span<const double> beta, const TvProblem& prob) {
    const CellAggregates& agg = prob.aggregates;
    const int m = agg.cells();
    if (static_cast<int>(beta.size()) != m) {
        throw std::invalid_argument("objective: size mismatch");
    }
    double loss = 0.0;
    if (prob.loss == LossKind::gaussian) {
        for (int i = 0; i < m; ++i) {
            if (agg.counts[i] == 0) continue;
            const double d = agg.means[i] - beta[static_cast<std::size_t>(i)];
            loss += 0.5 * static_cast<double>(agg.counts[i]) * d * d;
        }
    } else {
        for (int i = 0; i < m; ++i) {
            if (agg.counts[i] == 0) continue;
            const double b = beta[static_cast<std::size_t>(i)];
            loss += static_cast<double>(agg.counts[i]) * detail::log1p_exp(b) -
                    static_cast<double>(agg.successes[i]) * b;
        }
    }
    return loss + prob.lambda * tv_penalty(beta, prob.graph);
}

namespace detail {

/// argmin_b eta*log(1+e^b) - s*b + (rho/2)(b-v)^2 by safeguarded Newton.
/// The gradient is strictly increasing, so a bracketed Newton with bisection
/// fallback cannot fail; non-convergence within the iteration cap is a bug.
inline double prox_binomial_cell(double eta, double s, double rho, double v) {
    auto grad = [&](double b) { return eta * sigmoid(b) - s + rho * (b - v); };
    double lo = v, hi = v, step = 1.0;
    while (grad(lo) > 0.0) {
        lo -= step;
        step *= 2.0;
        if (step > 1e300) throw std::runtime_error("prox_binomial: bracket");
    }
    step = 1.0;
    while (grad(hi) < 0.0) {
        hi += step;
        step *= 2.0;
        if (step > 1e300) throw std::runtime_error("prox_binomial: bracket");
    }
    double b = 0.5 * (lo + hi);
    for (int it = 0; it < 50; ++it) {
        const double g = grad(b);
        if (std::abs(g) <= 1e-12) return b;
        if (g > 0.0) hi = b;
        else lo = b;
        if (hi - lo <= 4.0 * std::numeric_limits<double>::epsilon() *
                           (std::abs(lo) + std::abs(hi) + 1.0)) {
            return b;  // interval at representation limit
        }
        const double sg = sigmoid(b);
        const double h = eta * sg * (1.0 - sg) + rho;
        double trial = b - g / h;
        if (!(trial > lo) || !(trial < hi)) trial = 0.5 * (lo + hi);
        b = trial;
    }
    throw std::runtime_error("prox_binomial: Newton did not converge");
}

}  // namespace detail

/// Per-cell proximal step of the loss: argmin_b loss_i(b) + (rho/2)(b-v_i)^2.
/// Empty cells return v_i unchanged.
inline std::vector<double> prox_loss(std::span<const double> v, double rho,
                                     const CellAggregates& agg, LossKind loss) {
    if (!(rho > 0.0)) throw std::invalid_argument("prox_loss: rho must be > 0");
    const int m = agg.cells();
    if (static_cast<int>(v.size()) != m) {
        throw std::invalid_argument("prox_loss: size mismatch");
    }
    std::vector<double> out(v.begin(), v.end());
    for (int i = 0; i < m; ++i) {
        const double eta = static_cast<double>(agg.counts[i]);
        if (eta == 0.0) continue;
        if (loss == LossKind::gaussian) {
            out[static_cast<std::size_t>(i)] =
                (eta * agg.means[i] + rho * v[static_cast<std::size_t>(i)]) /
                (eta + rho);
        } else {
            out[static_cast<std::size_t>(i)] = detail::prox_binomial_cell(
                eta, static_cast<double>(agg.successes[i]), rho,
                v[static_cast<std::size_t>(i)]);
        }
    }
    return out;
}

/// ADMM solver for the weighted grid-TV problem. The TV penalty is split into
/// row chains and column chains with consensus copies; each half-step is a
/// batch of exact 1D fused-lasso solves, and the loss step is the per-cell
/// prox. Keeps its state so a lambda path can warm-start, and reports the
/// best (lowest-objective) iterate seen, which makes the reported objective
/// sequence nonincreasing.
class TvGridSolver {
public:
    TvGridSolver(const CellAggregates& agg, const GridGraph& graph,
                 LossKind loss)
        : agg_(agg), graph_(graph), loss_(loss) {
        if (agg.q != graph.q) {
            throw std::invalid_argument("TvGridSolver: q mismatch");
        }
    }

    /// `warm` continues from the previous call's ADMM state.
    /// `trace`, when given, receives the incumbent objective per iteration.
    TvSolution solve(double lambda, const SolverSettings& settings,
                     bool warm = false, std::vector<double>* trace = nullptr) {
        const int q = agg_.q;
        const std::size_t m = static_cast<std::size_t>(q) * q;
        const TvProblem prob{agg_, graph_, lambda, loss_};

        if (lambda == 0.0) return separable_solution(prob);

        if (!warm || beta_.size() != m) {
            beta_.assign(m, initial_value());
            zr_ = beta_;
            zc_ = beta_;
            ur_.assign(m, 0.0);
            uc_.assign(m, 0.0);
            rho_ = settings.admm_rho;
        }
        hatr_.resize(m);
        hatc_.resize(m);

        std::vector<double> v(m), col(static_cast<std::size_t>(q)),
            best_beta = beta_;
        double best_obj = objective(beta_, prob);
        if (trace) trace->clear();

        TvSolution sol;
        int iter = 0;
        for (; iter < settings.max_iters; ++iter) {
            // loss prox; the two consensus quadratics collapse into one with
            // weight 2*rho
            for (std::size_t i = 0; i < m; ++i) {
                v[i] = 0.5 * (zr_[i] - ur_[i] + zc_[i] - uc_[i]);
            }
            beta_ = prox_loss(v, 2.0 * rho_, agg_, loss_);

            // chain proxes on the over-relaxed consensus inputs
            const double alpha = std::clamp(settings.over_relax, 1.0, 1.99);
            const double chain_lam = lambda / rho_;
            double dual_sq = 0.0;
            for (int r = 0; r < q; ++r) {
                const std::size_t off = static_cast<std::size_t>(r) * q;
                for (int c = 0; c < q; ++c) {
                    hatr_[off + c] =
                        alpha * beta_[off + c] + (1.0 - alpha) * zr_[off + c];
                    v[off + c] = hatr_[off + c] + ur_[off + c];
                }
                const std::span<const double> tgt(&v[off],
                                                  static_cast<std::size_t>(q));
                chain_out_.resize(static_cast<std::size_t>(q));
                chain_.solve_unit(tgt, chain_lam, chain_out_);
                for (int c = 0; c < q; ++c) {
                    const double d = chain_out_[static_cast<std::size_t>(c)] -
                                     zr_[off + c];
                    dual_sq += d * d;
                    zr_[off + c] = chain_out_[static_cast<std::size_t>(c)];
                }
            }
            for (int c = 0; c < q; ++c) {
                for (int r = 0; r < q; ++r) {
                    const std::size_t i = static_cast<std::size_t>(r) * q + c;
                    hatc_[i] = alpha * beta_[i] + (1.0 - alpha) * zc_[i];
                    col[static_cast<std::size_t>(r)] = hatc_[i] + uc_[i];
                }
                chain_out_.resize(static_cast<std::size_t>(q));
                chain_.solve_unit(col, chain_lam, chain_out_);
                for (int r = 0; r < q; ++r) {
                    const std::size_t i = static_cast<std::size_t>(r) * q + c;
                    const double d = chain_out_[static_cast<std::size_t>(r)] -
                                     zc_[i];
                    dual_sq += d * d;
                    zc_[i] = chain_out_[static_cast<std::size_t>(r)];
                }
            }

            // dual ascent on the relaxed iterates; residuals use the raw ones
            double primal_sq = 0.0, beta_sq = 0.0;
            for (std::size_t i = 0; i < m; ++i) {
                ur_[i] += hatr_[i] - zr_[i];
                uc_[i] += hatc_[i] - zc_[i];
                const double rr = beta_[i] - zr_[i];
                const double rc = beta_[i] - zc_[i];
                primal_sq += rr * rr + rc * rc;
                beta_sq += beta_[i] * beta_[i];
            }
            const double primal = std::sqrt(primal_sq);
            const double dual = rho_ * std::sqrt(dual_sq);

            const double obj = objective(beta_, prob);
            if (obj < best_obj) {
                best_obj = obj;
                best_beta = beta_;
            }
            if (trace) trace->push_back(best_obj);

            const double eps = settings.tol * (1.0 + std::sqrt(beta_sq));
            if (primal <= eps && dual <= eps) {
                sol.converged = true;
                ++iter;
                break;
            }

            // residual balancing keeps the two residuals within a decade
            if (primal > 10.0 * dual && rho_ < 1e4) {
                rho_ = std::min(rho_ * 2.0, 1e4);
                for (std::size_t i = 0; i < m; ++i) {
                    ur_[i] *= 0.5;
                    uc_[i] *= 0.5;
                }
            } else if (dual > 10.0 * primal && rho_ > 1e-4) {
                rho_ = std::max(rho_ * 0.5, 1e-4);
                for (std::size_t i = 0; i < m; ++i) {
                    ur_[i] *= 2.0;
                    uc_[i] *= 2.0;
                }
            }
        }
        sol.iterations = iter;
        sol.beta = best_beta;
        sol.objective = best_obj;
        return sol;
    }

private:
    double initial_value() const {
        if (loss_ == LossKind::gaussian) return agg_.weighted_mean();
        return detail::clamped_logit(agg_.pooled_rate(), 10.0);
    }

    /// lambda = 0: the problem separates; empty cells take the
    /// initialisation value. Binomial cell optima are clamped logits, exact
    /// to machine precision.
    TvSolution separable_solution(const TvProblem& prob) const {
        const std::size_t m = static_cast<std::size_t>(agg_.cells());
        TvSolution sol;
        sol.beta.assign(m, initial_value());
        for (std::size_t i = 0; i < m; ++i) {
            if (agg_.counts[i] == 0) continue;
            if (loss_ == LossKind::gaussian) {
                sol.beta[i] = agg_.means[i];
            } else {
                sol.beta[i] = detail::clamped_logit(
                    static_cast<double>(agg_.successes[i]) /
                        static_cast<double>(agg_.counts[i]),
                    30.0);
            }
        }
        sol.converged = true;
        sol.objective = objective(sol.beta, prob);
        return sol;
    }

    const CellAggregates& agg_;
    const GridGraph& graph_;
    LossKind loss_;
    FusedLasso1D chain_;
    std::vector<double> beta_, zr_, zc_, ur_, uc_, chain_out_, hatr_, hatc_;
    double rho_ = 1.0;
};

inline TvSolution solve_tv_grid(const TvProblem& prob,
                                const SolverSettings& settings,
                                std::vector<double>* trace = nullptr) {
    TvGridSolver solver(prob.aggregates, prob.graph, prob.loss);
    return solver.solve(prob.lambda, settings, false, trace);
}

}  // namespace gaptv
