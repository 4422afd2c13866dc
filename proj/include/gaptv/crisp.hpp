#pragma once

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

#include "gaptv/grid.hpp"
#include "gaptv/tv_solver.hpp"

namespace gaptv {

/// Group-fused penalty of CRISP: l2 norms of adjacent row and column
/// differences of the q x q prediction matrix (row-major beta).
inline double crisp_penalty(std::span<const double> beta, int q) {
    if (static_cast<int>(beta.size()) != q * q) {
        throw std::invalid_argument("crisp_penalty: size mismatch");
    }
    double total = 0.0;
    for (int i = 0; i + 1 < q; ++i) {
        double row_sq = 0.0, col_sq = 0.0;
        for (int j = 0; j < q; ++j) {
            const double dr = beta[static_cast<std::size_t>(i) * q + j] -
                              beta[static_cast<std::size_t>(i + 1) * q + j];
            const double dc = beta[static_cast<std::size_t>(j) * q + i] -
                              beta[static_cast<std::size_t>(j) * q + i + 1];
            row_sq += dr * dr;
            col_sq += dc * dc;
        }
        total += std::sqrt(row_sq) + std::sqrt(col_sq);
    }
    return total;
}

/// Prox of t * ||.||_2: shrink toward zero, exactly zero once ||v|| <= t.
inline std::vector<double> group_soft_threshold(std::span<const double> v,
                                                double t) {
    if (t < 0.0) throw std::invalid_argument("group_soft_threshold: t < 0");
    double norm_sq = 0.0;
    for (double x : v) norm_sq += x * x;
    const double norm = std::sqrt(norm_sq);
    std::vector<double> out(v.size(), 0.0);
    if (norm > t) {
        const double scale = 1.0 - t / norm;
        for (std::size_t i = 0; i < v.size(); ++i) out[i] = scale * v[i];
    }
    return out;
}

inline double crisp_objective(std::span<const double> beta,
                              const CellAggregates& agg, double lambda) {
    double loss = 0.0;
    for (int i = 0; i < agg.cells(); ++i) {
        if (agg.counts[i] == 0) continue;
        const double d = agg.means[i] - beta[static_cast<std::size_t>(i)];
        loss += 0.5 * static_cast<double>(agg.counts[i]) * d * d;
    }
    return loss + lambda * crisp_penalty(beta, agg.q);
}

/// ADMM for the weighted-least-squares CRISP reformulation: split row and
/// column difference vectors, group soft-threshold them, and solve the
/// resulting (diag(eta) + rho * grid Laplacian) system by sparse Cholesky.
/// The factorisation depends only on rho and is cached across a lambda path.
/// Gaussian loss only.
class CrispSolver {
public:
    explicit CrispSolver(const CellAggregates& agg) : agg_(agg), q_(agg.q) {
        if (agg.loss != LossKind::gaussian) {
            throw std::invalid_argument("CrispSolver: Gaussian loss only");
        }
        build_system();
    }

    TvSolution solve(double lambda, const SolverSettings& settings,
                     bool warm = false, std::vector<double>* trace = nullptr) {
        const std::size_t m = static_cast<std::size_t>(q_) * q_;
        const std::size_t nd = static_cast<std::size_t>(q_ - 1) * q_;

        if (lambda == 0.0 || q_ == 1) return separable_solution(lambda);

        if (!warm || beta_.size() != m) {
            beta_.assign(m, agg_.weighted_mean());
            vr_.assign(nd, 0.0);
            vc_.assign(nd, 0.0);
            ur_.assign(nd, 0.0);
            uc_.assign(nd, 0.0);
            rho_ = settings.admm_rho;
            refactor();
        }

        std::vector<double> best_beta = beta_;
        double best_obj = crisp_objective(beta_, agg_, lambda);
        if (trace) trace->clear();

        Eigen::VectorXd rhs(static_cast<Eigen::Index>(m));
        std::vector<double> dr(nd), dc(nd), hatr(nd), hatc(nd);

        TvSolution sol;
        int iter = 0;
        for (; iter < settings.max_iters; ++iter) {
            // beta step: (diag(eta) + rho L) beta = eta.*ytilde
            //            + rho (R^T (vr - ur) + C^T (vc - uc))
            rhs.setZero();
            for (int i = 0; i < agg_.cells(); ++i) {
                if (agg_.counts[i] > 0) {
                    rhs[i] = static_cast<double>(agg_.counts[i]) * agg_.means[i];
                }
            }
            for (int i = 0; i + 1 < q_; ++i) {
                for (int j = 0; j < q_; ++j) {
                    const std::size_t k = static_cast<std::size_t>(i) * q_ + j;
                    const double wr = rho_ * (vr_[k] - ur_[k]);
                    rhs[i * q_ + j] += wr;
                    rhs[(i + 1) * q_ + j] -= wr;
                    const double wc = rho_ * (vc_[k] - uc_[k]);
                    rhs[j * q_ + i] += wc;
                    rhs[j * q_ + i + 1] -= wc;
                }
            }
            const Eigen::VectorXd bvec = chol_.solve(rhs);
            for (std::size_t i = 0; i < m; ++i) beta_[i] = bvec[static_cast<Eigen::Index>(i)];

            // difference vectors; the prox and dual steps run on the
            // over-relaxed combination, residuals on the raw differences
            const double alpha = std::clamp(settings.over_relax, 1.0, 1.99);
            for (int i = 0; i + 1 < q_; ++i) {
                for (int j = 0; j < q_; ++j) {
                    const std::size_t k = static_cast<std::size_t>(i) * q_ + j;
                    dr[k] = beta_[static_cast<std::size_t>(i) * q_ + j] -
                            beta_[static_cast<std::size_t>(i + 1) * q_ + j];
                    dc[k] = beta_[static_cast<std::size_t>(j) * q_ + i] -
                            beta_[static_cast<std::size_t>(j) * q_ + i + 1];
                    hatr[k] = alpha * dr[k] + (1.0 - alpha) * vr_[k];
                    hatc[k] = alpha * dc[k] + (1.0 - alpha) * vc_[k];
                }
            }
            const double thresh = lambda / rho_;
            double dual_sq = 0.0, primal_sq = 0.0;
            for (int i = 0; i + 1 < q_; ++i) {
                const std::size_t off = static_cast<std::size_t>(i) * q_;
                dual_sq += prox_block(&hatr[off], &ur_[off], &vr_[off], q_, thresh);
                dual_sq += prox_block(&hatc[off], &uc_[off], &vc_[off], q_, thresh);
            }
            for (std::size_t k = 0; k < nd; ++k) {
                ur_[k] += hatr[k] - vr_[k];
                uc_[k] += hatc[k] - vc_[k];
                const double pr = dr[k] - vr_[k];
                const double pc = dc[k] - vc_[k];
                primal_sq += pr * pr + pc * pc;
            }
            const double primal = std::sqrt(primal_sq);
            const double dual = rho_ * std::sqrt(dual_sq);

            const double obj = crisp_objective(beta_, agg_, lambda);
            if (obj < best_obj) {
                best_obj = obj;
                best_beta = beta_;
            }
            if (trace) trace->push_back(best_obj);

            double beta_sq = 0.0;
            for (double b : beta_) beta_sq += b * b;
            const double eps = settings.tol * (1.0 + std::sqrt(beta_sq));
            if (primal <= eps && dual <= eps) {
                sol.converged = true;
                ++iter;
                break;
            }

            if (primal > 10.0 * dual && rho_ < 1e4) {
                rho_ = std::min(rho_ * 2.0, 1e4);
                for (std::size_t k = 0; k < nd; ++k) {
                    ur_[k] *= 0.5;
                    uc_[k] *= 0.5;
                }
                refactor();
            } else if (dual > 10.0 * primal && rho_ > 1e-4) {
                rho_ = std::max(rho_ * 0.5, 1e-4);
                for (std::size_t k = 0; k < nd; ++k) {
                    ur_[k] *= 2.0;
                    uc_[k] *= 2.0;
                }
                refactor();
            }
        }
        sol.iterations = iter;
        sol.beta = best_beta;
        sol.objective = best_obj;
        return sol;
    }

private:
    /// Group prox of one length-q difference block: v <- shrink(d + u), with
    /// the squared change of v returned for the dual residual.
    static double prox_block(const double* d, const double* u, double* v,
                             int q, double t) {
        double norm_sq = 0.0;
        for (int j = 0; j < q; ++j) {
            const double w = d[j] + u[j];
            norm_sq += w * w;
        }
        const double norm = std::sqrt(norm_sq);
        const double scale = norm > t ? 1.0 - t / norm : 0.0;
        double change_sq = 0.0;
        for (int j = 0; j < q; ++j) {
            const double nv = scale * (d[j] + u[j]);
            const double ch = nv - v[j];
            change_sq += ch * ch;
            v[j] = nv;
        }
        return change_sq;
    }

    void build_system() {
        const int m = agg_.cells();
        std::vector<Eigen::Triplet<double>> trip;
        trip.reserve(static_cast<std::size_t>(5) * m);
        laplacian_.resize(m, m);
        const GridGraph g = grid_edges(q_);
        std::vector<double> degree(static_cast<std::size_t>(m), 0.0);
        for (const auto& [r, s] : g.edges) {
            degree[static_cast<std::size_t>(r)] += 1.0;
            degree[static_cast<std::size_t>(s)] += 1.0;
            trip.emplace_back(r, s, -1.0);
            trip.emplace_back(s, r, -1.0);
        }
        for (int i = 0; i < m; ++i) trip.emplace_back(i, i, degree[static_cast<std::size_t>(i)]);
        laplacian_.setFromTriplets(trip.begin(), trip.end());
    }

    void refactor() {
        const int m = agg_.cells();
        Eigen::SparseMatrix<double> a = rho_ * laplacian_;
        for (int i = 0; i < m; ++i) {
            a.coeffRef(i, i) += static_cast<double>(agg_.counts[i]);
        }
        chol_.compute(a);
        if (chol_.info() != Eigen::Success) {
            throw std::runtime_error("CrispSolver: factorisation failed");
        }
    }

    TvSolution separable_solution(double lambda) const {
        const std::size_t m = static_cast<std::size_t>(agg_.cells());
        TvSolution sol;
        sol.beta.assign(m, agg_.weighted_mean());
        if (lambda == 0.0) {
            for (std::size_t i = 0; i < m; ++i) {
                if (agg_.counts[i] > 0) sol.beta[i] = agg_.means[i];
            }
        }
        sol.converged = true;
        sol.objective = crisp_objective(sol.beta, agg_, lambda);
        return sol;
    }

    const CellAggregates& agg_;
    int q_;
    Eigen::SparseMatrix<double> laplacian_;
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> chol_;
    std::vector<double> beta_, vr_, vc_, ur_, uc_;
    double rho_ = 1.0;
};

struct CrispProblem {
    const CellAggregates& aggregates;
    double lambda = 0.0;
};

inline TvSolution solve_crisp(const CrispProblem& prob,
                              const SolverSettings& settings,
                              std::vector<double>* trace = nullptr) {
    CrispSolver solver(prob.aggregates);
    return solver.solve(prob.lambda, settings, false, trace);
}

}  // namespace gaptv
