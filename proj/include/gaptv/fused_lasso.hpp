#pragma once

#include <algorithm>
#include <span>
#include <stdexcept>
#include <vector>

namespace gaptv {

/// Exact minimiser of
///   (1/2) sum_i w_i (b_i - a_i)^2 + lambda sum_i |b_i - b_{i+1}|
/// by Johnson-style dynamic programming over the piecewise-linear derivative
/// of the forward messages.
///
/// The derivative after absorbing site k is stored as knot positions x[l..r]
/// with per-knot (slope, intercept) deltas; (afirst, bfirst) are the
/// coefficients of the unbounded left piece and (alast, blast) the *negated*
/// coefficients of the unbounded right piece, which is what makes one
/// accumulation rule work for both scan directions. Each outer step clips the
/// derivative at -lambda/+lambda (recording the clip points tm/tp used by the
/// backward pass) and adds the next site's quadratic.
///
/// Zero-weight sites carry no loss; they are removed up front and afterwards
/// tied to the nearest kept site on the left (right for a leading run), which
/// is an exact minimiser of the full chain. All-zero weights are rejected.
class FusedLasso1D {
public:
    void solve(std::span<const double> targets, std::span<const double> weights,
               double lambda, std::span<double> out) {
        const std::size_t n = targets.size();
        if (weights.size() != n || out.size() != n) {
            throw std::invalid_argument("fused_lasso_1d: length mismatch");
        }
        if (n == 0) return;
        bool any_positive = false;
        bool all_positive = true;
        for (double w : weights) {
            if (w < 0.0) {
                throw std::invalid_argument("fused_lasso_1d: negative weight");
            }
            if (w > 0.0) any_positive = true;
            else all_positive = false;
        }
        if (!any_positive) {
            throw std::invalid_argument("fused_lasso_1d: all weights zero");
        }
        if (all_positive) {
            dp(targets.data(), weights.data(), static_cast<int>(n), lambda,
               out.data());
            return;
        }
        keep_.clear();
        ya_.clear();
        wa_.clear();
        for (std::size_t i = 0; i < n; ++i) {
            if (weights[i] > 0.0) {
                keep_.push_back(static_cast<int>(i));
                ya_.push_back(targets[i]);
                wa_.push_back(weights[i]);
            }
        }
        sub_.resize(keep_.size());
        dp(ya_.data(), wa_.data(), static_cast<int>(keep_.size()), lambda,
           sub_.data());
        std::size_t next = 0;
        double fill = sub_.front();  // leading zero-weight run ties rightward
        for (std::size_t i = 0; i < n; ++i) {
            if (next < keep_.size() &&
                static_cast<std::size_t>(keep_[next]) == i) {
                fill = sub_[next++];
            }
            out[i] = fill;
        }
    }

    /// Unit-weight convenience used by the grid solver's chain subproblems.
    void solve_unit(std::span<const double> targets, double lambda,
                    std::span<double> out) {
        unit_.assign(targets.size(), 1.0);
        solve(targets, unit_, lambda, out);
    }

private:
    void dp(const double* y, const double* w, int n, double lam, double* beta) {
        if (n == 1) {
            beta[0] = y[0];
            return;
        }
        if (lam == 0.0) {
            std::copy(y, y + n, beta);
            return;
        }
        const std::size_t un = static_cast<std::size_t>(n);
        x_.resize(2 * un);
        a_.resize(2 * un);
        b_.resize(2 * un);
        tm_.resize(un - 1);
        tp_.resize(un - 1);

        int l = n - 1;
        int r = n;
        tm_[0] = y[0] - lam / w[0];
        tp_[0] = y[0] + lam / w[0];
        x_[l] = tm_[0];
        x_[r] = tp_[0];
        a_[l] = w[0];
        b_[l] = -w[0] * y[0] + lam;
        a_[r] = -w[0];
        b_[r] = w[0] * y[0] + lam;
        double afirst = w[1];
        double bfirst = -lam - w[1] * y[1];
        double alast = -w[1];
        double blast = -lam + w[1] * y[1];

        for (int k = 1; k < n - 1; ++k) {
            // clip at -lambda from the left
            double alo = afirst, blo = bfirst;
            int lo = l;
            while (lo <= r && alo * x_[lo] + blo <= -lam) {
                alo += a_[lo];
                blo += b_[lo];
                ++lo;
            }
            tm_[k] = (-lam - blo) / alo;
            l = lo - 1;
            x_[l] = tm_[k];
            a_[l] = alo;
            b_[l] = blo + lam;

            // clip at +lambda from the right
            double ahi = alast, bhi = blast;
            int hi = r;
            while (hi >= l && -(ahi * x_[hi] + bhi) >= lam) {
                ahi += a_[hi];
                bhi += b_[hi];
                --hi;
            }
            tp_[k] = (lam + bhi) / (-ahi);
            r = hi + 1;
            x_[r] = tp_[k];
            a_[r] = ahi;
            b_[r] = bhi + lam;

            afirst = w[k + 1];
            bfirst = -lam - w[k + 1] * y[k + 1];
            alast = -w[k + 1];
            blast = -lam + w[k + 1] * y[k + 1];
        }

        // last coefficient sits at the zero of the final derivative
        double alo = afirst, blo = bfirst;
        int lo = l;
        while (lo <= r && alo * x_[lo] + blo <= 0.0) {
            alo += a_[lo];
            blo += b_[lo];
            ++lo;
        }
        beta[n - 1] = -blo / alo;
        for (int k = n - 2; k >= 0; --k) {
            if (beta[k + 1] > tp_[k]) {
                beta[k] = tp_[k];
            } else if (beta[k + 1] < tm_[k]) {
                beta[k] = tm_[k];
            } else {
                beta[k] = beta[k + 1];
            }
        }
    }

    std::vector<double> x_, a_, b_, tm_, tp_, unit_, ya_, wa_, sub_;
    std::vector<int> keep_;
};

inline std::vector<double> fused_lasso_1d_weighted(
    std::span<const double> targets, std::span<const double> weights,
    double lambda) {
    std::vector<double> out(targets.size());
    FusedLasso1D ws;
    ws.solve(targets, weights, lambda, out);
    return out;
}

}  // namespace gaptv
