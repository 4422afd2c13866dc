#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "gaptv/dataset.hpp"
#include "gaptv/digamma.hpp"
#include "gaptv/grid.hpp"

namespace gaptv {

enum class GapMode { literal_eq10, log_dispersion, per_cell_null };

inline const char* to_string(GapMode m) {
    switch (m) {
        case GapMode::literal_eq10: return "literal_eq10";
        case GapMode::log_dispersion: return "log_dispersion";
        default: return "per_cell_null";
    }
}

inline GapMode gap_mode_from_string(const std::string& s) {
    if (s == "literal_eq10") return GapMode::literal_eq10;
    if (s == "log_dispersion") return GapMode::log_dispersion;
    if (s == "per_cell_null") return GapMode::per_cell_null;
    throw std::invalid_argument("unknown gap mode: " + s);
}

struct GapScanEntry {
    int q = 0;
    double dispersion = 0.0;  // W_q
    double null_term = 0.0;
    double gap = 0.0;         // +inf sentinel when the score is undefined
};

using GapScan = std::vector<GapScanEntry>;

struct GapConfig {
    int q_min = 2;
    int q_max = 50;
    GapMode mode = GapMode::per_cell_null;
    LossKind loss = LossKind::gaussian;
};

/// Selection error carrying the full scan for diagnostics.
struct SelectionError : std::runtime_error {
    GapScan scan;
    explicit SelectionError(const std::string& what, GapScan s = {})
        : std::runtime_error(what), scan(std::move(s)) {}
};

/// W_q: sum over cells of (1/eta) sum_{i<j} (y_i - y_j)^2. Computed as the
/// within-cell sum of squared deviations (the identity
/// sum_{i<j}(y_i-y_j)^2 = eta * sum_i (y_i - mean)^2 makes each cell linear
/// time and keeps the value exact under shifts of y).
inline double pairwise_dispersion(std::span<const double> y,
                                  std::span<const int> cells, int n_cells) {
    if (y.size() != cells.size()) {
        throw std::invalid_argument("pairwise_dispersion: length mismatch");
    }
    std::vector<double> sum(static_cast<std::size_t>(n_cells), 0.0);
    std::vector<std::int64_t> cnt(static_cast<std::size_t>(n_cells), 0);
    for (std::size_t i = 0; i < y.size(); ++i) {
        sum[static_cast<std::size_t>(cells[i])] += y[i];
        cnt[static_cast<std::size_t>(cells[i])] += 1;
    }
    std::vector<double> mean(static_cast<std::size_t>(n_cells), 0.0);
    for (int k = 0; k < n_cells; ++k) {
        if (cnt[k] > 0) mean[k] = sum[k] / static_cast<double>(cnt[k]);
    }
    double total = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        const double d = y[i] - mean[static_cast<std::size_t>(cells[i])];
        total += d * d;
    }
    return total;
}

/// E[log chi^2_nu] = log 2 + psi(nu/2).
inline double gaussian_null_log_expect(double nu) {
    if (!(nu > 0.0)) {
        throw std::domain_error("gaussian_null_log_expect: nu must be > 0");
    }
    return std::log(2.0) + digamma(0.5 * nu);
}

namespace detail {
/// Taylor approximation of E[log Bin(m, r)] around the mean.
inline double binomial_null_from_pairs(double m, double r) {
    return std::log(r * m) - (1.0 - r) / (2.0 * r * m);
}
}  // namespace detail

/// E[log W_1] under the binomial reference W_1 ~ Bin((n^2-n)/2, 2p(1-p)).
inline double binomial_null_log_expect(std::int64_t n, double p) {
    if (n < 2) throw std::invalid_argument("binomial_null_log_expect: n >= 2");
    if (!(p > 0.0) || !(p < 1.0)) {
        throw std::domain_error(
            "binomial_null_log_expect: degenerate distribution (p in {0,1})");
    }
    const double m = 0.5 * (static_cast<double>(n) * static_cast<double>(n) -
                            static_cast<double>(n));
    const double r = 2.0 * p * (1.0 - p);
    return detail::binomial_null_from_pairs(m, r);
}

namespace detail {

struct GapInputs {
    double dispersion = 0.0;
    std::vector<std::int64_t> counts;   // occupancy profile of the q-grid
    std::int64_t n = 0;
    double pooled_rate = 0.0;           // binomial only
};

inline GapInputs gap_inputs(const Dataset& data, int q) {
    const QuantileGrid grid = build_grid(data, q);
    const std::size_t n = data.size();
    std::vector<double> y(n);
    std::vector<int> cells(n);
    std::int64_t successes = 0;
    for (std::size_t i = 0; i < n; ++i) {
        y[i] = data.points[i].y;
        cells[i] = assign_cell(data.points[i].x1, data.points[i].x2, grid);
        if (y[i] == 1.0) ++successes;
    }
    GapInputs in;
    in.n = static_cast<std::int64_t>(n);
    in.dispersion = pairwise_dispersion(y, cells, grid.cells());
    in.counts.assign(static_cast<std::size_t>(grid.cells()), 0);
    for (int c : cells) in.counts[static_cast<std::size_t>(c)] += 1;
    in.pooled_rate = static_cast<double>(successes) / static_cast<double>(n);
    return in;
}

inline GapScanEntry score_from_inputs(const GapInputs& in, int q,
                                      const GapConfig& cfg) {
    constexpr double inf = std::numeric_limits<double>::infinity();
    GapScanEntry e;
    e.q = q;
    e.dispersion = in.dispersion;
    const double n = static_cast<double>(in.n);

    // Null term per mode. nu (Gaussian) follows the paper's n^2/2 - n formula,
    // applied either to the full sample or cell-wise; the binomial reference
    // uses the pair count m with the same split.
    double null_term;
    bool null_ok = true;
    if (cfg.loss == LossKind::gaussian) {
        double nu;
        if (cfg.mode == GapMode::per_cell_null) {
            nu = 0.0;
            for (std::int64_t c : in.counts) {
                const double eta = static_cast<double>(c);
                nu += std::max(0.5 * eta * eta - eta, 0.0);
            }
        } else {
            nu = 0.5 * n * n - n;
        }
        null_ok = nu > 0.0;
        null_term = null_ok ? (cfg.mode == GapMode::literal_eq10
                                   ? digamma(0.5 * nu)
                                   : gaussian_null_log_expect(nu))
                            : inf;
    } else {
        const double p = in.pooled_rate;
        const double r = 2.0 * p * (1.0 - p);
        double m;
        if (cfg.mode == GapMode::per_cell_null) {
            m = 0.0;
            for (std::int64_t c : in.counts) {
                const double eta = static_cast<double>(c);
                m += 0.5 * (eta * eta - eta);
            }
        } else {
            m = 0.5 * (n * n - n);
        }
        null_ok = r > 0.0 && m > 0.0;
        null_term = null_ok ? binomial_null_from_pairs(m, r) : inf;
    }
    e.null_term = null_term;

    if (!null_ok) {
        e.gap = inf;
        return e;
    }
    if (cfg.mode == GapMode::literal_eq10) {
        e.gap = null_term - in.dispersion;
    } else {
        // log modes are undefined at zero dispersion; record a sentinel that
        // is never selected unless every candidate carries it
        e.gap = in.dispersion > 0.0 ? null_term - std::log(in.dispersion) : inf;
    }
    return e;
}

}  // namespace detail

inline GapScanEntry gap_score(const Dataset& data, int q,
                              const GapConfig& cfg) {
    if (q < 2 || static_cast<std::int64_t>(q) >
                     static_cast<std::int64_t>(data.size())) {
        throw std::invalid_argument("gap_score: q outside [2, n]");
    }
    return detail::score_from_inputs(detail::gap_inputs(data, q), q, cfg);
}

struct QSelection {
    int q = 0;
    GapScan scan;
    bool degenerate_constant = false;  // all-equal y, q_min returned
};

/// Scan candidates q in [q_min, min(q_max, n)] and return the gap minimiser;
/// ties break toward smaller q. All-constant responses fall back to q_min
/// with a warning flag instead of failing.
inline QSelection select_q(const Dataset& data, const GapConfig& cfg) {
    const std::int64_t n = static_cast<std::int64_t>(data.size());
    const int q_hi = static_cast<int>(
        std::min<std::int64_t>(cfg.q_max, n));
    if (cfg.q_min < 2 || cfg.q_min > cfg.q_max) {
        throw std::invalid_argument("select_q: invalid candidate range");
    }
    if (cfg.q_min > q_hi) {
        throw SelectionError("select_q: no feasible candidate q (need q <= n)");
    }
    QSelection sel;
    sel.scan.reserve(static_cast<std::size_t>(q_hi - cfg.q_min + 1));
    for (int q = cfg.q_min; q <= q_hi; ++q) {
        sel.scan.push_back(
            detail::score_from_inputs(detail::gap_inputs(data, q), q, cfg));
    }

    double y_lo = data.points.front().y, y_hi = y_lo;
    for (const DataPoint& p : data.points) {
        y_lo = std::min(y_lo, p.y);
        y_hi = std::max(y_hi, p.y);
    }
    if (y_lo == y_hi) {
        sel.q = cfg.q_min;
        sel.degenerate_constant = true;
        return sel;
    }

    int best_q = -1;
    double best_gap = std::numeric_limits<double>::infinity();
    for (const GapScanEntry& e : sel.scan) {
        if (std::isfinite(e.gap) && e.gap < best_gap) {
            best_gap = e.gap;
            best_q = e.q;
        }
    }
    if (best_q < 0) {
        throw SelectionError("select_q: every candidate gap is infinite",
                             sel.scan);
    }
    sel.q = best_q;
    return sel;
}

}  // namespace gaptv
