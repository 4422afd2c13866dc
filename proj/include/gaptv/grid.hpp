#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "gaptv/dataset.hpp"

namespace gaptv {

/// A q x q quantile partition of the feature plane. breaks hold the q-1
/// marginal cut points per axis; bins are left-closed/right-open, so a point
/// equal to a break lands in the upper bin, and out-of-range points clamp to
/// the edge bins.
struct QuantileGrid {
    int q = 0;
    std::vector<double> breaks_x1;
    std::vector<double> breaks_x2;

    int cells() const { return q * q; }
};

/// Marginal quantile breaks at levels j/q, j = 1..q-1. When j*n/q is an
/// integer the break is the midpoint of the two straddling order statistics,
/// otherwise the ceil(j*n/q)-th order statistic; this keeps bins balanced to
/// floor/ceil(n/q) for distinct values.
inline std::vector<double> compute_breaks_sorted(
    const std::vector<double>& sorted, int q) {
    if (sorted.empty()) throw std::invalid_argument("compute_breaks: no values");
    if (q < 2) throw std::invalid_argument("compute_breaks: q must be >= 2");
    const std::int64_t n = static_cast<std::int64_t>(sorted.size());
    std::vector<double> breaks;
    breaks.reserve(static_cast<std::size_t>(q) - 1);
    for (std::int64_t j = 1; j < q; ++j) {
        const std::int64_t jn = j * n;
        if (jn % q == 0) {
            const std::int64_t k = jn / q;  // 1-based order statistic
            if (k >= n) {
                breaks.push_back(sorted.back());
            } else {
                breaks.push_back(0.5 * (sorted[static_cast<std::size_t>(k - 1)] +
                                        sorted[static_cast<std::size_t>(k)]));
            }
        } else {
            const std::int64_t k = jn / q + 1;  // ceil(j*n/q)
            breaks.push_back(sorted[static_cast<std::size_t>(k - 1)]);
        }
    }
    return breaks;
}

inline std::vector<double> compute_breaks(std::vector<double> values, int q) {
    std::sort(values.begin(), values.end());
    return compute_breaks_sorted(values, q);
}

/// Bin index of x among q bins cut at `breaks`: the number of breaks <= x.
inline int marginal_bin(double x, const std::vector<double>& breaks) {
    return static_cast<int>(
        std::upper_bound(breaks.begin(), breaks.end(), x) - breaks.begin());
}

/// Row-major cell index: rows follow x1 bins, columns follow x2 bins.
/// Total over all finite inputs; non-finite coordinates are rejected.
inline int assign_cell(double x1, double x2, const QuantileGrid& grid) {
    if (!std::isfinite(x1) || !std::isfinite(x2)) {
        throw std::invalid_argument("assign_cell: non-finite coordinate");
    }
    const int row = marginal_bin(x1, grid.breaks_x1);
    const int col = marginal_bin(x2, grid.breaks_x2);
    return row * grid.q + col;
}

inline QuantileGrid build_grid(const Dataset& data, int q) {
    std::vector<double> v1, v2;
    v1.reserve(data.size());
    v2.reserve(data.size());
    for (const DataPoint& p : data.points) {
        v1.push_back(p.x1);
        v2.push_back(p.x2);
    }
    QuantileGrid grid;
    grid.q = q;
    grid.breaks_x1 = compute_breaks(std::move(v1), q);
    grid.breaks_x2 = compute_breaks(std::move(v2), q);
    return grid;
}

/// Per-cell sufficient statistics. Empty cells keep count 0 and a NaN mean so
/// that accidental use without the count guard surfaces immediately.
struct CellAggregates {
    int q = 0;
    std::vector<std::int64_t> counts;     // eta
    std::vector<double> means;            // y-tilde, NaN where count == 0
    std::vector<std::int64_t> successes;  // binomial only, else empty
    LossKind loss = LossKind::gaussian;

    int cells() const { return q * q; }
    std::int64_t total() const {
        std::int64_t t = 0;
        for (std::int64_t c : counts) t += c;
        return t;
    }
    /// Global weighted mean of cell means (= plain mean of y).
    double weighted_mean() const {
        double num = 0.0;
        std::int64_t den = 0;
        for (int i = 0; i < cells(); ++i) {
            if (counts[i] > 0) {
                num += static_cast<double>(counts[i]) * means[i];
                den += counts[i];
            }
        }
        return den > 0 ? num / static_cast<double>(den) : 0.0;
    }
    /// Pooled success rate (binomial).
    double pooled_rate() const {
        std::int64_t s = 0, t = 0;
        for (int i = 0; i < cells(); ++i) {
            s += successes[i];
            t += counts[i];
        }
        return t > 0 ? static_cast<double>(s) / static_cast<double>(t) : 0.0;
    }
};

inline CellAggregates aggregate(const Dataset& data, const QuantileGrid& grid) {
    CellAggregates agg;
    agg.q = grid.q;
    agg.loss = data.loss;
    const int m = grid.cells();
    agg.counts.assign(m, 0);
    std::vector<double> sums(m, 0.0);
    if (data.loss == LossKind::binomial) agg.successes.assign(m, 0);
    for (const DataPoint& p : data.points) {
        const int c = assign_cell(p.x1, p.x2, grid);
        agg.counts[c] += 1;
        sums[c] += p.y;
        if (data.loss == LossKind::binomial && p.y == 1.0) {
            agg.successes[c] += 1;
        }
    }
    agg.means.assign(m, std::numeric_limits<double>::quiet_NaN());
    for (int i = 0; i < m; ++i) {
        if (agg.counts[i] > 0) {
            agg.means[i] = sums[i] / static_cast<double>(agg.counts[i]);
        }
    }
    return agg;
}

/// 4-neighbour adjacency of the q x q grid: 2q(q-1) edges, each stored once
/// as (smaller index, larger index).
struct GridGraph {
    int q = 0;
    std::vector<std::pair<int, int>> edges;

    int cells() const { return q * q; }
};

inline GridGraph grid_edges(int q) {
    if (q < 1) throw std::invalid_argument("grid_edges: q must be >= 1");
    GridGraph g;
    g.q = q;
    g.edges.reserve(static_cast<std::size_t>(2) * q * (q - 1));
    for (int r = 0; r < q; ++r) {
        for (int c = 0; c < q; ++c) {
            const int idx = r * q + c;
            if (c + 1 < q) g.edges.emplace_back(idx, idx + 1);
            if (r + 1 < q) g.edges.emplace_back(idx, idx + q);
        }
    }
    return g;
}

}  // namespace gaptv
