#pragma once

#include <algorithm>
#include <array>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <future>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "gaptv/io.hpp"
#include "gaptv/pipeline.hpp"
#include "gaptv/rng.hpp"

namespace gaptv {

inline constexpr int kWorldSize = 100;
inline constexpr int kPlateauCells = 1000;
inline constexpr std::array<double, 6> kPlateauMeans{-5.0, -3.0, -2.0,
                                                     2.0, 3.0, 5.0};

/// 100 x 100 ground-truth grid: background mean zero plus six disjoint
/// 4-connected plateaus of 1000 cells each.
struct PlateauWorld {
    std::vector<double> truth;                    // row-major, 10000 cells
    std::array<std::vector<int>, 6> plateau_cells;

    double cell_truth(int row, int col) const {
        return truth[static_cast<std::size_t>(row) * kWorldSize + col];
    }
};

namespace detail {

/// Grow one 1000-cell region by a random walk over free cells: step
/// uniformly among in-grid free 4-neighbours, collect unvisited cells, and
/// restart from a uniformly random visited cell when the walker has no
/// unvisited neighbour left.
inline bool grow_plateau(const std::vector<char>& blocked, rng::Engine& eng,
                         std::vector<int>& out_cells) {
    constexpr int n = kWorldSize * kWorldSize;
    int start = -1;
    {
        std::vector<int> free_cells;
        free_cells.reserve(static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i) {
            if (!blocked[static_cast<std::size_t>(i)]) free_cells.push_back(i);
        }
        if (free_cells.empty()) return false;
        start = free_cells[rng::uniform_below(eng, free_cells.size())];
    }

    // the walk cannot finish inside a free pocket smaller than the plateau
    {
        std::vector<char> seen(static_cast<std::size_t>(n), 0);
        std::vector<int> stack{start};
        seen[static_cast<std::size_t>(start)] = 1;
        int reach = 0;
        while (!stack.empty() && reach < kPlateauCells) {
            const int u = stack.back();
            stack.pop_back();
            ++reach;
            const int r = u / kWorldSize, c = u % kWorldSize;
            const std::array<int, 4> nb{r > 0 ? u - kWorldSize : -1,
                                        r + 1 < kWorldSize ? u + kWorldSize : -1,
                                        c > 0 ? u - 1 : -1,
                                        c + 1 < kWorldSize ? u + 1 : -1};
            for (int v : nb) {
                if (v >= 0 && !blocked[static_cast<std::size_t>(v)] &&
                    !seen[static_cast<std::size_t>(v)]) {
                    seen[static_cast<std::size_t>(v)] = 1;
                    stack.push_back(v);
                }
            }
        }
        if (reach < kPlateauCells) return false;
    }

    std::vector<char> visited(static_cast<std::size_t>(n), 0);
    out_cells.clear();
    out_cells.push_back(start);
    visited[static_cast<std::size_t>(start)] = 1;
    int current = start;
    std::uint64_t steps = 0;
    while (static_cast<int>(out_cells.size()) < kPlateauCells) {
        if (++steps > 50'000'000ULL) return false;  // unreachable in practice
        const int r = current / kWorldSize, c = current % kWorldSize;
        int nbrs[4];
        int n_nbrs = 0;
        bool has_unvisited = false;
        auto consider = [&](int v) {
            if (v >= 0 && !blocked[static_cast<std::size_t>(v)]) {
                nbrs[n_nbrs++] = v;
                if (!visited[static_cast<std::size_t>(v)]) has_unvisited = true;
            }
        };
        consider(r > 0 ? current - kWorldSize : -1);
        consider(r + 1 < kWorldSize ? current + kWorldSize : -1);
        consider(c > 0 ? current - 1 : -1);
        consider(c + 1 < kWorldSize ? current + 1 : -1);
        if (!has_unvisited) {
            current = out_cells[rng::uniform_below(eng, out_cells.size())];
            continue;
        }
        current = nbrs[rng::uniform_below(eng, static_cast<std::uint64_t>(n_nbrs))];
        if (!visited[static_cast<std::size_t>(current)]) {
            visited[static_cast<std::size_t>(current)] = 1;
            out_cells.push_back(current);
        }
    }
    return true;
}

}  // namespace detail

inline PlateauWorld gen_plateau_world(std::uint64_t seed) {
    constexpr int n = kWorldSize * kWorldSize;
    PlateauWorld world;
    world.truth.assign(static_cast<std::size_t>(n), 0.0);
    std::vector<char> blocked(static_cast<std::size_t>(n), 0);
    rng::Engine eng(rng::derive_seed(seed, 0x776f726c64 /*"world"*/));
    for (std::size_t p = 0; p < kPlateauMeans.size(); ++p) {
        bool placed = false;
        for (int attempt = 0; attempt < 100 && !placed; ++attempt) {
            placed = detail::grow_plateau(blocked, eng, world.plateau_cells[p]);
        }
        if (!placed) {
            throw std::runtime_error("gen_plateau_world: placement failed");
        }
        for (int cell : world.plateau_cells[p]) {
            blocked[static_cast<std::size_t>(cell)] = 1;
            world.truth[static_cast<std::size_t>(cell)] = kPlateauMeans[p];
        }
    }
    return world;
}

/// n cells drawn uniformly with replacement; coordinates are cell centres and
/// responses get N(0, noise_sd^2) noise on top of the cell truth.
inline Dataset sample_observations(const PlateauWorld& world, int n,
                                   double noise_sd, std::uint64_t seed) {
    if (n < 1) throw std::invalid_argument("sample_observations: n >= 1");
    rng::Engine eng(rng::derive_seed(seed, 0x73616d706c65 /*"sample"*/));
    Dataset data;
    data.points.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        const int cell = static_cast<int>(
            rng::uniform_below(eng, kWorldSize * kWorldSize));
        const int r = cell / kWorldSize, c = cell % kWorldSize;
        DataPoint p;
        p.x1 = r + 0.5;
        p.x2 = c + 0.5;
        p.y = world.truth[static_cast<std::size_t>(cell)] +
              noise_sd * rng::normal(eng);
        data.points.push_back(p);
    }
    return data;
}

enum class BenchMethod { gaptv, gapcrisp, crisp, constant };

inline const char* to_string(BenchMethod m) {
    switch (m) {
        case BenchMethod::gaptv: return "gaptv";
        case BenchMethod::gapcrisp: return "gapcrisp";
        case BenchMethod::crisp: return "crisp";
        default: return "constant";
    }
}

struct BenchRow {
    std::string method;
    int n = 0;
    int trial = 0;
    int q = 0;
    double lambda = 0.0;
    double rmse = 0.0;      // against the true grid, all 10000 cells
    double max_err = 0.0;
    int plateaus = 0;
    double aic = 0.0;
    double seconds = 0.0;
    double rmse_insample = 0.0;  // JSON lines only
    std::string error;           // nonempty rows are excluded from the CSV
};

struct BenchOptions {
    double noise_sd = 1.0;
    bool measure_time = true;  // off: deterministic 0.0 in the seconds column
    int jobs = 1;
    FitConfig base_config;     // gap range, folds, solver settings, ...
};

namespace detail {

inline std::vector<DataPoint> world_cell_centers() {
    std::vector<DataPoint> pts;
    pts.reserve(kWorldSize * kWorldSize);
    for (int r = 0; r < kWorldSize; ++r) {
        for (int c = 0; c < kWorldSize; ++c) {
            pts.push_back({r + 0.5, c + 0.5, 0.0});
        }
    }
    return pts;
}

inline void truth_metrics(const Model& model, const PlateauWorld& world,
                          BenchRow& row) {
    const std::vector<DataPoint> centers = world_cell_centers();
    const std::vector<double> pred = predict(model, centers);
    double sq = 0.0, mx = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double e = std::abs(pred[i] - world.truth[i]);
        sq += e * e;
        mx = std::max(mx, e);
    }
    row.rmse = std::sqrt(sq / static_cast<double>(pred.size()));
    row.max_err = mx;
}

inline BenchRow run_single(BenchMethod method, int n, int trial,
                           std::uint64_t base_seed, const BenchOptions& opts) {
    BenchRow row;
    row.method = to_string(method);
    row.n = n;
    row.trial = trial;
    const std::uint64_t seed = rng::derive_seed(
        base_seed, static_cast<std::uint64_t>(trial),
        static_cast<std::uint64_t>(n), static_cast<std::uint64_t>(method) + 1);
    const auto t0 = std::chrono::steady_clock::now();
    try {
        const PlateauWorld world = gen_plateau_world(rng::derive_seed(seed, 1));
        const Dataset data =
            sample_observations(world, n, opts.noise_sd, rng::derive_seed(seed, 2));

        Model model;
        if (method == BenchMethod::constant) {
            // fused-constant baseline: the lambda -> inf endpoint
            double mean = 0.0;
            for (const DataPoint& p : data.points) mean += p.y;
            mean /= static_cast<double>(data.size());
            model.loss = LossKind::gaussian;
            model.grid = build_grid(data, 2);
            model.beta.assign(4, mean);
            model.plateau_count = 1;
            model.lambda = std::numeric_limits<double>::infinity();
            model.aic = aic(model, data);
            row.q = 1;
        } else {
            FitConfig cfg = opts.base_config;
            cfg.seed = rng::derive_seed(seed, 3);
            cfg.method = method == BenchMethod::gaptv ? FitMethod::gaptv
                         : method == BenchMethod::gapcrisp
                             ? FitMethod::gapcrisp
                             : FitMethod::crisp_fixed_q;
            model = fit(data, cfg);
            row.q = model.grid.q;
        }
        row.lambda = model.lambda;
        row.plateaus = model.plateau_count;
        row.aic = model.aic;
        truth_metrics(model, world, row);
        double sq = 0.0;
        const std::vector<double> in_pred = predict(model, data.points);
        for (std::size_t i = 0; i < data.size(); ++i) {
            const double e = data.points[i].y - in_pred[i];
            sq += e * e;
        }
        row.rmse_insample = std::sqrt(sq / static_cast<double>(data.size()));
    } catch (const std::exception& e) {
        row.error = e.what();
    }
    const auto t1 = std::chrono::steady_clock::now();
    row.seconds = opts.measure_time
                      ? std::chrono::duration<double>(t1 - t0).count()
                      : 0.0;
    return row;
}

}  // namespace detail

/// Full benchmark sweep. Each (trial, n, method) task draws an independent
/// derived seed, so results do not depend on method ordering or on the jobs
/// count; failed fits carry an error note and are skipped by the CSV writer.
inline std::vector<BenchRow> run_benchmark(const std::vector<BenchMethod>& methods,
                                           const std::vector<int>& n_values,
                                           int trials, std::uint64_t seed,
                                           const BenchOptions& opts = {}) {
    if (trials < 1) throw std::invalid_argument("run_benchmark: trials >= 1");
    struct Task {
        BenchMethod method;
        int n;
        int trial;
    };
    std::vector<Task> tasks;
    for (int trial = 0; trial < trials; ++trial) {
        for (int n : n_values) {
            for (BenchMethod m : methods) tasks.push_back({m, n, trial});
        }
    }
    std::vector<BenchRow> rows(tasks.size());
    const int jobs = std::max(1, opts.jobs);
    if (jobs == 1) {
        for (std::size_t i = 0; i < tasks.size(); ++i) {
            rows[i] = detail::run_single(tasks[i].method, tasks[i].n,
                                         tasks[i].trial, seed, opts);
        }
    } else {
        std::atomic<std::size_t> next{0};
        auto worker = [&]() {
            for (;;) {
                const std::size_t i = next.fetch_add(1);
                if (i >= tasks.size()) return;
                rows[i] = detail::run_single(tasks[i].method, tasks[i].n,
                                             tasks[i].trial, seed, opts);
            }
        };
        std::vector<std::future<void>> pool;
        for (int j = 0; j < jobs; ++j) {
            pool.push_back(std::async(std::launch::async, worker));
        }
        for (auto& f : pool) f.get();
    }
    return rows;
}

inline constexpr const char* kBenchCsvHeader =
    "method,n,trial,q,lambda,rmse,max_err,plateaus,aic,seconds";

inline std::string benchmark_csv(const std::vector<BenchRow>& rows) {
    std::string out = std::string(kBenchCsvHeader) + "\n";
    char buf[32];
    for (const BenchRow& r : rows) {
        if (!r.error.empty()) continue;
        std::snprintf(buf, sizeof(buf), "%.3f", r.seconds);
        out += r.method + ',' + std::to_string(r.n) + ',' +
               std::to_string(r.trial) + ',' + std::to_string(r.q) + ',' +
               format_double(r.lambda) + ',' + format_double(r.rmse) + ',' +
               format_double(r.max_err) + ',' + std::to_string(r.plateaus) +
               ',' + format_double(r.aic) + ',' + buf + '\n';
    }
    return out;
}

inline std::string benchmark_jsonl(const std::vector<BenchRow>& rows) {
    std::string out;
    for (const BenchRow& r : rows) {
        out += "{\"method\": \"" + r.method + "\", \"n\": " + std::to_string(r.n) +
               ", \"trial\": " + std::to_string(r.trial);
        if (r.error.empty()) {
            out += ", \"q\": " + std::to_string(r.q) +
                   ", \"lambda\": " + format_double(r.lambda) +
                   ", \"rmse\": " + format_double(r.rmse) +
                   ", \"max_err\": " + format_double(r.max_err) +
                   ", \"plateaus\": " + std::to_string(r.plateaus) +
                   ", \"aic\": " + format_double(r.aic) +
                   ", \"rmse_insample\": " + format_double(r.rmse_insample) +
                   ", \"seconds\": " + format_double(r.seconds) + "}\n";
        } else {
            std::string msg;
            for (char ch : r.error) {
                if (ch == '"' || ch == '\\') msg += '\\';
                msg += ch;
            }
            out += ", \"error\": \"" + msg + "\"}\n";
        }
    }
    return out;
}

struct QScanRow {
    int q = 0;
    double lambda = 0.0;
    double rmse = 0.0;
    double max_err = 0.0;
    bool selected = false;
};

struct QScanStudy {
    std::vector<QScanRow> rows;
    int gap_selected_q = 0;
};

/// Fig.-4 style study: GapTV at every fixed q in the range (lambda by CV),
/// scored against the true grid, with the gap-selected q marked.
inline QScanStudy q_scan_study(const PlateauWorld& world, int n,
                               int q_min, int q_max, std::uint64_t seed,
                               const FitConfig& base_config = {}) {
    if (q_min < 2 || q_max < q_min) {
        throw std::invalid_argument("q_scan_study: bad q range");
    }
    const Dataset data =
        sample_observations(world, n, 1.0, rng::derive_seed(seed, 11));

    GapConfig gap_cfg = base_config.gap;
    gap_cfg.q_min = q_min;
    gap_cfg.q_max = q_max;
    const QSelection sel = select_q(data, gap_cfg);

    QScanStudy study;
    study.gap_selected_q = sel.q;
    for (int q = q_min; q <= std::min<int>(q_max, static_cast<int>(data.size()));
         ++q) {
        FitConfig cfg = base_config;
        cfg.q_override = q;
        cfg.seed = rng::derive_seed(seed, 12, static_cast<std::uint64_t>(q));
        const Model model = fit(data, cfg);
        QScanRow row;
        row.q = q;
        row.lambda = model.lambda;
        row.selected = q == sel.q;
        BenchRow tmp;
        detail::truth_metrics(model, world, tmp);
        row.rmse = tmp.rmse;
        row.max_err = tmp.max_err;
        study.rows.push_back(row);
    }
    return study;
}

inline std::string q_scan_csv(const QScanStudy& study) {
    std::string out = "q,lambda,rmse,max_err,selected\n";
    for (const QScanRow& r : study.rows) {
        out += std::to_string(r.q) + ',' + format_double(r.lambda) + ',' +
               format_double(r.rmse) + ',' + format_double(r.max_err) + ',' +
               (r.selected ? "1" : "0") + '\n';
    }
    return out;
}

inline std::string world_csv(const PlateauWorld& world) {
    std::string out;
    for (int r = 0; r < kWorldSize; ++r) {
        for (int c = 0; c < kWorldSize; ++c) {
            out += format_double(world.cell_truth(r, c));
            out += c + 1 < kWorldSize ? ',' : '\n';
        }
    }
    return out;
}

}  // namespace gaptv
