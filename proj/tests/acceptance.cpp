// Acceptance suite: one pass/fail line per criterion, nonzero exit if any
// fail. Criterion 9 and 10 drive the CLI binary, whose path arrives as
// argv[1].

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "gaptv/bench.hpp"
#include "gaptv/crisp.hpp"
#include "gaptv/gap.hpp"
#include "gaptv/io.hpp"
#include "gaptv/pipeline.hpp"
#include "../tests/oracles.hpp"

using namespace gaptv;
namespace fs = std::filesystem;

namespace {

int g_failures = 0;

void report(int criterion, bool pass, const std::string& what,
            const std::string& detail) {
    std::printf("[%s] criterion %2d: %s (%s)\n", pass ? "PASS" : "FAIL",
                criterion, what.c_str(), detail.c_str());
    std::fflush(stdout);
    if (!pass) ++g_failures;
}

CellAggregates random_aggregates(int q, std::mt19937_64& eng) {
    std::normal_distribution<double> g(0.0, 1.5);
    std::uniform_int_distribution<int> uc(0, 3);
    CellAggregates agg;
    agg.q = q;
    agg.loss = LossKind::gaussian;
    const int m = q * q;
    agg.counts.assign(static_cast<std::size_t>(m), 0);
    agg.means.assign(static_cast<std::size_t>(m),
                     std::numeric_limits<double>::quiet_NaN());
    bool any = false;
    for (int i = 0; i < m; ++i) {
        const int c = uc(eng);
        agg.counts[static_cast<std::size_t>(i)] = c;
        if (c > 0) {
            agg.means[static_cast<std::size_t>(i)] = g(eng);
            any = true;
        }
    }
    if (!any) {
        agg.counts[0] = 1;
        agg.means[0] = g(eng);
    }
    return agg;
}

// ---------------------------------------------------------------- criterion 1
void criterion_1() {
    const auto t0 = std::chrono::steady_clock::now();
    std::mt19937_64 eng(11001);
    const double lambdas[3] = {0.1, 0.7, 3.0};
    int bad_tv = 0, bad_crisp = 0;
    double worst = 0.0;
    for (int i = 0; i < 200; ++i) {
        const int q = i % 2 == 0 ? 3 : 2;
        const CellAggregates agg = random_aggregates(q, eng);
        const GridGraph graph = grid_edges(q);
        const double lambda = lambdas[i % 3];

        const TvSolution tv = solve_tv_grid(
            {agg, graph, lambda, LossKind::gaussian}, SolverSettings{});
        oracle::TvCoordinateOracle tv_oracle(agg, graph, lambda);
        const auto tv_ref = tv_oracle.solve(20, eng());
        const double tv_ref_obj = tv_oracle.objective(tv_ref);
        const double tv_err = std::abs(tv.objective - tv_ref_obj) /
                              (1.0 + std::abs(tv_ref_obj));
        worst = std::max(worst, tv_err);
        if (tv_err > 1e-5) ++bad_tv;

        const TvSolution cr = solve_crisp({agg, lambda}, SolverSettings{});
        const auto cr_ref =
            oracle::crisp_multistart_oracle(agg, lambda, 20, eng());
        const double cr_ref_obj =
            oracle::crisp_objective_direct(cr_ref, agg, lambda);
        const double cr_err = std::abs(cr.objective - cr_ref_obj) /
                              (1.0 + std::abs(cr_ref_obj));
        worst = std::max(worst, cr_err);
        if (cr_err > 1e-5) ++bad_crisp;
    }
    const double dt =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
            .count();
    report(1, bad_tv == 0 && bad_crisp == 0 && dt < 120.0,
           "solver objectives within 1e-5 of the multi-start oracle",
           "tv misses " + std::to_string(bad_tv) + ", crisp misses " +
               std::to_string(bad_crisp) + ", worst rel err " +
               format_double(worst) + ", " + format_double(dt) + " s");
}

}  // namespace

// ---------------------------------------------------------------- criterion 2
namespace {
void criterion_2() {
    std::mt19937_64 eng(22002);
    std::normal_distribution<double> g(0.0, 2.0);
    std::uniform_real_distribution<double> uw(0.1, 3.0);
    std::uniform_int_distribution<int> un(1, 20);
    std::uniform_real_distribution<double> ul(0.0, 2.5);
    int bad = 0;
    double worst = 0.0;
    for (int i = 0; i < 500; ++i) {
        const int n = un(eng);
        std::vector<double> a(static_cast<std::size_t>(n)),
            w(static_cast<std::size_t>(n));
        for (double& v : a) v = g(eng);
        for (double& v : w) v = uw(eng);
        const double lam = ul(eng);
        const auto mine = fused_lasso_1d_weighted(a, w, lam);
        const auto ref = oracle::fl1d_dual_oracle(a, w, lam);
        const double err = oracle::fl1d_objective(mine, a, w, lam) -
                           oracle::fl1d_objective(ref, a, w, lam);
        worst = std::max(worst, std::abs(err));
        if (std::abs(err) > 1e-6) ++bad;

        // endpoint identities: lambda = 0 is a bitwise copy; a lambda above
        // every fusion threshold lands on the weighted mean to roundoff
        if (fused_lasso_1d_weighted(a, w, 0.0) != a) ++bad;
        double num = 0.0, den = 0.0, lo = a[0], hi = a[0];
        for (int j = 0; j < n; ++j) {
            num += w[static_cast<std::size_t>(j)] * a[static_cast<std::size_t>(j)];
            den += w[static_cast<std::size_t>(j)];
            lo = std::min(lo, a[static_cast<std::size_t>(j)]);
            hi = std::max(hi, a[static_cast<std::size_t>(j)]);
        }
        const double lam_fuse = 16.0 * n * 3.0 * (hi - lo + 1.0);
        const auto fused = fused_lasso_1d_weighted(a, w, lam_fuse);
        for (double b : fused) {
            if (std::abs(b - num / den) > 1e-9 * (1.0 + std::abs(num / den))) {
                ++bad;
                break;
            }
        }
    }
    report(2, bad == 0,
           "1d weighted fused lasso matches the convex dual oracle to 1e-6",
           "500 instances, worst objective gap " + format_double(worst));
}

// ---------------------------------------------------------------- criterion 3
void criterion_3() {
    std::mt19937_64 eng(33003);
    bool ok = true;
    std::string detail;
    for (double nu : {2.0, 6.0, 40.0}) {
        std::gamma_distribution<double> gamma(nu / 2.0, 2.0);  // chi^2_nu
        const int draws = 1000000;
        double sum = 0.0, sum_sq = 0.0;
        for (int i = 0; i < draws; ++i) {
            const double lg = std::log(gamma(eng));
            sum += lg;
            sum_sq += lg * lg;
        }
        const double mc = sum / draws;
        const double se =
            std::sqrt((sum_sq / draws - mc * mc) / static_cast<double>(draws));
        const double exact = gaussian_null_log_expect(nu);
        if (std::abs(exact - mc) > 3.0 * se) ok = false;
        detail += "nu=" + format_double(nu) + ": |d|/se=" +
                  format_double(std::abs(exact - mc) / se) + " ";
    }
    for (const auto& [n, p] : std::vector<std::pair<int, double>>{{50, 0.3},
                                                                  {100, 0.5}}) {
        const auto m = static_cast<int>(
            (static_cast<std::int64_t>(n) * n - n) / 2);
        const double r = 2.0 * p * (1.0 - p);
        std::binomial_distribution<int> bin(m, r);
        const int draws = 1000000;
        double sum = 0.0;
        for (int i = 0; i < draws; ++i) {
            sum += std::log(static_cast<double>(std::max(bin(eng), 1)));
        }
        const double mc = sum / draws;
        const double approx = binomial_null_log_expect(n, p);
        const double rel = std::abs(approx - mc) / std::abs(mc);
        if (rel > 0.01) ok = false;
        detail += "bin(" + std::to_string(n) + "," + format_double(p) +
                  "): rel=" + format_double(rel) + " ";
    }
    report(3, ok, "gap nulls match Monte Carlo references", detail);
}

// ---------------------------------------------------------------- criterion 4
void criterion_4() {
    const auto t0 = std::chrono::steady_clock::now();
    std::vector<double> medians;
    std::vector<std::vector<int>> selections(3);
    const int ns[3] = {100, 500, 2000};
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        const PlateauWorld world = gen_plateau_world(seed);
        for (int k = 0; k < 3; ++k) {
            const Dataset data = sample_observations(
                world, ns[k], 1.0, seed * 1000 + static_cast<std::uint64_t>(ns[k]));
            selections[static_cast<std::size_t>(k)].push_back(
                select_q(data, GapConfig{}).q);
        }
    }
    for (auto& v : selections) {
        std::sort(v.begin(), v.end());
        medians.push_back(0.5 * (v[(v.size() - 1) / 2] + v[v.size() / 2]));
    }
    const double dt =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
            .count();
    const bool ok = medians[0] <= medians[1] && medians[1] <= medians[2] &&
                    medians[2] > medians[0] && dt < 900.0;
    report(4, ok, "median gap-selected q grows with the sample size",
           "medians " + format_double(medians[0]) + " / " +
               format_double(medians[1]) + " / " + format_double(medians[2]) +
               " for n in {100,500,2000}, " + format_double(dt) + " s");
}

// ----------------------------------------------------------- criteria 5, 6, 7
void criteria_5_6_7() {
    BenchOptions opts;
    opts.measure_time = false;
    opts.jobs = 2;
    const auto rows = run_benchmark(
        {BenchMethod::gaptv, BenchMethod::gapcrisp, BenchMethod::crisp}, {2000},
        20, 424242, opts);
    std::vector<double> tv_pl(20), crisp_pl(20), gapcrisp_aic(20), tv_aic(20),
        crisp_aic(20), tv_rmse(20), crisp_rmse(20);
    bool complete = true;
    for (const BenchRow& r : rows) {
        if (!r.error.empty()) {
            complete = false;
            continue;
        }
        const auto t = static_cast<std::size_t>(r.trial);
        if (r.method == "gaptv") {
            tv_pl[t] = r.plateaus;
            tv_aic[t] = r.aic;
            tv_rmse[t] = r.rmse;
        } else if (r.method == "crisp") {
            crisp_pl[t] = r.plateaus;
            crisp_aic[t] = r.aic;
            crisp_rmse[t] = r.rmse;
        } else {
            gapcrisp_aic[t] = r.aic;
        }
    }
    auto median = [](std::vector<double> v) {
        std::sort(v.begin(), v.end());
        return 0.5 * (v[(v.size() - 1) / 2] + v[v.size() / 2]);
    };

    int fewer = 0;
    std::vector<double> ratios;
    for (int t = 0; t < 20; ++t) {
        if (tv_pl[static_cast<std::size_t>(t)] <
            crisp_pl[static_cast<std::size_t>(t)]) {
            ++fewer;
        }
        ratios.push_back(tv_pl[static_cast<std::size_t>(t)] /
                         crisp_pl[static_cast<std::size_t>(t)]);
    }
    const double med_ratio = median(ratios);
    report(5, complete && fewer >= 16 && med_ratio <= 0.25,
           "gaptv builds far fewer plateaus than crisp at n=2000",
           "fewer in " + std::to_string(fewer) + "/20 trials, median ratio " +
               format_double(med_ratio));

    int aic_vs_crisp = 0, aic_vs_gapcrisp = 0;
    for (int t = 0; t < 20; ++t) {
        if (tv_aic[static_cast<std::size_t>(t)] <
            crisp_aic[static_cast<std::size_t>(t)]) {
            ++aic_vs_crisp;
        }
        if (tv_aic[static_cast<std::size_t>(t)] <=
            gapcrisp_aic[static_cast<std::size_t>(t)]) {
            ++aic_vs_gapcrisp;
        }
    }
    report(6, complete && aic_vs_crisp >= 16 && aic_vs_gapcrisp >= 12,
           "gaptv wins the AIC trade-off at n=2000",
           "beats crisp in " + std::to_string(aic_vs_crisp) +
               "/20, at or below gapcrisp in " +
               std::to_string(aic_vs_gapcrisp) + "/20");

    const double tv_med = median(tv_rmse), crisp_med = median(crisp_rmse);
    const double rel = std::abs(tv_med - crisp_med) / crisp_med;
    report(7, complete && rel <= 0.15,
           "median truth-grid RMSE comparable to crisp at n=2000",
           "gaptv " + format_double(tv_med) + " vs crisp " +
               format_double(crisp_med) + ", rel diff " + format_double(rel));
}

// ---------------------------------------------------------------- criterion 8
void criterion_8() {
    std::mt19937_64 eng(88008);
    bool ok = true;
    std::string detail;

    {  // shift and scale equivariance of both solvers
        const CellAggregates agg = random_aggregates(4, eng);
        const GridGraph graph = grid_edges(4);
        const TvSolution base = solve_tv_grid(
            {agg, graph, 0.9, LossKind::gaussian}, SolverSettings{});
        const TvSolution crisp_base = solve_crisp({agg, 0.9}, SolverSettings{});
        CellAggregates shifted = agg, scaled = agg;
        for (int i = 0; i < 16; ++i) {
            if (agg.counts[static_cast<std::size_t>(i)] > 0) {
                shifted.means[static_cast<std::size_t>(i)] += 2.5;
                scaled.means[static_cast<std::size_t>(i)] *= 3.0;
            }
        }
        const TvSolution sh = solve_tv_grid(
            {shifted, graph, 0.9, LossKind::gaussian}, SolverSettings{});
        const TvSolution sc = solve_tv_grid(
            {scaled, graph, 2.7, LossKind::gaussian}, SolverSettings{});
        const TvSolution crisp_sh = solve_crisp({shifted, 0.9}, SolverSettings{});
        for (int i = 0; i < 16; ++i) {
            const auto k = static_cast<std::size_t>(i);
            if (std::abs(sh.beta[k] - base.beta[k] - 2.5) > 1e-8 ||
                std::abs(sc.beta[k] - 3.0 * base.beta[k]) > 1e-7 ||
                std::abs(crisp_sh.beta[k] - crisp_base.beta[k] - 2.5) > 1e-7) {
                ok = false;
                detail += "equivariance ";
                break;
            }
        }
    }
    {  // argmin-q invariance under positive rescaling of y
        for (std::uint64_t seed = 1; seed <= 3 && ok; ++seed) {
            const PlateauWorld world = gen_plateau_world(seed);
            Dataset data = sample_observations(world, 400, 1.0, seed);
            GapConfig cfg;
            cfg.q_max = 20;
            const int q_base = select_q(data, cfg).q;
            for (auto& p : data.points) p.y *= 41.0;
            if (select_q(data, cfg).q != q_base) {
                ok = false;
                detail += "q-rescale ";
            }
        }
    }
    {  // objective monotone per iteration, both solvers
        const CellAggregates agg = random_aggregates(5, eng);
        const GridGraph graph = grid_edges(5);
        std::vector<double> trace;
        solve_tv_grid({agg, graph, 0.8, LossKind::gaussian}, SolverSettings{},
                      &trace);
        for (std::size_t i = 1; i < trace.size(); ++i) {
            if (trace[i] > trace[i - 1] + 1e-10) {
                ok = false;
                detail += "tv-monotone ";
                break;
            }
        }
        trace.clear();
        solve_crisp({agg, 0.8}, SolverSettings{}, &trace);
        for (std::size_t i = 1; i < trace.size(); ++i) {
            if (trace[i] > trace[i - 1] + 1e-10) {
                ok = false;
                detail += "crisp-monotone ";
                break;
            }
        }
    }
    {  // plateau endpoints along the lambda grid
        const PlateauWorld world = gen_plateau_world(77);
        const Dataset data = sample_observations(world, 300, 1.0, 78);
        const QuantileGrid grid = build_grid(data, 5);
        const CellAggregates agg = aggregate(data, grid);
        const GridGraph graph = grid_edges(5);
        const auto lambdas =
            lambda_grid(agg, graph, LossKind::gaussian, 20, 1e-4);
        const TvSolution top = solve_tv_grid(
            {agg, graph, lambdas.front(), LossKind::gaussian}, SolverSettings{});
        const TvSolution bottom = solve_tv_grid(
            {agg, graph, lambdas.back(), LossKind::gaussian}, SolverSettings{});
        const int p_top = count_plateaus(top.beta, graph, 1e-4);
        const int p_bottom = count_plateaus(bottom.beta, graph, 1e-4);
        if (p_top != 1 || p_bottom < p_top) {
            ok = false;
            detail += "plateau-endpoints ";
        }
    }
    {  // binomial prox gradient vs central differences
        std::uniform_real_distribution<double> ub(-3.0, 3.0);
        std::uniform_int_distribution<int> ue(1, 30);
        for (int t = 0; t < 100; ++t) {
            const double eta = ue(eng);
            std::uniform_int_distribution<int> us(0, static_cast<int>(eta));
            const double s = us(eng);
            const double b = ub(eng);
            const double h = 1e-5;
            auto cell_loss = [&](double bb) {
                return eta * detail::log1p_exp(bb) - s * bb;
            };
            const double fd = (cell_loss(b + h) - cell_loss(b - h)) / (2.0 * h);
            if (std::abs(fd - (eta * detail::sigmoid(b) - s)) > 1e-6) {
                ok = false;
                detail += "prox-gradient ";
                break;
            }
        }
    }
    {  // edge-count and partition properties across q in [2, 50]
        std::uniform_real_distribution<double> u(-1.0, 1.0);
        Dataset data;
        for (int i = 0; i < 333; ++i) data.points.push_back({u(eng), u(eng), u(eng)});
        for (int q = 2; q <= 50; ++q) {
            if (grid_edges(q).edges.size() !=
                static_cast<std::size_t>(2 * q * (q - 1))) {
                ok = false;
                detail += "edges ";
                break;
            }
            const CellAggregates agg = aggregate(data, build_grid(data, q));
            if (agg.total() != 333) {
                ok = false;
                detail += "partition ";
                break;
            }
        }
    }
    report(8, ok, "module invariant suites hold",
           detail.empty() ? "equivariance, rescale, monotonicity, endpoints, "
                            "gradient, partition"
                          : "failed: " + detail);
}

// ---------------------------------------------------------------- criterion 9
int run_cli(const std::string& bin, const std::string& args) {
    const std::string cmd = bin + " " + args + " > /dev/null 2>&1";
    return WEXITSTATUS(std::system(cmd.c_str()));
}

void criterion_9(const std::string& bin, const fs::path& dir) {
    const std::string a = (dir / "bench_a.csv").string();
    const std::string b = (dir / "bench_b.csv").string();
    const std::string common =
        "benchmark --methods gaptv,gapcrisp,crisp --n 100 --n 500 --trials 3 "
        "--seed 2026 --jobs 2 --no-timing -o ";
    const int ra = run_cli(bin, common + a);
    const int rb = run_cli(bin, common + b);
    const bool ok =
        ra == 0 && rb == 0 && read_file(a) == read_file(b) &&
        read_file(a).rfind(
            "method,n,trial,q,lambda,rmse,max_err,plateaus,aic,seconds\n", 0) ==
            0;
    report(9, ok, "identical seeds give byte-identical benchmark reports",
           "two runs, " + std::to_string(ra) + "/" + std::to_string(rb) +
               " exit codes");
}

// --------------------------------------------------------------- criterion 10
void criterion_10(const std::string& bin, const fs::path& dir) {
    const PlateauWorld world = gen_plateau_world(1001);
    const Dataset data = sample_observations(world, 2000, 1.0, 1002);
    const std::string csv = (dir / "train.csv").string();
    write_dataset_csv(csv, data);
    const std::string model_path = (dir / "model.json").string();
    const std::string pred_path = (dir / "pred.csv").string();

    const auto t0 = std::chrono::steady_clock::now();
    const int rf = run_cli(bin, "fit " + csv + " -o " + model_path + " --seed 7");
    const int rp =
        run_cli(bin, "predict " + model_path + " " + csv + " -o " + pred_path);
    const double dt =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
            .count();

    double rmse = std::numeric_limits<double>::infinity();
    double sd = 0.0;
    if (rf == 0 && rp == 0) {
        const Dataset pred =
            ingest_csv(pred_path, LossKind::gaussian, CsvColumns{"x1", "x2", "yhat"});
        double mean = 0.0;
        for (const DataPoint& p : data.points) mean += p.y;
        mean /= static_cast<double>(data.size());
        double rss = 0.0, var = 0.0;
        for (std::size_t i = 0; i < data.size(); ++i) {
            rss += (data.points[i].y - pred.points[i].y) *
                   (data.points[i].y - pred.points[i].y);
            var += (data.points[i].y - mean) * (data.points[i].y - mean);
        }
        rmse = std::sqrt(rss / static_cast<double>(data.size()));
        sd = std::sqrt(var / static_cast<double>(data.size()));
    }
    const bool ok = rf == 0 && rp == 0 && dt < 60.0 && rmse <= sd + 1e-6;
    report(10, ok, "cli fit -> predict round trip on 2000 points",
           "exit " + std::to_string(rf) + "/" + std::to_string(rp) + ", " +
               format_double(dt) + " s, rmse " + format_double(rmse) +
               " vs sd " + format_double(sd));
}

}  // namespace

int main(int argc, char** argv) {
    if (argc < 2) {
        std::fprintf(stderr, "usage: acceptance <path-to-gaptv-cli>\n");
        return 2;
    }
    const std::string bin = argv[1];
    const fs::path dir =
        fs::temp_directory_path() /
        ("gaptv_acceptance_" + std::to_string(std::random_device{}()));
    fs::create_directories(dir);

    criterion_1();
    criterion_2();
    criterion_3();
    criterion_4();
    criteria_5_6_7();
    criterion_8();
    criterion_9(bin, dir);
    criterion_10(bin, dir);

    fs::remove_all(dir);
    if (g_failures > 0) {
        std::printf("%d criterion(s) failed\n", g_failures);
        return 1;
    }
    std::printf("all acceptance criteria passed\n");
    return 0;
}
