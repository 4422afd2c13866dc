// GapTV command-line front end: fit models, predict, scan the gap statistic,
// run the synthetic benchmark and q-scan studies, and apply the crime-data
// preprocessing recipe.
//
// Exit codes: 0 success, 1 input/validation error, 2 solver non-convergence.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "gaptv/bench.hpp"
#include "gaptv/gap.hpp"
#include "gaptv/io.hpp"
#include "gaptv/model_io.hpp"
#include "gaptv/pipeline.hpp"

namespace {

using namespace gaptv;

constexpr int kExitOk = 0;
constexpr int kExitInput = 1;
constexpr int kExitNoConvergence = 2;

struct CommonOptions {
    std::string loss = "gaussian";
    std::uint64_t seed = 0;
    int q_min = 2;
    int q_max = 50;
    std::string gap_mode = "per_cell_null";
    int folds = 5;
    int n_lambda = 50;
    double lambda_min_ratio = 1e-4;
    double plateau_rel_tol = 1e-4;
    double tol = 1e-8;
    int max_iters = 10000;
    std::string method = "gaptv";
    int crisp_q = 0;
    int q_override = 0;
    bool lambda_by_aic = false;
    CsvColumns columns;
};

void add_gap_options(CLI::App* cmd, CommonOptions& o) {
    cmd->add_option("--q-min", o.q_min, "Smallest candidate q");
    cmd->add_option("--q-max", o.q_max, "Largest candidate q");
    cmd->add_option("--gap-mode", o.gap_mode,
                    "Gap score mode: per_cell_null (default), "
                    "log_dispersion, literal_eq10");
    cmd->add_option("--seed", o.seed, "RNG seed (full determinism)");
    cmd->add_option("--loss", o.loss, "Observation model: gaussian|binomial");
}

void add_fit_options(CLI::App* cmd, CommonOptions& o) {
    add_gap_options(cmd, o);
    cmd->add_option("--method", o.method,
                    "gaptv (default), gapcrisp, or crisp (fixed q)");
    cmd->add_option("--folds", o.folds, "Cross-validation folds");
    cmd->add_option("--n-lambda", o.n_lambda, "Lambda grid size");
    cmd->add_option("--lambda-min-ratio", o.lambda_min_ratio,
                    "Smallest lambda relative to lambda_max");
    cmd->add_option("--plateau-rel-tol", o.plateau_rel_tol,
                    "Relative tolerance for plateau counting");
    cmd->add_option("--tol", o.tol, "Solver convergence tolerance");
    cmd->add_option("--max-iters", o.max_iters, "Solver iteration cap");
    cmd->add_option("--crisp-q", o.crisp_q,
                    "Override CRISP's q (default min(n, 100))");
    cmd->add_option("--fixed-q", o.q_override,
                    "Skip the gap statistic and use this q");
    cmd->add_flag("--lambda-by-aic", o.lambda_by_aic,
                  "Pick lambda by AIC over the path instead of CV");
    cmd->add_option("--x1-col", o.columns.x1, "Input column for x1");
    cmd->add_option("--x2-col", o.columns.x2, "Input column for x2");
    cmd->add_option("--y-col", o.columns.y, "Input column for y");
}

FitConfig to_fit_config(const CommonOptions& o) {
    FitConfig cfg;
    cfg.gap.q_min = o.q_min;
    cfg.gap.q_max = o.q_max;
    cfg.gap.mode = gap_mode_from_string(o.gap_mode);
    cfg.folds = o.folds;
    cfg.n_lambda = o.n_lambda;
    cfg.lambda_min_ratio = o.lambda_min_ratio;
    cfg.plateau_rel_tol = o.plateau_rel_tol;
    cfg.solver.tol = o.tol;
    cfg.solver.max_iters = o.max_iters;
    cfg.method = method_from_string(o.method);
    cfg.seed = o.seed;
    cfg.crisp_q = o.crisp_q;
    cfg.q_override = o.q_override;
    cfg.lambda_by_aic = o.lambda_by_aic;
    return cfg;
}

double insample_rmse(const Model& model, const Dataset& data) {
    const std::vector<double> pred = predict(model, data.points);
    double sq = 0.0;
    for (std::size_t i = 0; i < data.size(); ++i) {
        const double e = data.points[i].y - pred[i];
        sq += e * e;
    }
    return std::sqrt(sq / static_cast<double>(data.size()));
}

int cmd_fit(const CommonOptions& o, const std::string& input,
            const std::string& output) {
    const Dataset data = ingest_csv(input, loss_from_string(o.loss), o.columns);
    const FitConfig cfg = to_fit_config(o);
    const Model model = fit(data, cfg);
    save_model(output, model);
    if (model.degenerate_constant) {
        std::cerr << "warning: constant responses; lambda path is degenerate\n";
    }
    std::printf("q=%d lambda=%s plateaus=%d aic=%s rmse=%s\n", model.grid.q,
                format_double(model.lambda).c_str(), model.plateau_count,
                format_double(model.aic).c_str(),
                format_double(insample_rmse(model, data)).c_str());
    return model.converged ? kExitOk : kExitNoConvergence;
}

int cmd_predict(const CommonOptions& o, const std::string& model_path,
                const std::string& points_path, const std::string& out_path) {
    const Model model = load_model(model_path);
    std::vector<DataPoint> points;
    std::ifstream in(points_path);
    if (!in) throw std::invalid_argument("cannot open: " + points_path);
    std::string line;
    if (!std::getline(in, line)) {
        write_predictions_csv(out_path, {}, {});  // empty input: header only
        return kExitOk;
    }
    const auto header = csv::split_line(line);
    const auto fx1 = std::find(header.begin(), header.end(), o.columns.x1);
    const auto fx2 = std::find(header.begin(), header.end(), o.columns.x2);
    if (fx1 == header.end() || fx2 == header.end()) {
        throw std::invalid_argument(points_path + ": missing column '" +
                                    (fx1 == header.end() ? o.columns.x1
                                                         : o.columns.x2) +
                                    "'");
    }
    const std::size_t ix1 = static_cast<std::size_t>(fx1 - header.begin());
    const std::size_t ix2 = static_cast<std::size_t>(fx2 - header.begin());
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line == "\r") continue;
        const auto fields = csv::split_line(line);
        if (fields.size() <= std::max(ix1, ix2)) {
            throw std::invalid_argument("line " + std::to_string(line_no) +
                                        ": too few columns");
        }
        DataPoint p;
        p.x1 = csv::parse_number(fields[ix1], line_no, o.columns.x1);
        p.x2 = csv::parse_number(fields[ix2], line_no, o.columns.x2);
        if (!std::isfinite(p.x1) || !std::isfinite(p.x2)) {
            throw std::invalid_argument("line " + std::to_string(line_no) +
                                        ": non-finite coordinate");
        }
        points.push_back(p);
    }
    const std::vector<double> yhat = predict(model, points);
    write_predictions_csv(out_path, points, yhat);
    return kExitOk;
}

int cmd_gap_scan(const CommonOptions& o, const std::string& input,
                 const std::string& output) {
    const Dataset data = ingest_csv(input, loss_from_string(o.loss), o.columns);
    GapConfig cfg;
    cfg.q_min = o.q_min;
    cfg.q_max = o.q_max;
    cfg.mode = gap_mode_from_string(o.gap_mode);
    cfg.loss = data.loss;
    const QSelection sel = select_q(data, cfg);
    if (sel.degenerate_constant) {
        std::cerr << "warning: constant responses; returning q_min\n";
    }
    std::string out = "q,dispersion,null_term,gap,selected\n";
    for (const GapScanEntry& e : sel.scan) {
        out += std::to_string(e.q) + ',' + format_double(e.dispersion) + ',' +
               format_double(e.null_term) + ',' + format_double(e.gap) + ',' +
               (e.q == sel.q ? "1" : "0") + '\n';
    }
    atomic_write(output, out);
    std::printf("selected q=%d\n", sel.q);
    return kExitOk;
}

std::vector<BenchMethod> parse_methods(const std::string& csv_list) {
    std::vector<BenchMethod> methods;
    std::string cur;
    auto flush = [&]() {
        if (cur.empty()) return;
        if (cur == "gaptv") methods.push_back(BenchMethod::gaptv);
        else if (cur == "gapcrisp") methods.push_back(BenchMethod::gapcrisp);
        else if (cur == "crisp") methods.push_back(BenchMethod::crisp);
        else if (cur == "constant") methods.push_back(BenchMethod::constant);
        else throw std::invalid_argument("unknown benchmark method: " + cur);
        cur.clear();
    };
    for (char ch : csv_list) {
        if (ch == ',') flush();
        else cur += ch;
    }
    flush();
    if (methods.empty()) throw std::invalid_argument("no benchmark methods");
    return methods;
}

int cmd_benchmark(const CommonOptions& o, const std::string& methods_list,
                  const std::vector<int>& n_values, int trials,
                  const std::string& out_csv, const std::string& out_jsonl,
                  int jobs, bool no_timing, double noise_sd) {
    BenchOptions opts;
    opts.noise_sd = noise_sd;
    opts.measure_time = !no_timing;
    opts.jobs = jobs;
    opts.base_config = to_fit_config(o);
    const auto rows = run_benchmark(parse_methods(methods_list), n_values,
                                    trials, o.seed, opts);
    atomic_write(out_csv, benchmark_csv(rows));
    if (!out_jsonl.empty()) atomic_write(out_jsonl, benchmark_jsonl(rows));
    int failures = 0;
    for (const auto& r : rows) failures += r.error.empty() ? 0 : 1;
    std::printf("benchmark rows=%zu failures=%d -> %s\n", rows.size(), failures,
                out_csv.c_str());
    return kExitOk;
}

int cmd_qscan(const CommonOptions& o, int n, const std::string& out_csv,
              const std::string& world_csv_path,
              const std::string& world_pgm_path) {
    const PlateauWorld world = gen_plateau_world(o.seed);
    if (!world_csv_path.empty()) atomic_write(world_csv_path, world_csv(world));
    if (!world_pgm_path.empty()) {
        write_pgm(world_pgm_path, world.truth, kWorldSize, kWorldSize);
    }
    FitConfig cfg = to_fit_config(o);
    const QScanStudy study =
        q_scan_study(world, n, o.q_min, o.q_max, o.seed, cfg);
    atomic_write(out_csv, q_scan_csv(study));
    std::printf("gap-selected q=%d -> %s\n", study.gap_selected_q,
                out_csv.c_str());
    return kExitOk;
}

/// The published preprocessing recipe: bin points into a fine 100 x 100
/// lat/lon grid, take the log of per-cell counts, drop zero-count cells, then
/// fit every method with q in [2,100] and score RMSE by 20-fold CV at the
/// chosen (q, lambda).
int cmd_crime_recipe(const CommonOptions& o, const std::string& input,
                     const std::string& out_dir, const std::string& lat_col,
                     const std::string& lon_col) {
    namespace fs = std::filesystem;
    fs::create_directories(out_dir);
    constexpr int kGrid = 100;

    std::ifstream in(input);
    if (!in) throw std::invalid_argument("cannot open: " + input);
    std::string line;
    if (!std::getline(in, line)) throw std::invalid_argument("empty input");
    const auto header = csv::split_line(line);
    const auto flat = std::find(header.begin(), header.end(), lat_col);
    const auto flon = std::find(header.begin(), header.end(), lon_col);
    if (flat == header.end() || flon == header.end()) {
        throw std::invalid_argument("missing latitude/longitude columns '" +
                                    lat_col + "'/'" + lon_col + "'");
    }
    const std::size_t ilat = static_cast<std::size_t>(flat - header.begin());
    const std::size_t ilon = static_cast<std::size_t>(flon - header.begin());
    std::vector<std::pair<double, double>> pts;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line == "\r") continue;
        const auto fields = csv::split_line(line);
        if (fields.size() <= std::max(ilat, ilon)) {
            throw std::invalid_argument("line " + std::to_string(line_no) +
                                        ": too few columns");
        }
        const double lat = csv::parse_number(fields[ilat], line_no, lat_col);
        const double lon = csv::parse_number(fields[ilon], line_no, lon_col);
        if (!std::isfinite(lat) || !std::isfinite(lon)) {
            throw std::invalid_argument("line " + std::to_string(line_no) +
                                        ": non-finite coordinate");
        }
        pts.emplace_back(lat, lon);
    }
    if (pts.empty()) throw std::invalid_argument("no points in " + input);
    if (pts.size() < 100) {
        std::cerr << "warning: fewer than 100 points; results will be noisy\n";
    }

    double lat_lo = pts[0].first, lat_hi = pts[0].first;
    double lon_lo = pts[0].second, lon_hi = pts[0].second;
    for (const auto& [lat, lon] : pts) {
        lat_lo = std::min(lat_lo, lat);
        lat_hi = std::max(lat_hi, lat);
        lon_lo = std::min(lon_lo, lon);
        lon_hi = std::max(lon_hi, lon);
    }
    const double lat_step = (lat_hi - lat_lo) / kGrid;
    const double lon_step = (lon_hi - lon_lo) / kGrid;
    auto bin_of = [](double v, double lo, double step) {
        if (step <= 0.0) return 0;
        return std::clamp(static_cast<int>((v - lo) / step), 0, kGrid - 1);
    };
    std::vector<std::int64_t> counts(kGrid * kGrid, 0);
    for (const auto& [lat, lon] : pts) {
        ++counts[static_cast<std::size_t>(bin_of(lat, lat_lo, lat_step)) * kGrid +
                 bin_of(lon, lon_lo, lon_step)];
    }

    // zero-count cells are omitted: absence of data, not zero signal
    Dataset data;
    for (int r = 0; r < kGrid; ++r) {
        for (int c = 0; c < kGrid; ++c) {
            const std::int64_t cnt = counts[static_cast<std::size_t>(r) * kGrid + c];
            if (cnt == 0) continue;
            DataPoint p;
            p.x1 = lat_lo + (r + 0.5) * lat_step;
            p.x2 = lon_lo + (c + 0.5) * lon_step;
            p.y = std::log(static_cast<double>(cnt));
            data.points.push_back(p);
        }
    }
    write_dataset_csv((fs::path(out_dir) / "dataset.csv").string(), data);

    // raw heatmap: log counts, absent cells at the floor of the scale
    {
        double lo = 0.0;
        bool first = true;
        for (const DataPoint& p : data.points) {
            lo = first ? p.y : std::min(lo, p.y);
            first = false;
        }
        std::vector<double> img(kGrid * kGrid, lo);
        for (int r = 0; r < kGrid; ++r) {
            for (int c = 0; c < kGrid; ++c) {
                const std::int64_t cnt =
                    counts[static_cast<std::size_t>(r) * kGrid + c];
                if (cnt > 0) {
                    img[static_cast<std::size_t>(r) * kGrid + c] =
                        std::log(static_cast<double>(cnt));
                }
            }
        }
        write_pgm((fs::path(out_dir) / "raw.pgm").string(), img, kGrid, kGrid);
    }

    const int n = static_cast<int>(data.size());
    const int eval_folds = std::min(20, n);
    std::string table = "method,rmse,plateaus,aic\n";
    for (const std::string& method : {std::string("gaptv"),
                                      std::string("gapcrisp"),
                                      std::string("crisp")}) {
        CommonOptions mo = o;
        mo.method = method;
        mo.q_min = 2;
        mo.q_max = 100;
        FitConfig cfg = to_fit_config(mo);
        const Model model = fit(data, cfg);

        FitConfig eval_cfg = cfg;
        eval_cfg.folds = eval_folds;
        const std::vector<double> single_lambda{model.lambda};
        const CvResult cv = cv_lambda(data, model.grid, single_lambda, eval_cfg);
        const double cv_rmse = std::sqrt(cv.table.front().second);

        table += method + ',' + format_double(cv_rmse) + ',' +
                 std::to_string(model.plateau_count) + ',' +
                 format_double(model.aic) + '\n';

        std::vector<DataPoint> centers;
        centers.reserve(kGrid * kGrid);
        for (int r = 0; r < kGrid; ++r) {
            for (int c = 0; c < kGrid; ++c) {
                centers.push_back({lat_lo + (r + 0.5) * lat_step,
                                   lon_lo + (c + 0.5) * lon_step, 0.0});
            }
        }
        const std::vector<double> img = predict(model, centers);
        write_pgm((fs::path(out_dir) / (method + ".pgm")).string(), img, kGrid,
                  kGrid);
        std::printf("%s: q=%d lambda=%s plateaus=%d aic=%s cv_rmse=%s\n",
                    method.c_str(), model.grid.q,
                    format_double(model.lambda).c_str(), model.plateau_count,
                    format_double(model.aic).c_str(),
                    format_double(cv_rmse).c_str());
    }
    atomic_write((fs::path(out_dir) / "table.csv").string(), table);
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{
        "GapTV: interpretable low-dimensional regression and classification "
        "over data-adaptive quantile grids"};
    app.require_subcommand(1);

    CommonOptions opt;

    auto* fit_cmd = app.add_subcommand("fit", "Fit a model from a CSV file");
    std::string fit_input, fit_output = "model.json";
    fit_cmd->add_option("input", fit_input, "Input CSV with x1,x2,y")->required();
    fit_cmd->add_option("-o,--out", fit_output, "Model JSON output path");
    add_fit_options(fit_cmd, opt);

    auto* predict_cmd =
        app.add_subcommand("predict", "Predict from a saved model");
    std::string model_path, points_path, pred_out = "predictions.csv";
    predict_cmd->add_option("model", model_path, "Model JSON")->required();
    predict_cmd->add_option("points", points_path, "CSV with x1,x2")->required();
    predict_cmd->add_option("-o,--out", pred_out, "Predictions CSV path");
    predict_cmd->add_option("--x1-col", opt.columns.x1, "Input column for x1");
    predict_cmd->add_option("--x2-col", opt.columns.x2, "Input column for x2");

    auto* scan_cmd =
        app.add_subcommand("gap-scan", "Scan the gap statistic over q");
    std::string scan_input, scan_output = "gap_scan.csv";
    scan_cmd->add_option("input", scan_input, "Input CSV")->required();
    scan_cmd->add_option("-o,--out", scan_output, "Scan CSV path");
    add_gap_options(scan_cmd, opt);
    scan_cmd->add_option("--x1-col", opt.columns.x1, "Input column for x1");
    scan_cmd->add_option("--x2-col", opt.columns.x2, "Input column for x2");
    scan_cmd->add_option("--y-col", opt.columns.y, "Input column for y");

    auto* bench_cmd =
        app.add_subcommand("benchmark", "Synthetic plateau benchmark");
    std::string bench_methods = "gaptv,gapcrisp,crisp";
    std::vector<int> bench_n{100, 500, 2000};
    int bench_trials = 20;
    std::string bench_csv_path = "benchmark.csv", bench_jsonl_path;
    int bench_jobs = 1;
    bool bench_no_timing = false;
    double bench_noise = 1.0;
    bench_cmd->add_option("--methods", bench_methods,
                          "Comma list: gaptv,gapcrisp,crisp,constant");
    bench_cmd->add_option("--n", bench_n, "Sample sizes");
    bench_cmd->add_option("--trials", bench_trials, "Trials per (n, method)");
    bench_cmd->add_option("-o,--out", bench_csv_path, "Report CSV path");
    bench_cmd->add_option("--jsonl", bench_jsonl_path, "Report JSONL path");
    bench_cmd->add_option("--jobs", bench_jobs, "Worker pool size");
    bench_cmd->add_option("--noise-sd", bench_noise, "Observation noise sd");
    bench_cmd->add_flag("--no-timing", bench_no_timing,
                        "Write 0.000 in the seconds column (bytewise "
                        "reproducible reports)");
    add_fit_options(bench_cmd, opt);

    auto* qscan_cmd = app.add_subcommand(
        "qscan", "RMSE/max-error across all q on one synthetic world");
    int qscan_n = 500;
    std::string qscan_out = "qscan.csv";
    std::string qscan_world_csv, qscan_world_pgm;
    qscan_cmd->add_option("--n", qscan_n, "Sample size");
    qscan_cmd->add_option("-o,--out", qscan_out, "Output CSV path");
    qscan_cmd->add_option("--world-csv", qscan_world_csv,
                          "Also export the truth grid as a CSV matrix");
    qscan_cmd->add_option("--world-pgm", qscan_world_pgm,
                          "Also export the truth grid as a PGM image");
    add_fit_options(qscan_cmd, opt);

    auto* crime_cmd = app.add_subcommand(
        "crime-recipe",
        "Preprocess point data (100x100 binning, log counts) and fit all "
        "methods");
    std::string crime_input, crime_out = "crime_out";
    std::string lat_col = "latitude", lon_col = "longitude";
    crime_cmd->add_option("input", crime_input, "CSV with latitude/longitude")
        ->required();
    crime_cmd->add_option("-o,--out-dir", crime_out, "Output directory");
    crime_cmd->add_option("--lat-col", lat_col, "Latitude column name");
    crime_cmd->add_option("--lon-col", lon_col, "Longitude column name");
    add_fit_options(crime_cmd, opt);

    CLI11_PARSE(app, argc, argv);

    try {
        if (app.got_subcommand(fit_cmd)) {
            return cmd_fit(opt, fit_input, fit_output);
        }
        if (app.got_subcommand(predict_cmd)) {
            return cmd_predict(opt, model_path, points_path, pred_out);
        }
        if (app.got_subcommand(scan_cmd)) {
            return cmd_gap_scan(opt, scan_input, scan_output);
        }
        if (app.got_subcommand(bench_cmd)) {
            return cmd_benchmark(opt, bench_methods, bench_n, bench_trials,
                                 bench_csv_path, bench_jsonl_path, bench_jobs,
                                 bench_no_timing, bench_noise);
        }
        if (app.got_subcommand(qscan_cmd)) {
            return cmd_qscan(opt, qscan_n, qscan_out, qscan_world_csv,
                             qscan_world_pgm);
        }
        if (app.got_subcommand(crime_cmd)) {
            return cmd_crime_recipe(opt, crime_input, crime_out, lat_col,
                                    lon_col);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitInput;
    }
    return kExitOk;
}
