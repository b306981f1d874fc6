#pragma once

#include <atomic>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <thread>
#include <vector>

#include "volnmf/io.hpp"
#include "volnmf/matrix.hpp"
#include "volnmf/metrics.hpp"
#include "volnmf/models.hpp"
#include "volnmf/rng.hpp"
#include "volnmf/solvers.hpp"
#include "volnmf/synth.hpp"

namespace volnmf {

namespace benchdetail {

inline std::size_t worker_count(std::size_t requested) {
    if (requested > 0) return requested;
    if (const char* env = std::getenv("VOLNMF_THREADS")) {
        const long v = std::atol(env);
        if (v > 0) return static_cast<std::size_t>(v);
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw > 0 ? hw : 1;
}

// Runs fn(i) for i in [0, count) on a small pool. Tasks own disjoint output
// slots, so no synchronization beyond the shared counter is needed.
template <typename Fn>
void parallel_for(std::size_t count, std::size_t threads, Fn&& fn) {
    const std::size_t workers = std::min(std::max<std::size_t>(threads, 1), std::max<std::size_t>(count, 1));
    if (workers <= 1) {
        for (std::size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&]() {
            while (true) {
                const std::size_t i = next.fetch_add(1);
                if (i >= count) break;
                fn(i);
            }
        });
    }
    for (auto& t : pool) t.join();
}

inline void write_lines(const std::string& path, const std::vector<std::string>& lines) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw io_error(path + ": cannot open for writing");
    for (const auto& line : lines) out << line << '\n';
    if (!out) throw io_error(path + ": write failed");
}

}  // namespace benchdetail

// ---------------------------------------------------------------------------
// Algorithm-comparison protocol: one synthetic family, five solver setups,
// per-trial traces and a final-error table.
// ---------------------------------------------------------------------------

struct AlgosBenchOptions {
    std::size_t trials = 10;
    std::uint64_t seed = 0;
    std::size_t outer_iters = 500;
    std::size_t inner_iters = 20;
    std::size_t m = 50;
    std::size_t n = 500;
    std::size_t r = 5;
    double lambda = 1.0;
    double delta = 1.0;
    std::string out_dir;  // empty: keep everything in memory
    std::size_t threads = 0;
};

struct AlgosRun {
    std::string algo;
    std::size_t trial = 0;
    double final_rel_error = 0.0;
    double wall_seconds = 0.0;
    SolveStatus status = SolveStatus::ok;
    ConvergenceTrace trace;
};

struct AlgosSummaryRow {
    std::string algo;
    double median_final_error = 0.0;
    double q1 = 0.0;
    double q3 = 0.0;
    double mean_seconds = 0.0;
};

struct AlgosBenchReport {
    std::vector<AlgosRun> runs;
    std::vector<AlgosSummaryRow> summary;
};

inline AlgosBenchReport bench_algos(const AlgosBenchOptions& opts) {
    struct Setup {
        const char* name;
        SolverKind solver;
        double rho;
    };
    const std::vector<Setup> setups = {
        {"adgrad2", SolverKind::adgrad2, 0.01},
        {"admm-adgrad_rho0.01", SolverKind::admm_adgrad, 0.01},
        {"admm-adgrad_rho0.1", SolverKind::admm_adgrad, 0.1},
        {"admm_rho0.01", SolverKind::admm, 0.01},
        {"admm_rho0.1", SolverKind::admm, 0.1},
    };

    AlgosBenchReport report;
    report.runs.resize(setups.size() * opts.trials);

    benchdetail::parallel_for(opts.trials, benchdetail::worker_count(opts.threads),
                              [&](std::size_t trial) {
        // synthetic family: W uniform, H columns Dirichlet(0.2), X = WH
        Rng rng = Rng(opts.seed).split(trial);
        Matrix w_true(opts.m, opts.r);
        for (std::size_t i = 0; i < w_true.size(); ++i) w_true.data()[i] = rng.uniform01();
        Matrix h_true(opts.r, opts.n);
        for (std::size_t j = 0; j < opts.n; ++j) {
            const std::vector<double> col = rng.dirichlet(0.2, opts.r);
            for (std::size_t i = 0; i < opts.r; ++i) h_true(i, j) = col[i];
        }
        const Matrix x = matmul(w_true, h_true);

        auto [w0, h0] = initialize(x, opts.r, opts.seed + trial, Variant::MaxVol);
        for (std::size_t s = 0; s < setups.size(); ++s) {
            SolveConfig cfg;
            cfg.variant = Variant::MaxVol;
            cfg.params = ModelParams{opts.lambda, opts.delta, opts.r};
            cfg.rho = setups[s].rho;
            cfg.outer_iters = opts.outer_iters;
            cfg.inner_iters = opts.inner_iters;
            const SolveResult res = run_solver(setups[s].solver, x, w0, h0, cfg);

            AlgosRun& run = report.runs[s * opts.trials + trial];
            run.algo = setups[s].name;
            run.trial = trial;
            run.status = res.status;
            run.trace = res.trace;
            run.final_rel_error =
                res.trace.records.empty() ? 1.0 : res.trace.records.back().rel_fidelity;
            run.wall_seconds =
                res.trace.records.empty() ? 0.0 : res.trace.records.back().seconds;
        }
    });

    for (std::size_t s = 0; s < setups.size(); ++s) {
        std::vector<double> errors;
        double seconds = 0.0;
        for (std::size_t t = 0; t < opts.trials; ++t) {
            errors.push_back(report.runs[s * opts.trials + t].final_rel_error);
            seconds += report.runs[s * opts.trials + t].wall_seconds;
        }
        AlgosSummaryRow row;
        row.algo = setups[s].name;
        row.median_final_error = median(errors);
        row.q1 = quantile(errors, 0.25);
        row.q3 = quantile(errors, 0.75);
        row.mean_seconds = seconds / static_cast<double>(opts.trials);
        report.summary.push_back(row);
    }

    if (!opts.out_dir.empty()) {
        std::filesystem::create_directories(opts.out_dir);
        for (const AlgosRun& run : report.runs) {
            const std::string path = opts.out_dir + "/algos_trace_" + run.algo + "_t" +
                                     std::to_string(run.trial) + ".csv";
            write_trace(run.trace, path);
        }
        std::vector<std::string> lines = {"algo,trial,final_rel_error,status"};
        for (const AlgosRun& run : report.runs)
            lines.push_back(run.algo + "," + std::to_string(run.trial) + "," +
                            detail::format_double(run.final_rel_error) + "," +
                            (run.status == SolveStatus::ok ? "ok" : "numeric_failure"));
        benchdetail::write_lines(opts.out_dir + "/algos_final_errors.csv", lines);

        std::vector<std::string> sum_lines = {"algo,median_final_error,q1,q3"};
        for (const AlgosSummaryRow& row : report.summary)
            sum_lines.push_back(row.algo + "," + detail::format_double(row.median_final_error) +
                                "," + detail::format_double(row.q1) + "," +
                                detail::format_double(row.q3));
        benchdetail::write_lines(opts.out_dir + "/algos_summary.csv", sum_lines);
    }
    return report;
}

// ---------------------------------------------------------------------------
// Unmixing protocol: bundled endmembers, four W/H configurations, three SNRs,
// three models; reports matched max-angle medians and quartiles.
// ---------------------------------------------------------------------------

struct UnmixArm {
    bool well_conditioned = true;
    bool stochastic_H = true;
};

struct UnmixingBenchOptions {
    std::size_t trials = 20;
    std::uint64_t seed = 0;
    std::size_t outer_iters = 100;
    std::size_t inner_iters = 20;
    std::size_t n = 1000;
    std::size_t r = 5;
    double lambda0 = 1.0;
    double delta = 0.5;
    bool lambda_autotune = false;  // fixed lambda reproduces the orderings best
    bool spa_init = true;          // W0 from successive-projection columns
    std::vector<double> snrs_db = {30.0, 20.0, 10.0};
    std::vector<UnmixArm> arms = {{true, true}, {true, false}, {false, true}, {false, false}};
    std::string out_dir;
    std::size_t threads = 0;
};

struct UnmixingRun {
    UnmixArm arm;
    double snr_db = 0.0;
    std::size_t trial = 0;
    std::string model;
    double max_angle_deg = 180.0;
    SolveStatus status = SolveStatus::ok;
};

struct UnmixingSummaryRow {
    UnmixArm arm;
    double snr_db = 0.0;
    std::string model;
    double median_max_angle = 0.0;
    double q1 = 0.0;
    double q3 = 0.0;
};

struct UnmixingBenchReport {
    std::vector<UnmixingRun> runs;
    std::vector<UnmixingSummaryRow> summary;

    double median_for(bool well_conditioned, bool stochastic, double snr,
                      const std::string& model) const {
        for (const auto& row : summary)
            if (row.arm.well_conditioned == well_conditioned &&
                row.arm.stochastic_H == stochastic && row.snr_db == snr && row.model == model)
                return row.median_max_angle;
        throw std::invalid_argument("median_for: no such cell");
    }
};

inline const char* arm_name(const UnmixArm& arm) {
    if (arm.well_conditioned && arm.stochastic_H) return "wc_stoch";
    if (arm.well_conditioned && !arm.stochastic_H) return "wc_notstoch";
    if (!arm.well_conditioned && arm.stochastic_H) return "ill_stoch";
    return "ill_notstoch";
}

inline UnmixingBenchReport bench_unmixing(const UnmixingBenchOptions& opts) {
    const Matrix library = bundled_endmembers();
    struct ModelSetup {
        const char* name;
        Variant variant;
        SolverKind solver;
    };
    const std::vector<ModelSetup> models = {
        {"minvol", Variant::MinVol, SolverKind::mm},
        {"maxvol", Variant::MaxVol, SolverKind::adgrad2},
        {"nmaxvol", Variant::NMaxVol, SolverKind::adgrad2},
    };

    struct Task {
        std::size_t arm_idx, snr_idx, trial;
    };
    std::vector<Task> tasks;
    for (std::size_t a = 0; a < opts.arms.size(); ++a)
        for (std::size_t s = 0; s < opts.snrs_db.size(); ++s)
            for (std::size_t t = 0; t < opts.trials; ++t) tasks.push_back({a, s, t});

    UnmixingBenchReport report;
    report.runs.resize(tasks.size() * models.size());
    std::vector<ConvergenceTrace> traces(report.runs.size());

    benchdetail::parallel_for(tasks.size(), benchdetail::worker_count(opts.threads),
                              [&](std::size_t ti) {
        const Task& task = tasks[ti];
        const UnmixArm& arm = opts.arms[task.arm_idx];

        SynthSpec spec;
        spec.m = library.rows();
        spec.n = opts.n;
        spec.r = opts.r;
        spec.dirichlet_alpha = 0.1;
        spec.clip_threshold = 0.05;
        spec.well_conditioned = arm.well_conditioned;
        spec.stochastic_H = arm.stochastic_H;
        spec.snr_db = opts.snrs_db[task.snr_idx];
        // one sub-stream per (arm, snr, trial)
        spec.seed = Rng(opts.seed)
                        .split(task.arm_idx * 1000 + task.snr_idx * 100 + task.trial)
                        .next_u64();
        const GroundTruth gt = generate(spec, library);

        for (std::size_t mi = 0; mi < models.size(); ++mi) {
            SolveConfig cfg;
            cfg.variant = models[mi].variant;
            cfg.params = ModelParams{opts.lambda0, opts.delta, opts.r};
            cfg.outer_iters = opts.outer_iters;
            cfg.inner_iters = opts.inner_iters;
            cfg.lambda_autotune = opts.lambda_autotune;
            cfg.seed = spec.seed + mi;

            UnmixingRun& run = report.runs[ti * models.size() + mi];
            run.arm = arm;
            run.snr_db = opts.snrs_db[task.snr_idx];
            run.trial = task.trial;
            run.model = models[mi].name;
            try {
                auto [w0, h0] = opts.spa_init
                                    ? initialize_spa(gt.X_noisy, opts.r, cfg.seed, cfg.variant)
                                    : initialize(gt.X_noisy, opts.r, cfg.seed, cfg.variant);
                const SolveResult res = run_solver(models[mi].solver, gt.X_noisy, w0, h0, cfg);
                run.status = res.status;
                run.max_angle_deg = match_endmembers(gt.W_true, res.factors.W).max_angle_deg;
                traces[ti * models.size() + mi] = res.trace;
            } catch (const std::exception&) {
                run.status = SolveStatus::numeric_failure;
                run.max_angle_deg = 180.0;  // recorded, run continues
            }
        }
    });

    for (std::size_t a = 0; a < opts.arms.size(); ++a)
        for (std::size_t s = 0; s < opts.snrs_db.size(); ++s)
            for (const auto& model : models) {
                std::vector<double> angles;
                for (const UnmixingRun& run : report.runs)
                    if (run.arm.well_conditioned == opts.arms[a].well_conditioned &&
                        run.arm.stochastic_H == opts.arms[a].stochastic_H &&
                        run.snr_db == opts.snrs_db[s] && run.model == model.name)
                        angles.push_back(run.max_angle_deg);
                UnmixingSummaryRow row;
                row.arm = opts.arms[a];
                row.snr_db = opts.snrs_db[s];
                row.model = model.name;
                row.median_max_angle = median(angles);
                row.q1 = quantile(angles, 0.25);
                row.q3 = quantile(angles, 0.75);
                report.summary.push_back(row);
            }

    if (!opts.out_dir.empty()) {
        std::filesystem::create_directories(opts.out_dir);
        std::vector<std::string> lines = {"config,snr_db,trial,model,max_angle_deg,status"};
        for (const UnmixingRun& run : report.runs)
            lines.push_back(std::string(arm_name(run.arm)) + "," +
                            detail::format_double(run.snr_db) + "," + std::to_string(run.trial) +
                            "," + run.model + "," + detail::format_double(run.max_angle_deg) +
                            "," + (run.status == SolveStatus::ok ? "ok" : "numeric_failure"));
        benchdetail::write_lines(opts.out_dir + "/unmixing_angles.csv", lines);

        std::vector<std::string> sum_lines = {"config,snr_db,model,median_max_angle,q1,q3"};
        for (const UnmixingSummaryRow& row : report.summary)
            sum_lines.push_back(std::string(arm_name(row.arm)) + "," +
                                detail::format_double(row.snr_db) + "," + row.model + "," +
                                detail::format_double(row.median_max_angle) + "," +
                                detail::format_double(row.q1) + "," +
                                detail::format_double(row.q3));
        benchdetail::write_lines(opts.out_dir + "/unmixing_summary.csv", sum_lines);

        for (std::size_t i = 0; i < report.runs.size(); ++i) {
            const UnmixingRun& run = report.runs[i];
            const std::string path = std::string(opts.out_dir) + "/unmixing_trace_" +
                                     arm_name(run.arm) + "_" +
                                     std::to_string(static_cast<int>(run.snr_db)) + "db_" +
                                     run.model + "_t" + std::to_string(run.trial) + ".csv";
            if (!traces[i].records.empty()) write_trace(traces[i], path);
        }
    }
    return report;
}

}  // namespace volnmf
