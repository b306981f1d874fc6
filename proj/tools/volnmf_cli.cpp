// volnmf: volume-regularized NMF experiments.
//
// Subcommands:
//   factorize  run one solve on a matrix file, write W/H/trace
//   synth      generate a synthetic unmixing dataset from a JSON spec
//   bench      run the algorithm-comparison or unmixing protocol
//   check      run the property/oracle suites
//
// Exit codes: 0 success, 2 graceful numeric failure (outputs still written),
// 64 usage error, 74 I/O error.

#include <cstdio>
#include <exception>
#include <string>

#include <CLI11.hpp>

#include "volnmf/bench.hpp"
#include "volnmf/check.hpp"
#include "volnmf/io.hpp"
#include "volnmf/matrix.hpp"
#include "volnmf/models.hpp"
#include "volnmf/solvers.hpp"
#include "volnmf/synth.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitNumeric = 2;
constexpr int kExitUsage = 64;
constexpr int kExitIo = 74;

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

int run_factorize(const std::string& input, std::size_t rank, const std::string& variant_str,
                  const std::string& solver_str, double lambda, double delta, double rho,
                  std::size_t outer, std::size_t inner, std::uint64_t seed, bool autotune,
                  const std::string& out_w, const std::string& out_h,
                  const std::string& out_trace) {
    const volnmf::Variant variant = volnmf::variant_from_string(variant_str);
    const volnmf::SolverKind solver = volnmf::solver_from_string(solver_str);
    if (!volnmf::solver_supports(solver, variant))
        throw UsageError(std::string("solver ") + volnmf::solver_name(solver) +
                         " does not support variant " + volnmf::variant_name(variant) +
                         " (admm/admm-adgrad require maxvol, mm requires minvol,"
                         " adgrad2 requires maxvol or nmaxvol)");

    const volnmf::Matrix x = volnmf::read_matrix(input);

    volnmf::SolveConfig cfg;
    cfg.variant = variant;
    cfg.params = volnmf::ModelParams{lambda, delta, rank};
    cfg.rho = rho;
    cfg.outer_iters = outer;
    cfg.inner_iters = inner;
    cfg.seed = seed;
    cfg.lambda_autotune = autotune;
    cfg.validate();

    auto [w0, h0] = volnmf::initialize(x, rank, seed, variant);
    const volnmf::SolveResult res = volnmf::run_solver(solver, x, w0, h0, cfg);

    if (!out_w.empty()) volnmf::write_matrix(res.factors.W, out_w);
    if (!out_h.empty()) volnmf::write_matrix(res.factors.H, out_h);
    if (!out_trace.empty()) volnmf::write_trace(res.trace, out_trace);

    if (res.status == volnmf::SolveStatus::numeric_failure) {
        std::fprintf(stderr, "numeric failure after %zu iterations; last finite iterate written\n",
                     res.trace.records.size());
        return kExitNumeric;
    }
    if (!res.trace.records.empty()) {
        const auto& last = res.trace.records.back();
        std::fprintf(stderr, "done: %zu iterations, rel fidelity %.6g, objective %.6g (%.2fs)\n",
                     last.iter, last.rel_fidelity, last.objective, last.seconds);
    }
    return kExitOk;
}

int run_synth(const std::string& spec_path, const std::string& out_x, const std::string& out_w,
              const std::string& out_h) {
    const volnmf::SynthSpec spec = volnmf::read_synth_spec(spec_path);
    const volnmf::Matrix library = volnmf::bundled_endmembers();
    const volnmf::GroundTruth gt = volnmf::generate(spec, library);
    if (!out_x.empty()) volnmf::write_matrix(gt.X_noisy, out_x);
    if (!out_w.empty()) volnmf::write_matrix(gt.W_true, out_w);
    if (!out_h.empty()) volnmf::write_matrix(gt.H_true, out_h);
    return kExitOk;
}

int run_bench(const std::string& protocol, std::size_t trials, std::uint64_t seed,
              const std::string& out_dir, std::size_t outer) {
    if (protocol == "algos") {
        volnmf::AlgosBenchOptions opts;
        opts.trials = trials;
        opts.seed = seed;
        opts.out_dir = out_dir;
        if (outer > 0) opts.outer_iters = outer;
        const volnmf::AlgosBenchReport report = volnmf::bench_algos(opts);
        std::printf("algo,median_final_error,q1,q3,mean_seconds\n");
        for (const auto& row : report.summary)
            std::printf("%s,%.6g,%.6g,%.6g,%.3f\n", row.algo.c_str(), row.median_final_error,
                        row.q1, row.q3, row.mean_seconds);
        return kExitOk;
    }
    if (protocol == "unmixing") {
        volnmf::UnmixingBenchOptions opts;
        opts.trials = trials;
        opts.seed = seed;
        opts.out_dir = out_dir;
        if (outer > 0) opts.outer_iters = outer;
        const volnmf::UnmixingBenchReport report = volnmf::bench_unmixing(opts);
        std::printf("config,snr_db,model,median_max_angle,q1,q3\n");
        for (const auto& row : report.summary)
            std::printf("%s,%g,%s,%.4f,%.4f,%.4f\n", volnmf::arm_name(row.arm), row.snr_db,
                        row.model.c_str(), row.median_max_angle, row.q1, row.q3);
        return kExitOk;
    }
    throw UsageError("unknown protocol \"" + protocol + "\" (expected algos|unmixing)");
}

int run_check(const std::string& suite) {
    const auto results = volnmf::run_check_suite(suite);
    bool all_pass = true;
    for (const auto& res : results) {
        std::printf("%s %s (%s)\n", res.pass ? "ok  " : "FAIL", res.name.c_str(),
                    res.detail.c_str());
        all_pass = all_pass && res.pass;
    }
    std::printf("%zu properties, %s\n", results.size(), all_pass ? "all passed" : "FAILURES");
    return all_pass ? kExitOk : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"volume-regularized nonnegative matrix factorization"};
    app.require_subcommand(1);

    // factorize
    auto* fac = app.add_subcommand("factorize", "factorize a matrix file");
    std::string input, variant = "maxvol", solver = "adgrad2";
    std::string out_w, out_h, out_trace;
    std::size_t rank = 0, outer = 500, inner = 20;
    double lambda = 1.0, delta = 1.0, rho = 0.01;
    std::uint64_t seed = 0;
    bool autotune = false;
    fac->add_option("--input", input, "input matrix CSV")->required();
    fac->add_option("--rank", rank, "factorization rank r")->required();
    fac->add_option("--variant", variant, "minvol|maxvol|nmaxvol");
    fac->add_option("--solver", solver, "adgrad2|admm|admm-adgrad|mm");
    fac->add_option("--lambda", lambda, "volume penalty weight");
    fac->add_option("--delta", delta, "logdet shift");
    fac->add_option("--rho", rho, "ADMM penalty");
    fac->add_option("--outer", outer, "outer iterations");
    fac->add_option("--inner", inner, "inner iterations per block");
    fac->add_option("--seed", seed, "RNG seed");
    fac->add_option("--autotune-lambda", autotune, "enable the lambda auto-tuner (true|false)");
    fac->add_option("--out-w", out_w, "output path for W");
    fac->add_option("--out-h", out_h, "output path for H");
    fac->add_option("--out-trace", out_trace, "output path for the convergence trace");

    // synth
    auto* syn = app.add_subcommand("synth", "generate a synthetic dataset");
    std::string spec_path, syn_x, syn_w, syn_h;
    syn->add_option("--spec", spec_path, "JSON spec file")->required();
    syn->add_option("--out-x", syn_x, "output path for X");
    syn->add_option("--out-w", syn_w, "output path for the true W");
    syn->add_option("--out-h", syn_h, "output path for the true H");

    // bench
    auto* ben = app.add_subcommand("bench", "run a benchmark protocol");
    std::string protocol, out_dir;
    std::size_t trials = 0, bench_outer = 0;
    std::uint64_t bench_seed = 0;
    ben->add_option("--protocol", protocol, "algos|unmixing")->required();
    ben->add_option("--trials", trials, "number of trials");
    ben->add_option("--seed", bench_seed, "master seed");
    ben->add_option("--out-dir", out_dir, "directory for traces and summaries");
    ben->add_option("--outer", bench_outer, "outer iterations (default 500 algos / 100 unmixing)");

    // check
    auto* chk = app.add_subcommand("check", "run property suites");
    std::string suite = "all";
    chk->add_option("--suite", suite, "oracles|gradients|projections|all");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);  // --help
        app.exit(e);
        return kExitUsage;
    }

    try {
        if (fac->parsed())
            return run_factorize(input, rank, variant, solver, lambda, delta, rho, outer, inner,
                                 seed, autotune, out_w, out_h, out_trace);
        if (syn->parsed()) return run_synth(spec_path, syn_x, syn_w, syn_h);
        if (ben->parsed()) {
            if (trials == 0) trials = protocol == "algos" ? 10 : 20;
            return run_bench(protocol, trials, bench_seed, out_dir, bench_outer);
        }
        if (chk->parsed()) return run_check(suite);
    } catch (const volnmf::io_error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitIo;
    } catch (const volnmf::format_error& e) {
        // unreadable or malformed file content
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitIo;
    } catch (const UsageError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitUsage;
    } catch (const std::invalid_argument& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitUsage;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return kExitUsage;
}
