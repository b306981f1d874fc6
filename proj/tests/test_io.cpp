#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <string>

#include "volnmf/io.hpp"
#include "volnmf/matrix.hpp"
#include "volnmf/rng.hpp"

using namespace volnmf;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() / ("volnmf_io_" + std::to_string(::getpid()));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string file(const std::string& name) const { return (path / name).string(); }
};

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::trunc);
    out << text;
}

std::string read_bytes(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

}  // namespace

TEST_CASE("read_matrix: basic forms") {
    TempDir dir;
    write_text(dir.file("a.csv"), "1,2\n3,4\n");
    const Matrix a = read_matrix(dir.file("a.csv"));
    CHECK(a.rows() == 2);
    CHECK(a.cols() == 2);
    CHECK(a(0, 0) == 1.0);
    CHECK(a(1, 1) == 4.0);

    write_text(dir.file("b.csv"), "1e-3\n");
    const Matrix b = read_matrix(dir.file("b.csv"));
    CHECK(b.rows() == 1);
    CHECK(b.cols() == 1);
    CHECK(b(0, 0) == 0.001);

    write_text(dir.file("h.csv"), "col1,col2\n1,2\n");
    const Matrix h = read_matrix(dir.file("h.csv"), true);
    CHECK(h.rows() == 1);
    CHECK(h(0, 1) == 2.0);
}

TEST_CASE("read_matrix: error reporting") {
    TempDir dir;
    write_text(dir.file("ragged.csv"), "1,2\n3\n");
    try {
        read_matrix(dir.file("ragged.csv"));
        FAIL("expected format_error");
    } catch (const format_error& e) {
        CHECK(std::string(e.what()).find("line 2") != std::string::npos);
    }

    write_text(dir.file("token.csv"), "1,2\n3,abc\n");
    try {
        read_matrix(dir.file("token.csv"));
        FAIL("expected format_error");
    } catch (const format_error& e) {
        const std::string msg = e.what();
        CHECK(msg.find("line 2") != std::string::npos);
        CHECK(msg.find("column 2") != std::string::npos);
    }

    CHECK_THROWS_AS(read_matrix(dir.file("missing.csv")), io_error);
}

TEST_CASE("write_matrix: exact round trip, refusal cases, determinism") {
    TempDir dir;
    Rng rng(1);
    Matrix m(5, 7);
    for (std::size_t i = 0; i < m.size(); ++i)
        m.data()[i] = rng.uniform(-1.0, 1.0) * std::pow(10.0, rng.uniform(-8.0, 8.0));
    write_matrix(m, dir.file("m.csv"));
    const Matrix back = read_matrix(dir.file("m.csv"));
    REQUIRE(back.rows() == m.rows());
    REQUIRE(back.cols() == m.cols());
    for (std::size_t i = 0; i < m.size(); ++i) CHECK(back.data()[i] == m.data()[i]);

    write_matrix(m, dir.file("m2.csv"));
    CHECK(read_bytes(dir.file("m.csv")) == read_bytes(dir.file("m2.csv")));

    CHECK_THROWS_AS(write_matrix(Matrix(), dir.file("empty.csv")), std::invalid_argument);
    Matrix bad(2, 2, 1.0);
    bad(0, 1) = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(write_matrix(bad, dir.file("nan.csv")), std::invalid_argument);
}

TEST_CASE("trace files: round trip and format checks") {
    TempDir dir;
    ConvergenceTrace trace;
    TraceRecord rec;
    rec.iter = 1;
    rec.seconds = 0.25;
    rec.rel_fidelity = 0.5;
    rec.penalty = -1.25;
    rec.objective = 0.75;
    trace.records.push_back(rec);
    write_trace(trace, dir.file("t.csv"));
    const ConvergenceTrace back = read_trace(dir.file("t.csv"));
    REQUIRE(back.records.size() == 1);
    CHECK(back.records[0].iter == 1);
    CHECK(back.records[0].seconds == 0.0);  // zeroed on write for reproducibility
    CHECK(back.records[0].rel_fidelity == 0.5);
    CHECK(!back.records[0].lagrangian.has_value());

    // ADMM-style rows carry the lagrangian column
    trace.records[0].lagrangian = -0.125;
    TraceRecord rec2 = trace.records[0];
    rec2.iter = 2;
    trace.records.push_back(rec2);
    write_trace(trace, dir.file("t2.csv"));
    const ConvergenceTrace back2 = read_trace(dir.file("t2.csv"));
    REQUIRE(back2.records.size() == 2);
    CHECK(back2.records[1].lagrangian.has_value());
    CHECK(*back2.records[1].lagrangian == -0.125);

    write_text(dir.file("badhdr.csv"), "iter,seconds,relfid,penalty,objective,lagrangian\n");
    CHECK_THROWS_AS(read_trace(dir.file("badhdr.csv")), format_error);

    write_text(dir.file("badorder.csv"),
               std::string(kTraceHeader) + "\n1,0,0,0,0,\n3,0,0,0,0,\n");
    CHECK_THROWS_AS(read_trace(dir.file("badorder.csv")), format_error);
}

TEST_CASE("trace files: long traces keep iter monotone") {
    TempDir dir;
    ConvergenceTrace trace;
    for (std::size_t k = 1; k <= 500; ++k) {
        TraceRecord rec;
        rec.iter = k;
        rec.rel_fidelity = 1.0 / static_cast<double>(k);
        rec.objective = rec.rel_fidelity;
        trace.records.push_back(rec);
    }
    write_trace(trace, dir.file("long.csv"));
    const ConvergenceTrace back = read_trace(dir.file("long.csv"));
    REQUIRE(back.records.size() == 500);
    for (std::size_t k = 0; k < 500; ++k) CHECK(back.records[k].iter == k + 1);
}

TEST_CASE("synth spec JSON: parsing and unknown-key rejection") {
    const auto spec = parse_synth_spec(nlohmann::json{
        {"m", 100}, {"n", 50}, {"r", 4}, {"dirichlet_alpha", 0.2}, {"snr_db", 25.0},
        {"stochastic_H", false}, {"seed", 9}});
    CHECK(spec.m == 100);
    CHECK(spec.r == 4);
    CHECK(spec.snr_db.has_value());
    CHECK(*spec.snr_db == 25.0);
    CHECK(!spec.stochastic_H);

    const auto noiseless = parse_synth_spec(nlohmann::json{{"snr_db", nullptr}});
    CHECK(!noiseless.snr_db.has_value());

    try {
        parse_synth_spec(nlohmann::json{{"m", 100}, {"bogus_key", 1}});
        FAIL("expected format_error");
    } catch (const format_error& e) {
        CHECK(std::string(e.what()).find("bogus_key") != std::string::npos);
    }

    CHECK_THROWS_AS(parse_synth_spec(nlohmann::json{{"dirichlet_alpha", 0.0}}),
                    std::invalid_argument);
}

TEST_CASE("solve config JSON: parsing and unknown-key rejection") {
    const auto cfg = parse_solve_config(nlohmann::json{
        {"variant", "nmaxvol"},
        {"params", {{"lambda", 2.5}, {"delta", 0.5}, {"rank", 6}}},
        {"outer_iters", 50},
        {"lambda_autotune", true}});
    CHECK(cfg.variant == Variant::NMaxVol);
    CHECK(cfg.params.lambda == 2.5);
    CHECK(cfg.params.rank == 6);
    CHECK(cfg.outer_iters == 50);
    CHECK(cfg.lambda_autotune);

    try {
        parse_solve_config(nlohmann::json{{"params", {{"lambda", 1.0}, {"mystery", 2}}}});
        FAIL("expected format_error");
    } catch (const format_error& e) {
        CHECK(std::string(e.what()).find("mystery") != std::string::npos);
    }

    CHECK_THROWS_AS(parse_solve_config(nlohmann::json{{"rho", -1.0}}), std::invalid_argument);
}
