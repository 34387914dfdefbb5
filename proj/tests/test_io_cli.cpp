#include <cstdlib>
#include <filesystem>

#include "doctest.h"
#include "jcdimer/errors.hpp"
#include "jcdimer/io.hpp"
#include "jcdimer/runner.hpp"

using namespace jcd;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("jcdimer_test_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::string field_of(const std::string& text) {
    try {
        cli::parse_run_config(io::KeyValueConfig::parse(text));
    } catch (const ConfigError& e) {
        return e.field();
    }
    return "<no error>";
}

const char* kUnitary = R"(solver = unitary
preset = scaled
photons = 2
t_end_us = 0.02
output_dt_us = 0.005
)";

}  // namespace

TEST_CASE("sha256 of a known vector") {
    CHECK(io::sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST_CASE("atomic write replaces the file and leaves no temp files") {
    const auto d = scratch("atomic");
    io::atomic_write(d / "a.txt", "one");
    io::atomic_write(d / "a.txt", "two");
    CHECK(io::read_file(d / "a.txt") == "two");
    CHECK(std::distance(fs::directory_iterator(d), fs::directory_iterator()) == 1);
}

TEST_CASE("csv round-trips at full precision") {
    const std::vector<double> a{0.1, 1.0 / 3.0, -2e-300}, b{1e300, 0.0, 7.0};
    const auto t = io::parse_csv(io::csv_table({"a", "b"}, {&a, &b}));
    CHECK(t.column("a") == a);
    CHECK(t.column("b") == b);
    CHECK_THROWS_AS(t.column("c"), FormatError);
}

TEST_CASE("state container round-trips and rejects damage") {
    const auto sp = HilbertSpace::build(3, 4);
    const auto psi = dimer_initial_state(cplx(0.7, 0.2), cplx(0.1, -0.3), sp, 0.05);
    const auto bytes = io::encode_state(sp, psi);
    const auto f = io::decode_state(bytes);
    CHECK(f.kind == io::PayloadKind::state_vector);
    CHECK(f.eta == 3);
    CHECK(f.cap == 4);
    CHECK(f.dim == sp.dim());
    CHECK((f.data - psi).norm() == 0.0);
    const auto single = io::decode_state(io::encode_state(sp, psi, true));
    CHECK((single.data - psi).norm() < 1e-6);
    auto bad = bytes;
    bad[0] = 'X';
    CHECK_THROWS_AS(io::decode_state(bad), FormatError);
    CHECK_THROWS_AS(io::decode_state(bytes.substr(0, bytes.size() - 5)), FormatError);
    const Eigen::MatrixXcd rho = psi * psi.adjoint();
    const auto dm = io::decode_state(io::encode_density(sp, rho));
    CHECK(dm.kind == io::PayloadKind::density_matrix);
    CHECK(dm.data.size() == sp.dim() * sp.dim());
}

TEST_CASE("key-value config: sections, comments, duplicates") {
    const auto c = io::KeyValueConfig::parse("a = 1 # note\n[critical]\nchi = 2\n");
    CHECK(c.get_double("a") == 1.0);
    CHECK(c.get_double("critical.chi") == 2.0);
    CHECK_THROWS_AS(io::KeyValueConfig::parse("a = 1\na = 2\n"), ConfigError);
    CHECK(c.canonical() == io::KeyValueConfig::parse("[critical]\nchi = 2\n[]\na=1\n").canonical());
}

TEST_CASE("config errors name the offending field") {
    CHECK(field_of("solver = unitary\ng_mhz = 5 MHz\nphotons = 1\nt_end_us = 1\noutput_dt_us = 0.1\n") == "g_mhz");
    CHECK(field_of("solver = unitary\ng_khz = 5\nphotons = 1\nt_end_us = 1\noutput_dt_us = 0.1\n") == "g_khz");
    CHECK(field_of("solver = unitary\nphotons = 1\nt_end_us = 1\n") == "output_dt_us");
    CHECK(field_of("solver = quantum\n") == "solver");
    CHECK(field_of("solver = mcwf\nphotons = 1\nt_end_us = 1\noutput_dt_us = 0.1\n") == "n_traj");
    CHECK(field_of("solver = unitary\nphotons = 1\nt_end_us = 1\nt_end_ns = 1000\noutput_dt_us = 0.1\n") ==
          "t_end_ns");
    CHECK(field_of("solver = toy\nn_i = 500\nkappa_khz = -1\n") == "kappa_khz");
    CHECK(field_of("solver = unitary\nj_mhz = -1\nphotons = 1\nt_end_us = 1\noutput_dt_us = 0.1\n") == "j_mhz");
    CHECK(field_of(kUnitary) == "<no error>");
}

TEST_CASE("nanosecond keys convert to microseconds") {
    const auto c = cli::parse_run_config(io::KeyValueConfig::parse(
        "solver = unitary\nphotons = 1\nt_end_ns = 250\noutput_dt_ns = 5\nkappa_khz = 225\n"));
    CHECK(c.t_end_us == doctest::Approx(0.25));
    CHECK(c.output_dt_us == doctest::Approx(0.005));
    CHECK(c.params.kappa == doctest::Approx(0.225));
}

TEST_CASE("axes parse and empty axes are rejected") {
    CHECK(cli::parse_axis("g_mhz", "list:1,2,3").values == std::vector<double>{1, 2, 3});
    const auto lin = cli::parse_axis("g_mhz", "lin:0,1,5").values;
    CHECK(lin.size() == 5);
    CHECK(lin[2] == doctest::Approx(0.5));
    const auto lg = cli::parse_axis("photons", "log:1,100,3").values;
    CHECK(lg[1] == doctest::Approx(10.0));
    CHECK_THROWS_AS(cli::parse_axis("g_mhz", "list:"), ConfigError);
    CHECK_THROWS_AS(cli::parse_axis("g_mhz", "lin:0,1,0"), ConfigError);
    CHECK_THROWS_AS(cli::parse_axis("g_mhz", "grid:0,1"), ConfigError);
}

TEST_CASE("sweep points: first axis slowest") {
    cli::SweepSpec s;
    s.axes = {{"a", {1, 2}}, {"b", {10, 20, 30}}};
    CHECK(s.points() == 6);
    CHECK(s.point_values(0) == std::vector<double>{1, 10});
    CHECK(s.point_values(2) == std::vector<double>{1, 30});
    CHECK(s.point_values(3) == std::vector<double>{2, 10});
    CHECK(s.point_config(4).get_string("b") == "20");
}

TEST_CASE("identical runs write identical bytes") {
    const auto d = scratch("determinism");
    const auto cfg = cli::parse_run_config(io::KeyValueConfig::parse(kUnitary));
    const auto a = cli::execute_run(cfg, d / "a");
    const auto b = cli::execute_run(cfg, d / "b");
    REQUIRE(a.outputs == b.outputs);
    for (const auto& name : a.outputs) CHECK(io::read_file(d / "a" / name) == io::read_file(d / "b" / name));
    CHECK(io::read_file(d / "a" / "manifest.json") == io::read_file(d / "b" / "manifest.json"));
    const auto m = nlohmann::json::parse(io::read_file(d / "a" / "manifest.json"));
    CHECK(m["config_hash"] == cfg.hash());
    CHECK(m["outputs"]["series.csv"] == io::sha256_file(d / "a" / "series.csv"));
}

TEST_CASE("sweep resume skips verified points and reruns damaged ones") {
    const auto d = scratch("sweep");
    const auto spec = cli::parse_sweep(
        io::KeyValueConfig::parse(std::string("axis.photons = list:1,2\n[base]\n") + R"(solver = unitary
preset = scaled
t_end_us = 0.02
output_dt_us = 0.005
)"),
        d);
    auto r = cli::run_sweep(spec, d / "out", 2);
    CHECK(r.done == 2);
    CHECK(r.failed == 0);
    const auto summary = io::read_file(d / "out" / "summary.csv");
    r = cli::run_sweep(spec, d / "out", 2);
    CHECK(r.skipped == 2);
    CHECK(r.done == 0);
    CHECK(io::read_file(d / "out" / "summary.csv") == summary);
    io::atomic_write(d / "out" / "points" / "0001" / "series.csv", "t\n0\n");
    r = cli::run_sweep(spec, d / "out", 1);
    CHECK(r.skipped == 1);
    CHECK(r.done == 1);
    CHECK(io::read_file(d / "out" / "summary.csv") == summary);
}

TEST_CASE("failing sweep points are reported, others complete") {
    const auto d = scratch("partial");
    // photons = 1e9 exceeds the memory budget.
    const auto spec = cli::parse_sweep(io::KeyValueConfig::parse(std::string("axis.photons = list:1,1e9\n[base]\n") +
                                                                 "solver = unitary\nt_end_us = 0.01\noutput_dt_us = "
                                                                 "0.005\n"),
                                       d);
    const auto r = cli::run_sweep(spec, d, 1);
    CHECK(r.done == 1);
    CHECK(r.failed == 1);
    REQUIRE(r.failures.size() == 1);
    CHECK(r.failures[0].find("point 1") == 0);
    const auto m = nlohmann::json::parse(io::read_file(d / "sweep_manifest.json"));
    CHECK(m["points"][1]["status"] == "failed");
}

TEST_CASE("sweeps warn when trajectory seeds overlap") {
    const auto d = scratch("seeds");
    const auto spec = cli::parse_sweep(
        io::KeyValueConfig::parse("axis.kappa_mhz = list:0.5,1\n[base]\nsolver = mcwf\nphotons = 0.2\n"
                                  "g_mhz = 1\nj_mhz = 0.5\nt_end_us = 0.2\noutput_dt_us = 0.1\nn_traj = 4\n"),
        d);
    const auto r = cli::run_sweep(spec, d, 1);
    REQUIRE(r.warnings.size() == 1);
    CHECK(r.warnings[0].find("SeedReuse") == 0);
}

TEST_CASE("sweep files reject stray keys and need an axis") {
    CHECK_THROWS_AS(cli::parse_sweep(io::KeyValueConfig::parse("[base]\nsolver = unitary\n"), "."), ConfigError);
    CHECK_THROWS_AS(cli::parse_sweep(io::KeyValueConfig::parse("axis.photons = list:1\nfoo = 1\n"), "."),
                    ConfigError);
}

TEST_CASE("analyze applies an extractor to a finished run") {
    const auto d = scratch("analyze");
    auto kv = io::KeyValueConfig::parse(kUnitary);
    kv.set("g_mhz", "0");
    kv.set("t_end_us", "0.3");
    kv.set("output_dt_us", "0.001");
    cli::execute_run(cli::parse_run_config(kv), d);
    cli::AnalyzeRequest req;
    req.extractor = "period";
    req.channel = "N_L";
    const auto r = cli::analyze_run(d, req);
    CHECK(r["period_us"].get<double>() == doctest::Approx(1.0 / (2 * 8.7)).epsilon(1e-3));
    CHECK(fs::exists(d / "analysis.json"));
    req.extractor = "median";
    CHECK_THROWS_AS(cli::analyze_run(d, req), ConfigError);
}

TEST_CASE("output root honours the environment") {
    setenv("JCDIMER_OUTPUT_ROOT", "/tmp/somewhere", 1);
    CHECK(cli::default_output_root() == fs::path("/tmp/somewhere"));
    unsetenv("JCDIMER_OUTPUT_ROOT");
    CHECK(cli::default_output_root() == fs::path("runs"));
}
