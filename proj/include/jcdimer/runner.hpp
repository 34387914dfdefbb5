#pragma once

#include <complex>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "jcdimer/analysis.hpp"
#include "jcdimer/io.hpp"
#include "jcdimer/open.hpp"
#include "jcdimer/params.hpp"
#include "jcdimer/semiclassical.hpp"
#include "jcdimer/toymodel.hpp"
#include "jcdimer/unitary.hpp"

namespace jcd::cli {

namespace fs = std::filesystem;

enum class Solver { semiclassical, unitary, mcwf, dense_oracle, toy };

const char* solver_name(Solver s) noexcept;
Solver parse_solver(const std::string& name);  // throws ConfigError("solver", ...)

struct InitialState {
    // Either a list of left-cavity photon numbers (Z = 1), or explicit
    // amplitudes.
    std::vector<double> photons;
    std::optional<std::pair<cplx, cplx>> alpha;
};

struct RunConfig {
    Solver solver = Solver::unitary;
    std::string task;  // solver specific; empty picks the default
    DimerParams params;
    ToyConfig toy;
    std::vector<int> toy_rows;  // N_i values for the toy tier
    InitialState initial;
    double t_end_us = 0.0;
    double output_dt_us = 0.0;

    PropagatorConfig propagator;
    McwfConfig mcwf;
    double cutoff_c = 6.0;
    std::size_t n_traj = 0;
    std::uint64_t seed = 1;
    int workers = 1;

    // Semiclassical search settings.
    LocalizationCriterion localization;
    double rel_tol = 1e-3;
    int manifold = 1;

    // Transition extraction; present when any critical.* key is given.
    std::optional<CriticalTimeOptions> critical;
    double fit_fraction = 0.4;
    double fit_min_periods = 4.0;

    io::KeyValueConfig source;
    std::string hash() const;  // SHA-256 of the canonical key = value text
};

// Validates keys (unit suffixes included) and values.
RunConfig parse_run_config(const io::KeyValueConfig& cfg);

struct RunOutcome {
    fs::path dir;
    std::vector<std::string> outputs;  // file names relative to dir
    nlohmann::json summary;            // scalar results, also in the manifest
    std::vector<std::string> warnings;
};

// Runs the solver and writes manifest.json plus the data files into `dir`,
// every file atomically. Solver errors propagate unchanged.
RunOutcome execute_run(const RunConfig& config, const fs::path& dir);

// Output root: $JCDIMER_OUTPUT_ROOT when set, else ./runs.
fs::path default_output_root();

struct Axis {
    std::string key;
    std::vector<double> values;
};

// "list:a,b,c", "lin:start,stop,count", "log:start,stop,count". Throws
// ConfigError naming the axis.
Axis parse_axis(const std::string& key, const std::string& spec);

struct SweepSpec {
    io::KeyValueConfig base;   // run keys shared by every point
    std::vector<Axis> axes;    // Cartesian product, first axis slowest
    std::size_t points() const;
    io::KeyValueConfig point_config(std::size_t index) const;
    std::vector<double> point_values(std::size_t index) const;
};

// Sweep file: "axis.<key> = <spec>" lines define axes, "[base]" keys (or an
// include via "base_config = path") define the shared run.
SweepSpec parse_sweep(const io::KeyValueConfig& cfg, const fs::path& sweep_dir);

struct SweepOutcome {
    std::size_t done = 0, skipped = 0, failed = 0;
    std::vector<std::string> failures;
    std::vector<std::string> warnings;
    fs::path dir;
};

// Points run on `workers` threads; only the calling thread writes the sweep
// manifest. Completed points whose config and output hashes verify are
// skipped. summary.csv rows follow point order.
SweepOutcome run_sweep(const SweepSpec& spec, const fs::path& dir, int workers);

// Applies an extractor to an existing run directory and writes analysis.json.
struct AnalyzeRequest {
    std::string extractor;  // period, revival, critical, envelope
    std::string channel = "xi_L";
    Window window;
    double expected_us = 0.0;
    double half_width = 0.5;
    CriticalTimeOptions critical;
};
nlohmann::json analyze_run(const fs::path& dir, const AnalyzeRequest& req);

// Joins the transition reports found in the given run directories.
nlohmann::json compare_runs(const std::vector<fs::path>& dirs);

std::string presets_text();

}  // namespace jcd::cli
