#include <cstdio>
#include <iostream>
#include <limits>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "jcdimer/errors.hpp"
#include "jcdimer/runner.hpp"

namespace {

namespace cli = jcd::cli;
namespace fs = std::filesystem;

constexpr int kOk = 0, kConfig = 2, kSolver = 3, kPartial = 4;

fs::path output_dir(const std::string& given, const fs::path& config, const std::string& hash) {
    if (!given.empty()) return given;
    return cli::default_output_root() / (config.stem().string() + "-" + hash.substr(0, 12));
}

int run_verb(const std::string& config_path, const std::string& out) {
    const auto kv = jcd::io::KeyValueConfig::load(config_path);
    const auto config = cli::parse_run_config(kv);
    const fs::path dir = output_dir(out, config_path, config.hash());
    std::cerr << "run " << cli::solver_name(config.solver) << " -> " << dir.string() << "\n";
    const auto res = cli::execute_run(config, dir);
    for (const auto& w : res.warnings) std::cerr << "warning: " << w << "\n";
    std::cout << res.summary.dump(2) << "\n";
    return kOk;
}

int sweep_verb(const std::string& sweep_path, const std::string& out, int workers) {
    const auto kv = jcd::io::KeyValueConfig::load(sweep_path);
    const auto spec = cli::parse_sweep(kv, fs::path(sweep_path).parent_path());
    const fs::path dir =
        output_dir(out, sweep_path, jcd::io::sha256_hex(kv.canonical()));
    std::cerr << "sweep of " << spec.points() << " points -> " << dir.string() << "\n";
    const auto res = cli::run_sweep(spec, dir, workers);
    for (const auto& w : res.warnings) std::cerr << "warning: " << w << "\n";
    std::cout << "done " << res.done << ", reused " << res.skipped << ", failed " << res.failed << "\n";
    for (const auto& f : res.failures) std::cerr << "failed " << f << "\n";
    return res.failed ? kPartial : kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Jaynes-Cummings dimer simulator"};
    app.require_subcommand(1);

    std::string config_path, out;
    auto* run = app.add_subcommand("run", "Run one configuration");
    run->add_option("config", config_path, "Run config file")->required()->check(CLI::ExistingFile);
    run->add_option("-o,--out", out, "Output directory (default: output root / <config>-<hash>)");

    std::string sweep_path;
    int workers = 1;
    auto* sweep = app.add_subcommand("sweep", "Run a parameter sweep");
    sweep->add_option("sweep", sweep_path, "Sweep file")->required()->check(CLI::ExistingFile);
    sweep->add_option("-o,--out", out, "Sweep directory");
    sweep->add_option("-w,--workers", workers, "Concurrent points")->check(CLI::PositiveNumber);

    std::vector<std::string> dirs;
    cli::AnalyzeRequest req;
    bool compare = false;
    double t0 = -std::numeric_limits<double>::infinity(), t1 = std::numeric_limits<double>::infinity();
    auto* analyze = app.add_subcommand("analyze", "Apply an extractor to existing run outputs");
    analyze->add_option("dirs", dirs, "Run directories")->required()->check(CLI::ExistingDirectory);
    analyze->add_flag("--compare", compare, "Join the t_c reports of the given runs");
    analyze->add_option("-e,--extractor", req.extractor, "period, revival, envelope or critical");
    analyze->add_option("-c,--channel", req.channel, "series.csv column");
    analyze->add_option("--t0-us", t0, "Window start");
    analyze->add_option("--t1-us", t1, "Window end (fit window for critical)");
    analyze->add_option("--expected-us", req.expected_us, "Expected revival time");
    analyze->add_option("--half-width", req.half_width, "Revival search half width, fraction of expected");
    analyze->add_option("--chi", req.critical.chi, "Departure threshold in e-folds");
    analyze->add_option("--bootstrap", req.critical.bootstrap, "Bootstrap resamples");

    app.add_subcommand("presets", "Print the parameter presets");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kConfig;
    }

    try {
        if (*run) return run_verb(config_path, out);
        if (*sweep) return sweep_verb(sweep_path, out, workers);
        if (*analyze) {
            if (compare) {
                std::cout << cli::compare_runs({dirs.begin(), dirs.end()}).dump(2) << "\n";
                return kOk;
            }
            if (req.extractor.empty()) throw jcd::ConfigError("extractor", "required unless --compare is given");
            req.window = {t0, t1};
            for (const auto& d : dirs) std::cout << cli::analyze_run(d, req).dump(2) << "\n";
            return kOk;
        }
        std::cout << cli::presets_text();
        return kOk;
    } catch (const jcd::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kConfig;
    } catch (const jcd::SolverError& e) {
        std::cerr << "solver error: " << e.what() << "\n";
        return kSolver;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kSolver;
    }
}
