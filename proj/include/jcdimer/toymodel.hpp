#pragma once

#include <cstdint>
#include <vector>

#include "jcdimer/analysis.hpp"

namespace jcd {

struct ToyConfig {
    int N_i = 500;
    int N_c = 20;
    double kappa_khz = 225.0;   // per-photon escape rate, no 2 pi
    double J_mhz = 8.7;         // signal oscillates at 2 J
    std::int64_t n_trials = 1'000'000;
    double dt_us = 0.005;
    double t_end_us = 0.0;      // 0 picks default_t_end()
    std::uint64_t seed = 1;
    double exponent = 1.0;      // amplitude ~ N^exponent
    bool chirp = false;         // frequency 2J (1 - N_c/N)^chirp_power per trial
    double chirp_power = 1.0;
    int threads = 1;

    double kappa_per_us() const noexcept { return kappa_khz * 1e-3; }
    double default_t_end() const;
    double t_end() const { return t_end_us > 0.0 ? t_end_us : default_t_end(); }
    // Throws ConfigError naming the offending field.
    void validate() const;
};

struct ToySeries {
    std::vector<double> t;
    std::vector<double> signal, se_signal;       // mean of N^p cos(phase) while N > N_c
    std::vector<double> envelope, se_envelope;   // mean of N^p while N > N_c
    std::vector<double> photons, se_photons;     // mean of N(t)
    std::int64_t n_trials = 0;
};

// Exact-event simulation of the pure-death process, reduced over fixed
// chunks of trials in chunk order.
ToySeries simulate_toy(const ToyConfig& config);

// Expectations over N ~ Binomial(N_i, e^{-kappa t}) on the same grid; the
// standard errors are zero.
ToySeries exact_toy_series(const ToyConfig& config);

// Mean time for the pure-death process to first reach N_c: sum_{k=N_c+1}^{N_i} 1/(k kappa).
double mean_first_passage(int N_i, int N_c, double kappa_per_us);

struct ToyLawOptions {
    CriticalTimeOptions extractor;   // fit_window is replaced per row
    double fit_fraction = 0.25;      // fit window [0, fit_fraction * ln(N_i/N_c)/kappa]
    bool exact = false;              // use exact_toy_series instead of sampling
};

struct ToyLaw {
    std::vector<int> N_i;
    std::vector<double> log_ratio;   // ln(N_i / N_c)
    std::vector<TransitionReport> reports;
    LinearFit fit;                   // t_c against log_ratio
};

// Throws FitFailed for fewer than three rows, ConfigError for N_i <= N_c.
ToyLaw toy_tc_law(const std::vector<int>& N_i, const ToyConfig& config, const ToyLawOptions& options = {});

Window toy_fit_window(const ToyConfig& config, double fit_fraction);

}  // namespace jcd
