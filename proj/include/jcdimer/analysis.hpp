#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "json.hpp"

namespace jcd {

struct ObservableSeries;

struct Window {
    double t0 = -std::numeric_limits<double>::infinity();
    double t1 = std::numeric_limits<double>::infinity();
    bool contains(double t) const noexcept { return t >= t0 && t <= t1; }
};

struct LinearFit {
    double slope = 0.0;
    double intercept = 0.0;
    double residual_rms = 0.0;
    std::size_t points = 0;
};

// Ordinary least squares y = intercept + slope * x. Throws FitFailed for
// fewer than two points or degenerate x.
LinearFit fit_line(const std::vector<double>& x, const std::vector<double>& y);

struct PeriodReport {
    double period = 0.0;
    std::size_t crossings = 0;
    double t_first = 0.0;
    double t_last = 0.0;
    Window window;
};

// Crossings of the window mean, located by linear interpolation; the period
// is twice the mean spacing of consecutive crossings. Throws TooFewCrossings
// below three crossings.
PeriodReport oscillation_period(const std::vector<double>& t, const std::vector<double>& y, Window window = {});
PeriodReport oscillation_period(const ObservableSeries& series, const std::string& channel, Window window = {});

struct Peak {
    double t;
    double value;
};

// Local maxima (y[k] > y[k-1], y[k] >= y[k+1]) refined by a parabola through
// the three samples.
std::vector<Peak> local_maxima(const std::vector<double>& t, const std::vector<double>& y, Window window = {});

struct RevivalReport {
    double t_r = 0.0;
    double peak = 0.0;
    Window window;
};

// Largest lobe inside [(1 - half_width) * expected, (1 + half_width) * expected],
// refined by quadratic interpolation. Throws NoLobe when the series is flat
// or the maximum sits on the window edge.
RevivalReport revival_time(const std::vector<double>& t, const std::vector<double>& y, double expected,
                           double half_width = 0.5);

struct EnvelopeFit {
    enum class Model { exponential, exponential_cosine };
    Window window;
    Model model = Model::exponential;
    double rate = 0.0;        // 1/us, log y = log amplitude - rate t
    double frequency = 0.0;   // MHz, only for exponential_cosine
    double amplitude = 0.0;
    double residual_rms = 0.0;  // in log y
    std::size_t points = 0;

    double operator()(double t) const;
};

// Log-domain least squares on the lobe maxima inside the window.
EnvelopeFit fit_envelope(const std::vector<double>& t, const std::vector<double>& y, Window window);

// Log-domain least squares on every positive sample inside the window, for
// signals without oscillation such as a photon number.
EnvelopeFit fit_exponential(const std::vector<double>& t, const std::vector<double>& y, Window window);

struct CriticalTimeOptions {
    Window fit_window;
    double chi = 1.0;                 // departure threshold, log units
    double max_fit_residual = 0.35;   // BadEnvelopeFit above this (log units)
    int bootstrap = 200;              // parametric bootstrap replicates
    std::uint64_t bootstrap_seed = 1;
    double confidence = 0.95;
};

struct TransitionReport {
    double t_c = 0.0;
    double ci_low = 0.0;
    double ci_high = 0.0;
    int bootstrap_used = 0;
    double photons_at_tc = std::numeric_limits<double>::quiet_NaN();
    EnvelopeFit fit;
    CriticalTimeOptions options;
    std::string solver;
    double initial_photons = std::numeric_limits<double>::quiet_NaN();
};

// First time the lobe maxima fall e^-chi below the fitted early envelope,
// interpolated between the bracketing maxima. `se` (may be empty) feeds the
// bootstrap interval. Throws BadEnvelopeFit, NoDeparture.
TransitionReport critical_time(const std::vector<double>& t, const std::vector<double>& y,
                               const std::vector<double>& se, const CriticalTimeOptions& options);

// N at t_c by linear interpolation of a photon-number series.
double value_at(const std::vector<double>& t, const std::vector<double>& y, double when);

nlohmann::json to_json(const TransitionReport& r);
nlohmann::json to_json(const EnvelopeFit& f);
nlohmann::json to_json(const PeriodReport& r);
nlohmann::json to_json(const RevivalReport& r);

// Joins reports keyed by (initial photons, solver) into rows of a table.
nlohmann::json comparison_table(const std::vector<TransitionReport>& reports);

}  // namespace jcd
