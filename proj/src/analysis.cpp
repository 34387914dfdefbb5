#include "jcdimer/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <random>

#include "jcdimer/errors.hpp"
#include "jcdimer/unitary.hpp"

namespace jcd {

namespace {

void check_lengths(const std::vector<double>& t, const std::vector<double>& y) {
    if (t.size() != y.size()) throw FitFailed("time and value series differ in length");
}

// Vertex of the parabola through three samples around k.
Peak refine(const std::vector<double>& t, const std::vector<double>& y, std::size_t k) {
    const double ym = y[k - 1], y0 = y[k], yp = y[k + 1];
    const double denom = ym - 2.0 * y0 + yp;
    if (!(denom < 0.0)) return {t[k], y0};
    const double delta = std::clamp(0.5 * (ym - yp) / denom, -0.5, 0.5);
    const double h = delta >= 0.0 ? t[k + 1] - t[k] : t[k] - t[k - 1];
    return {t[k] + delta * h, y0 - 0.25 * (ym - yp) * delta};
}

double percentile(std::vector<double> v, double q) {
    std::sort(v.begin(), v.end());
    const double pos = q * static_cast<double>(v.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

const char* model_name(EnvelopeFit::Model m) {
    return m == EnvelopeFit::Model::exponential ? "exponential" : "exponential_cosine";
}

// Largest value in consecutive bins of width `width` starting at `start`.
// Interior maxima are refined; a bin that is identically zero reports zero.
std::vector<Peak> binned_maxima(const std::vector<double>& t, const std::vector<double>& y, double start,
                                double width) {
    std::vector<Peak> out;
    std::size_t k = 0;
    while (k < t.size() && t[k] < start) ++k;
    for (double lo = start; k < t.size(); lo += width) {
        const double hi = lo + width;
        std::size_t best = k;
        std::size_t end = k;
        while (end < t.size() && t[end] < hi) {
            if (y[end] > y[best]) best = end;
            ++end;
        }
        if (end == k) {
            if (lo > t.back()) break;
            continue;
        }
        // Drop a trailing partial bin.
        if (end == t.size() && t.back() < hi - 0.5 * width) break;
        Peak p{t[best], y[best]};
        if (best > 0 && best + 1 < t.size() && y[best] > y[best - 1] && y[best] >= y[best + 1])
            p = refine(t, y, best);
        out.push_back(p);
        k = end;
    }
    return out;
}

struct Departure {
    double t_c;
    EnvelopeFit fit;
};

Departure locate_departure(const std::vector<double>& t, const std::vector<double>& y,
                           const CriticalTimeOptions& opt) {
    EnvelopeFit fit = fit_envelope(t, y, opt.fit_window);
    if (!(fit.residual_rms <= opt.max_fit_residual))
        throw BadEnvelopeFit("early-window envelope residual " + std::to_string(fit.residual_rms) +
                             " exceeds " + std::to_string(opt.max_fit_residual));
    const double spacing = 1.0 / fit.frequency;
    const auto first = local_maxima(t, y, opt.fit_window);
    const double start = first.front().t - 0.5 * spacing;
    const auto lobes = binned_maxima(t, y, start, spacing);
    const double threshold = std::exp(-opt.chi);
    double prev_t = 0.0, prev_r = 0.0;
    bool have_prev = false;
    for (const auto& p : lobes) {
        const double r = p.value / fit(p.t);
        if (r < threshold) {
            if (!have_prev) return {p.t, fit};
            const double f = (prev_r - threshold) / (prev_r - r);
            return {prev_t + f * (p.t - prev_t), fit};
        }
        prev_t = p.t;
        prev_r = r;
        have_prev = true;
    }
    throw NoDeparture("signal stays within e^-" + std::to_string(opt.chi) + " of the fitted envelope");
}

}  // namespace

LinearFit fit_line(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size()) throw FitFailed("fit_line: x and y differ in length");
    if (x.size() < 2) throw FitFailed("fit_line needs at least two points");
    const double n = static_cast<double>(x.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
    }
    if (!(sxx > 0.0)) throw FitFailed("fit_line: all x values coincide");
    LinearFit f;
    f.slope = sxy / sxx;
    f.intercept = my - f.slope * mx;
    double ss = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double r = y[i] - (f.intercept + f.slope * x[i]);
        ss += r * r;
    }
    f.residual_rms = std::sqrt(ss / n);
    f.points = x.size();
    return f;
}

PeriodReport oscillation_period(const std::vector<double>& t, const std::vector<double>& y, Window window) {
    check_lengths(t, y);
    std::vector<std::size_t> idx;
    double mean = 0.0;
    for (std::size_t i = 0; i < t.size(); ++i)
        if (window.contains(t[i])) {
            idx.push_back(i);
            mean += y[i];
        }
    if (idx.size() < 3) throw TooFewCrossings("fewer than three samples in the window");
    mean /= static_cast<double>(idx.size());

    std::vector<double> up, down;
    for (std::size_t j = 1; j < idx.size(); ++j) {
        const double a = y[idx[j - 1]] - mean, b = y[idx[j]] - mean;
        if ((a < 0.0) == (b < 0.0)) continue;
        const double tc = t[idx[j - 1]] + a / (a - b) * (t[idx[j]] - t[idx[j - 1]]);
        (a < 0.0 ? up : down).push_back(tc);
    }
    const std::size_t crossings = up.size() + down.size();
    if (crossings < 3) throw TooFewCrossings(std::to_string(crossings) + " crossings in the window, need 3");

    // Same-direction crossings are insensitive to an offset of the level.
    double sum = 0.0;
    int parts = 0;
    for (const auto* c : {&up, &down}) {
        if (c->size() < 2) continue;
        sum += (c->back() - c->front()) / static_cast<double>(c->size() - 1);
        ++parts;
    }
    PeriodReport r;
    r.period = sum / parts;
    r.crossings = crossings;
    r.t_first = std::min(up.empty() ? down.front() : up.front(), down.empty() ? up.front() : down.front());
    r.t_last = std::max(up.empty() ? down.back() : up.back(), down.empty() ? up.back() : down.back());
    r.window = window;
    return r;
}

PeriodReport oscillation_period(const ObservableSeries& series, const std::string& channel, Window window) {
    return oscillation_period(series.t, series.column(channel), window);
}

std::vector<Peak> local_maxima(const std::vector<double>& t, const std::vector<double>& y, Window window) {
    check_lengths(t, y);
    std::vector<Peak> out;
    for (std::size_t k = 1; k + 1 < t.size(); ++k) {
        if (!window.contains(t[k])) continue;
        if (y[k] > y[k - 1] && y[k] >= y[k + 1]) out.push_back(refine(t, y, k));
    }
    return out;
}

RevivalReport revival_time(const std::vector<double>& t, const std::vector<double>& y, double expected,
                           double half_width) {
    check_lengths(t, y);
    if (!(expected > 0.0) || !(half_width > 0.0 && half_width < 1.0))
        throw NoLobe("revival window needs expected > 0 and 0 < half_width < 1");
    const Window w{(1.0 - half_width) * expected, (1.0 + half_width) * expected};
    std::size_t first = t.size(), last = 0, best = t.size();
    double lo = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < t.size(); ++i) {
        if (!w.contains(t[i])) continue;
        first = std::min(first, i);
        last = i;
        lo = std::min(lo, y[i]);
        if (best == t.size() || y[i] > y[best]) best = i;
    }
    if (best == t.size()) throw NoLobe("no samples inside the revival window");
    const double hi = y[best];
    if (!(hi > 0.0) || hi - lo <= 1e-12 * std::abs(hi)) throw NoLobe("series is flat inside the revival window");
    if (best == first || best == last) throw NoLobe("largest value sits on the revival window edge");
    const Peak p = refine(t, y, best);
    return {p.t, p.value, w};
}

double EnvelopeFit::operator()(double t) const { return amplitude * std::exp(-rate * t); }

EnvelopeFit fit_envelope(const std::vector<double>& t, const std::vector<double>& y, Window window) {
    check_lengths(t, y);
    const auto peaks = local_maxima(t, y, window);
    std::vector<double> x, ly;
    for (const auto& p : peaks)
        if (p.value > 0.0) {
            x.push_back(p.t);
            ly.push_back(std::log(p.value));
        }
    if (x.size() < 3) throw BadEnvelopeFit("fewer than three positive lobe maxima in the fit window");
    const LinearFit lf = fit_line(x, ly);
    EnvelopeFit f;
    f.window = window;
    f.model = EnvelopeFit::Model::exponential_cosine;
    f.rate = -lf.slope;
    f.amplitude = std::exp(lf.intercept);
    f.frequency = static_cast<double>(x.size() - 1) / (x.back() - x.front());
    f.residual_rms = lf.residual_rms;
    f.points = x.size();
    return f;
}

EnvelopeFit fit_exponential(const std::vector<double>& t, const std::vector<double>& y, Window window) {
    check_lengths(t, y);
    std::vector<double> x, ly;
    for (std::size_t i = 0; i < t.size(); ++i)
        if (window.contains(t[i]) && y[i] > 0.0) {
            x.push_back(t[i]);
            ly.push_back(std::log(y[i]));
        }
    if (x.size() < 2) throw BadEnvelopeFit("fewer than two positive samples in the fit window");
    const LinearFit lf = fit_line(x, ly);
    EnvelopeFit f;
    f.window = window;
    f.model = EnvelopeFit::Model::exponential;
    f.rate = -lf.slope;
    f.amplitude = std::exp(lf.intercept);
    f.residual_rms = lf.residual_rms;
    f.points = x.size();
    return f;
}

TransitionReport critical_time(const std::vector<double>& t, const std::vector<double>& y,
                               const std::vector<double>& se, const CriticalTimeOptions& options) {
    check_lengths(t, y);
    if (!se.empty() && se.size() != y.size()) throw FitFailed("standard-error series differs in length");
    const auto main = locate_departure(t, y, options);
    TransitionReport r;
    r.t_c = main.t_c;
    r.fit = main.fit;
    r.options = options;
    r.ci_low = r.ci_high = r.t_c;
    if (se.empty() || options.bootstrap <= 0) return r;

    std::mt19937_64 rng(options.bootstrap_seed);
    std::normal_distribution<double> normal;
    std::vector<double> samples, yb(y.size());
    for (int b = 0; b < options.bootstrap; ++b) {
        for (std::size_t i = 0; i < y.size(); ++i) yb[i] = y[i] + se[i] * normal(rng);
        try {
            samples.push_back(locate_departure(t, yb, options).t_c);
        } catch (const SolverError&) {
        }
    }
    r.bootstrap_used = static_cast<int>(samples.size());
    if (!samples.empty()) {
        const double tail = 0.5 * (1.0 - options.confidence);
        r.ci_low = std::min(percentile(samples, tail), r.t_c);
        r.ci_high = std::max(percentile(samples, 1.0 - tail), r.t_c);
    }
    return r;
}

double value_at(const std::vector<double>& t, const std::vector<double>& y, double when) {
    check_lengths(t, y);
    if (t.empty() || when < t.front() || when > t.back()) return std::numeric_limits<double>::quiet_NaN();
    const auto it = std::upper_bound(t.begin(), t.end(), when);
    if (it == t.end()) return y.back();
    const auto k = static_cast<std::size_t>(it - t.begin());
    if (k == 0) return y.front();
    const double f = (when - t[k - 1]) / (t[k] - t[k - 1]);
    return y[k - 1] + f * (y[k] - y[k - 1]);
}

namespace {
nlohmann::json window_json(const Window& w) {
    auto finite_or_null = [](double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); };
    return {{"t0_us", finite_or_null(w.t0)}, {"t1_us", finite_or_null(w.t1)}};
}
nlohmann::json number_or_null(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); }
}  // namespace

nlohmann::json to_json(const EnvelopeFit& f) {
    return {{"window", window_json(f.window)},
            {"model", model_name(f.model)},
            {"rate_per_us", f.rate},
            {"frequency_mhz", f.frequency},
            {"amplitude", f.amplitude},
            {"residual_rms_log", f.residual_rms},
            {"points", f.points}};
}

nlohmann::json to_json(const TransitionReport& r) {
    return {{"t_c_us", r.t_c},
            {"ci_us", {r.ci_low, r.ci_high}},
            {"confidence", r.options.confidence},
            {"bootstrap_requested", r.options.bootstrap},
            {"bootstrap_used", r.bootstrap_used},
            {"bootstrap_seed", r.options.bootstrap_seed},
            {"chi", r.options.chi},
            {"max_fit_residual", r.options.max_fit_residual},
            {"photons_at_tc", number_or_null(r.photons_at_tc)},
            {"initial_photons", number_or_null(r.initial_photons)},
            {"solver", r.solver},
            {"fit", to_json(r.fit)}};
}

nlohmann::json to_json(const PeriodReport& r) {
    return {{"period_us", r.period},
            {"crossings", r.crossings},
            {"t_first_us", r.t_first},
            {"t_last_us", r.t_last},
            {"window", window_json(r.window)}};
}

nlohmann::json to_json(const RevivalReport& r) {
    return {{"t_r_us", r.t_r}, {"peak", r.peak}, {"window", window_json(r.window)}};
}

nlohmann::json comparison_table(const std::vector<TransitionReport>& reports) {
    std::map<double, std::map<std::string, const TransitionReport*>> rows;
    for (const auto& r : reports) rows[r.initial_photons][r.solver] = &r;
    nlohmann::json table = nlohmann::json::array();
    for (const auto& [n, by_solver] : rows) {
        nlohmann::json row;
        row["N_i"] = number_or_null(n);
        for (const auto& [solver, r] : by_solver)
            row["solvers"][solver] = {{"t_c_us", r->t_c},
                                      {"ci_us", {r->ci_low, r->ci_high}},
                                      {"photons_at_tc", number_or_null(r->photons_at_tc)}};
        table.push_back(std::move(row));
    }
    return table;
}

}  // namespace jcd
