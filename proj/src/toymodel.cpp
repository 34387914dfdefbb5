#include "jcdimer/toymodel.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <random>
#include <thread>

#include "jcdimer/errors.hpp"
#include "jcdimer/params.hpp"

namespace jcd {

namespace {

constexpr std::int64_t kChunk = 1 << 14;

struct Sums {
    // Difference arrays (plain path) or direct sums (chirp path) per sample.
    std::vector<double> v, v2, n, n2, s, s2;
    explicit Sums(std::size_t m) : v(m, 0.0), v2(m, 0.0), n(m, 0.0), n2(m, 0.0), s(m, 0.0), s2(m, 0.0) {}
};

std::vector<double> time_grid(const ToyConfig& c) {
    const auto m = static_cast<std::size_t>(std::llround(c.t_end() / c.dt_us));
    std::vector<double> t(m + 1);
    for (std::size_t j = 0; j <= m; ++j) t[j] = static_cast<double>(j) * c.dt_us;
    return t;
}

// First grid index with t_j >= tau.
std::size_t first_at_or_after(double tau, double dt, std::size_t limit) {
    const double x = std::ceil(tau / dt);
    if (!(x < static_cast<double>(limit))) return limit;
    return static_cast<std::size_t>(std::max(0.0, x));
}

void run_chunk(const ToyConfig& c, std::int64_t chunk, std::int64_t trials, const std::vector<double>& grid,
               Sums& out) {
    std::seed_seq seq{static_cast<std::uint32_t>(c.seed & 0xffffffffu), static_cast<std::uint32_t>(c.seed >> 32),
                      static_cast<std::uint32_t>(chunk & 0xffffffff), static_cast<std::uint32_t>(chunk >> 32),
                      0x746f7921u};
    std::mt19937_64 rng(seq);
    const double kappa = c.kappa_per_us();
    const std::size_t m = grid.size();
    const double dt = c.dt_us;
    auto amp = [&](int k) { return k > c.N_c ? std::pow(static_cast<double>(k), c.exponent) : 0.0; };
    auto nu = [&](int k) {
        const double base = 2.0 * c.J_mhz;
        if (!c.chirp) return base;
        return base * std::pow(std::max(0.0, 1.0 - static_cast<double>(c.N_c) / k), c.chirp_power);
    };

    for (std::int64_t trial = 0; trial < trials; ++trial) {
        int k = c.N_i;
        double tau = 0.0;
        double phase = 0.0;       // phase at tau (chirp path)
        std::size_t j = 0;        // next grid sample to fill (chirp path)
        out.v[0] += amp(k);
        out.v2[0] += amp(k) * amp(k);
        out.n[0] += k;
        out.n2[0] += static_cast<double>(k) * k;
        while (k > 0) {
            const double u = static_cast<double>((rng() >> 11) + 1) * 0x1.0p-53;
            const double next = tau - std::log(u) / (kappa * k);
            if (c.chirp && k > c.N_c) {
                for (; j < m && grid[j] < next; ++j) {
                    const double y = amp(k) * std::cos(kTwoPi * (phase + nu(k) * (grid[j] - tau)));
                    out.s[j] += y;
                    out.s2[j] += y * y;
                }
                phase += nu(k) * (next - tau);
            }
            tau = next;
            const std::size_t at = first_at_or_after(tau, dt, m);
            if (at >= m) break;
            const double a0 = amp(k), a1 = amp(k - 1);
            out.v[at] += a1 - a0;
            out.v2[at] += a1 * a1 - a0 * a0;
            out.n[at] -= 1.0;
            out.n2[at] += static_cast<double>(k - 1) * (k - 1) - static_cast<double>(k) * k;
            --k;
        }
    }
}

}  // namespace

double ToyConfig::default_t_end() const {
    const double ratio = static_cast<double>(std::max(N_i, 1)) / std::max(N_c, 1);
    return (1.5 * std::log(std::max(ratio, 1.0)) + 2.0) / kappa_per_us();
}

void ToyConfig::validate() const {
    if (N_i <= 0) throw ConfigError("N_i", "must be positive");
    if (N_c < 0) throw ConfigError("N_c", "must be non-negative");
    if (n_trials < 1) throw ConfigError("n_trials", "must be at least 1");
    if (!(kappa_khz > 0.0) || !std::isfinite(kappa_khz)) throw ConfigError("kappa_khz", "must be positive");
    if (!(J_mhz >= 0.0) || !std::isfinite(J_mhz)) throw ConfigError("J_mhz", "must be non-negative");
    if (!(dt_us > 0.0)) throw ConfigError("dt_us", "must be positive");
    if (t_end_us < 0.0 || !std::isfinite(t_end_us)) throw ConfigError("t_end_us", "must be non-negative");
    if (!(t_end() >= dt_us)) throw ConfigError("t_end_us", "shorter than one sample");
    if (!std::isfinite(exponent)) throw ConfigError("exponent", "must be finite");
    if (chirp && !(chirp_power > 0.0)) throw ConfigError("chirp_power", "must be positive");
    if (threads < 1) throw ConfigError("threads", "must be at least 1");
}

ToySeries simulate_toy(const ToyConfig& c) {
    c.validate();
    const auto grid = time_grid(c);
    const std::size_t m = grid.size();
    const std::int64_t chunks = (c.n_trials + kChunk - 1) / kChunk;
    std::vector<Sums> partial;
    partial.reserve(static_cast<std::size_t>(chunks));
    for (std::int64_t i = 0; i < chunks; ++i) partial.emplace_back(m);

    std::atomic<std::int64_t> next{0};
    auto work = [&] {
        for (std::int64_t i; (i = next.fetch_add(1)) < chunks;) {
            const std::int64_t trials = std::min(kChunk, c.n_trials - i * kChunk);
            run_chunk(c, i, trials, grid, partial[static_cast<std::size_t>(i)]);
        }
    };
    const int workers = static_cast<int>(std::min<std::int64_t>(c.threads, chunks));
    std::vector<std::thread> pool;
    for (int w = 1; w < workers; ++w) pool.emplace_back(work);
    work();
    for (auto& th : pool) th.join();

    Sums total(m);
    for (const auto& p : partial) {
        // Integrate each chunk's difference arrays before adding, in chunk order.
        double v = 0, v2 = 0, n = 0, n2 = 0;
        for (std::size_t j = 0; j < m; ++j) {
            v += p.v[j];
            v2 += p.v2[j];
            n += p.n[j];
            n2 += p.n2[j];
            total.v[j] += v;
            total.v2[j] += v2;
            total.n[j] += n;
            total.n2[j] += n2;
            total.s[j] += p.s[j];
            total.s2[j] += p.s2[j];
        }
    }

    ToySeries out;
    out.t = grid;
    out.n_trials = c.n_trials;
    const double nt = static_cast<double>(c.n_trials);
    auto mean_se = [nt](double s, double s2, double& mean, double& se) {
        mean = s / nt;
        const double var = nt > 1 ? std::max(0.0, (s2 - nt * mean * mean) / (nt - 1.0)) : 0.0;
        se = std::sqrt(var / nt);
    };
    for (auto* v : {&out.signal, &out.se_signal, &out.envelope, &out.se_envelope, &out.photons, &out.se_photons})
        v->resize(m);
    for (std::size_t j = 0; j < m; ++j) {
        mean_se(total.v[j], total.v2[j], out.envelope[j], out.se_envelope[j]);
        mean_se(total.n[j], total.n2[j], out.photons[j], out.se_photons[j]);
        if (c.chirp) {
            mean_se(total.s[j], total.s2[j], out.signal[j], out.se_signal[j]);
        } else {
            const double phase = std::cos(kTwoPi * 2.0 * c.J_mhz * grid[j]);
            out.signal[j] = phase * out.envelope[j];
            out.se_signal[j] = std::abs(phase) * out.se_envelope[j];
        }
    }
    return out;
}

ToySeries exact_toy_series(const ToyConfig& c) {
    c.validate();
    if (c.chirp) throw ConfigError("chirp", "no closed form with the frequency chirp");
    ToySeries out;
    out.t = time_grid(c);
    out.n_trials = 0;
    const std::size_t m = out.t.size();
    for (auto* v : {&out.signal, &out.se_signal, &out.envelope, &out.se_envelope, &out.photons, &out.se_photons})
        v->assign(m, 0.0);
    const double kappa = c.kappa_per_us();
    const double lg_n = std::lgamma(c.N_i + 1.0);
    for (std::size_t j = 0; j < m; ++j) {
        const double q = std::exp(-kappa * out.t[j]);
        out.photons[j] = c.N_i * q;
        double e = 0.0;
        if (q >= 1.0) {
            e = c.N_i > c.N_c ? std::pow(static_cast<double>(c.N_i), c.exponent) : 0.0;
        } else {
            const double lq = std::log(q), lp = std::log1p(-q);
            for (int k = c.N_c + 1; k <= c.N_i; ++k) {
                const double lw = lg_n - std::lgamma(k + 1.0) - std::lgamma(c.N_i - k + 1.0) + k * lq +
                                  (c.N_i - k) * lp;
                e += std::exp(lw) * std::pow(static_cast<double>(k), c.exponent);
            }
        }
        out.envelope[j] = e;
        out.signal[j] = std::cos(kTwoPi * 2.0 * c.J_mhz * out.t[j]) * e;
    }
    return out;
}

double mean_first_passage(int N_i, int N_c, double kappa_per_us) {
    double s = 0.0;
    for (int k = std::max(N_c, 0) + 1; k <= N_i; ++k) s += 1.0 / k;
    return s / kappa_per_us;
}

Window toy_fit_window(const ToyConfig& c, double fit_fraction) {
    const double ratio = static_cast<double>(c.N_i) / std::max(c.N_c, 1);
    return {0.0, fit_fraction * std::log(ratio) / c.kappa_per_us()};
}

ToyLaw toy_tc_law(const std::vector<int>& N_i, const ToyConfig& config, const ToyLawOptions& options) {
    if (N_i.size() < 3) throw FitFailed("the log-law fit needs at least three N_i rows");
    for (int n : N_i)
        if (n <= config.N_c) throw ConfigError("N_i", std::to_string(n) + " is not above N_c");
    ToyLaw law;
    for (int n : N_i) {
        ToyConfig row = config;
        row.N_i = n;
        const ToySeries s = options.exact ? exact_toy_series(row) : simulate_toy(row);
        CriticalTimeOptions opt = options.extractor;
        opt.fit_window = toy_fit_window(row, options.fit_fraction);
        TransitionReport r = critical_time(s.t, s.signal, options.exact ? std::vector<double>{} : s.se_signal, opt);
        r.solver = options.exact ? "toy-exact" : "toy";
        r.initial_photons = n;
        r.photons_at_tc = value_at(s.t, s.photons, r.t_c);
        law.N_i.push_back(n);
        law.log_ratio.push_back(std::log(static_cast<double>(n) / std::max(config.N_c, 1)));
        law.reports.push_back(std::move(r));
    }
    std::vector<double> tc;
    for (const auto& r : law.reports) tc.push_back(r.t_c);
    law.fit = fit_line(law.log_ratio, tc);
    return law;
}

}  // namespace jcd
