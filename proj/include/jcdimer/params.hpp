#pragma once

#include <numbers>
#include <string>
#include <vector>

namespace jcd {

// Rates are stored as ordinary frequencies in MHz and times in microseconds.
// The only place the 2*pi factor enters is angular(): every propagator,
// equation of motion and dissipator multiplies its rates through it.
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

constexpr double angular(double rate_mhz) noexcept { return kTwoPi * rate_mhz; }

struct DimerParams {
    double nu_c = 6340.0;  // cavity frequency (MHz)
    double nu_a = 6340.0;  // qubit frequency (MHz)
    double g = 190.0;      // qubit-cavity coupling (MHz)
    double J = 8.7;        // photon hopping (MHz)
    double kappa = 0.225;  // cavity decay (MHz, Lindblad prefactor kappa/2)
    double gamma = 0.0;    // qubit decay (MHz)

    // Throws ConfigError naming the offending field.
    void validate() const;

    // e-folding rate of the photon number for a bare damped cavity, in 1/us.
    double photon_decay_rate() const noexcept { return angular(kappa); }

    // Converts an observed photon-number decay rate (kHz, as read off a decay
    // curve) into the configured kappa in MHz.
    static double kappa_from_observed_khz(double observed_khz) noexcept {
        return observed_khz * 1e-3 / kTwoPi;
    }

    bool operator==(const DimerParams&) const = default;
};

// Device values reported for the experimental dimer.
DimerParams device_preset();

// Desk-scale dimer with g/J = 10, putting the quantum critical photon number
// g^2/(4 J^2) at 25.
DimerParams scaled_preset();

// Parameter set used for the dissipative transition scans: small g/J so that
// N_c stays at a handful of photons and a full MCWF ensemble fits on a desk.
DimerParams dissipative_preset();

struct NamedPreset {
    std::string name;
    std::string description;
    DimerParams params;
};

std::vector<NamedPreset> all_presets();

// Returns the preset called `name` or throws ConfigError.
DimerParams preset_by_name(const std::string& name);

}  // namespace jcd
