#include "jcdimer/params.hpp"

#include <cmath>

#include "jcdimer/errors.hpp"

namespace jcd {

void DimerParams::validate() const {
    auto finite = [](const char* field, double v) {
        if (!std::isfinite(v)) throw ConfigError(field, "must be finite");
    };
    finite("nu_c_mhz", nu_c);
    finite("nu_a_mhz", nu_a);
    finite("g_mhz", g);
    finite("j_mhz", J);
    finite("kappa_mhz", kappa);
    finite("gamma_mhz", gamma);
    if (nu_c <= 0.0) throw ConfigError("nu_c_mhz", "must be > 0");
    if (g < 0.0) throw ConfigError("g_mhz", "must be >= 0");
    if (J < 0.0) throw ConfigError("j_mhz", "must be >= 0");
    if (kappa < 0.0) throw ConfigError("kappa_mhz", "must be >= 0");
    if (gamma < 0.0) throw ConfigError("gamma_mhz", "must be >= 0");
}

DimerParams device_preset() {
    return DimerParams{6340.0, 6340.0, 190.0, 8.7, 0.225, 0.0};
}

DimerParams scaled_preset() {
    return DimerParams{6340.0, 6340.0, 87.0, 8.7, 0.225, 0.0};
}

DimerParams dissipative_preset() {
    return DimerParams{6340.0, 6340.0, 4.0, 1.0, 0.04, 0.0};
}

std::vector<NamedPreset> all_presets() {
    return {
        {"device", "experimental device: g=190, J=8.7, kappa=0.225 MHz", device_preset()},
        {"scaled", "desk-scale dimer g/J=10 (N_c^qu = 25)", scaled_preset()},
        {"dissipative", "small dimer g/J=4 for MCWF transition scans", dissipative_preset()},
    };
}

DimerParams preset_by_name(const std::string& name) {
    for (const auto& p : all_presets())
        if (p.name == name) return p.params;
    throw ConfigError("preset", "unknown preset '" + name + "'");
}

}  // namespace jcd
