#include "jcdimer/hilbert.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "jcdimer/errors.hpp"

namespace jcd {

const char* site_name(Site s) noexcept { return s == Site::left ? "L" : "R"; }

std::size_t HilbertSpace::required_bytes(std::size_t dim) noexcept {
    // ~40 complex work vectors (Krylov basis + scratch), ~7 stored operator
    // entries per row (value + column), basis bookkeeping.
    constexpr std::size_t per_state = 40 * 16 + 7 * (16 + 4) + 40;
    return dim * per_state;
}

HilbertSpace HilbertSpace::build(int eta, std::optional<int> excitation_cap, std::size_t memory_budget_bytes) {
    if (eta < 0) throw ConfigError("eta", "photon cutoff must be >= 0");
    if (eta > 60000) throw ConfigError("eta", "photon cutoff too large");
    if (excitation_cap && *excitation_cap < 0) throw ConfigError("excitation_cap", "must be >= 0");

    HilbertSpace sp;
    sp.eta_ = eta;
    if (excitation_cap && *excitation_cap < 2 * eta + 2) sp.cap_ = excitation_cap;

    const std::size_t site_dim = static_cast<std::size_t>(sp.site_dim());
    const std::size_t square = site_dim * site_dim;

    std::size_t dim = square;
    if (sp.cap_) {
        dim = 0;
        for (std::size_t a = 0; a < site_dim; ++a)
            for (std::size_t b = 0; b < site_dim; ++b)
                if (static_cast<int>(a / 2 + a % 2 + b / 2 + b % 2) <= *sp.cap_) ++dim;
    }
    const std::size_t need = required_bytes(dim);
    if (need > memory_budget_bytes || dim > static_cast<std::size_t>(std::numeric_limits<std::int32_t>::max())) {
        throw MemoryBudgetExceeded("eta=" + std::to_string(eta) + " gives total_dim=" + std::to_string(dim) +
                                   ", needing ~" + std::to_string(need) + " bytes (budget " +
                                   std::to_string(memory_budget_bytes) + " bytes)");
    }

    sp.lookup_.assign(square, -1);
    sp.states_.reserve(dim);
    for (std::size_t a = 0; a < site_dim; ++a) {
        for (std::size_t b = 0; b < site_dim; ++b) {
            BasisState s{static_cast<int>(a / 2), static_cast<int>(a % 2), static_cast<int>(b / 2),
                         static_cast<int>(b % 2)};
            if (sp.cap_ && s.excitations() > *sp.cap_) continue;
            sp.lookup_[a * site_dim + b] = static_cast<std::int32_t>(sp.states_.size());
            sp.states_.push_back(s);
        }
    }

    for (int k = 0; k < 2; ++k) {
        sp.photons_[k].resize(dim);
        sp.qubits_[k].resize(dim);
        sp.lower_photon_[k].resize(dim);
        sp.lower_qubit_[k].resize(dim);
    }
    for (std::size_t i = 0; i < dim; ++i) {
        const auto& s = sp.states_[i];
        sp.photons_[0][i] = static_cast<std::uint16_t>(s.n_left);
        sp.photons_[1][i] = static_cast<std::uint16_t>(s.n_right);
        sp.qubits_[0][i] = static_cast<std::uint8_t>(s.q_left);
        sp.qubits_[1][i] = static_cast<std::uint8_t>(s.q_right);

        auto target = [&](BasisState t) -> std::int32_t {
            auto f = sp.find(t);
            return f ? static_cast<std::int32_t>(*f) : -1;
        };
        sp.lower_photon_[0][i] = s.n_left > 0 ? target({s.n_left - 1, s.q_left, s.n_right, s.q_right}) : -1;
        sp.lower_photon_[1][i] = s.n_right > 0 ? target({s.n_left, s.q_left, s.n_right - 1, s.q_right}) : -1;
        sp.lower_qubit_[0][i] = s.q_left > 0 ? target({s.n_left, 0, s.n_right, s.q_right}) : -1;
        sp.lower_qubit_[1][i] = s.q_right > 0 ? target({s.n_left, s.q_left, s.n_right, 0}) : -1;
    }
    return sp;
}

std::optional<std::int64_t> HilbertSpace::find(const BasisState& s) const {
    if (s.n_left < 0 || s.n_left > eta_ || s.n_right < 0 || s.n_right > eta_) return std::nullopt;
    if (s.q_left < 0 || s.q_left > 1 || s.q_right < 0 || s.q_right > 1) return std::nullopt;
    const std::size_t sd = static_cast<std::size_t>(site_dim());
    const std::size_t a = static_cast<std::size_t>(2 * s.n_left + s.q_left);
    const std::size_t b = static_cast<std::size_t>(2 * s.n_right + s.q_right);
    const auto v = lookup_[a * sd + b];
    if (v < 0) return std::nullopt;
    return v;
}

std::int64_t HilbertSpace::flatten(const BasisState& s) const {
    auto f = find(s);
    if (!f) throw std::out_of_range("basis state outside the truncated space");
    return *f;
}

int cutoff_for(double mean_photons, double c) {
    if (mean_photons < 0.0) throw ConfigError("n", "mean photon number must be >= 0");
    return static_cast<int>(std::ceil(mean_photons + c * std::sqrt(mean_photons)));
}

namespace {

// log of the Poisson weight e^{-m} m^n / n!
double log_poisson(double mean, int n) {
    if (mean == 0.0) return n == 0 ? 0.0 : -std::numeric_limits<double>::infinity();
    return -mean + n * std::log(mean) - std::lgamma(n + 1.0);
}

}  // namespace

double coherent_tail_mass(double mean, int eta) {
    if (mean == 0.0) return 0.0;
    // Sum the tail directly to avoid cancellation in 1 - cdf.
    double tail = 0.0;
    for (int n = eta + 1;; ++n) {
        const double p = std::exp(log_poisson(mean, n));
        tail += p;
        if (n > mean && p < 1e-18 * std::max(tail, 1e-300)) break;
        if (n > eta + 100000) break;
    }
    return tail;
}

SiteState coherent_site_state(cplx alpha, int eta, double tail_tol) {
    if (eta < 0) throw ConfigError("eta", "photon cutoff must be >= 0");
    const double mean = std::norm(alpha);
    SiteState out;
    out.tail_mass = coherent_tail_mass(mean, eta);
    if (out.tail_mass > tail_tol) {
        throw TailMassExceeded("coherent state |alpha|^2=" + std::to_string(mean) + " truncated at eta=" +
                               std::to_string(eta) + " discards mass " + std::to_string(out.tail_mass) +
                               " > tolerance " + std::to_string(tail_tol) + " (suggested eta " +
                               std::to_string(sized_cutoff(mean, 6.0, tail_tol)) + ")");
    }
    out.amplitudes = StateVector::Zero(2 * (eta + 1));
    const double r = std::abs(alpha);
    const double phase = std::arg(alpha);
    for (int n = 0; n <= eta; ++n) {
        double mag;
        if (r == 0.0) {
            mag = n == 0 ? 1.0 : 0.0;
        } else {
            mag = std::exp(0.5 * log_poisson(mean, n));
        }
        out.amplitudes[2 * n] = std::polar(mag, n * phase);
    }
    out.amplitudes /= out.amplitudes.norm();
    return out;
}

StateVector dimer_initial_state(cplx alpha_left, cplx alpha_right, const HilbertSpace& space, double tail_tol) {
    const auto left = coherent_site_state(alpha_left, space.eta(), tail_tol);
    const auto right = coherent_site_state(alpha_right, space.eta(), tail_tol);
    StateVector psi(space.dim());
    for (std::int64_t i = 0; i < space.dim(); ++i) {
        const auto& s = space.unflatten(i);
        psi[i] = left.amplitudes[2 * s.n_left + s.q_left] * right.amplitudes[2 * s.n_right + s.q_right];
    }
    const double kept = psi.squaredNorm();
    if (1.0 - kept > tail_tol) {
        throw TailMassExceeded("excitation cap " + std::to_string(space.max_excitations()) + " discards mass " +
                               std::to_string(1.0 - kept) + " > tolerance " + std::to_string(tail_tol));
    }
    psi /= std::sqrt(kept);
    return psi;
}

int sized_cutoff(double mean_photons, double c, double tail_tol) {
    int eta = cutoff_for(mean_photons, c);
    while (coherent_tail_mass(mean_photons, eta) > tail_tol) ++eta;
    return eta;
}

HilbertSpace space_for_coherent(double mean_left, double mean_right, double c, std::size_t memory_budget_bytes) {
    const int eta_l = sized_cutoff(mean_left, c);
    const int eta_r = sized_cutoff(mean_right, c);
    const int eta = std::max(eta_l, eta_r);
    // Hopping moves the left population onto the right site, so both sites
    // need the full cutoff; the cap bounds the total.
    return HilbertSpace::build(eta, eta_l + eta_r, memory_budget_bytes);
}

SparseOperator build_hamiltonian(const DimerParams& params, const HilbertSpace& space, Frame frame) {
    params.validate();
    const double cav = frame == Frame::lab ? params.nu_c : 0.0;
    const double qub = frame == Frame::lab ? params.nu_a : params.nu_a - params.nu_c;
    std::vector<Triplet> trip;
    trip.reserve(static_cast<std::size_t>(space.dim()) * 7);
    for (std::int64_t i = 0; i < space.dim(); ++i) {
        const auto& s = space.unflatten(i);
        const double diag = cav * (s.n_left + s.n_right) + qub * (s.q_left + s.q_right);
        if (diag != 0.0) trip.push_back({i, i, diag});

        // Jaynes-Cummings exchange: g (s+ a + s- a+) on each site, generated
        // from the |n, e> -> |n+1, g> direction plus its conjugate.
        for (Site site : {Site::left, Site::right}) {
            const int n = site == Site::left ? s.n_left : s.n_right;
            const int q = site == Site::left ? s.q_left : s.q_right;
            if (q == 1 && params.g != 0.0) {
                BasisState t = s;
                if (site == Site::left) {
                    t.n_left += 1;
                    t.q_left = 0;
                } else {
                    t.n_right += 1;
                    t.q_right = 0;
                }
                if (auto j = space.find(t)) {
                    const double v = params.g * std::sqrt(static_cast<double>(n + 1));
                    trip.push_back({*j, i, v});
                    trip.push_back({i, *j, v});
                }
            }
        }

        // Hopping -J a+_L a_R and its conjugate.
        if (s.n_right > 0 && params.J != 0.0) {
            BasisState t = s;
            t.n_left += 1;
            t.n_right -= 1;
            if (auto j = space.find(t)) {
                const double v = -params.J * std::sqrt(static_cast<double>(s.n_right) * (s.n_left + 1));
                trip.push_back({*j, i, v});
                trip.push_back({i, *j, v});
            }
        }
    }
    return SparseOperator::from_triplets(space.dim(), std::move(trip));
}

Eigen::VectorXd decay_diagonal(const DimerParams& params, const HilbertSpace& space) {
    Eigen::VectorXd d(space.dim());
    for (std::int64_t i = 0; i < space.dim(); ++i) {
        const auto& s = space.unflatten(i);
        d[i] = params.kappa * (s.n_left + s.n_right) + params.gamma * (s.q_left + s.q_right);
    }
    return d;
}

ObservableTag parse_observable(std::string_view tag) {
    if (tag == "N_T") return {ObservableKind::NT, Site::left};
    const auto us = tag.rfind('_');
    if (us == std::string_view::npos) throw UnknownObservable("unknown observable '" + std::string(tag) + "'");
    const auto head = tag.substr(0, us);
    const auto tail = tag.substr(us + 1);
    Site site;
    if (tail == "L")
        site = Site::left;
    else if (tail == "R")
        site = Site::right;
    else
        throw UnknownObservable("unknown observable site in '" + std::string(tag) + "'");
    if (head == "I") return {ObservableKind::I, site};
    if (head == "Q") return {ObservableKind::Q, site};
    if (head == "N") return {ObservableKind::N, site};
    if (head == "sz") return {ObservableKind::SigmaZ, site};
    if (head == "IQ2") return {ObservableKind::IQ2, site};
    throw UnknownObservable("unknown observable '" + std::string(tag) + "'");
}

cplx expect_annihilation(Site s, const HilbertSpace& space, const StateVector& psi) {
    cplx acc = 0.0;
    for (std::int64_t i = 0; i < space.dim(); ++i) {
        const auto j = space.lower_photon(s, i);
        if (j < 0) continue;
        acc += std::conj(psi[j]) * std::sqrt(static_cast<double>(space.photons(s, i))) * psi[i];
    }
    return acc / psi.squaredNorm();
}

Moments measure(const HilbertSpace& space, const StateVector& psi) {
    Moments m{};
    const double norm_sq = psi.squaredNorm();
    m.norm_sq = norm_sq;
    cplx a[2] = {0.0, 0.0};
    double n[2] = {0.0, 0.0}, nq[2] = {0.0, 0.0};
    double nt = 0.0, z = 0.0, z2 = 0.0;
    for (std::int64_t i = 0; i < space.dim(); ++i) {
        const double p = std::norm(psi[i]);
        const int nl = space.photons(Site::left, i), nr = space.photons(Site::right, i);
        const int ql = space.qubit(Site::left, i), qr = space.qubit(Site::right, i);
        for (int k = 0; k < 2; ++k) {
            const auto j = space.lower_photon(static_cast<Site>(k), i);
            if (j >= 0) a[k] += std::conj(psi[j]) * std::sqrt(static_cast<double>(k == 0 ? nl : nr)) * psi[i];
        }
        if (p == 0.0) continue;
        n[0] += p * nl;
        n[1] += p * nr;
        nq[0] += p * ql;
        nq[1] += p * qr;
        const int el = nl + ql, er = nr + qr;
        nt += p * (el + er);
        if (el + er > 0) {
            const double zi = static_cast<double>(el - er) / (el + er);
            z += p * zi;
            z2 += p * zi * zi;
        }
    }
    for (int k = 0; k < 2; ++k) m.site[k] = {a[k] / norm_sq, n[k] / norm_sq, nq[k] / norm_sq};
    m.n_total = nt / norm_sq;
    m.z_total = z / norm_sq;
    m.z_total_sq = z2 / norm_sq;
    return m;
}

double expect(const ObservableTag& tag, const HilbertSpace& space, const StateVector& psi) {
    if (tag.kind == ObservableKind::I || tag.kind == ObservableKind::Q) {
        const cplx a = expect_annihilation(tag.site, space, psi);
        return tag.kind == ObservableKind::I ? a.real() : a.imag();
    }
    double acc = 0.0;
    for (std::int64_t i = 0; i < space.dim(); ++i) {
        const double p = std::norm(psi[i]);
        if (p == 0.0) continue;
        const int n = space.photons(tag.site, i);
        const int q = space.qubit(tag.site, i);
        switch (tag.kind) {
            case ObservableKind::N: acc += p * n; break;
            case ObservableKind::SigmaZ: acc += p * (2 * q - 1); break;
            case ObservableKind::IQ2: acc += p * (n + 0.5); break;
            case ObservableKind::NT: {
                const auto& s = space.unflatten(i);
                acc += p * s.excitations();
                break;
            }
            default: break;
        }
    }
    return acc / psi.squaredNorm();
}

double expect(std::string_view tag, const HilbertSpace& space, const StateVector& psi) {
    return expect(parse_observable(tag), space, psi);
}

void apply_lowering_photon(Site s, const HilbertSpace& space, const StateVector& in, StateVector& out) {
    out = StateVector::Zero(space.dim());
    for (std::int64_t i = 0; i < space.dim(); ++i) {
        const auto j = space.lower_photon(s, i);
        if (j >= 0) out[j] += std::sqrt(static_cast<double>(space.photons(s, i))) * in[i];
    }
}

void apply_lowering_qubit(Site s, const HilbertSpace& space, const StateVector& in, StateVector& out) {
    out = StateVector::Zero(space.dim());
    for (std::int64_t i = 0; i < space.dim(); ++i) {
        const auto j = space.lower_qubit(s, i);
        if (j >= 0) out[j] += in[i];
    }
}

void apply_total_excitations(const HilbertSpace& space, const StateVector& in, StateVector& out) {
    out.resize(space.dim());
    for (std::int64_t i = 0; i < space.dim(); ++i) out[i] = static_cast<double>(space.unflatten(i).excitations()) * in[i];
}

}  // namespace jcd
