#pragma once

#include <complex>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "jcdimer/params.hpp"
#include "jcdimer/sparse.hpp"

namespace jcd {

enum class Site : int { left = 0, right = 1 };

constexpr Site other(Site s) noexcept { return s == Site::left ? Site::right : Site::left; }
constexpr int idx(Site s) noexcept { return static_cast<int>(s); }
const char* site_name(Site s) noexcept;

// Qubit level: 0 = ground, 1 = excited.
struct BasisState {
    int n_left = 0;
    int q_left = 0;
    int n_right = 0;
    int q_right = 0;

    int excitations() const noexcept { return n_left + q_left + n_right + q_right; }
    bool operator==(const BasisState&) const = default;
};

// Basis ordering tag written into every persisted state and manifest.
inline constexpr std::string_view kBasisOrdering = "jcd-basis-v1: row-major (n_L,q_L | n_R,q_R), site index 2n+q";

inline constexpr std::size_t kDefaultMemoryBudget = std::size_t{4} << 30;

// Truncated two-site Fock x qubit space. Site index is 2n+q; the flat index
// is left-major: site_L * site_dim + site_R. With an excitation cap only the
// states with N_T <= cap are kept, enumerated in the same order. Every
// dynamics in this library (unitary, no-jump, quantum jumps) conserves or
// lowers N_T, so the cap never truncates evolution.
class HilbertSpace {
public:
    // Throws MemoryBudgetExceeded when the estimated working set exceeds the
    // budget, and ConfigError for eta < 0.
    static HilbertSpace build(int eta, std::optional<int> excitation_cap = std::nullopt,
                              std::size_t memory_budget_bytes = kDefaultMemoryBudget);

    // Rough working-set estimate for propagating in a space of this size.
    static std::size_t required_bytes(std::size_t dim) noexcept;

    int eta() const noexcept { return eta_; }
    int site_dim() const noexcept { return 2 * (eta_ + 1); }
    std::optional<int> excitation_cap() const noexcept { return cap_; }
    std::int64_t dim() const noexcept { return static_cast<std::int64_t>(states_.size()); }

    // Throws std::out_of_range for states outside the space.
    std::int64_t flatten(const BasisState& s) const;
    std::optional<std::int64_t> find(const BasisState& s) const;
    const BasisState& unflatten(std::int64_t i) const { return states_.at(static_cast<std::size_t>(i)); }

    int photons(Site s, std::int64_t i) const noexcept { return photons_[idx(s)][i]; }
    int qubit(Site s, std::int64_t i) const noexcept { return qubits_[idx(s)][i]; }

    // Index of the state reached by a_s (resp. sigma^-_s) from i, or -1.
    std::int32_t lower_photon(Site s, std::int64_t i) const noexcept { return lower_photon_[idx(s)][i]; }
    std::int32_t lower_qubit(Site s, std::int64_t i) const noexcept { return lower_qubit_[idx(s)][i]; }

    int max_excitations() const noexcept { return cap_ ? *cap_ : 2 * eta_ + 2; }

private:
    int eta_ = 0;
    std::optional<int> cap_;
    std::vector<BasisState> states_;
    std::vector<std::int32_t> lookup_;  // square flat index -> compact index or -1
    std::vector<std::uint16_t> photons_[2];
    std::vector<std::uint8_t> qubits_[2];
    std::vector<std::int32_t> lower_photon_[2];
    std::vector<std::int32_t> lower_qubit_[2];
};

// Cutoff selection rule: ceil(N + c*sqrt(N)) for a mean photon number N.
int cutoff_for(double mean_photons, double c = 6.0);

// Poisson tail mass P(n > eta) for mean |alpha|^2.
double coherent_tail_mass(double mean_photons, int eta);

inline constexpr double kDefaultTailTolerance = 1e-8;

struct SiteState {
    StateVector amplitudes;  // site basis, length 2(eta+1), qubit in |g>
    double tail_mass = 0.0;  // Poisson mass discarded by the cutoff
};

// Coherent photon state with the qubit in |g>, renormalized after truncation.
// Throws TailMassExceeded when the discarded mass exceeds `tail_tol`.
SiteState coherent_site_state(cplx alpha, int eta, double tail_tol = kDefaultTailTolerance);

// |alpha_L, g> (x) |alpha_R, g>, unit norm. Propagates TailMassExceeded.
StateVector dimer_initial_state(cplx alpha_left, cplx alpha_right, const HilbertSpace& space,
                                double tail_tol = kDefaultTailTolerance);

// cutoff_for, raised until the Poisson tail is below tail_tol. Small mean
// photon numbers need the bump: the Gaussian rule underestimates their tail.
int sized_cutoff(double mean_photons, double c = 6.0, double tail_tol = kDefaultTailTolerance);

// Smallest space that holds the coherent initial state within tail_tol,
// with the excitation cap set to the sum of the two site cutoffs.
HilbertSpace space_for_coherent(double mean_left, double mean_right, double c = 6.0,
                                std::size_t memory_budget_bytes = kDefaultMemoryBudget);

enum class Frame { rotating, lab };

// H = sum_s [nu_c a+a + nu_a s+s- + g (s+ a + s- a+)]_s - J (a+_L a_R + h.c.),
// in MHz. The rotating frame subtracts nu_c * N_T.
SparseOperator build_hamiltonian(const DimerParams& params, const HilbertSpace& space,
                                 Frame frame = Frame::rotating);

// Diagonal of sum_s (kappa a+a + gamma s+s-)_s, i.e. sum of c+c over the jump
// channels (MHz).
Eigen::VectorXd decay_diagonal(const DimerParams& params, const HilbertSpace& space);

enum class ObservableKind { I, Q, N, SigmaZ, NT, IQ2 };

struct ObservableTag {
    ObservableKind kind;
    Site site = Site::left;  // ignored for NT
};

// Parses "I_L", "Q_R", "N_L", "sz_R", "N_T", "IQ2_L". Throws UnknownObservable.
ObservableTag parse_observable(std::string_view tag);

// Matrix-free expectation value, normalized by the state norm.
double expect(const ObservableTag& tag, const HilbertSpace& space, const StateVector& psi);
double expect(std::string_view tag, const HilbertSpace& space, const StateVector& psi);

cplx expect_annihilation(Site s, const HilbertSpace& space, const StateVector& psi);

// One pass over the state collecting everything the solvers record.
struct SiteMoments {
    cplx a;        // <a>
    double n;      // <a+a>
    double nq;     // <s+s->
};

struct Moments {
    SiteMoments site[2];
    double n_total;      // <N_T>
    double z_total;      // <Z_T> with Z_T = (e_L - e_R)/N_T per basis state, 0 at vacuum
    double z_total_sq;   // <Z_T^2>
    double norm_sq;      // ||psi||^2 before normalization
};

Moments measure(const HilbertSpace& space, const StateVector& psi);

// Applies a_s (or sigma^-_s) in place of `out`.
void apply_lowering_photon(Site s, const HilbertSpace& space, const StateVector& in, StateVector& out);
void apply_lowering_qubit(Site s, const HilbertSpace& space, const StateVector& in, StateVector& out);

// Applies N_T (diagonal).
void apply_total_excitations(const HilbertSpace& space, const StateVector& in, StateVector& out);

}  // namespace jcd
