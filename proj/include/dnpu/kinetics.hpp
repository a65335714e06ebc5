#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "dnpu/field.hpp"
#include "dnpu/geometry.hpp"
#include "dnpu/rng.hpp"

namespace dnpu {

// A hopping transport problem: localized sites exchanging electrons with
// each other and with electrode reservoirs. Site energies carry four
// contributions: the external electrostatic potential (via the per-site
// unit potentials and the applied voltages), the frozen disorder plus
// counterdopant attraction (static_energy_ev), and the configuration-
// dependent carrier-carrier repulsion.
struct HoppingSystem {
    std::vector<Point2> sites;             // nm
    std::vector<double> static_energy_ev;  // disorder + counterdopant terms
    std::vector<Point2> electrode_anchors; // nm, on the boundary
    std::vector<double> unit_potentials;   // [site * n_electrodes + k]
    MaterialParams material;
    int output_electrode = 0;  // position in the electrode list
    int equilibrium_carriers = 1;

    // Role map for voltage assembly (positions in the electrode list);
    // controls are ordered by ascending electrode index (U1, U4..U7).
    int input_left_electrode = -1;
    int input_right_electrode = -1;
    std::vector<int> control_electrodes;

    int n_sites() const { return static_cast<int>(sites.size()); }
    int n_electrodes() const { return static_cast<int>(electrode_anchors.size()); }
};

HoppingSystem make_system(const DeviceGeometry& geometry, const PotentialBasis& basis);

// A line of equally spaced sites between two electrodes, with linear unit
// potentials; the right electrode (index 1) is the output. Used by the
// master-equation cross-checks.
HoppingSystem make_line_system(int n_sites, double spacing_nm = 8.0, double electrode_gap_nm = 8.0,
                               const MaterialParams& material = MaterialParams{});

enum class EventKind : std::uint8_t { site_to_site, injection, ejection };

struct Event {
    EventKind kind = EventKind::site_to_site;
    int source = 0;  // site, or electrode for injection
    int target = 0;  // site, or electrode for ejection
};

struct SystemState {
    std::vector<std::uint8_t> occupied;
    int carrier_count = 0;
    std::vector<double> electrode_voltages;
    std::vector<double> external_potential_v;  // per site, for the current voltages
    double simulated_time_s = 0.0;
    std::int64_t net_output_hops = 0;  // +1 per carrier leaving into the output electrode
};

SystemState make_state(const HoppingSystem& sys, std::span<const double> voltages);
void set_voltages(const HoppingSystem& sys, SystemState& state, std::span<const double> voltages);
void set_occupation(const HoppingSystem& sys, SystemState& state, std::span<const int> occupied_sites);
void randomize_occupation(const HoppingSystem& sys, SystemState& state, int carriers, Xoshiro256pp& rng);

// Uphill Boltzmann factors below e^-120 are rounded to zero everywhere the
// rate law is evaluated (engine, catalog, oracle). At nu0 = 1e12/s the
// largest rate this drops is ~1e-40/s, i.e. one hop per ~1e32 simulated
// seconds, while competing rates sit tens of orders higher.
inline constexpr double uphill_exponent_cutoff = 120.0;

// Miller-Abrahams hop rate: nu0 * exp(-2r/a) * exp(-dE/kT) uphill,
// nu0 * exp(-2r/a) downhill or flat.
double miller_abrahams_rate(double r_nm, double delta_e_ev, double a_nm, double t_k, double nu0);

// Site energy in eV for the given occupation: -phi(r_i) + disorder_i
// + counterdopant terms + sum over other carriers of the pair repulsion.
double site_energy(const HoppingSystem& sys, const SystemState& state, int site);

// Energy change of a hop. Site-to-site applies the standard pair correction
// -e^2/(4 pi eps0 eps_r r_st) on top of the occupied-state site energies,
// which makes the reverse hop exactly the negation. Electrode hops use the
// reservoir level -e*U_k.
double hop_energy_delta(const HoppingSystem& sys, const SystemState& state, const Event& event);

struct RateCatalog {
    std::vector<Event> events;
    std::vector<double> rates;
    double total_rate = 0.0;
};

// Every legal event with its rate: occupied -> empty site pairs, electrode
// injections into empty sites, ejections from occupied sites.
RateCatalog build_rate_catalog(const HoppingSystem& sys, const SystemState& state);

// Cumulative-sum event selection plus the exponential dwell draw; pure with
// respect to the catalog.
struct Selection {
    std::size_t index = 0;
    double dwell_s = 0.0;
};
Selection select_event(const RateCatalog& catalog, Xoshiro256pp& rng);

struct CurrentEstimate {
    double mean_na = 0.0;
    double stderr_na = 0.0;
    int subintervals = 0;
    std::int64_t steps = 0;
};

struct StepResult {
    Event event;
    double dwell_s = 0.0;
};

// Rejection-free KMC engine. Pairwise distances, tunneling factors and
// Coulomb terms are precomputed per system; cached site energies are
// updated in O(n_sites) per step and resynchronized from scratch on a fixed
// schedule to stop roundoff drift. The full rate table is rebuilt every
// step: a hop shifts every site energy through the long-range Coulomb term,
// so no rate survives unchanged. Event selection itself is a binary search
// over the cumulative sums.
class KmcEngine {
public:
    explicit KmcEngine(const HoppingSystem& sys);

    void set_voltages(std::span<const double> voltages);
    void set_occupation(std::span<const int> occupied_sites);
    void randomize_occupation(int carriers, Xoshiro256pp& rng);

    StepResult step(Xoshiro256pp& rng);

    // Runs n steps and then zeroes the clock and the output hop counter.
    void equilibrate(std::int64_t n_steps, Xoshiro256pp& rng);

    // Mean output current over n_steps with the standard error estimated
    // from n_sub equally long (in steps) subintervals.
    CurrentEstimate measure_current(std::int64_t n_steps, int n_sub, Xoshiro256pp& rng);

    const SystemState& state() const { return state_; }
    const HoppingSystem& system() const { return *sys_; }
    double cached_site_energy(int site) const { return energy_[site]; }

    // The rate table for the current state as the engine sees it, i.e.
    // computed from the incrementally maintained energies.
    RateCatalog current_catalog();

    std::int64_t steps_taken() const { return steps_taken_; }

private:
    void rebuild_rates();
    void apply(const Event& event);
    void resync_energies();

    const HoppingSystem* sys_;
    int n_ = 0, m_ = 0;
    double inv_kt_ = 0.0, nu0_ = 0.0;
    std::vector<double> tun_ss_, vee_ss_;  // n*n, diagonal zero
    std::vector<double> tun_se_;           // n*m, site-major
    std::vector<double> mu_;               // electrode level -U_k, eV

    SystemState state_;
    std::vector<double> energy_;  // cached site energies
    std::vector<int> carriers_;

    std::vector<Event> ev_;
    std::vector<double> rates_;
    std::vector<double> cum_;
    std::int64_t steps_taken_ = 0;
    // Reset whenever voltages or occupation change, so the resync schedule
    // inside a replica does not depend on what the engine ran before.
    std::int64_t steps_since_resync_ = 0;
};

// Writes a (step, time_s, kind, source, target) CSV trace while stepping.
void run_traced(KmcEngine& engine, std::int64_t n_steps, Xoshiro256pp& rng, std::ostream& out);

}  // namespace dnpu
