#include "dnpu/kinetics.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <ostream>

#include "dnpu/constants.hpp"
#include "dnpu/errors.hpp"

namespace dnpu {

namespace {

double coulomb_coeff(const MaterialParams& m) {
    return constants::coulomb_ev_nm / m.relative_permittivity;
}

const char* kind_name(EventKind k) {
    switch (k) {
        case EventKind::site_to_site: return "hop";
        case EventKind::injection: return "inject";
        case EventKind::ejection: return "eject";
    }
    return "?";
}

}  // namespace

HoppingSystem make_system(const DeviceGeometry& geom, const PotentialBasis& basis) {
    if (basis.n_sites != static_cast<int>(geom.dopants.size()) ||
        basis.n_electrodes != geom.n_electrodes())
        throw ConfigError("potential basis does not match the device geometry");

    HoppingSystem sys;
    sys.sites = geom.dopants;
    sys.material = geom.material;
    sys.unit_potentials = basis.phi;
    sys.output_electrode = electrode_position(geom, ElectrodeRole::output);
    sys.equilibrium_carriers = static_cast<int>(geom.counterdopants.size());

    const double kq = coulomb_coeff(geom.material);
    sys.static_energy_ev.resize(geom.dopants.size());
    for (std::size_t i = 0; i < geom.dopants.size(); ++i) {
        double e = geom.disorder_ev[i];
        for (const Point2& c : geom.counterdopants) e -= kq / distance(geom.dopants[i], c);
        sys.static_energy_ev[i] = e;
    }
    for (const ElectrodeArc& arc : geom.electrodes)
        sys.electrode_anchors.push_back(electrode_anchor(geom, arc.index));

    sys.input_left_electrode = electrode_position(geom, ElectrodeRole::input_left);
    sys.input_right_electrode = electrode_position(geom, ElectrodeRole::input_right);
    std::vector<std::pair<int, int>> controls;  // (electrode index, position)
    for (int pos = 0; pos < geom.n_electrodes(); ++pos) {
        if (geom.electrodes[pos].role == ElectrodeRole::control)
            controls.emplace_back(geom.electrodes[pos].index, pos);
    }
    std::sort(controls.begin(), controls.end());
    for (const auto& [index, pos] : controls) sys.control_electrodes.push_back(pos);
    return sys;
}

HoppingSystem make_line_system(int n_sites, double spacing_nm, double electrode_gap_nm,
                               const MaterialParams& material) {
    if (n_sites < 1) throw ConfigError("line system needs at least one site");
    HoppingSystem sys;
    sys.material = material;
    const double span = (n_sites - 1) * spacing_nm;
    for (int i = 0; i < n_sites; ++i) sys.sites.push_back(Point2{-0.5 * span + i * spacing_nm, 0.0});
    sys.static_energy_ev.assign(static_cast<std::size_t>(n_sites), 0.0);
    const double x_left = -0.5 * span - electrode_gap_nm;
    const double x_right = 0.5 * span + electrode_gap_nm;
    sys.electrode_anchors = {Point2{x_left, 0.0}, Point2{x_right, 0.0}};
    sys.output_electrode = 1;
    sys.equilibrium_carriers = 1;
    sys.unit_potentials.resize(static_cast<std::size_t>(n_sites) * 2);
    for (int i = 0; i < n_sites; ++i) {
        const double t = (sys.sites[i].x - x_left) / (x_right - x_left);
        sys.unit_potentials[2 * i + 0] = 1.0 - t;
        sys.unit_potentials[2 * i + 1] = t;
    }
    return sys;
}

SystemState make_state(const HoppingSystem& sys, std::span<const double> voltages) {
    SystemState state;
    state.occupied.assign(static_cast<std::size_t>(sys.n_sites()), 0);
    set_voltages(sys, state, voltages);
    return state;
}

void set_voltages(const HoppingSystem& sys, SystemState& state, std::span<const double> voltages) {
    if (static_cast<int>(voltages.size()) != sys.n_electrodes())
        throw ConfigError("expected " + std::to_string(sys.n_electrodes()) + " electrode voltages");
    state.electrode_voltages.assign(voltages.begin(), voltages.end());
    const int m = sys.n_electrodes();
    state.external_potential_v.resize(static_cast<std::size_t>(sys.n_sites()));
    for (int i = 0; i < sys.n_sites(); ++i) {
        const double* up = &sys.unit_potentials[static_cast<std::size_t>(i) * m];
        double v = 0.0;
        for (int k = 0; k < m; ++k) v += voltages[k] * up[k];
        state.external_potential_v[i] = v;
    }
}

void set_occupation(const HoppingSystem& sys, SystemState& state, std::span<const int> occupied_sites) {
    state.occupied.assign(static_cast<std::size_t>(sys.n_sites()), 0);
    for (int s : occupied_sites) {
        if (s < 0 || s >= sys.n_sites()) throw ConfigError("occupied site index out of range");
        if (state.occupied[s]) throw ConfigError("site " + std::to_string(s) + " occupied twice");
        state.occupied[s] = 1;
    }
    state.carrier_count = static_cast<int>(occupied_sites.size());
}

void randomize_occupation(const HoppingSystem& sys, SystemState& state, int carriers, Xoshiro256pp& rng) {
    if (carriers > sys.n_sites()) throw ConfigError("more carriers than sites");
    const std::vector<int> sites = sample_distinct(rng, sys.n_sites(), carriers);
    set_occupation(sys, state, sites);
}

double miller_abrahams_rate(double r_nm, double delta_e_ev, double a_nm, double t_k, double nu0) {
    if (r_nm <= 0.0 || a_nm <= 0.0 || t_k <= 0.0) throw ConfigError("miller_abrahams_rate needs r, a, T > 0");
    const double tunneling = std::exp(-2.0 * r_nm / a_nm);
    if (delta_e_ev > 0.0) {
        const double x = delta_e_ev / (constants::k_boltzmann_ev * t_k);
        if (x > uphill_exponent_cutoff) return 0.0;
        return nu0 * tunneling * std::exp(-x);
    }
    return nu0 * tunneling;
}

double site_energy(const HoppingSystem& sys, const SystemState& state, int site) {
    if (site < 0 || site >= sys.n_sites()) throw ConfigError("site index out of range");
    const double kq = coulomb_coeff(sys.material);
    double e = -state.external_potential_v[site] + sys.static_energy_ev[site];
    for (int j = 0; j < sys.n_sites(); ++j) {
        if (j == site || !state.occupied[j]) continue;
        e += kq / distance(sys.sites[site], sys.sites[j]);
    }
    return e;
}

double hop_energy_delta(const HoppingSystem& sys, const SystemState& state, const Event& event) {
    switch (event.kind) {
        case EventKind::site_to_site: {
            if (!state.occupied[event.source]) throw ConfigError("hop source is empty");
            if (state.occupied[event.target]) throw ConfigError("hop target is occupied");
            const double kq = coulomb_coeff(sys.material);
            const double pair = kq / distance(sys.sites[event.source], sys.sites[event.target]);
            return site_energy(sys, state, event.target) - site_energy(sys, state, event.source) - pair;
        }
        case EventKind::injection: {
            if (state.occupied[event.target]) throw ConfigError("injection target is occupied");
            return site_energy(sys, state, event.target) + state.electrode_voltages[event.source];
        }
        case EventKind::ejection: {
            if (!state.occupied[event.source]) throw ConfigError("ejection source is empty");
            return -state.electrode_voltages[event.target] - site_energy(sys, state, event.source);
        }
    }
    throw ConfigError("unknown event kind");
}

RateCatalog build_rate_catalog(const HoppingSystem& sys, const SystemState& state) {
    const int n = sys.n_sites();
    const int m = sys.n_electrodes();
    const MaterialParams& mat = sys.material;

    std::vector<double> energy(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) energy[i] = site_energy(sys, state, i);

    const double kq = coulomb_coeff(mat);
    RateCatalog cat;
    double total = 0.0;
    auto push = [&](EventKind kind, int src, int dst, double r_nm, double delta_e) {
        cat.events.push_back(Event{kind, src, dst});
        const double rate = miller_abrahams_rate(r_nm, delta_e, mat.hopping_distance_nm,
                                                 mat.temperature_k, mat.attempt_frequency_hz);
        cat.rates.push_back(rate);
        total += rate;
    };

    for (int s = 0; s < n; ++s) {
        if (!state.occupied[s]) continue;
        for (int t = 0; t < n; ++t) {
            if (t == s || state.occupied[t]) continue;
            const double r = distance(sys.sites[s], sys.sites[t]);
            push(EventKind::site_to_site, s, t, r, energy[t] - energy[s] - kq / r);
        }
    }
    for (int k = 0; k < m; ++k) {
        for (int t = 0; t < n; ++t) {
            if (state.occupied[t]) continue;
            const double r = distance(sys.electrode_anchors[k], sys.sites[t]);
            push(EventKind::injection, k, t, r, energy[t] + state.electrode_voltages[k]);
        }
    }
    for (int s = 0; s < n; ++s) {
        if (!state.occupied[s]) continue;
        for (int k = 0; k < m; ++k) {
            const double r = distance(sys.electrode_anchors[k], sys.sites[s]);
            push(EventKind::ejection, s, k, r, -state.electrode_voltages[k] - energy[s]);
        }
    }
    cat.total_rate = total;
    return cat;
}

Selection select_event(const RateCatalog& cat, Xoshiro256pp& rng) {
    if (cat.total_rate <= 0.0) throw AbsorbingStateError("total rate vanished", 0);
    const double r = rng.uniform() * cat.total_rate;
    double running = 0.0;
    std::size_t index = cat.rates.size() - 1;
    for (std::size_t i = 0; i < cat.rates.size(); ++i) {
        running += cat.rates[i];
        if (r < running) {
            index = i;
            break;
        }
    }
    // Guard against landing on a trailing zero-rate plateau.
    while (index > 0 && cat.rates[index] == 0.0) --index;
    return Selection{index, rng.exponential(cat.total_rate)};
}

KmcEngine::KmcEngine(const HoppingSystem& sys) : sys_(&sys) {
    n_ = sys.n_sites();
    m_ = sys.n_electrodes();
    const MaterialParams& mat = sys.material;
    inv_kt_ = 1.0 / (constants::k_boltzmann_ev * mat.temperature_k);
    nu0_ = mat.attempt_frequency_hz;
    const double kq = coulomb_coeff(mat);
    const double two_over_a = 2.0 / mat.hopping_distance_nm;

    tun_ss_.assign(static_cast<std::size_t>(n_) * n_, 0.0);
    vee_ss_.assign(static_cast<std::size_t>(n_) * n_, 0.0);
    for (int i = 0; i < n_; ++i) {
        for (int j = i + 1; j < n_; ++j) {
            const double r = distance(sys.sites[i], sys.sites[j]);
            if (r <= 0.0) throw ConfigError("coincident sites in hopping system");
            const double tun = std::exp(-two_over_a * r);
            const double vee = kq / r;
            tun_ss_[static_cast<std::size_t>(i) * n_ + j] = tun;
            tun_ss_[static_cast<std::size_t>(j) * n_ + i] = tun;
            vee_ss_[static_cast<std::size_t>(i) * n_ + j] = vee;
            vee_ss_[static_cast<std::size_t>(j) * n_ + i] = vee;
        }
    }
    tun_se_.assign(static_cast<std::size_t>(n_) * m_, 0.0);
    for (int i = 0; i < n_; ++i) {
        for (int k = 0; k < m_; ++k) {
            const double r = distance(sys.electrode_anchors[k], sys.sites[i]);
            tun_se_[static_cast<std::size_t>(i) * m_ + k] = std::exp(-two_over_a * r);
        }
    }
    mu_.assign(static_cast<std::size_t>(m_), 0.0);
    state_.occupied.assign(static_cast<std::size_t>(n_), 0);
    state_.electrode_voltages.assign(static_cast<std::size_t>(m_), 0.0);
    state_.external_potential_v.assign(static_cast<std::size_t>(n_), 0.0);
    energy_.assign(static_cast<std::size_t>(n_), 0.0);
    const std::size_t capacity = static_cast<std::size_t>(n_) * (m_ + 8) + 64;
    ev_.reserve(capacity);
    rates_.reserve(capacity);
    cum_.reserve(capacity);
    resync_energies();
}

void KmcEngine::set_voltages(std::span<const double> voltages) {
    dnpu::set_voltages(*sys_, state_, voltages);
    for (int k = 0; k < m_; ++k) mu_[k] = -voltages[k];
    resync_energies();
}

void KmcEngine::set_occupation(std::span<const int> occupied_sites) {
    dnpu::set_occupation(*sys_, state_, occupied_sites);
    carriers_.assign(occupied_sites.begin(), occupied_sites.end());
    std::sort(carriers_.begin(), carriers_.end());
    resync_energies();
}

void KmcEngine::randomize_occupation(int carriers, Xoshiro256pp& rng) {
    const std::vector<int> sites = sample_distinct(rng, n_, carriers);
    set_occupation(sites);
}

void KmcEngine::resync_energies() {
    for (int i = 0; i < n_; ++i)
        energy_[i] = -state_.external_potential_v[i] + sys_->static_energy_ev[i];
    for (int c : carriers_) {
        const double* vee = &vee_ss_[static_cast<std::size_t>(c) * n_];
        for (int i = 0; i < n_; ++i) energy_[i] += vee[i];  // vee[c] == 0
    }
    steps_since_resync_ = 0;
}

void KmcEngine::rebuild_rates() {
    ev_.clear();
    rates_.clear();

    // Zero-rate events (tunneling underflow or Boltzmann exponent past the
    // cutoff) are not stored; they can never be selected and the reference
    // build_rate_catalog assigns them exactly zero through the same kernel.
    const double cut = uphill_exponent_cutoff / inv_kt_;
    auto push = [this](EventKind kind, int src, int dst, double rate) {
        if (rate <= 0.0) return;
        ev_.push_back(Event{kind, src, dst});
        rates_.push_back(rate);
    };

    for (int c : carriers_) {
        const double* tun = &tun_ss_[static_cast<std::size_t>(c) * n_];
        const double* vee = &vee_ss_[static_cast<std::size_t>(c) * n_];
        const double e_c = energy_[c];
        for (int j = 0; j < n_; ++j) {
            if (state_.occupied[j]) continue;
            const double de = energy_[j] - e_c - vee[j];
            if (de > cut) continue;
            push(EventKind::site_to_site, c, j,
                 de > 0.0 ? nu0_ * tun[j] * std::exp(-de * inv_kt_) : nu0_ * tun[j]);
        }
    }
    for (int j = 0; j < n_; ++j) {
        if (state_.occupied[j]) continue;
        const double* tun = &tun_se_[static_cast<std::size_t>(j) * m_];
        const double e_j = energy_[j];
        for (int k = 0; k < m_; ++k) {
            const double de = e_j - mu_[k];
            if (de > cut) continue;
            push(EventKind::injection, k, j,
                 de > 0.0 ? nu0_ * tun[k] * std::exp(-de * inv_kt_) : nu0_ * tun[k]);
        }
    }
    for (int c : carriers_) {
        const double* tun = &tun_se_[static_cast<std::size_t>(c) * m_];
        const double e_c = energy_[c];
        for (int k = 0; k < m_; ++k) {
            const double de = mu_[k] - e_c;
            if (de > cut) continue;
            push(EventKind::ejection, c, k,
                 de > 0.0 ? nu0_ * tun[k] * std::exp(-de * inv_kt_) : nu0_ * tun[k]);
        }
    }

    cum_.resize(rates_.size());
    double running = 0.0;
    for (std::size_t i = 0; i < rates_.size(); ++i) {
        running += rates_[i];
        cum_[i] = running;
    }
}

RateCatalog KmcEngine::current_catalog() {
    rebuild_rates();
    RateCatalog cat;
    cat.events = ev_;
    cat.rates = rates_;
    cat.total_rate = cum_.empty() ? 0.0 : cum_.back();
    return cat;
}

void KmcEngine::apply(const Event& event) {
    switch (event.kind) {
        case EventKind::site_to_site: {
            const int s = event.source, t = event.target;
            assert(state_.occupied[s] && !state_.occupied[t]);
            const double* vs = &vee_ss_[static_cast<std::size_t>(s) * n_];
            const double* vt = &vee_ss_[static_cast<std::size_t>(t) * n_];
            for (int i = 0; i < n_; ++i) energy_[i] += vt[i] - vs[i];
            state_.occupied[s] = 0;
            state_.occupied[t] = 1;
            *std::find(carriers_.begin(), carriers_.end(), s) = t;
            break;
        }
        case EventKind::injection: {
            const int t = event.target;
            assert(!state_.occupied[t]);
            const double* vt = &vee_ss_[static_cast<std::size_t>(t) * n_];
            for (int i = 0; i < n_; ++i) energy_[i] += vt[i];
            state_.occupied[t] = 1;
            carriers_.push_back(t);
            ++state_.carrier_count;
            if (event.source == sys_->output_electrode) --state_.net_output_hops;
            break;
        }
        case EventKind::ejection: {
            const int s = event.source;
            assert(state_.occupied[s]);
            const double* vs = &vee_ss_[static_cast<std::size_t>(s) * n_];
            for (int i = 0; i < n_; ++i) energy_[i] -= vs[i];
            state_.occupied[s] = 0;
            auto slot = std::find(carriers_.begin(), carriers_.end(), s);
            *slot = carriers_.back();
            carriers_.pop_back();
            --state_.carrier_count;
            if (event.target == sys_->output_electrode) ++state_.net_output_hops;
            break;
        }
    }
}

StepResult KmcEngine::step(Xoshiro256pp& rng) {
    rebuild_rates();
    const double total = cum_.empty() ? 0.0 : cum_.back();
    if (total <= 0.0) throw AbsorbingStateError("total rate vanished", steps_taken_);

    const double r = rng.uniform() * total;
    std::size_t idx = static_cast<std::size_t>(
        std::upper_bound(cum_.begin(), cum_.end(), r) - cum_.begin());
    if (idx >= ev_.size()) idx = ev_.size() - 1;
    while (idx > 0 && rates_[idx] == 0.0) --idx;

    const double dwell = rng.exponential(total);
    state_.simulated_time_s += dwell;
    const StepResult result{ev_[idx], dwell};
    apply(ev_[idx]);
    ++steps_taken_;
    if (++steps_since_resync_ >= (1 << 20)) resync_energies();  // stop roundoff drift
    return result;
}

void KmcEngine::equilibrate(std::int64_t n_steps, Xoshiro256pp& rng) {
    for (std::int64_t i = 0; i < n_steps; ++i) step(rng);
    state_.simulated_time_s = 0.0;
    state_.net_output_hops = 0;
}

CurrentEstimate KmcEngine::measure_current(std::int64_t n_steps, int n_sub, Xoshiro256pp& rng) {
    if (n_sub < 1) throw ConfigError("need at least one subinterval");
    if (n_steps < n_sub) throw ConfigError("need at least one step per subinterval");
    const std::int64_t sub_len = n_steps / n_sub;

    const double t0 = state_.simulated_time_s;
    const std::int64_t h0 = state_.net_output_hops;
    std::vector<double> sub_currents(static_cast<std::size_t>(n_sub));
    for (int s = 0; s < n_sub; ++s) {
        const double t_start = state_.simulated_time_s;
        const std::int64_t h_start = state_.net_output_hops;
        for (std::int64_t i = 0; i < sub_len; ++i) step(rng);
        const double dt = state_.simulated_time_s - t_start;
        if (dt <= 0.0) throw PhysicsError("no simulated time elapsed in subinterval");
        sub_currents[s] =
            static_cast<double>(state_.net_output_hops - h_start) * constants::electrons_per_s_to_na / dt;
    }
    const double elapsed = state_.simulated_time_s - t0;
    if (elapsed <= 0.0) throw PhysicsError("no simulated time elapsed");

    CurrentEstimate est;
    est.mean_na =
        static_cast<double>(state_.net_output_hops - h0) * constants::electrons_per_s_to_na / elapsed;
    est.subintervals = n_sub;
    est.steps = sub_len * n_sub;
    if (n_sub > 1) {
        double mean = 0.0;
        for (double c : sub_currents) mean += c;
        mean /= n_sub;
        double ss = 0.0;
        for (double c : sub_currents) ss += (c - mean) * (c - mean);
        const double sample_var = ss / (n_sub - 1);
        est.stderr_na = std::sqrt(sample_var / n_sub);
    }
    return est;
}

void run_traced(KmcEngine& engine, std::int64_t n_steps, Xoshiro256pp& rng, std::ostream& out) {
    out << "step,time_s,kind,source,target\n";
    for (std::int64_t i = 0; i < n_steps; ++i) {
        const StepResult r = engine.step(rng);
        out << i << ',' << engine.state().simulated_time_s << ',' << kind_name(r.event.kind) << ','
            << r.event.source << ',' << r.event.target << '\n';
    }
}

}  // namespace dnpu
