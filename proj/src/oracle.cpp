#include "dnpu/oracle.hpp"

#include <cmath>
#include <limits>
#include <vector>

#include "dnpu/constants.hpp"
#include "dnpu/errors.hpp"

namespace dnpu {

namespace {

// Dense solve of A x = b with partial pivoting; A is tiny (<= 1024^2).
std::vector<double> solve_dense(std::vector<double> a, std::vector<double> b, int n) {
    for (int col = 0; col < n; ++col) {
        int pivot = col;
        double best = std::fabs(a[static_cast<std::size_t>(col) * n + col]);
        for (int r = col + 1; r < n; ++r) {
            const double v = std::fabs(a[static_cast<std::size_t>(r) * n + col]);
            if (v > best) {
                best = v;
                pivot = r;
            }
        }
        if (best < 1e-300) throw PhysicsError("singular master-equation generator (disconnected chain)");
        if (pivot != col) {
            for (int c = 0; c < n; ++c)
                std::swap(a[static_cast<std::size_t>(pivot) * n + c], a[static_cast<std::size_t>(col) * n + c]);
            std::swap(b[pivot], b[col]);
        }
        const double inv = 1.0 / a[static_cast<std::size_t>(col) * n + col];
        for (int r = col + 1; r < n; ++r) {
            const double f = a[static_cast<std::size_t>(r) * n + col] * inv;
            if (f == 0.0) continue;
            for (int c = col; c < n; ++c)
                a[static_cast<std::size_t>(r) * n + c] -= f * a[static_cast<std::size_t>(col) * n + c];
            b[r] -= f * b[col];
        }
    }
    std::vector<double> x(static_cast<std::size_t>(n), 0.0);
    for (int r = n - 1; r >= 0; --r) {
        double s = b[r];
        for (int c = r + 1; c < n; ++c) s -= a[static_cast<std::size_t>(r) * n + c] * x[c];
        x[r] = s / a[static_cast<std::size_t>(r) * n + r];
    }
    return x;
}

}  // namespace

OracleResult steady_state_oracle(const HoppingSystem& sys, std::span<const double> voltages) {
    const int n = sys.n_sites();
    if (n > 10) throw ConfigError("master-equation oracle supports at most 10 sites");
    const int n_states = 1 << n;

    SystemState state = make_state(sys, voltages);

    // Per-configuration rate catalogs; the transition target configuration
    // follows from flipping the occupation bits of the event.
    std::vector<RateCatalog> catalogs(static_cast<std::size_t>(n_states));
    for (int cfg = 0; cfg < n_states; ++cfg) {
        std::vector<int> occ;
        for (int i = 0; i < n; ++i)
            if (cfg & (1 << i)) occ.push_back(i);
        set_occupation(sys, state, occ);
        catalogs[cfg] = build_rate_catalog(sys, state);
    }

    auto target_of = [&](int cfg, const Event& e) {
        switch (e.kind) {
            case EventKind::site_to_site: return (cfg & ~(1 << e.source)) | (1 << e.target);
            case EventKind::injection: return cfg | (1 << e.target);
            case EventKind::ejection: return cfg & ~(1 << e.source);
        }
        return cfg;
    };

    // Stationary distribution: pi^T Q = 0 with sum(pi) = 1, assembled as
    // A pi = b with A = Q^T and the last row replaced by ones.
    std::vector<double> a(static_cast<std::size_t>(n_states) * n_states, 0.0);
    for (int cfg = 0; cfg < n_states; ++cfg) {
        const RateCatalog& cat = catalogs[cfg];
        for (std::size_t e = 0; e < cat.events.size(); ++e) {
            const int dst = target_of(cfg, cat.events[e]);
            const double rate = cat.rates[e];
            a[static_cast<std::size_t>(dst) * n_states + cfg] += rate;
            a[static_cast<std::size_t>(cfg) * n_states + cfg] -= rate;
        }
    }
    std::vector<double> b(static_cast<std::size_t>(n_states), 0.0);
    for (int cfg = 0; cfg < n_states; ++cfg) a[static_cast<std::size_t>(n_states - 1) * n_states + cfg] = 1.0;
    b[n_states - 1] = 1.0;

    const std::vector<double> pi = solve_dense(std::move(a), std::move(b), n_states);

    // Output current: +1 electron per ejection into the output electrode,
    // -1 per injection from it, weighted by rate and stationary probability.
    double flux = 0.0, flux_abs = 0.0;
    for (int cfg = 0; cfg < n_states; ++cfg) {
        const RateCatalog& cat = catalogs[cfg];
        for (std::size_t e = 0; e < cat.events.size(); ++e) {
            const Event& ev = cat.events[e];
            double sign = 0.0;
            if (ev.kind == EventKind::ejection && ev.target == sys.output_electrode) sign = 1.0;
            if (ev.kind == EventKind::injection && ev.source == sys.output_electrode) sign = -1.0;
            if (sign == 0.0) continue;
            const double f = pi[cfg] * cat.rates[e];
            flux += sign * f;
            flux_abs += std::fabs(f);
        }
    }

    OracleResult result;
    result.n_states = n_states;
    result.current_na = flux * constants::electrons_per_s_to_na;
    result.flux_scale_na = flux_abs * constants::electrons_per_s_to_na;
    return result;
}

OracleComparison compare_oracle_to_kmc(const HoppingSystem& sys, std::span<const double> voltages,
                                       std::int64_t measurement_steps, int subintervals,
                                       std::int64_t equilibration_steps, std::uint64_t seed) {
    OracleComparison cmp;
    cmp.oracle_na = steady_state_oracle(sys, voltages).current_na;

    KmcEngine engine(sys);
    engine.set_voltages(voltages);
    Xoshiro256pp rng(derive_seed(seed, SeedTag::kmc_replica));
    engine.randomize_occupation(sys.equilibrium_carriers, rng);
    engine.equilibrate(equilibration_steps, rng);
    const CurrentEstimate est = engine.measure_current(measurement_steps, subintervals, rng);
    cmp.kmc_na = est.mean_na;
    cmp.kmc_stderr_na = est.stderr_na;
    cmp.sigma_distance =
        est.stderr_na > 0.0 ? std::fabs(est.mean_na - cmp.oracle_na) / est.stderr_na
                            : (est.mean_na == cmp.oracle_na ? 0.0 : std::numeric_limits<double>::infinity());
    return cmp;
}

}  // namespace dnpu
