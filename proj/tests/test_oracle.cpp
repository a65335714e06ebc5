#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "dnpu/constants.hpp"
#include "dnpu/errors.hpp"
#include "dnpu/oracle.hpp"

using namespace dnpu;

TEST_CASE("zero bias gives exactly zero stationary current") {
    for (int n : {1, 2, 3}) {
        const HoppingSystem sys = make_line_system(n);
        const std::vector<double> zero{0.0, 0.0};
        const OracleResult res = steady_state_oracle(sys, zero);
        CHECK(res.n_states == (1 << n));
        CHECK(std::fabs(res.current_na) <= 1e-12 * std::max(res.flux_scale_na, 1.0));
    }
}

TEST_CASE("single site between two electrodes matches the 2-state birth-death chain") {
    const HoppingSystem sys = make_line_system(1);
    const std::vector<double> volts{0.0, 0.1};

    // Hand solution: the site is empty or occupied. With electrode levels
    // mu_k = -U_k, the site energy at zero carrier background is
    // -phi(site) = -(U_L phi_L + U_R phi_R).
    const MaterialParams& mat = sys.material;
    const double phi = volts[0] * sys.unit_potentials[0] + volts[1] * sys.unit_potentials[1];
    const double e_site = -phi;
    const double d_l = distance(sys.electrode_anchors[0], sys.sites[0]);
    const double d_r = distance(sys.electrode_anchors[1], sys.sites[0]);
    const double in_l = miller_abrahams_rate(d_l, e_site - (-volts[0]), mat.hopping_distance_nm,
                                             mat.temperature_k, mat.attempt_frequency_hz);
    const double in_r = miller_abrahams_rate(d_r, e_site - (-volts[1]), mat.hopping_distance_nm,
                                             mat.temperature_k, mat.attempt_frequency_hz);
    const double out_l = miller_abrahams_rate(d_l, (-volts[0]) - e_site, mat.hopping_distance_nm,
                                              mat.temperature_k, mat.attempt_frequency_hz);
    const double out_r = miller_abrahams_rate(d_r, (-volts[1]) - e_site, mat.hopping_distance_nm,
                                              mat.temperature_k, mat.attempt_frequency_hz);
    const double lambda = in_l + in_r;  // empty -> occupied
    const double mu = out_l + out_r;    // occupied -> empty
    const double pi_occ = lambda / (lambda + mu);
    const double pi_emp = 1.0 - pi_occ;
    const double expected_na =
        (pi_occ * out_r - pi_emp * in_r) * constants::electrons_per_s_to_na;

    const OracleResult res = steady_state_oracle(sys, volts);
    CHECK(res.current_na == doctest::Approx(expected_na).epsilon(1e-12));
    CHECK(std::fabs(res.current_na) > 0.0);
}

TEST_CASE("KMC agrees with the oracle on a 3-site chain") {
    const HoppingSystem sys = make_line_system(3);
    const std::vector<double> volts{0.1, 0.0};
    const OracleComparison cmp = compare_oracle_to_kmc(sys, volts, 200000, 100, 5000, 4242);
    CHECK(cmp.kmc_stderr_na > 0.0);
    CHECK(cmp.sigma_distance <= 3.0);
}

TEST_CASE("interacting 2-site system still matches the KMC") {
    // Sites close together so the carrier-carrier term matters.
    const HoppingSystem sys = make_line_system(2, 5.0, 6.0);
    const std::vector<double> volts{0.15, 0.0};
    const OracleComparison cmp = compare_oracle_to_kmc(sys, volts, 200000, 100, 5000, 777);
    CHECK(cmp.sigma_distance <= 3.0);
}

TEST_CASE("disconnected chains are reported as singular") {
    MaterialParams mat;
    mat.hopping_distance_nm = 0.001;  // all tunneling factors underflow
    const HoppingSystem sys = make_line_system(2, 8.0, 8.0, mat);
    const std::vector<double> volts{0.1, 0.0};
    CHECK_THROWS_AS(steady_state_oracle(sys, volts), PhysicsError);
}

TEST_CASE("the oracle refuses systems beyond the enumerable size") {
    const HoppingSystem sys = make_line_system(11);
    const std::vector<double> volts{0.1, 0.0};
    CHECK_THROWS_AS(steady_state_oracle(sys, volts), ConfigError);
}
