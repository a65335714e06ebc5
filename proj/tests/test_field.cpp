#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstdio>

#include "dnpu/errors.hpp"
#include "dnpu/field.hpp"
#include "dnpu/rng.hpp"

using namespace dnpu;

namespace {

constexpr double kR = 75.0;

BoundaryFn dirichlet_everywhere(double value) {
    return [value](double) { return BoundaryValue{true, value}; };
}

// Relative nodal L2 error against an analytic harmonic u(x, y).
template <typename F>
double rel_l2_error(const DiscSolution& sol, F&& exact) {
    double num = 0.0, den = 0.0;
    const int npts = sol.n + 1;
    for (int j = 0; j < npts; ++j) {
        for (int i = 0; i < npts; ++i) {
            const int node = j * npts + i;
            if (!sol.inside[node]) continue;
            const double x = -sol.radius_nm + i * sol.h;
            const double y = -sol.radius_nm + j * sol.h;
            const double u = exact(x, y);
            num += (sol.values[node] - u) * (sol.values[node] - u);
            den += u * u;
        }
    }
    return std::sqrt(num / den);
}

DeviceGeometry small_device(std::uint64_t seed, int dopants = 25) {
    DeviceConfig config;
    config.dopant_count = dopants;
    config.counterdopant_count = 2;
    return generate_device(seed, config);
}

}  // namespace

TEST_CASE("all-Dirichlet constant boundary gives the constant solution") {
    GridSpec grid;
    grid.cells_across_diameter = 64;
    grid.tolerance = 1e-13;
    const DiscSolution sol = solve_disc_laplace(kR, dirichlet_everywhere(1.0), grid);
    CHECK(sol.converged);
    CHECK(sol.residual <= 1e-12);
    const int npts = sol.n + 1;
    for (int node = 0; node < npts * npts; ++node) {
        if (sol.inside[node]) CHECK(std::fabs(sol.values[node] - 1.0) < 1e-8);
    }
    Xoshiro256pp rng(3);
    for (int i = 0; i < 50; ++i) {
        const double r = kR * std::sqrt(rng.uniform());
        const double a = rng.uniform(0.0, 6.28318);
        CHECK(std::fabs(sol.value_at(r * std::cos(a), r * std::sin(a)) - 1.0) < 1e-8);
    }
}

TEST_CASE("cos(theta) Dirichlet data reproduces (r/R) cos(theta)") {
    GridSpec grid;
    grid.cells_across_diameter = 256;
    const BoundaryFn bc = [](double angle) { return BoundaryValue{true, std::cos(angle)}; };
    const DiscSolution sol = solve_disc_laplace(kR, bc, grid);
    CHECK(sol.converged);
    const double err = rel_l2_error(sol, [](double x, double) { return x / kR; });
    CHECK(err < 1e-3);
}

TEST_CASE("grid refinement at least halves the error of a curved harmonic") {
    // (r/R)^4 cos(4 theta) has nonzero fourth derivatives, so the truncation
    // error is genuine at both resolutions.
    const BoundaryFn bc = [](double angle) { return BoundaryValue{true, std::cos(4.0 * angle)}; };
    auto exact = [](double x, double y) {
        const double r2 = x * x + y * y;
        const double theta = std::atan2(y, x);
        return (r2 * r2) / (kR * kR * kR * kR) * std::cos(4.0 * theta);
    };
    GridSpec coarse;
    coarse.cells_across_diameter = 128;
    GridSpec fine;
    fine.cells_across_diameter = 256;
    const double err_coarse = rel_l2_error(solve_disc_laplace(kR, bc, coarse), exact);
    const double err_fine = rel_l2_error(solve_disc_laplace(kR, bc, fine), exact);
    CHECK(err_fine > 0.0);
    CHECK(err_coarse / err_fine >= 2.0);
}

TEST_CASE("degenerate grids and all-Neumann boundaries are rejected") {
    GridSpec grid;
    grid.cells_across_diameter = 4;
    CHECK_THROWS_AS(solve_disc_laplace(kR, dirichlet_everywhere(0.0), grid), ConfigError);
    grid.cells_across_diameter = 64;
    const BoundaryFn neumann = [](double) { return BoundaryValue{false, 0.0}; };
    CHECK_THROWS_AS(solve_disc_laplace(kR, neumann, grid), PhysicsError);
}

TEST_CASE("unit potentials: maximum principle and partition of unity at sites") {
    // 60 randomly placed interior points probe the discrete identities.
    const DeviceGeometry geom = small_device(21, 60);
    GridSpec grid;
    grid.cells_across_diameter = 128;
    const PotentialBasis basis = solve_unit_potentials(geom, grid);
    REQUIRE(basis.n_sites == 60);
    REQUIRE(basis.n_electrodes == 8);

    for (int s = 0; s < basis.n_sites; ++s) {
        double sum = 0.0;
        for (int k = 0; k < 8; ++k) {
            const double phi = basis.at(s, k);
            CHECK(phi >= -1e-9);       // discrete maximum principle
            CHECK(phi <= 1.0 + 1e-9);
            sum += phi;
        }
        CHECK(std::fabs(sum - 1.0) < 1e-6);  // all electrodes at 1 V is the constant solution
    }
    for (double r : harmonic_residual(basis)) CHECK(r <= grid.tolerance);
}

TEST_CASE("potential_at superposes unit solutions") {
    const DeviceGeometry geom = small_device(22, 10);
    GridSpec grid;
    grid.cells_across_diameter = 64;
    const PotentialBasis basis = solve_unit_potentials(geom, grid);

    std::vector<double> zeros(8, 0.0);
    for (int s = 0; s < basis.n_sites; ++s) CHECK(potential_at(basis, zeros, s) == 0.0);

    std::vector<double> same(8, 0.7);
    for (int s = 0; s < basis.n_sites; ++s)
        CHECK(std::fabs(potential_at(basis, same, s) - 0.7) < 1e-6);

    std::vector<double> e1(8, 0.0);
    e1[0] = 1.0;
    for (int s = 0; s < basis.n_sites; ++s) CHECK(potential_at(basis, e1, s) == basis.at(s, 0));

    // Exact linearity of the weighted sum.
    Xoshiro256pp rng(11);
    std::vector<double> u(8), v(8), combo(8);
    for (int trial = 0; trial < 20; ++trial) {
        const double alpha = rng.uniform(-2.0, 2.0), beta = rng.uniform(-2.0, 2.0);
        for (int k = 0; k < 8; ++k) {
            u[k] = rng.uniform(-1.0, 1.0);
            v[k] = rng.uniform(-1.0, 1.0);
            combo[k] = alpha * u[k] + beta * v[k];
        }
        for (int s = 0; s < basis.n_sites; ++s) {
            const double lhs = potential_at(basis, combo, s);
            const double rhs = alpha * potential_at(basis, u, s) + beta * potential_at(basis, v, s);
            CHECK(std::fabs(lhs - rhs) <= 1e-12 * std::max(1.0, std::fabs(rhs)));
        }
    }

    std::vector<double> short_vec(7, 0.0);
    CHECK_THROWS_AS(potential_at(basis, short_vec, 0), ConfigError);
}

TEST_CASE("iteration budget of 1 reports the residual without throwing") {
    const DeviceGeometry geom = small_device(23, 8);
    GridSpec grid;
    grid.cells_across_diameter = 64;
    grid.max_iterations = 1;
    grid.throw_on_nonconvergence = false;
    const PotentialBasis basis = solve_unit_potentials(geom, grid);
    const std::vector<double> res = harmonic_residual(basis);
    bool any_unconverged = false;
    for (std::size_t k = 0; k < res.size(); ++k) {
        if (!basis.converged[k]) {
            any_unconverged = true;
            CHECK(res[k] > grid.tolerance);
        }
    }
    CHECK(any_unconverged);

    grid.throw_on_nonconvergence = true;
    CHECK_THROWS_AS(solve_unit_potentials(geom, grid), PhysicsError);
}

TEST_CASE("unit-potential solves require a production grid") {
    const DeviceGeometry geom = small_device(24, 8);
    GridSpec grid;
    grid.cells_across_diameter = 32;
    CHECK_THROWS_AS(solve_unit_potentials(geom, grid), ConfigError);
}

TEST_CASE("basis cache round-trips and revalidates") {
    const DeviceGeometry geom = small_device(25, 12);
    GridSpec grid;
    grid.cells_across_diameter = 64;
    const PotentialBasis basis = solve_unit_potentials(geom, grid);

    const std::string path = "basis_cache_test.json";
    save_basis(basis, path);
    const PotentialBasis loaded = load_basis(path);
    CHECK(loaded.geometry_hash == basis.geometry_hash);
    CHECK(loaded.phi == basis.phi);
    CHECK(loaded.residuals == basis.residuals);

    const PotentialBasis cached = load_or_solve_basis(geom, grid, path);
    CHECK(cached.phi == basis.phi);

    // A different geometry must not reuse the cache.
    const DeviceGeometry other = small_device(26, 12);
    const PotentialBasis fresh = load_or_solve_basis(other, grid, path);
    CHECK(fresh.geometry_hash == geometry_hash(other));
    CHECK(fresh.geometry_hash != basis.geometry_hash);
    std::remove(path.c_str());
}
