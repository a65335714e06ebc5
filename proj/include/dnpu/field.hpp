#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "dnpu/geometry.hpp"

namespace dnpu {

struct GridSpec {
    int cells_across_diameter = 256;  // >= 64 for production solves
    double tolerance = 1e-10;         // max nodal residual, in volts
    int max_iterations = 200000;
    bool throw_on_nonconvergence = true;
};

// Boundary condition sampled by polar angle on the disc rim.
struct BoundaryValue {
    bool dirichlet = false;
    double value = 0.0;  // meaningful only for Dirichlet; Neumann is insulating
};
using BoundaryFn = std::function<BoundaryValue(double angle_rad)>;

// Discrete solution of the Laplace equation on the disc, on a uniform
// Cartesian grid with the circle embedded. Boundary-adjacent stencils use
// shortened arms to the true circle crossing (Shortley-Weller) with the
// Dirichlet datum evaluated at the crossing; Neumann crossings drop the arm,
// which preserves constants and the discrete maximum principle.
struct DiscSolution {
    double radius_nm = 0.0;
    int n = 0;                     // cells across the diameter
    double h = 0.0;                // grid spacing
    std::vector<double> values;    // (n+1)^2 node values; valid where has_value
    std::vector<std::uint8_t> inside;     // node strictly inside the disc
    std::vector<std::uint8_t> has_value;  // inside or filled for interpolation
    double residual = 0.0;         // max nodal residual at exit
    int iterations = 0;
    bool converged = false;

    // Bilinear interpolation from the four surrounding nodes; falls back to
    // renormalized weights (and, in the last resort, the nearest valued
    // node) when a corner carries no value.
    double value_at(double x, double y) const;
};

DiscSolution solve_disc_laplace(double radius_nm, const BoundaryFn& boundary, const GridSpec& grid);

// Per-electrode unit solutions phi_k sampled at the dopant sites:
// electrode k held at 1 V, the other arcs at 0 V, insulating in between.
struct PotentialBasis {
    std::string geometry_hash;
    int cells_across_diameter = 0;
    double tolerance = 0.0;
    int n_electrodes = 0;
    int n_sites = 0;
    std::vector<double> phi;        // [site * n_electrodes + k]
    std::vector<double> residuals;  // per electrode, volts
    std::vector<std::uint8_t> converged;

    double at(int site, int electrode) const { return phi[static_cast<std::size_t>(site) * n_electrodes + electrode]; }
};

PotentialBasis solve_unit_potentials(const DeviceGeometry& geometry, const GridSpec& grid);

// Superposition sum over electrodes: sum_k U_k phi_k(site), in volts.
double potential_at(const PotentialBasis& basis, std::span<const double> voltages, int site);

// Maximum discrete-Laplacian residual of each stored unit solution.
std::vector<double> harmonic_residual(const PotentialBasis& basis);

void save_basis(const PotentialBasis& basis, const std::string& path);
PotentialBasis load_basis(const std::string& path);

// Loads a cached basis when it matches geometry and grid, otherwise solves
// and writes the cache.
PotentialBasis load_or_solve_basis(const DeviceGeometry& geometry, const GridSpec& grid,
                                   const std::string& cache_path);

}  // namespace dnpu
