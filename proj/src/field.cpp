#include "dnpu/field.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "dnpu/errors.hpp"

namespace dnpu {

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;

struct Arm {
    enum Kind : std::uint8_t { interior, dirichlet, neumann } kind = interior;
    int neighbor = -1;   // node index for interior arms
    double length = 0.0; // physical arm length
    double value = 0.0;  // boundary datum for dirichlet arms
};

// One assembled stencil row: diag * u0 = sum_k w_k u_nb[k] + rhs.
struct Row {
    int node = 0;
    int nb[4] = {-1, -1, -1, -1};
    double w[4] = {0.0, 0.0, 0.0, 0.0};
    int n_nb = 0;
    double diag = 0.0;
    double rhs = 0.0;
};

}  // namespace

double DiscSolution::value_at(double x, double y) const {
    const int npts = n + 1;
    const double fx = (x + radius_nm) / h;
    const double fy = (y + radius_nm) / h;
    int i = static_cast<int>(std::floor(fx));
    int j = static_cast<int>(std::floor(fy));
    i = std::clamp(i, 0, n - 1);
    j = std::clamp(j, 0, n - 1);
    const double tx = std::clamp(fx - i, 0.0, 1.0);
    const double ty = std::clamp(fy - j, 0.0, 1.0);

    const int c[4] = {j * npts + i, j * npts + i + 1, (j + 1) * npts + i, (j + 1) * npts + i + 1};
    const double w[4] = {(1 - tx) * (1 - ty), tx * (1 - ty), (1 - tx) * ty, tx * ty};

    double sum = 0.0, wsum = 0.0;
    for (int k = 0; k < 4; ++k) {
        if (has_value[c[k]]) {
            sum += w[k] * values[c[k]];
            wsum += w[k];
        }
    }
    if (wsum > 0.0) return sum / wsum;

    // Degenerate sliver cell: take the nearest valued node. Expanding ring
    // search; terminates because the grid holds interior nodes.
    const int ci = std::clamp(static_cast<int>(std::lround(fx)), 0, n);
    const int cj = std::clamp(static_cast<int>(std::lround(fy)), 0, n);
    for (int ring = 1; ring <= n; ++ring) {
        double best = 0.0, best_d2 = -1.0;
        for (int dj = -ring; dj <= ring; ++dj) {
            for (int di = -ring; di <= ring; ++di) {
                if (std::max(std::abs(di), std::abs(dj)) != ring) continue;
                const int ii = ci + di, jj = cj + dj;
                if (ii < 0 || ii > n || jj < 0 || jj > n) continue;
                const int node = jj * npts + ii;
                if (!has_value[node]) continue;
                const double dx = ii - fx, dy = jj - fy;
                const double d2 = dx * dx + dy * dy;
                if (best_d2 < 0.0 || d2 < best_d2) {
                    best_d2 = d2;
                    best = values[node];
                }
            }
        }
        if (best_d2 >= 0.0) return best;
    }
    throw PhysicsError("interpolation found no valued grid node");
}

DiscSolution solve_disc_laplace(double radius_nm, const BoundaryFn& boundary, const GridSpec& grid) {
    if (radius_nm <= 0.0) throw ConfigError("disc radius must be positive");
    if (grid.cells_across_diameter < 8) throw ConfigError("degenerate grid: need at least 8 cells across the diameter");

    const int n = grid.cells_across_diameter;
    const int npts = n + 1;
    const double R = radius_nm;
    const double h = 2.0 * R / n;
    const double r2 = R * R;

    DiscSolution sol;
    sol.radius_nm = R;
    sol.n = n;
    sol.h = h;
    sol.values.assign(static_cast<std::size_t>(npts) * npts, 0.0);
    sol.inside.assign(sol.values.size(), 0);
    sol.has_value.assign(sol.values.size(), 0);

    auto coord = [&](int i) { return -R + i * h; };
    auto node_of = [&](int i, int j) { return j * npts + i; };

    for (int j = 0; j < npts; ++j) {
        const double y = coord(j);
        for (int i = 0; i < npts; ++i) {
            const double x = coord(i);
            if (x * x + y * y < r2) sol.inside[node_of(i, j)] = 1;
        }
    }

    // Crossing of the segment from (x,y) toward (dx,dy) with the circle,
    // as a fraction of h; the caller guarantees the far end lies outside.
    auto crossing = [&](double x, double y, int dx, int dy) {
        double t;
        if (dx != 0) {
            const double root = std::sqrt(std::max(0.0, r2 - y * y));
            t = (dx > 0 ? root - x : x + root) / h;
        } else {
            const double root = std::sqrt(std::max(0.0, r2 - x * x));
            t = (dy > 0 ? root - y : y + root) / h;
        }
        return std::clamp(t, 1e-6, 1.0);
    };

    const int dirs[4][2] = {{1, 0}, {-1, 0}, {0, 1}, {0, -1}};

    std::vector<Row> rows;
    rows.reserve(static_cast<std::size_t>(npts) * npts * 3 / 4);
    bool any_dirichlet = false;

    for (int j = 0; j < npts; ++j) {
        for (int i = 0; i < npts; ++i) {
            const int node = node_of(i, j);
            if (!sol.inside[node]) continue;
            const double x = coord(i), y = coord(j);

            Arm arms[4];
            for (int d = 0; d < 4; ++d) {
                const int ni = i + dirs[d][0], nj = j + dirs[d][1];
                const bool nb_inside =
                    ni >= 0 && ni <= n && nj >= 0 && nj <= n && sol.inside[node_of(ni, nj)];
                if (nb_inside) {
                    arms[d].kind = Arm::interior;
                    arms[d].neighbor = node_of(ni, nj);
                    arms[d].length = h;
                } else {
                    const double t = crossing(x, y, dirs[d][0], dirs[d][1]);
                    const double bx = x + t * h * dirs[d][0];
                    const double by = y + t * h * dirs[d][1];
                    double angle = std::atan2(by, bx);
                    if (angle < 0.0) angle += kTwoPi;
                    const BoundaryValue bc = boundary(angle);
                    arms[d].length = t * h;
                    if (bc.dirichlet) {
                        arms[d].kind = Arm::dirichlet;
                        arms[d].value = bc.value;
                        any_dirichlet = true;
                    } else {
                        arms[d].kind = Arm::neumann;
                    }
                }
            }

            Row row;
            row.node = node;
            // Shortley-Weller weights per axis; a Neumann arm is dropped
            // from both the off-diagonal and the diagonal, which is the
            // reflected-value (zero-flux) closure.
            for (int axis = 0; axis < 2; ++axis) {
                const Arm& a = arms[2 * axis];
                const Arm& b = arms[2 * axis + 1];
                const double denom = a.length + b.length;
                const Arm* pair[2] = {&a, &b};
                for (const Arm* arm : pair) {
                    if (arm->kind == Arm::neumann) continue;
                    const double w = 2.0 / (arm->length * denom);
                    row.diag += w;
                    if (arm->kind == Arm::interior) {
                        row.nb[row.n_nb] = arm->neighbor;
                        row.w[row.n_nb] = w;
                        ++row.n_nb;
                    } else {
                        row.rhs += w * arm->value;
                    }
                }
            }
            if (row.diag <= 0.0) throw PhysicsError("isolated grid node; refine the grid");
            rows.push_back(row);
        }
    }
    if (rows.empty()) throw ConfigError("degenerate grid: no interior nodes");
    if (!any_dirichlet)
        throw PhysicsError("boundary has no Dirichlet segment; the potential is undetermined");

    // SOR sweeps with the asymptotically optimal relaxation factor for this
    // grid size; the residual check runs every 32 sweeps.
    const double omega = 2.0 / (1.0 + std::sin(3.14159265358979323846 / n));
    double residual = 0.0;
    int iter = 0;
    bool converged = false;
    std::vector<double>& u = sol.values;
    while (iter < grid.max_iterations) {
        for (int sweep = 0; sweep < 32 && iter < grid.max_iterations; ++sweep, ++iter) {
            for (const Row& row : rows) {
                double s = row.rhs;
                for (int k = 0; k < row.n_nb; ++k) s += row.w[k] * u[row.nb[k]];
                const double unew = s / row.diag;
                u[row.node] += omega * (unew - u[row.node]);
            }
        }
        residual = 0.0;
        for (const Row& row : rows) {
            double s = row.rhs;
            for (int k = 0; k < row.n_nb; ++k) s += row.w[k] * u[row.nb[k]];
            residual = std::max(residual, std::fabs(s / row.diag - u[row.node]));
        }
        if (residual < grid.tolerance) {
            converged = true;
            break;
        }
    }
    sol.residual = residual;
    sol.iterations = iter;
    sol.converged = converged;

    for (const Row& row : rows) sol.has_value[row.node] = 1;

    // Fill the outside nodes that border interior ones so bilinear cells
    // near the rim have all four corners: Dirichlet crossings contribute the
    // boundary datum, Neumann crossings mirror the interior value.
    std::vector<std::pair<int, double>> fills;
    for (int j = 0; j < npts; ++j) {
        for (int i = 0; i < npts; ++i) {
            const int node = node_of(i, j);
            if (sol.inside[node]) continue;
            double sum = 0.0;
            int count = 0;
            for (const auto& d : dirs) {
                const int ni = i + d[0], nj = j + d[1];
                if (ni < 0 || ni > n || nj < 0 || nj > n) continue;
                const int nb = node_of(ni, nj);
                if (!sol.inside[nb]) continue;
                const double x = coord(ni), y = coord(nj);
                const double t = crossing(x, y, -d[0], -d[1]);
                const double bx = x - t * h * d[0];
                const double by = y - t * h * d[1];
                double angle = std::atan2(by, bx);
                if (angle < 0.0) angle += kTwoPi;
                const BoundaryValue bc = boundary(angle);
                sum += bc.dirichlet ? bc.value : u[nb];
                ++count;
            }
            if (count > 0) fills.emplace_back(node, sum / count);
        }
    }
    for (const auto& [node, value] : fills) {
        u[node] = value;
        sol.has_value[node] = 1;
    }

    return sol;
}

namespace {

BoundaryFn electrode_boundary(const DeviceGeometry& geom, int held_at_one) {
    struct ArcSpan {
        double lo, hi;  // may wrap past 2*pi
        bool held;
    };
    std::vector<ArcSpan> spans;
    for (int k = 0; k < geom.n_electrodes(); ++k) {
        const ElectrodeArc& arc = geom.electrodes[k];
        double c = std::fmod(arc.center_angle_rad, kTwoPi);
        if (c < 0.0) c += kTwoPi;
        spans.push_back({c - 0.5 * arc.angular_width_rad, c + 0.5 * arc.angular_width_rad, k == held_at_one});
    }
    return [spans](double angle) {
        for (const ArcSpan& s : spans) {
            const bool in_arc = (angle >= s.lo && angle <= s.hi) ||
                                (angle + kTwoPi >= s.lo && angle + kTwoPi <= s.hi) ||
                                (angle - kTwoPi >= s.lo && angle - kTwoPi <= s.hi);
            if (in_arc) return BoundaryValue{true, s.held ? 1.0 : 0.0};
        }
        return BoundaryValue{false, 0.0};
    };
}

}  // namespace

PotentialBasis solve_unit_potentials(const DeviceGeometry& geom, const GridSpec& grid) {
    if (grid.cells_across_diameter < 64)
        throw ConfigError("unit-potential solves need at least 64 cells across the diameter");
    const std::vector<std::string> issues = validate_device(geom);
    if (!issues.empty()) throw ValidationError("invalid device: " + issues.front());

    PotentialBasis basis;
    basis.geometry_hash = geometry_hash(geom);
    basis.cells_across_diameter = grid.cells_across_diameter;
    basis.tolerance = grid.tolerance;
    basis.n_electrodes = geom.n_electrodes();
    basis.n_sites = static_cast<int>(geom.dopants.size());
    basis.phi.assign(static_cast<std::size_t>(basis.n_sites) * basis.n_electrodes, 0.0);
    basis.residuals.assign(static_cast<std::size_t>(basis.n_electrodes), 0.0);
    basis.converged.assign(static_cast<std::size_t>(basis.n_electrodes), 0);

    for (int k = 0; k < basis.n_electrodes; ++k) {
        const DiscSolution sol = solve_disc_laplace(geom.radius_nm, electrode_boundary(geom, k), grid);
        if (!sol.converged && grid.throw_on_nonconvergence)
            throw PhysicsError("unit-potential solve for electrode " +
                               std::to_string(geom.electrodes[k].index) + " did not converge (residual " +
                               std::to_string(sol.residual) + ")");
        basis.residuals[k] = sol.residual;
        basis.converged[k] = sol.converged ? 1 : 0;
        for (int s = 0; s < basis.n_sites; ++s) {
            basis.phi[static_cast<std::size_t>(s) * basis.n_electrodes + k] =
                sol.value_at(geom.dopants[s].x, geom.dopants[s].y);
        }
    }
    return basis;
}

double potential_at(const PotentialBasis& basis, std::span<const double> voltages, int site) {
    if (static_cast<int>(voltages.size()) != basis.n_electrodes)
        throw ConfigError("expected " + std::to_string(basis.n_electrodes) + " electrode voltages, got " +
                          std::to_string(voltages.size()));
    if (site < 0 || site >= basis.n_sites) throw ConfigError("site index out of range");
    const double* phi = &basis.phi[static_cast<std::size_t>(site) * basis.n_electrodes];
    double v = 0.0;
    for (int k = 0; k < basis.n_electrodes; ++k) v += voltages[k] * phi[k];
    return v;
}

std::vector<double> harmonic_residual(const PotentialBasis& basis) { return basis.residuals; }

void save_basis(const PotentialBasis& basis, const std::string& path) {
    nlohmann::json j;
    j["geometry_hash"] = basis.geometry_hash;
    j["grid"] = {{"cells_across_diameter", basis.cells_across_diameter}, {"tolerance", basis.tolerance}};
    j["n_electrodes"] = basis.n_electrodes;
    j["n_sites"] = basis.n_sites;
    j["phi"] = basis.phi;
    j["residuals"] = basis.residuals;
    std::vector<int> conv(basis.converged.begin(), basis.converged.end());
    j["converged"] = conv;
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot open '" + path + "' for writing");
    out << j.dump() << "\n";
}

PotentialBasis load_basis(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open basis file '" + path + "'");
    nlohmann::json j;
    try {
        in >> j;
        PotentialBasis basis;
        basis.geometry_hash = j.at("geometry_hash").get<std::string>();
        basis.cells_across_diameter = j.at("grid").at("cells_across_diameter").get<int>();
        basis.tolerance = j.at("grid").at("tolerance").get<double>();
        basis.n_electrodes = j.at("n_electrodes").get<int>();
        basis.n_sites = j.at("n_sites").get<int>();
        basis.phi = j.at("phi").get<std::vector<double>>();
        basis.residuals = j.at("residuals").get<std::vector<double>>();
        for (int c : j.at("converged").get<std::vector<int>>()) basis.converged.push_back(c ? 1 : 0);
        if (basis.phi.size() != static_cast<std::size_t>(basis.n_sites) * basis.n_electrodes)
            throw ValidationError("basis file phi size mismatch");
        return basis;
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("malformed basis file: ") + e.what());
    }
}

PotentialBasis load_or_solve_basis(const DeviceGeometry& geom, const GridSpec& grid,
                                   const std::string& cache_path) {
    const std::string expect_hash = geometry_hash(geom);
    if (std::ifstream probe(cache_path); probe.good()) {
        try {
            PotentialBasis cached = load_basis(cache_path);
            if (cached.geometry_hash == expect_hash &&
                cached.cells_across_diameter == grid.cells_across_diameter &&
                cached.tolerance == grid.tolerance) {
                return cached;
            }
        } catch (const std::exception&) {
            // fall through to a fresh solve
        }
    }
    PotentialBasis basis = solve_unit_potentials(geom, grid);
    save_basis(basis, cache_path);
    return basis;
}

}  // namespace dnpu
