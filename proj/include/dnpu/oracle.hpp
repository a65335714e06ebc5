#pragma once

#include <span>

#include "dnpu/kinetics.hpp"

namespace dnpu {

// Exact stationary solution of the master equation the KMC samples, for
// systems small enough to enumerate every occupation configuration
// (2^n_sites states; carrier number varies through electrode exchange).
// Returns the exact mean output current as the stationary probability flux
// through the output electrode. Shares the rate and energy conventions with
// the KMC engine; what it checks independently is the stochastic sampling.
struct OracleResult {
    double current_na = 0.0;
    int n_states = 0;
    double flux_scale_na = 0.0;  // total |flux| through the output; sets the zero scale
};

OracleResult steady_state_oracle(const HoppingSystem& sys, std::span<const double> voltages);

// One KMC run against the exact stationary current on the same system.
struct OracleComparison {
    double oracle_na = 0.0;
    double kmc_na = 0.0;
    double kmc_stderr_na = 0.0;
    double sigma_distance = 0.0;  // |kmc - oracle| / stderr
};

OracleComparison compare_oracle_to_kmc(const HoppingSystem& sys, std::span<const double> voltages,
                                       std::int64_t measurement_steps, int subintervals,
                                       std::int64_t equilibration_steps, std::uint64_t seed);

}  // namespace dnpu
