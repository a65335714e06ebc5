#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "json.hpp"

#include "dnpu/analysis.hpp"
#include "dnpu/kinetics.hpp"

namespace dnpu {

enum class Gate { AND, OR, NAND, NOR, XOR, XNOR };

Gate gate_from_string(const std::string& s);
std::string to_string(Gate gate);

// Truth table over the input order (00, 10, 01, 11).
std::array<double, 4> gate_table(Gate gate);

struct FitnessResult {
    double slope_na = 0.0;      // m
    double intercept_na = 0.0;  // c
    double mse_na2 = 0.0;       // floored at mse_floor
    double fitness = 0.0;       // m / (sqrt(MSE) + k |c|)
    Gate gate = Gate::AND;
    double k = 0.01;
};

// MSE floor keeping the fitness of an exact truth-table match finite
// (F = 1e6 for a unit-slope perfect fit).
inline constexpr double mse_floor_na2 = 1e-12;

// Ordinary least squares of the current vector against the gate table,
// unweighted over the four points, MSE normalized by 4. The fit runs on the
// mean-centered currents, which makes F at k = 0 exactly invariant under
// mean subtraction of the input.
FitnessResult evaluate_fitness(const Vec4& currents_na, Gate gate, double k = 0.01);

struct VoltageRanges {
    // Control ranges ordered by electrode index: U1, U4, U5, U6, U7.
    std::array<std::array<double, 2>, 5> control{};
    double input_low_v = 0.0;
    double input_high_v = 0.5;
};

VoltageRanges standard_ranges();             // controls in [-1, 1] V, inputs 0 / 0.5 V
VoltageRanges surrogate_comparison_ranges(); // U1,U4,U5 in [-0.5,0.5], U6,U7 in [-0.3,0.3], inputs 0 / 0.1 V
VoltageRanges ranges_from_preset(const std::string& preset);

struct KmcRunParams {
    std::int64_t equilibration_steps = 10000;
    std::int64_t measurement_steps = 10000000;
    int subintervals = 100;
};

struct SampleRecord {
    std::int64_t sample_index = 0;
    std::array<double, 5> controls_v{};
    Vec4 currents_na{};
    Vec4 stderr_na{};
    bool flagged = false;  // KMC hit an absorbing state; excluded from analysis
    std::uint64_t seed = 0;
};

struct SampleDataset {
    std::vector<SampleRecord> records;  // valid records only, ascending index
    std::vector<std::int64_t> flagged_indices;
    VoltageRanges ranges;
    std::string device_hash;
    double hopping_distance_nm = 0.0;
    double temperature_k = 0.0;
    std::uint64_t master_seed = 0;
    std::int64_t n_requested = 0;
    KmcRunParams run;

    std::vector<Vec4> current_vectors() const;
};

struct SamplerOptions {
    int threads = 1;
    std::int64_t first_index = 0;  // resume point; indices below are skipped
    // Called in ascending sample order, including flagged records.
    std::function<void(const SampleRecord&)> on_record;
};

// Hypercube sampling: n control vectors drawn uniformly (independently per
// control electrode), each measured for the four logic input combinations.
// Sample i and input combo c run on the stream derived from (master_seed,
// i, c), so records are identical for any thread count and any resume
// point.
SampleDataset sample_hypercube(const HoppingSystem& sys, const std::string& device_hash,
                               const VoltageRanges& ranges, std::int64_t n, std::uint64_t master_seed,
                               const KmcRunParams& run, const SamplerOptions& options = {});

struct AbundancePoint {
    double f_min = 0.0;
    double fraction = 0.0;
};

// Fraction of records with fitness strictly above each threshold; monotone
// nonincreasing in the threshold.
std::vector<AbundancePoint> abundance_curve(const SampleDataset& dataset, Gate gate, double k,
                                            std::span<const double> f_grid);

double abundance_at(const SampleDataset& dataset, Gate gate, double k, double f_min);

struct LocalHypervolume {
    double p0 = 0.0;       // fraction above threshold inside the local hypercube
    double v0 = 0.0;       // p0 * delta_v
    double delta_v = 0.0;  // product of the edge lengths, V^5
    std::int64_t n = 0;
    std::int64_t flagged = 0;
};

// Monte Carlo estimate of the hypervolume hosting a gate realization:
// samples inside the local hypercube (which must lie within the global
// ranges) and counts fitness F > f_min.
LocalHypervolume local_hypervolume(const HoppingSystem& sys, const std::string& device_hash,
                                   const std::array<double, 5>& center_v,
                                   const std::array<double, 5>& edges_v, Gate gate, double f_min,
                                   double k, std::int64_t n, std::uint64_t seed, const KmcRunParams& run,
                                   const VoltageRanges& global_ranges, int threads = 1);

struct HypervolumeEstimate {
    double p0 = 0.0;
    double delta_v = 0.0;
    double v0 = 0.0;  // p0 * delta_v
    double p_abundance = 0.0;
    double v_tot = 0.0;
    double n_gates_raw = 0.0;
    std::int64_t n_gates = 0;  // rounded to the nearest integer
    // Consistency conditions on the local hypercube choice: p0 << 1 (taken
    // as p0 < 0.1) and V_tot/delta_v >> N_gates (taken as a 5x margin, the
    // loosest ratio the published table itself accepts).
    bool p0_small = false;
    bool regions_separated = false;
};

HypervolumeEstimate estimate_gate_count(double p_abundance, double v_tot, double p0, double delta_v);

// Dataset files: CSV rows for the valid records plus a JSON sidecar with
// the ranges, physics parameters, seed and flagged indices.
std::string dataset_csv_header();
std::string dataset_csv_row(const SampleRecord& record);
nlohmann::json dataset_meta_json(const SampleDataset& dataset, std::int64_t completed_through);
void save_dataset(const SampleDataset& dataset, const std::string& csv_path, const std::string& meta_path);
SampleDataset load_dataset(const std::string& csv_path, const std::string& meta_path);

// Hash over everything that fixes a sampling run except the sample count,
// so a resumed run can be checked against its sidecar.
std::string sampling_config_hash(const std::string& device_hash, const VoltageRanges& ranges,
                                 const KmcRunParams& run, std::uint64_t master_seed, double a_nm,
                                 double t_k);

}  // namespace dnpu
