#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "dnpu/sampling.hpp"

namespace dnpu::cli {

// Command implementations behind the `dnpu` tool; they throw ConfigError,
// PhysicsError or ValidationError, which main() maps to exit codes 1/2/3.

struct GenerateOptions {
    std::uint64_t seed = 1;
    DeviceConfig config;
    std::string out_dir = ".";
};

// Writes <out>/device.json; returns the device path.
std::string cmd_generate(const GenerateOptions& opt);

struct SampleOptions {
    std::string device_path;
    std::string preset = "standard";
    std::int64_t samples = 10000;
    std::uint64_t seed = 1;
    KmcRunParams run;
    int grid = 256;
    int threads = 1;
    bool resume = false;
    std::optional<double> a_nm;   // physics overrides
    std::optional<double> t_kelvin;
    std::string out_dir = ".";
    int checkpoint_every = 100;
};

// Writes <out>/dataset.csv and <out>/dataset.meta.json with periodic
// checkpoints; --resume continues from the sidecar's completed_through.
void cmd_sample(const SampleOptions& opt);

struct AbundanceOptions {
    std::string dataset_csv;
    std::string dataset_meta;
    std::vector<std::string> gates;  // empty = all six
    double k = 0.01;
    double fmin_start = 0.0;
    double fmin_stop = 20.0;
    double fmin_step = 0.25;
    std::string out_dir = ".";
};

// One curve file per gate for the requested k and for k = 0.
void cmd_abundance(const AbundanceOptions& opt);

struct AnalyzeOptions {
    std::string dataset_csv;
    std::string dataset_meta;
    std::string out_dir = ".";
};

// Writes <out>/analysis.json and <out>/eigenvectors.csv.
void cmd_analyze(const AnalyzeOptions& opt);

struct HypervolumeOptions {
    std::string device_path;
    std::string preset = "standard";
    std::array<double, 5> center{};
    std::array<double, 5> edges{};
    std::string gate = "AND";
    double f_min = 10.0;
    double k = 0.01;
    std::int64_t samples = 10000;
    std::uint64_t seed = 1;
    KmcRunParams run;
    int grid = 256;
    int threads = 1;
    std::optional<double> a_nm;
    std::optional<double> t_kelvin;
    // Either an explicit global abundance or a dataset to take it from.
    std::optional<double> p_abundance;
    std::string dataset_csv;
    std::string dataset_meta;
    std::string out_dir = ".";
};

void cmd_hypervolume(const HypervolumeOptions& opt);

struct OracleCheckOptions {
    std::int64_t steps = 200000;
    int subintervals = 100;
    std::int64_t equilibration = 10000;
    int seeds = 3;
    double bias_v = 0.1;
};

// KMC vs master-equation comparison on the built-in 1-, 2- and 3-site
// systems plus the zero-bias check; returns true when every case agrees
// within 3 standard errors.
bool cmd_oracle_check(const OracleCheckOptions& opt);

}  // namespace dnpu::cli
