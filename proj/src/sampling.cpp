#include "dnpu/sampling.hpp"

#include <atomic>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

#include "dnpu/errors.hpp"

namespace dnpu {

Gate gate_from_string(const std::string& s) {
    if (s == "AND") return Gate::AND;
    if (s == "OR") return Gate::OR;
    if (s == "NAND") return Gate::NAND;
    if (s == "NOR") return Gate::NOR;
    if (s == "XOR") return Gate::XOR;
    if (s == "XNOR") return Gate::XNOR;
    throw ConfigError("unknown gate '" + s + "'");
}

std::string to_string(Gate gate) {
    switch (gate) {
        case Gate::AND: return "AND";
        case Gate::OR: return "OR";
        case Gate::NAND: return "NAND";
        case Gate::NOR: return "NOR";
        case Gate::XOR: return "XOR";
        case Gate::XNOR: return "XNOR";
    }
    throw ConfigError("unknown gate");
}

std::array<double, 4> gate_table(Gate gate) {
    switch (gate) {
        case Gate::AND: return {0, 0, 0, 1};
        case Gate::OR: return {0, 1, 1, 1};
        case Gate::NAND: return {1, 1, 1, 0};
        case Gate::NOR: return {1, 0, 0, 0};
        case Gate::XOR: return {0, 1, 1, 0};
        case Gate::XNOR: return {1, 0, 0, 1};
    }
    throw ConfigError("unknown gate");
}

FitnessResult evaluate_fitness(const Vec4& currents_na, Gate gate, double k) {
    for (double c : currents_na)
        if (!std::isfinite(c)) throw ConfigError("fitness needs finite currents");

    const std::array<double, 4> g = gate_table(gate);
    const double g_mean = (((g[0] + g[1]) + g[2]) + g[3]) / 4.0;
    const double i_mean = (((currents_na[0] + currents_na[1]) + currents_na[2]) + currents_na[3]) / 4.0;
    const Vec4 d = subtract_average(currents_na);

    double sxy = 0.0, sxx = 0.0;
    for (int i = 0; i < 4; ++i) {
        const double gc = g[i] - g_mean;
        sxy += gc * d[i];
        sxx += gc * gc;
    }
    const double m = sxy / sxx;

    double mse = 0.0;
    for (int i = 0; i < 4; ++i) {
        const double r = d[i] - m * (g[i] - g_mean);
        mse += r * r;
    }
    mse /= 4.0;
    mse = std::max(mse, mse_floor_na2);

    FitnessResult out;
    out.slope_na = m;
    out.intercept_na = i_mean - m * g_mean;
    out.mse_na2 = mse;
    out.fitness = m / (std::sqrt(mse) + k * std::fabs(out.intercept_na));
    out.gate = gate;
    out.k = k;
    return out;
}

VoltageRanges standard_ranges() {
    VoltageRanges r;
    for (auto& c : r.control) c = {-1.0, 1.0};
    r.input_low_v = 0.0;
    r.input_high_v = 0.5;
    return r;
}

VoltageRanges surrogate_comparison_ranges() {
    VoltageRanges r;
    r.control[0] = {-0.5, 0.5};  // U1
    r.control[1] = {-0.5, 0.5};  // U4
    r.control[2] = {-0.5, 0.5};  // U5
    r.control[3] = {-0.3, 0.3};  // U6
    r.control[4] = {-0.3, 0.3};  // U7
    r.input_low_v = 0.0;
    r.input_high_v = 0.1;
    return r;
}

VoltageRanges ranges_from_preset(const std::string& preset) {
    if (preset == "standard") return standard_ranges();
    if (preset == "surrogate-comparison") return surrogate_comparison_ranges();
    throw ConfigError("unknown preset '" + preset + "' (expected standard or surrogate-comparison)");
}

namespace {

std::vector<double> assemble_voltages(const HoppingSystem& sys, const std::array<double, 5>& controls,
                                      double u_left, double u_right) {
    if (sys.input_left_electrode < 0 || sys.input_right_electrode < 0 ||
        sys.control_electrodes.size() != 5)
        throw ConfigError("system has no 8-electrode role map; build it from a device geometry");
    std::vector<double> u(static_cast<std::size_t>(sys.n_electrodes()), 0.0);
    for (int i = 0; i < 5; ++i) u[sys.control_electrodes[i]] = controls[i];
    u[sys.input_left_electrode] = u_left;
    u[sys.input_right_electrode] = u_right;
    u[sys.output_electrode] = 0.0;
    return u;
}

// Input combos in component order (00, 10, 01, 11); first bit = left.
constexpr int kComboLeft[4] = {0, 1, 0, 1};
constexpr int kComboRight[4] = {0, 0, 1, 1};

SampleRecord run_sample(KmcEngine& engine, std::int64_t index, const VoltageRanges& ranges,
                        std::uint64_t master_seed, const KmcRunParams& run) {
    const HoppingSystem& sys = engine.system();
    SampleRecord rec;
    rec.sample_index = index;
    rec.seed = derive_seed(master_seed, SeedTag::kmc_replica, {static_cast<std::uint64_t>(index), 0});

    Xoshiro256pp ctrl_rng(derive_seed(master_seed, SeedTag::control_draw, {static_cast<std::uint64_t>(index)}));
    for (int i = 0; i < 5; ++i)
        rec.controls_v[i] = ctrl_rng.uniform(ranges.control[i][0], ranges.control[i][1]);

    for (int combo = 0; combo < 4; ++combo) {
        const double u_l = kComboLeft[combo] ? ranges.input_high_v : ranges.input_low_v;
        const double u_r = kComboRight[combo] ? ranges.input_high_v : ranges.input_low_v;
        engine.set_voltages(assemble_voltages(sys, rec.controls_v, u_l, u_r));
        Xoshiro256pp rng(derive_seed(master_seed, SeedTag::kmc_replica,
                                     {static_cast<std::uint64_t>(index), static_cast<std::uint64_t>(combo)}));
        engine.randomize_occupation(sys.equilibrium_carriers, rng);
        try {
            engine.equilibrate(run.equilibration_steps, rng);
            const CurrentEstimate est = engine.measure_current(run.measurement_steps, run.subintervals, rng);
            rec.currents_na[combo] = est.mean_na;
            rec.stderr_na[combo] = est.stderr_na;
        } catch (const AbsorbingStateError&) {
            rec.flagged = true;
            return rec;
        }
    }
    return rec;
}

}  // namespace

std::vector<Vec4> SampleDataset::current_vectors() const {
    std::vector<Vec4> out;
    out.reserve(records.size());
    for (const SampleRecord& r : records) out.push_back(r.currents_na);
    return out;
}

SampleDataset sample_hypercube(const HoppingSystem& sys, const std::string& device_hash,
                               const VoltageRanges& ranges, std::int64_t n, std::uint64_t master_seed,
                               const KmcRunParams& run, const SamplerOptions& options) {
    for (const auto& c : ranges.control)
        if (!(c[0] <= c[1])) throw ConfigError("control voltage range is inverted");
    if (n < 0) throw ConfigError("sample count must be non-negative");
    if (options.first_index < 0 || options.first_index > n)
        throw ConfigError("resume index out of range");

    SampleDataset ds;
    ds.ranges = ranges;
    ds.device_hash = device_hash;
    ds.hopping_distance_nm = sys.material.hopping_distance_nm;
    ds.temperature_k = sys.material.temperature_k;
    ds.master_seed = master_seed;
    ds.n_requested = n;
    ds.run = run;

    const std::int64_t todo = n - options.first_index;
    if (todo == 0) return ds;

    std::vector<SampleRecord> results(static_cast<std::size_t>(todo));
    const int threads = std::max(1, options.threads);

    std::atomic<std::int64_t> next{options.first_index};
    std::mutex emit_mutex;
    std::int64_t next_emit = options.first_index;
    std::map<std::int64_t, const SampleRecord*> pending;
    std::exception_ptr failure;
    std::mutex failure_mutex;

    auto worker = [&]() {
        KmcEngine engine(sys);
        while (true) {
            const std::int64_t idx = next.fetch_add(1);
            if (idx >= n) break;
            try {
                SampleRecord rec = run_sample(engine, idx, ranges, master_seed, run);
                const std::size_t slot = static_cast<std::size_t>(idx - options.first_index);
                results[slot] = std::move(rec);
                std::lock_guard<std::mutex> lock(emit_mutex);
                pending[idx] = &results[slot];
                while (!pending.empty() && pending.begin()->first == next_emit) {
                    if (options.on_record) options.on_record(*pending.begin()->second);
                    pending.erase(pending.begin());
                    ++next_emit;
                }
            } catch (...) {
                std::lock_guard<std::mutex> lock(failure_mutex);
                if (!failure) failure = std::current_exception();
                break;
            }
        }
    };

    if (threads == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(static_cast<std::size_t>(threads));
        for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
        for (std::thread& t : pool) t.join();
    }
    if (failure) std::rethrow_exception(failure);

    for (SampleRecord& rec : results) {
        if (rec.flagged)
            ds.flagged_indices.push_back(rec.sample_index);
        else
            ds.records.push_back(std::move(rec));
    }
    return ds;
}

std::vector<AbundancePoint> abundance_curve(const SampleDataset& dataset, Gate gate, double k,
                                            std::span<const double> f_grid) {
    if (dataset.records.empty()) throw ConfigError("abundance needs a nonempty dataset");
    std::vector<double> fitness;
    fitness.reserve(dataset.records.size());
    for (const SampleRecord& r : dataset.records)
        fitness.push_back(evaluate_fitness(r.currents_na, gate, k).fitness);

    std::vector<AbundancePoint> curve;
    curve.reserve(f_grid.size());
    for (double f_min : f_grid) {
        std::int64_t above = 0;
        for (double f : fitness)
            if (f > f_min) ++above;
        curve.push_back({f_min, static_cast<double>(above) / static_cast<double>(fitness.size())});
    }
    return curve;
}

double abundance_at(const SampleDataset& dataset, Gate gate, double k, double f_min) {
    const double grid[1] = {f_min};
    return abundance_curve(dataset, gate, k, grid).front().fraction;
}

LocalHypervolume local_hypervolume(const HoppingSystem& sys, const std::string& device_hash,
                                   const std::array<double, 5>& center_v,
                                   const std::array<double, 5>& edges_v, Gate gate, double f_min,
                                   double k, std::int64_t n, std::uint64_t seed, const KmcRunParams& run,
                                   const VoltageRanges& global_ranges, int threads) {
    VoltageRanges local = global_ranges;
    double delta_v = 1.0;
    for (int i = 0; i < 5; ++i) {
        if (edges_v[i] <= 0.0) throw ConfigError("local hypercube edges must be positive");
        const double lo = center_v[i] - 0.5 * edges_v[i];
        const double hi = center_v[i] + 0.5 * edges_v[i];
        if (lo < global_ranges.control[i][0] - 1e-12 || hi > global_ranges.control[i][1] + 1e-12)
            throw ConfigError("local hypercube leaves the global control ranges on U index " +
                              std::to_string(i));
        local.control[i] = {lo, hi};
        delta_v *= edges_v[i];
    }

    SamplerOptions opts;
    opts.threads = threads;
    const SampleDataset ds = sample_hypercube(sys, device_hash, local, n, seed, run, opts);

    LocalHypervolume out;
    out.delta_v = delta_v;
    out.n = n;
    out.flagged = static_cast<std::int64_t>(ds.flagged_indices.size());
    if (ds.records.empty()) {
        out.p0 = 0.0;
    } else {
        std::int64_t above = 0;
        for (const SampleRecord& r : ds.records)
            if (evaluate_fitness(r.currents_na, gate, k).fitness > f_min) ++above;
        out.p0 = static_cast<double>(above) / static_cast<double>(ds.records.size());
    }
    out.v0 = out.p0 * delta_v;
    return out;
}

HypervolumeEstimate estimate_gate_count(double p_abundance, double v_tot, double p0, double delta_v) {
    if (p0 <= 0.0) throw ConfigError("gate-count estimate undefined for p0 = 0");
    if (delta_v <= 0.0) throw ConfigError("gate-count estimate needs a positive local hypervolume");
    HypervolumeEstimate est;
    est.p0 = p0;
    est.delta_v = delta_v;
    est.v0 = p0 * delta_v;
    est.p_abundance = p_abundance;
    est.v_tot = v_tot;
    est.n_gates_raw = p_abundance * v_tot / (p0 * delta_v);
    est.n_gates = static_cast<std::int64_t>(std::llround(est.n_gates_raw));
    est.p0_small = p0 < 0.1;
    est.regions_separated = v_tot / delta_v > 5.0 * std::max(est.n_gates_raw, 1.0);
    return est;
}

namespace {

std::string fmt(double v) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

}  // namespace

std::string dataset_csv_header() {
    return "sample_index,U1,U4,U5,U6,U7,I00,I10,I01,I11,err00,err10,err01,err11";
}

std::string dataset_csv_row(const SampleRecord& r) {
    std::string row = std::to_string(r.sample_index);
    for (double v : r.controls_v) row += "," + fmt(v);
    for (double v : r.currents_na) row += "," + fmt(v);
    for (double v : r.stderr_na) row += "," + fmt(v);
    return row;
}

nlohmann::json dataset_meta_json(const SampleDataset& ds, std::int64_t completed_through) {
    nlohmann::json j;
    j["format"] = "dnpu-dataset-v1";
    j["device_hash"] = ds.device_hash;
    j["master_seed"] = ds.master_seed;
    j["n_requested"] = ds.n_requested;
    j["completed_through"] = completed_through;
    j["ranges"] = {{"controls", ds.ranges.control},
                   {"input_low_v", ds.ranges.input_low_v},
                   {"input_high_v", ds.ranges.input_high_v}};
    j["physics"] = {{"a_nm", ds.hopping_distance_nm}, {"T_K", ds.temperature_k}};
    j["run"] = {{"equilibration_steps", ds.run.equilibration_steps},
                {"measurement_steps", ds.run.measurement_steps},
                {"subintervals", ds.run.subintervals}};
    j["flagged_indices"] = ds.flagged_indices;
    j["config_hash"] = sampling_config_hash(ds.device_hash, ds.ranges, ds.run, ds.master_seed,
                                            ds.hopping_distance_nm, ds.temperature_k);
    return j;
}

void save_dataset(const SampleDataset& ds, const std::string& csv_path, const std::string& meta_path) {
    std::ofstream csv(csv_path);
    if (!csv) throw ConfigError("cannot open '" + csv_path + "' for writing");
    csv << dataset_csv_header() << "\n";
    for (const SampleRecord& r : ds.records) csv << dataset_csv_row(r) << "\n";

    std::ofstream meta(meta_path);
    if (!meta) throw ConfigError("cannot open '" + meta_path + "' for writing");
    std::int64_t completed = ds.n_requested;
    meta << dataset_meta_json(ds, completed).dump(2) << "\n";
}

SampleDataset load_dataset(const std::string& csv_path, const std::string& meta_path) {
    std::ifstream meta(meta_path);
    if (!meta) throw ConfigError("cannot open dataset sidecar '" + meta_path + "'");
    nlohmann::json j;
    try {
        meta >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("cannot parse dataset sidecar: ") + e.what());
    }

    SampleDataset ds;
    try {
        ds.device_hash = j.at("device_hash").get<std::string>();
        ds.master_seed = j.at("master_seed").get<std::uint64_t>();
        ds.n_requested = j.at("n_requested").get<std::int64_t>();
        ds.ranges.control = j.at("ranges").at("controls").get<std::array<std::array<double, 2>, 5>>();
        ds.ranges.input_low_v = j.at("ranges").at("input_low_v").get<double>();
        ds.ranges.input_high_v = j.at("ranges").at("input_high_v").get<double>();
        ds.hopping_distance_nm = j.at("physics").at("a_nm").get<double>();
        ds.temperature_k = j.at("physics").at("T_K").get<double>();
        ds.run.equilibration_steps = j.at("run").at("equilibration_steps").get<std::int64_t>();
        ds.run.measurement_steps = j.at("run").at("measurement_steps").get<std::int64_t>();
        ds.run.subintervals = j.at("run").at("subintervals").get<int>();
        ds.flagged_indices = j.at("flagged_indices").get<std::vector<std::int64_t>>();
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("malformed dataset sidecar: ") + e.what());
    }

    std::ifstream csv(csv_path);
    if (!csv) throw ConfigError("cannot open dataset '" + csv_path + "'");
    std::string line;
    if (!std::getline(csv, line)) throw ValidationError("dataset CSV is empty");
    if (line != dataset_csv_header())
        throw ValidationError("dataset CSV header mismatch: got '" + line + "'");
    std::int64_t line_no = 1;
    while (std::getline(csv, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::istringstream row(line);
        std::string cell;
        std::vector<double> cells;
        while (std::getline(row, cell, ',')) {
            try {
                cells.push_back(std::stod(cell));
            } catch (const std::exception&) {
                throw ValidationError("dataset CSV line " + std::to_string(line_no) + ": bad number '" +
                                      cell + "'");
            }
        }
        if (cells.size() != 14)
            throw ValidationError("dataset CSV line " + std::to_string(line_no) + ": expected 14 fields");
        SampleRecord r;
        r.sample_index = static_cast<std::int64_t>(cells[0]);
        for (int i = 0; i < 5; ++i) r.controls_v[i] = cells[1 + i];
        for (int i = 0; i < 4; ++i) r.currents_na[i] = cells[6 + i];
        for (int i = 0; i < 4; ++i) r.stderr_na[i] = cells[10 + i];
        ds.records.push_back(r);
    }
    return ds;
}

std::string sampling_config_hash(const std::string& device_hash, const VoltageRanges& ranges,
                                 const KmcRunParams& run, std::uint64_t master_seed, double a_nm,
                                 double t_k) {
    nlohmann::json j;
    j["device_hash"] = device_hash;
    j["ranges"] = {{"controls", ranges.control},
                   {"input_low_v", ranges.input_low_v},
                   {"input_high_v", ranges.input_high_v}};
    j["run"] = {{"equilibration_steps", run.equilibration_steps},
                {"measurement_steps", run.measurement_steps},
                {"subintervals", run.subintervals}};
    j["master_seed"] = master_seed;
    j["physics"] = {{"a_nm", a_nm}, {"T_K", t_k}};
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(fnv1a64(j.dump())));
    return std::string(buf);
}

}  // namespace dnpu
