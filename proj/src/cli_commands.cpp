#include "dnpu/cli_commands.hpp"

#include <charconv>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "dnpu/errors.hpp"
#include "dnpu/oracle.hpp"

namespace dnpu::cli {

namespace fs = std::filesystem;

namespace {

std::string fmt(double v) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

void ensure_dir(const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw ConfigError("cannot create output directory '" + dir + "': " + ec.message());
}

DeviceGeometry load_device_with_overrides(const std::string& path, std::optional<double> a_nm,
                                          std::optional<double> t_kelvin) {
    if (path.empty()) throw ConfigError("a device file is required (--device)");
    DeviceGeometry geom = load_device(path);
    if (a_nm) geom.material.hopping_distance_nm = *a_nm;
    if (t_kelvin) geom.material.temperature_k = *t_kelvin;
    const std::vector<std::string> issues = validate_device(geom);
    if (!issues.empty())
        throw ValidationError("device file fails validation: " + issues.front() + " (and " +
                              std::to_string(issues.size() - 1) + " more)");
    return geom;
}

std::string basis_cache_path(const std::string& out_dir, const std::string& hash, int grid) {
    return (fs::path(out_dir) / ("basis_" + hash + "_" + std::to_string(grid) + ".json")).string();
}

nlohmann::json pearson_json(const MomentReport& m) {
    auto cell = [&](int i, int j) -> nlohmann::json {
        if (m.pearson[i][j]) return *m.pearson[i][j];
        return nullptr;
    };
    return {{"ml_mr", cell(0, 1)}, {"ml_x", cell(0, 2)}, {"mr_x", cell(1, 2)}};
}

}  // namespace

std::string cmd_generate(const GenerateOptions& opt) {
    ensure_dir(opt.out_dir);
    const DeviceGeometry geom = generate_device(opt.seed, opt.config);
    const std::vector<std::string> issues = validate_device(geom);
    if (!issues.empty()) throw ValidationError("generated device fails validation: " + issues.front());

    // The geometry schema plus a generator block recording how it was made;
    // geometry_hash covers the geometry fields only, so readers ignore it.
    nlohmann::json j = device_to_json(geom);
    nlohmann::json cfg;
    cfg["seed"] = opt.seed;
    cfg["dopants"] = opt.config.dopant_count;
    cfg["counterdopants"] = opt.config.counterdopant_count;
    cfg["radius_nm"] = opt.config.radius_nm;
    cfg["min_spacing_nm"] = opt.config.min_spacing_nm;
    char hash[17];
    std::snprintf(hash, sizeof(hash), "%016llx",
                  static_cast<unsigned long long>(fnv1a64(cfg.dump())));
    j["generator"] = {{"seed", opt.seed}, {"config_hash", std::string(hash)}};

    const std::string path = (fs::path(opt.out_dir) / "device.json").string();
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot open '" + path + "' for writing");
    out << j.dump(2) << "\n";
    std::cout << "device " << geometry_hash(geom) << ": " << geom.dopants.size() << " dopants, "
              << geom.counterdopants.size() << " counterdopants, radius " << geom.radius_nm
              << " nm -> " << path << "\n";
    return path;
}

void cmd_sample(const SampleOptions& opt) {
    ensure_dir(opt.out_dir);
    const DeviceGeometry geom = load_device_with_overrides(opt.device_path, opt.a_nm, opt.t_kelvin);
    const std::string dev_hash = geometry_hash(geom);
    const VoltageRanges ranges = ranges_from_preset(opt.preset);
    const std::string config_hash =
        sampling_config_hash(dev_hash, ranges, opt.run, opt.seed, geom.material.hopping_distance_nm,
                             geom.material.temperature_k);

    GridSpec grid;
    grid.cells_across_diameter = opt.grid;
    const PotentialBasis basis =
        load_or_solve_basis(geom, grid, basis_cache_path(opt.out_dir, dev_hash, opt.grid));
    const HoppingSystem sys = make_system(geom, basis);

    const std::string csv_path = (fs::path(opt.out_dir) / "dataset.csv").string();
    const std::string meta_path = (fs::path(opt.out_dir) / "dataset.meta.json").string();

    std::int64_t first_index = 0;
    std::vector<std::int64_t> prior_flagged;
    if (opt.resume) {
        std::ifstream meta_in(meta_path);
        if (!meta_in) throw ConfigError("--resume: no sidecar at '" + meta_path + "'");
        nlohmann::json meta;
        try {
            meta_in >> meta;
        } catch (const nlohmann::json::exception& e) {
            throw ValidationError(std::string("--resume: cannot parse sidecar: ") + e.what());
        }
        if (meta.value("config_hash", "") != config_hash)
            throw ConfigError("--resume: config hash mismatch; the run on disk used different settings");
        first_index = meta.at("completed_through").get<std::int64_t>();
        for (std::int64_t idx : meta.at("flagged_indices").get<std::vector<std::int64_t>>())
            if (idx < first_index) prior_flagged.push_back(idx);
        if (first_index > opt.samples)
            throw ConfigError("--resume: run on disk already has " + std::to_string(first_index) +
                              " samples");
    }

    // Metadata holder used for checkpoint sidecars.
    SampleDataset meta_ds;
    meta_ds.ranges = ranges;
    meta_ds.device_hash = dev_hash;
    meta_ds.hopping_distance_nm = geom.material.hopping_distance_nm;
    meta_ds.temperature_k = geom.material.temperature_k;
    meta_ds.master_seed = opt.seed;
    meta_ds.n_requested = opt.samples;
    meta_ds.run = opt.run;
    meta_ds.flagged_indices = prior_flagged;

    std::ofstream csv;
    if (opt.resume && first_index > 0) {
        // An interrupt can land between a CSV flush and the sidecar update,
        // leaving rows past completed_through; drop them before appending.
        std::vector<std::string> keep;
        {
            std::ifstream existing(csv_path);
            if (!existing) throw ConfigError("--resume: no dataset at '" + csv_path + "'");
            std::string line;
            if (!std::getline(existing, line) || line != dataset_csv_header())
                throw ValidationError("--resume: dataset CSV header mismatch");
            while (std::getline(existing, line)) {
                if (line.empty()) continue;
                const std::int64_t idx = std::strtoll(line.c_str(), nullptr, 10);
                if (idx < first_index) keep.push_back(line);
            }
        }
        csv.open(csv_path, std::ios::trunc);
        if (csv) {
            csv << dataset_csv_header() << "\n";
            for (const std::string& line : keep) csv << line << "\n";
        }
    } else {
        csv.open(csv_path, std::ios::trunc);
        if (csv) csv << dataset_csv_header() << "\n";
    }
    if (!csv) throw ConfigError("cannot open '" + csv_path + "' for writing");

    auto write_meta = [&](std::int64_t completed) {
        std::ofstream meta(meta_path, std::ios::trunc);
        if (!meta) throw ConfigError("cannot open '" + meta_path + "' for writing");
        meta << dataset_meta_json(meta_ds, completed).dump(2) << "\n";
    };

    std::int64_t emitted = first_index;
    SamplerOptions sampler;
    sampler.threads = opt.threads;
    sampler.first_index = first_index;
    sampler.on_record = [&](const SampleRecord& rec) {
        if (rec.flagged)
            meta_ds.flagged_indices.push_back(rec.sample_index);
        else
            csv << dataset_csv_row(rec) << "\n";
        ++emitted;
        if ((emitted - first_index) % opt.checkpoint_every == 0) {
            csv.flush();
            write_meta(emitted);
        }
    };

    write_meta(first_index);
    sample_hypercube(sys, dev_hash, ranges, opt.samples, opt.seed, opt.run, sampler);
    csv.flush();
    write_meta(opt.samples);
    std::cout << "dataset: " << (opt.samples - first_index) << " new samples ("
              << meta_ds.flagged_indices.size() << " flagged) -> " << csv_path << "\n";
}

void cmd_abundance(const AbundanceOptions& opt) {
    ensure_dir(opt.out_dir);
    const SampleDataset ds = load_dataset(opt.dataset_csv, opt.dataset_meta);
    const std::string config_hash =
        sampling_config_hash(ds.device_hash, ds.ranges, ds.run, ds.master_seed, ds.hopping_distance_nm,
                             ds.temperature_k);

    std::vector<std::string> gate_names = opt.gates;
    if (gate_names.empty()) gate_names = {"AND", "OR", "NAND", "NOR", "XOR", "XNOR"};
    if (!(opt.fmin_step > 0.0) || opt.fmin_stop < opt.fmin_start)
        throw ConfigError("bad F_min grid");

    std::vector<double> grid;
    for (double f = opt.fmin_start; f <= opt.fmin_stop + 1e-12; f += opt.fmin_step) grid.push_back(f);

    for (const std::string& name : gate_names) {
        const Gate gate = gate_from_string(name);
        for (double k : {opt.k, 0.0}) {
            const std::vector<AbundancePoint> curve = abundance_curve(ds, gate, k, grid);
            std::string k_tag = fmt(k);
            const std::string path =
                (fs::path(opt.out_dir) / ("abundance_" + name + "_k" + k_tag + ".csv")).string();
            std::ofstream out(path);
            if (!out) throw ConfigError("cannot open '" + path + "' for writing");
            out << "# config_hash=" << config_hash << "\n";
            out << "F_min,abundance\n";
            for (const AbundancePoint& p : curve) out << fmt(p.f_min) << "," << fmt(p.fraction) << "\n";
            if (k == opt.k && k == 0.0) break;  // asked for k = 0 explicitly; one file is enough
        }
    }
    std::cout << "abundance curves for " << gate_names.size() << " gates -> " << opt.out_dir << "\n";
}

void cmd_analyze(const AnalyzeOptions& opt) {
    ensure_dir(opt.out_dir);
    const SampleDataset ds = load_dataset(opt.dataset_csv, opt.dataset_meta);
    if (ds.records.size() < 2) throw ConfigError("dataset too small to analyze");
    const std::vector<Vec4> vectors = ds.current_vectors();

    const CovarianceSummary cov = covariance_matrix(vectors, /*shifted=*/true);
    const PcaResult p = pca(cov);
    const MomentReport m = moments(vectors);
    const NdrIndicators q = ndr_indicators(m);
    const double q_lr = coupling_indicator(m);
    const AnalyticPca an = analytic_eigenvalues(m);
    const std::string config_hash =
        sampling_config_hash(ds.device_hash, ds.ranges, ds.run, ds.master_seed, ds.hopping_distance_nm,
                             ds.temperature_k);

    nlohmann::json j;
    j["config_hash"] = config_hash;
    j["device_hash"] = ds.device_hash;
    j["n_records"] = ds.records.size();
    j["n_flagged"] = ds.flagged_indices.size();
    j["mean_iav_sq"] = cov.mean_iav_sq;
    j["eigenvalues"] = p.eigenvalues;
    j["normalized_eigenvalues"] = p.normalized;
    j["eigenvectors"] = p.eigenvectors;
    j["moments"] = {{"mean_ml", m.mean_ml}, {"mean_mr", m.mean_mr}, {"mean_x", m.mean_x},
                    {"var_ml", m.var_ml},  {"var_mr", m.var_mr},  {"var_x", m.var_x},
                    {"sq_ml", m.sq_ml},    {"sq_mr", m.sq_mr},    {"sq_x", m.sq_x},
                    {"cov_ml_mr", m.cov_lr}};
    j["pearson"] = pearson_json(m);
    j["q_l"] = q.q_l;
    j["q_r"] = q.q_r;
    j["q_lr"] = q_lr;
    j["sigma_ratio_l_over_r"] =
        m.var_mr > 0.0 ? std::sqrt(m.var_ml / m.var_mr) : 0.0;
    j["analytic"] = {{"lambda1", an.lambda1},
                     {"lambda2", an.lambda2},
                     {"lambda3", an.lambda3},
                     {"j1", an.j1},
                     {"j2", an.j2},
                     {"j3", an.j3},
                     {"lr_symmetric", an.lr_symmetric},
                     {"caveat", an.caveat}};

    const std::string json_path = (fs::path(opt.out_dir) / "analysis.json").string();
    std::ofstream out(json_path);
    if (!out) throw ConfigError("cannot open '" + json_path + "' for writing");
    out << j.dump(2) << "\n";

    // Bar-chart data: one row per current component, one column per
    // eigenvector.
    const std::string csv_path = (fs::path(opt.out_dir) / "eigenvectors.csv").string();
    std::ofstream csv(csv_path);
    if (!csv) throw ConfigError("cannot open '" + csv_path + "' for writing");
    csv << "# config_hash=" << config_hash << "\n";
    csv << "component,J0,J1,J2,J3\n";
    const char* names[4] = {"I00", "I10", "I01", "I11"};
    for (int c = 0; c < 4; ++c) {
        csv << names[c];
        for (int v = 0; v < 4; ++v) csv << "," << fmt(p.eigenvectors[v][c]);
        csv << "\n";
    }
    std::cout << "analysis -> " << json_path << "\n";
}

void cmd_hypervolume(const HypervolumeOptions& opt) {
    ensure_dir(opt.out_dir);
    const DeviceGeometry geom = load_device_with_overrides(opt.device_path, opt.a_nm, opt.t_kelvin);
    const std::string dev_hash = geometry_hash(geom);
    const VoltageRanges global = ranges_from_preset(opt.preset);
    const Gate gate = gate_from_string(opt.gate);

    double v_tot = 1.0;
    for (const auto& c : global.control) v_tot *= (c[1] - c[0]);

    double p_abundance;
    if (opt.p_abundance) {
        p_abundance = *opt.p_abundance;
    } else if (!opt.dataset_csv.empty()) {
        const SampleDataset ds = load_dataset(opt.dataset_csv, opt.dataset_meta);
        if (ds.device_hash != dev_hash)
            throw ConfigError("dataset was sampled on a different device (hash mismatch)");
        p_abundance = abundance_at(ds, gate, opt.k, opt.f_min);
    } else {
        throw ConfigError("needs --p-abundance or a dataset to take the global abundance from");
    }

    GridSpec grid;
    grid.cells_across_diameter = opt.grid;
    const PotentialBasis basis =
        load_or_solve_basis(geom, grid, basis_cache_path(opt.out_dir, dev_hash, opt.grid));
    const HoppingSystem sys = make_system(geom, basis);

    const LocalHypervolume local = local_hypervolume(sys, dev_hash, opt.center, opt.edges, gate,
                                                     opt.f_min, opt.k, opt.samples, opt.seed, opt.run,
                                                     global, opt.threads);
    nlohmann::json j;
    j["device_hash"] = dev_hash;
    j["gate"] = opt.gate;
    j["f_min"] = opt.f_min;
    j["k"] = opt.k;
    j["center_v"] = opt.center;
    j["edges_v"] = opt.edges;
    j["n_samples"] = opt.samples;
    j["n_flagged"] = local.flagged;
    j["master_seed"] = opt.seed;
    {
        nlohmann::json cfg = j;
        cfg["run"] = {{"equilibration_steps", opt.run.equilibration_steps},
                      {"measurement_steps", opt.run.measurement_steps},
                      {"subintervals", opt.run.subintervals}};
        cfg.erase("n_flagged");
        char hash[17];
        std::snprintf(hash, sizeof(hash), "%016llx",
                      static_cast<unsigned long long>(fnv1a64(cfg.dump())));
        j["config_hash"] = std::string(hash);
    }
    j["local"] = {{"p0", local.p0}, {"delta_v", local.delta_v}, {"v0", local.v0}};
    if (local.p0 > 0.0) {
        const HypervolumeEstimate est = estimate_gate_count(p_abundance, v_tot, local.p0, local.delta_v);
        j["estimate"] = {{"p_abundance", est.p_abundance},
                         {"v_tot", est.v_tot},
                         {"n_gates_raw", est.n_gates_raw},
                         {"n_gates", est.n_gates},
                         {"p0_small", est.p0_small},
                         {"regions_separated", est.regions_separated}};
    } else {
        j["estimate"] = nullptr;
        j["note"] = "p0 = 0 inside the local hypercube; the gate-count estimate is undefined";
    }

    const std::string path = (fs::path(opt.out_dir) / "hypervolume.json").string();
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot open '" + path + "' for writing");
    out << j.dump(2) << "\n";
    std::cout << "hypervolume -> " << path << "\n";
}

bool cmd_oracle_check(const OracleCheckOptions& opt) {
    bool all_ok = true;
    for (int n_sites : {1, 2, 3}) {
        const HoppingSystem sys = make_line_system(n_sites);
        const std::vector<double> bias = {opt.bias_v, 0.0};
        for (int s = 0; s < opt.seeds; ++s) {
            const OracleComparison cmp = compare_oracle_to_kmc(
                sys, bias, opt.steps, opt.subintervals, opt.equilibration, 1000 + s);
            const bool ok = cmp.sigma_distance <= 3.0;
            all_ok = all_ok && ok;
            std::cout << n_sites << "-site, seed " << 1000 + s << ": oracle " << cmp.oracle_na
                      << " nA, kmc " << cmp.kmc_na << " +- " << cmp.kmc_stderr_na << " nA ("
                      << cmp.sigma_distance << " sigma) " << (ok ? "ok" : "FAIL") << "\n";
        }
        // Zero bias: the stationary current vanishes.
        const std::vector<double> zero = {0.0, 0.0};
        const OracleResult res = steady_state_oracle(sys, zero);
        const bool zero_ok = std::fabs(res.current_na) <= 1e-12 * std::max(res.flux_scale_na, 1.0);
        all_ok = all_ok && zero_ok;
        std::cout << n_sites << "-site, zero bias: oracle " << res.current_na << " nA "
                  << (zero_ok ? "ok" : "FAIL") << "\n";
    }
    return all_ok;
}

}  // namespace dnpu::cli
