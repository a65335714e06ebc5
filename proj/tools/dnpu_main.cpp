#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"

#include "dnpu/cli_commands.hpp"
#include "dnpu/errors.hpp"

namespace {

// --config <file> provides defaults for the flags of the chosen subcommand;
// explicit flags override it. The file is plain JSON keyed by flag name
// without dashes (e.g. {"samples": 500, "a_nm": 2.5}).
nlohmann::json load_config_arg(int argc, char** argv) {
    for (int i = 1; i + 1 < argc; ++i) {
        if (std::string(argv[i]) == "--config") {
            std::ifstream in(argv[i + 1]);
            if (!in) throw dnpu::ConfigError(std::string("cannot open config file '") + argv[i + 1] + "'");
            nlohmann::json j;
            try {
                in >> j;
            } catch (const nlohmann::json::exception& e) {
                throw dnpu::ConfigError(std::string("cannot parse config file: ") + e.what());
            }
            return j;
        }
    }
    return nlohmann::json::object();
}

template <typename T>
void from_config(const nlohmann::json& cfg, const char* key, T& value) {
    if (cfg.contains(key)) value = cfg.at(key).get<T>();
}

void from_config_opt(const nlohmann::json& cfg, const char* key, std::optional<double>& value) {
    if (cfg.contains(key)) value = cfg.at(key).get<double>();
}

int dispatch(int argc, char** argv) {
    const nlohmann::json cfg = load_config_arg(argc, argv);

    CLI::App app{"dopant-network hopping transport simulator and analysis toolkit"};
    app.require_subcommand(1);
    std::string config_path;
    app.add_option("--config", config_path, "JSON file with defaults for the subcommand flags");

    // generate
    auto* gen = app.add_subcommand("generate", "generate a random dopant device");
    dnpu::cli::GenerateOptions gen_opt;
    from_config(cfg, "seed", gen_opt.seed);
    from_config(cfg, "out", gen_opt.out_dir);
    from_config(cfg, "dopants", gen_opt.config.dopant_count);
    from_config(cfg, "counterdopants", gen_opt.config.counterdopant_count);
    from_config(cfg, "radius_nm", gen_opt.config.radius_nm);
    from_config(cfg, "a_nm", gen_opt.config.material.hopping_distance_nm);
    from_config(cfg, "t_kelvin", gen_opt.config.material.temperature_k);
    gen->add_option("--seed", gen_opt.seed, "master seed");
    gen->add_option("--out", gen_opt.out_dir, "output directory");
    gen->add_option("--dopants", gen_opt.config.dopant_count, "dopant count");
    gen->add_option("--counterdopants", gen_opt.config.counterdopant_count, "counterdopant count");
    gen->add_option("--radius-nm", gen_opt.config.radius_nm, "device radius in nm");
    gen->add_option("--a-nm", gen_opt.config.material.hopping_distance_nm, "hopping distance in nm");
    gen->add_option("--t-kelvin", gen_opt.config.material.temperature_k, "temperature in K");
    gen->add_option("--sigma-ev", gen_opt.config.material.disorder_sigma_ev, "disorder sigma in eV");

    // sample
    auto* sam = app.add_subcommand("sample", "hypercube sampling of control voltages");
    dnpu::cli::SampleOptions sam_opt;
    from_config(cfg, "device", sam_opt.device_path);
    from_config(cfg, "preset", sam_opt.preset);
    from_config(cfg, "samples", sam_opt.samples);
    from_config(cfg, "seed", sam_opt.seed);
    from_config(cfg, "steps", sam_opt.run.measurement_steps);
    from_config(cfg, "eq_steps", sam_opt.run.equilibration_steps);
    from_config(cfg, "subintervals", sam_opt.run.subintervals);
    from_config(cfg, "grid", sam_opt.grid);
    from_config(cfg, "threads", sam_opt.threads);
    from_config(cfg, "out", sam_opt.out_dir);
    from_config_opt(cfg, "a_nm", sam_opt.a_nm);
    from_config_opt(cfg, "t_kelvin", sam_opt.t_kelvin);
    double sam_a = 0.0, sam_t = 0.0;
    sam->add_option("--device", sam_opt.device_path, "device JSON file");
    sam->add_option("--preset", sam_opt.preset, "voltage ranges: standard | surrogate-comparison");
    sam->add_option("--samples", sam_opt.samples, "number of control-voltage samples");
    sam->add_option("--seed", sam_opt.seed, "master seed");
    sam->add_option("--steps", sam_opt.run.measurement_steps, "KMC measurement steps per input combo");
    sam->add_option("--eq-steps", sam_opt.run.equilibration_steps, "KMC equilibration steps");
    sam->add_option("--subintervals", sam_opt.run.subintervals, "error-estimate subintervals");
    sam->add_option("--grid", sam_opt.grid, "Laplace grid cells across the diameter");
    sam->add_option("--threads", sam_opt.threads, "worker threads over samples");
    sam->add_option("--out", sam_opt.out_dir, "output directory");
    auto* sam_a_opt = sam->add_option("--a-nm", sam_a, "override hopping distance in nm");
    auto* sam_t_opt = sam->add_option("--t-kelvin", sam_t, "override temperature in K");
    sam->add_flag("--resume", sam_opt.resume, "continue an interrupted run in --out");

    // abundance
    auto* abu = app.add_subcommand("abundance", "gate abundance curves from a dataset");
    dnpu::cli::AbundanceOptions abu_opt;
    from_config(cfg, "dataset", abu_opt.dataset_csv);
    from_config(cfg, "meta", abu_opt.dataset_meta);
    from_config(cfg, "k", abu_opt.k);
    from_config(cfg, "out", abu_opt.out_dir);
    abu->add_option("--dataset", abu_opt.dataset_csv, "dataset CSV");
    abu->add_option("--meta", abu_opt.dataset_meta, "dataset sidecar JSON (default: dataset.meta.json)");
    abu->add_option("--gate", abu_opt.gates, "gates (default: all six)");
    abu->add_option("--k", abu_opt.k, "fitness constant k");
    abu->add_option("--fmin-start", abu_opt.fmin_start, "F_min grid start");
    abu->add_option("--fmin-stop", abu_opt.fmin_stop, "F_min grid stop");
    abu->add_option("--fmin-step", abu_opt.fmin_step, "F_min grid step");
    abu->add_option("--out", abu_opt.out_dir, "output directory");

    // analyze
    auto* ana = app.add_subcommand("analyze", "PCA and nonlinearity indicators for a dataset");
    dnpu::cli::AnalyzeOptions ana_opt;
    from_config(cfg, "dataset", ana_opt.dataset_csv);
    from_config(cfg, "meta", ana_opt.dataset_meta);
    from_config(cfg, "out", ana_opt.out_dir);
    ana->add_option("--dataset", ana_opt.dataset_csv, "dataset CSV");
    ana->add_option("--meta", ana_opt.dataset_meta, "dataset sidecar JSON");
    ana->add_option("--out", ana_opt.out_dir, "output directory");

    // hypervolume
    auto* hyp = app.add_subcommand("hypervolume", "local gate hypervolume and gate-count estimate");
    dnpu::cli::HypervolumeOptions hyp_opt;
    from_config(cfg, "device", hyp_opt.device_path);
    from_config(cfg, "preset", hyp_opt.preset);
    from_config(cfg, "gate", hyp_opt.gate);
    from_config(cfg, "fmin", hyp_opt.f_min);
    from_config(cfg, "k", hyp_opt.k);
    from_config(cfg, "samples", hyp_opt.samples);
    from_config(cfg, "seed", hyp_opt.seed);
    from_config(cfg, "steps", hyp_opt.run.measurement_steps);
    from_config(cfg, "eq_steps", hyp_opt.run.equilibration_steps);
    from_config(cfg, "subintervals", hyp_opt.run.subintervals);
    from_config(cfg, "grid", hyp_opt.grid);
    from_config(cfg, "threads", hyp_opt.threads);
    from_config(cfg, "out", hyp_opt.out_dir);
    from_config_opt(cfg, "a_nm", hyp_opt.a_nm);
    from_config_opt(cfg, "t_kelvin", hyp_opt.t_kelvin);
    double hyp_a = 0.0, hyp_t = 0.0, hyp_pab = 0.0;
    std::vector<double> center, edges;
    hyp->add_option("--device", hyp_opt.device_path, "device JSON file");
    hyp->add_option("--preset", hyp_opt.preset, "global voltage ranges preset");
    hyp->add_option("--center", center, "local hypercube center, 5 control voltages")->expected(5);
    hyp->add_option("--edges", edges, "local hypercube edge lengths, 5 voltages")->expected(5);
    hyp->add_option("--gate", hyp_opt.gate, "gate name");
    hyp->add_option("--fmin", hyp_opt.f_min, "fitness threshold F_min");
    hyp->add_option("--k", hyp_opt.k, "fitness constant k");
    hyp->add_option("--samples", hyp_opt.samples, "samples inside the local hypercube");
    hyp->add_option("--seed", hyp_opt.seed, "master seed");
    hyp->add_option("--steps", hyp_opt.run.measurement_steps, "KMC measurement steps");
    hyp->add_option("--eq-steps", hyp_opt.run.equilibration_steps, "KMC equilibration steps");
    hyp->add_option("--subintervals", hyp_opt.run.subintervals, "error-estimate subintervals");
    hyp->add_option("--grid", hyp_opt.grid, "Laplace grid cells across the diameter");
    hyp->add_option("--threads", hyp_opt.threads, "worker threads");
    auto* hyp_pab_opt = hyp->add_option("--p-abundance", hyp_pab, "global abundance at F_min");
    hyp->add_option("--dataset", hyp_opt.dataset_csv, "dataset CSV to take the global abundance from");
    hyp->add_option("--meta", hyp_opt.dataset_meta, "dataset sidecar JSON");
    auto* hyp_a_opt = hyp->add_option("--a-nm", hyp_a, "override hopping distance in nm");
    auto* hyp_t_opt = hyp->add_option("--t-kelvin", hyp_t, "override temperature in K");
    hyp->add_option("--out", hyp_opt.out_dir, "output directory");

    // oracle-check
    auto* ora = app.add_subcommand("oracle-check", "KMC vs exact master equation on tiny systems");
    dnpu::cli::OracleCheckOptions ora_opt;
    from_config(cfg, "steps", ora_opt.steps);
    from_config(cfg, "seeds", ora_opt.seeds);
    ora->add_option("--steps", ora_opt.steps, "KMC measurement steps per case");
    ora->add_option("--seeds", ora_opt.seeds, "seeds per system");
    ora->add_option("--subintervals", ora_opt.subintervals, "error-estimate subintervals");
    ora->add_option("--eq-steps", ora_opt.equilibration, "KMC equilibration steps");
    ora->add_option("--bias-v", ora_opt.bias_v, "bias voltage on the non-output electrode");

    app.parse(argc, argv);

    if (gen->parsed()) {
        dnpu::cli::cmd_generate(gen_opt);
        return 0;
    }
    if (sam->parsed()) {
        if (sam_a_opt->count() > 0) sam_opt.a_nm = sam_a;
        if (sam_t_opt->count() > 0) sam_opt.t_kelvin = sam_t;
        dnpu::cli::cmd_sample(sam_opt);
        return 0;
    }
    if (abu->parsed()) {
        if (abu_opt.dataset_meta.empty() && !abu_opt.dataset_csv.empty())
            abu_opt.dataset_meta = abu_opt.dataset_csv.substr(0, abu_opt.dataset_csv.rfind(".csv")) + ".meta.json";
        dnpu::cli::cmd_abundance(abu_opt);
        return 0;
    }
    if (ana->parsed()) {
        if (ana_opt.dataset_meta.empty() && !ana_opt.dataset_csv.empty())
            ana_opt.dataset_meta = ana_opt.dataset_csv.substr(0, ana_opt.dataset_csv.rfind(".csv")) + ".meta.json";
        dnpu::cli::cmd_analyze(ana_opt);
        return 0;
    }
    if (hyp->parsed()) {
        if (center.size() == 5) std::copy(center.begin(), center.end(), hyp_opt.center.begin());
        if (edges.size() == 5) std::copy(edges.begin(), edges.end(), hyp_opt.edges.begin());
        if (hyp_pab_opt->count() > 0) hyp_opt.p_abundance = hyp_pab;
        if (hyp_a_opt->count() > 0) hyp_opt.a_nm = hyp_a;
        if (hyp_t_opt->count() > 0) hyp_opt.t_kelvin = hyp_t;
        if (hyp_opt.dataset_meta.empty() && !hyp_opt.dataset_csv.empty())
            hyp_opt.dataset_meta =
                hyp_opt.dataset_csv.substr(0, hyp_opt.dataset_csv.rfind(".csv")) + ".meta.json";
        dnpu::cli::cmd_hypervolume(hyp_opt);
        return 0;
    }
    if (ora->parsed()) {
        const bool ok = dnpu::cli::cmd_oracle_check(ora_opt);
        if (!ok) throw dnpu::PhysicsError("oracle check failed");
        return 0;
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return dispatch(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return 0;  // --help
        std::cerr << "argument error: " << e.what() << "\n";
        return 1;
    } catch (const dnpu::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    } catch (const dnpu::ValidationError& e) {
        std::cerr << "validation error: " << e.what() << "\n";
        return 3;
    } catch (const dnpu::PhysicsError& e) {
        std::cerr << "physics error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}
