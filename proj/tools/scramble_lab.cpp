// scramble-lab: command-line front end for the monitored-dynamics experiments.
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "scramble/runner.hpp"

int main(int argc, char** argv) {
    using namespace scramble;
    CLI::App app{"Information scrambling in monitored Ising chains"};
    app.set_version_flag("--version", std::string(kVersion));
    app.set_config("--config", "", "INI/TOML configuration file");
    app.allow_config_extras(false);

    ExperimentConfig cfg;
    std::string experiment, preset = "chaotic", boundary, out, cache, input;
    std::optional<double> J_zz, h_x, h_z;
    std::optional<std::uint64_t> haar_seed;
    double budget_mb = static_cast<double>(cfg.memory_budget_bytes) / (1 << 20);
    std::vector<double> pc_grid, nu_grid;

    app.add_option("experiment", experiment, "Experiment to run")
        ->required()
        ->check(CLI::IsMember({"purity-dynamics", "tmi-dynamics", "tmi-saturation", "tmi-spatial", "haar-ref",
                               "fss-fit"}));
    app.add_option("--preset", preset, "chaotic, integrable or trivial-integrable")
        ->check(CLI::IsMember({"chaotic", "integrable", "trivial-integrable"}));
    app.add_option("--J_zz", J_zz, "Override the ZZ coupling");
    app.add_option("--h_x", h_x, "Override the transverse field");
    app.add_option("--h_z", h_z, "Override the longitudinal field");
    app.add_option("--boundary", boundary, "periodic or open")->check(CLI::IsMember({"periodic", "open", "pbc", "obc"}));
    app.add_option("--delta_t", cfg.delta_t, "Time step");
    app.add_option("--L", cfg.sizes, "System sizes");
    app.add_option("--samples", cfg.samples, "Trajectories per (p, L); one value or one per size");
    app.add_option("--p", cfg.p_values, "Measurement rates");
    app.add_option("--n_steps", cfg.n_steps, "Steps per trajectory (0: experiment default)");
    app.add_option("--stride", cfg.stride, "Record every stride steps (0: experiment default)");
    app.add_option("--record_start", cfg.record_start, "First recorded step");
    app.add_option("--seed", cfg.master_seed, "Master seed");
    app.add_option("--out", out, "Output directory")->required();
    app.add_option("--cache", cache, "Haar reference cache directory");
    app.add_option("--workers", cfg.workers, "Worker threads (0: all cores)")->check(CLI::NonNegativeNumber);
    app.add_option("--memory_mb", budget_mb, "Memory budget in MiB")->check(CLI::PositiveNumber);
    app.add_option("--haar_samples", cfg.haar_samples, "Haar unitaries per reference");
    app.add_option("--haar_seed", haar_seed, "Seed for the Haar reference (default: master seed)");
    app.add_option("--fit_t_min", cfg.fit_t_min, "Log-log fit window start");
    app.add_option("--fit_t_max", cfg.fit_t_max, "Log-log fit window end");
    app.add_option("--saturation_window", cfg.saturation_window, "Average over this final fraction of the run");
    app.add_option("--drift_window", cfg.drift_window, "Final fraction used by the drift check");
    app.add_option("--drift_z", cfg.drift_z, "Drift z-score threshold");
    app.add_option("--pc_grid", pc_grid, "p_c grid: min max step")->expected(3);
    app.add_option("--nu_grid", nu_grid, "nu grid: min max step")->expected(3);
    app.add_flag("--weighted", cfg.weighted_fit, "Inverse-variance weighted collapse fit");
    app.add_option("--input", input, "Saturation table for fss-fit");

    CLI11_PARSE(app, argc, argv);

    try {
        cfg.experiment = experiment_from_string(experiment);
        cfg.preset = preset_from_string(preset);
        cfg.J_zz = J_zz;
        cfg.h_x = h_x;
        cfg.h_z = h_z;
        if (!boundary.empty()) cfg.boundary = boundary_from_string(boundary);
        cfg.output_dir = out;
        cfg.cache_dir = cache;
        cfg.input = input;
        cfg.haar_seed = haar_seed;
        cfg.memory_budget_bytes = static_cast<std::size_t>(budget_mb * (1 << 20));
        if (!pc_grid.empty()) {
            cfg.pc_min = pc_grid[0];
            cfg.pc_max = pc_grid[1];
            cfg.pc_step = pc_grid[2];
        }
        if (!nu_grid.empty()) {
            cfg.nu_min = nu_grid[0];
            cfg.nu_max = nu_grid[1];
            cfg.nu_step = nu_grid[2];
        }
        run_experiment(cfg);
    } catch (const std::exception& e) {
        std::cerr << "scramble-lab: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
