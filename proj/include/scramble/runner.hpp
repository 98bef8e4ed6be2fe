#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "scramble/analysis.hpp"
#include "scramble/haar.hpp"
#include "scramble/spin_core.hpp"
#include "scramble/trajectory.hpp"

namespace scramble {

inline constexpr const char* kVersion = "1.0.0";

enum class Experiment { purity_dynamics, tmi_dynamics, tmi_saturation, tmi_spatial, haar_ref, fss_fit };

std::string to_string(Experiment e);
Experiment experiment_from_string(const std::string& s);

enum class Preset { chaotic, integrable, trivial_integrable };

struct ParameterPreset {
    Preset name = Preset::chaotic;
    double J_zz = -1.0;
    double h_x = 1.05;
    double h_z = -0.5;
};

std::string to_string(Preset p);
Preset preset_from_string(const std::string& s);
// trivial_integrable takes its h_z from the argument.
ParameterPreset parameter_preset(Preset p, double trivial_h_z = 1.0);

struct ExperimentConfig {
    Experiment experiment = Experiment::tmi_dynamics;
    Preset preset = Preset::chaotic;
    std::optional<double> J_zz, h_x, h_z;  // override the preset
    std::optional<Boundary> boundary;      // default depends on experiment and preset
    double delta_t = 1.0;

    std::vector<int> sizes{8};
    std::vector<int> samples{100};  // one entry, or one per size
    std::vector<double> p_values{0.0};
    int n_steps = 0;  // 0: 50 for purity, 10 for spatial scans, 10 L otherwise
    int stride = 0;   // 0: every step for dynamics, final step only for saturation
    int record_start = 0;

    std::uint64_t master_seed = 1;
    std::filesystem::path output_dir;  // empty: write nothing
    std::filesystem::path cache_dir;   // Haar cache; empty: output_dir / "haar-cache"
    int workers = 0;                   // 0: hardware concurrency
    std::size_t memory_budget_bytes = std::size_t{2} << 30;

    int haar_samples = kDefaultHaarSamples;
    std::optional<std::uint64_t> haar_seed;  // default: master_seed

    int fit_t_min = 1;
    int fit_t_max = 50;
    double saturation_window = 0.0;  // > 0: average over the last fraction of the run
    double drift_window = 0.2;
    double drift_z = 3.0;

    double pc_min = 0.04, pc_max = 0.14, pc_step = 0.001;
    double nu_min = 0.5, nu_max = 3.5, nu_step = 0.02;
    bool weighted_fit = false;
    std::filesystem::path input;  // saturation table for fss-fit

    void validate() const;
    ModelParams model(int L) const;
    int samples_for(int L) const;
    int steps_for(int L) const;
    int stride_for(int L) const;
    std::uint64_t haar_seed_value() const { return haar_seed.value_or(master_seed); }
    std::filesystem::path haar_cache_dir() const;
};

void to_json(nlohmann::json& j, const ExperimentConfig& c);

// Bookkeeping that goes into manifest.json.
struct RunLog {
    struct Abort {
        double p;
        int L;
        int sample;
        std::uint64_t seed;
        std::string reason;
    };
    struct RedrawEntry {
        double p;
        int L;
        int sample;
        std::uint64_t seed;
        Redraw redraw;
    };
    std::vector<Abort> aborts;
    std::vector<RedrawEntry> redraws;
    std::vector<std::string> warnings;
    int workers_used = 0;
    std::map<int, HaarReference> haar;
};

// Workers that fit the budget for trajectories of L sites (at least 1).
int workers_for_budget(int requested, std::size_t budget_bytes, int L);
std::size_t trajectory_bytes(int L);

// Per-(p, L) ensemble outcome; records exclude aborted trajectories.
struct Ensemble {
    double p = 0.0;
    int L = 0;
    std::vector<TrajectoryRecord> records;
    int n_requested = 0;
};

struct PurityResult {
    std::vector<EnsembleSeries> series;
    std::vector<std::optional<FitResult>> fits;  // empty when the series is constant
};

struct TmiDynamicsResult {
    std::vector<EnsembleSeries> normalized;  // "tmi"
    std::vector<EnsembleSeries> raw;         // "i3" in bits
    std::vector<std::optional<DriftTest>> drift;  // empty when the window has < 2 recordings
};

struct SaturationRow {
    double p = 0.0;
    int L = 0;
    double value = 0.0;  // -<normalized TMI>
    double std_error = 0.0;
    int n = 0;
};

struct SpatialGrid {
    double p = 0.0;
    int L = 0;
    std::vector<int> steps;
    std::vector<std::vector<double>> mean;  // [t][r]
    std::vector<std::vector<double>> std_error;
    int n = 0;
};

PurityResult run_purity_dynamics(const ExperimentConfig& config, RunLog* log = nullptr);
TmiDynamicsResult run_tmi_dynamics(const ExperimentConfig& config, RunLog* log = nullptr);
std::vector<SaturationRow> run_tmi_saturation(const ExperimentConfig& config, RunLog* log = nullptr);
std::vector<SpatialGrid> run_tmi_spatial(const ExperimentConfig& config, RunLog* log = nullptr);
std::vector<HaarReference> run_haar_ref(const ExperimentConfig& config, RunLog* log = nullptr);
FssResult run_fss_fit(const ExperimentConfig& config, const std::vector<SaturationRow>& table,
                      RunLog* log = nullptr);

// Runs config.experiment, writing CSVs and manifest.json into output_dir.
void run_experiment(const ExperimentConfig& config);

std::vector<ScalingPoint> to_scaling_points(const std::vector<SaturationRow>& table);
std::vector<SaturationRow> read_saturation_csv(const std::filesystem::path& path);

// Shortest representation that round-trips; CSV bytes depend only on values.
std::string format_double(double v);
std::string p_label(double p);

}  // namespace scramble
