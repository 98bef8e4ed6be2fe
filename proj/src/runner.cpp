#include "scramble/runner.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <charconv>
#include <chrono>
#include <cmath>
#include <exception>
#include <fstream>
#include <iostream>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "scramble/choi.hpp"
#include "scramble/rng.hpp"

namespace scramble {

std::string to_string(Experiment e) {
    switch (e) {
        case Experiment::purity_dynamics: return "purity-dynamics";
        case Experiment::tmi_dynamics: return "tmi-dynamics";
        case Experiment::tmi_saturation: return "tmi-saturation";
        case Experiment::tmi_spatial: return "tmi-spatial";
        case Experiment::haar_ref: return "haar-ref";
        case Experiment::fss_fit: return "fss-fit";
    }
    return "?";
}

Experiment experiment_from_string(const std::string& s) {
    for (auto e : {Experiment::purity_dynamics, Experiment::tmi_dynamics, Experiment::tmi_saturation,
                   Experiment::tmi_spatial, Experiment::haar_ref, Experiment::fss_fit})
        if (to_string(e) == s) return e;
    throw std::invalid_argument("unknown experiment: " + s);
}

std::string to_string(Preset p) {
    switch (p) {
        case Preset::chaotic: return "chaotic";
        case Preset::integrable: return "integrable";
        case Preset::trivial_integrable: return "trivial-integrable";
    }
    return "?";
}

Preset preset_from_string(const std::string& s) {
    for (auto p : {Preset::chaotic, Preset::integrable, Preset::trivial_integrable})
        if (to_string(p) == s) return p;
    throw std::invalid_argument("unknown preset: " + s);
}

ParameterPreset parameter_preset(Preset p, double trivial_h_z) {
    switch (p) {
        case Preset::chaotic: return {p, -1.0, 1.05, -0.5};
        case Preset::integrable: return {p, -1.0, -1.0, 0.0};
        case Preset::trivial_integrable: return {p, 1.0, 0.0, trivial_h_z};
    }
    throw std::invalid_argument("unknown preset");
}

void ExperimentConfig::validate() const {
    if (experiment == Experiment::fss_fit) return;
    if (sizes.empty()) throw std::invalid_argument("config: no system sizes");
    for (int L : sizes) {
        if (L < 2 || L > kMaxSites) throw std::invalid_argument("config: system size out of range");
        const bool quadripartition = experiment == Experiment::tmi_dynamics ||
                                     experiment == Experiment::tmi_saturation || experiment == Experiment::haar_ref;
        if (quadripartition && L % 2 != 0) throw std::invalid_argument("config: equal quadripartition needs even L");
        if (experiment == Experiment::tmi_spatial && L < 4)
            throw std::invalid_argument("config: spatial partition needs L >= 4");
    }
    if (samples.empty() || (samples.size() != 1 && samples.size() != sizes.size()))
        throw std::invalid_argument("config: give one sample count or one per size");
    for (int n : samples)
        if (n < 1) throw std::invalid_argument("config: sample counts must be >= 1");
    if (experiment != Experiment::haar_ref) {
        if (p_values.empty()) throw std::invalid_argument("config: no measurement rates");
        for (double p : p_values)
            if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("config: p must lie in [0, 1]");
    }
    if (n_steps < 0 || stride < 0 || record_start < 0) throw std::invalid_argument("config: negative step counts");
    if (memory_budget_bytes == 0) throw std::invalid_argument("config: memory budget must be positive");
    if (haar_samples < 1) throw std::invalid_argument("config: haar_samples must be >= 1");
    if (!(saturation_window >= 0.0 && saturation_window <= 1.0))
        throw std::invalid_argument("config: saturation_window must lie in [0, 1]");
    model(sizes.front()).validate();
}

ModelParams ExperimentConfig::model(int L) const {
    const ParameterPreset base = parameter_preset(preset, h_z.value_or(1.0));
    ModelParams m;
    m.L = L;
    m.J_zz = J_zz.value_or(base.J_zz);
    m.h_x = h_x.value_or(base.h_x);
    m.h_z = h_z.value_or(base.h_z);
    m.delta_t = delta_t;
    if (boundary) {
        m.boundary = *boundary;
    } else if (experiment == Experiment::tmi_spatial || preset != Preset::chaotic) {
        m.boundary = Boundary::open;
    } else {
        m.boundary = Boundary::periodic;
    }
    return m;
}

int ExperimentConfig::samples_for(int L) const {
    if (samples.size() == 1) return samples.front();
    for (std::size_t i = 0; i < sizes.size(); ++i)
        if (sizes[i] == L) return samples[i];
    throw std::invalid_argument("config: no sample count for L = " + std::to_string(L));
}

int ExperimentConfig::steps_for(int L) const {
    if (n_steps > 0) return n_steps;
    switch (experiment) {
        case Experiment::purity_dynamics: return 50;
        case Experiment::tmi_spatial: return 10;
        default: return 10 * L;
    }
}

int ExperimentConfig::stride_for(int L) const {
    if (stride > 0) return stride;
    if (experiment == Experiment::tmi_saturation && saturation_window == 0.0) return steps_for(L);
    return 1;
}

std::filesystem::path ExperimentConfig::haar_cache_dir() const {
    if (!cache_dir.empty()) return cache_dir;
    if (!output_dir.empty()) return output_dir / "haar-cache";
    return {};
}

void to_json(nlohmann::json& j, const ExperimentConfig& c) {
    auto opt = [](const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(); };
    j = nlohmann::json{
        {"experiment", to_string(c.experiment)},
        {"preset", to_string(c.preset)},
        {"J_zz", opt(c.J_zz)},
        {"h_x", opt(c.h_x)},
        {"h_z", opt(c.h_z)},
        {"boundary", c.boundary ? nlohmann::json(to_string(*c.boundary)) : nlohmann::json()},
        {"delta_t", c.delta_t},
        {"L", c.sizes},
        {"samples", c.samples},
        {"p", c.p_values},
        {"n_steps", c.n_steps},
        {"stride", c.stride},
        {"record_start", c.record_start},
        {"seed", c.master_seed},
        {"memory_budget_bytes", c.memory_budget_bytes},
        {"haar_samples", c.haar_samples},
        {"haar_seed", c.haar_seed_value()},
        {"fit_t_min", c.fit_t_min},
        {"fit_t_max", c.fit_t_max},
        {"saturation_window", c.saturation_window},
        {"drift_window", c.drift_window},
        {"drift_z", c.drift_z},
        {"pc_grid", {c.pc_min, c.pc_max, c.pc_step}},
        {"nu_grid", {c.nu_min, c.nu_max, c.nu_step}},
        {"weighted_fit", c.weighted_fit},
        {"input", c.input.string()},
    };
}

std::size_t trajectory_bytes(int L) {
    // K, its evolved copy, one reshaped cut and one Gram matrix, plus slack.
    const std::size_t n = std::size_t{1} << L;
    return 5 * sizeof(Complex) * n * n + (std::size_t{8} << 20);
}

int workers_for_budget(int requested, std::size_t budget_bytes, int L) {
    int want = requested > 0 ? requested : static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
    const auto fit = static_cast<int>(std::min<std::size_t>(budget_bytes / trajectory_bytes(L), 1 << 16));
    return std::max(1, std::min(want, fit));
}

std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    if (ec != std::errc()) throw std::runtime_error("format_double failed");
    return std::string(buf, end);
}

std::string p_label(double p) { return format_double(p); }

namespace {

struct Job {
    ModelParams params;
    std::shared_ptr<const Propagator> U;
    double p = 0.0;
    int n_samples = 1;
    int n_steps = 0;
    Recorder recorder;
};

std::uint64_t job_stream(int L, double p) {
    return splitmix64(static_cast<std::uint64_t>(L) * 0x100000001B3ull) ^ std::bit_cast<std::uint64_t>(p);
}

std::map<int, std::shared_ptr<const Propagator>> build_propagators(const ExperimentConfig& config) {
    std::map<int, std::shared_ptr<const Propagator>> out;
    for (int L : config.sizes) {
        if (out.count(L)) continue;
        const ModelParams m = config.model(L);
        auto U = std::make_shared<Propagator>(build_hamiltonian(m), m.delta_t);
        U->set_power_cache_bytes(std::min<std::size_t>(std::size_t{256} << 20, config.memory_budget_bytes / 4));
        out.emplace(L, std::move(U));
    }
    return out;
}

// Runs every (job, sample) pair on a shared queue. p = 0 trajectories carry
// no randomness, so one is simulated and copied.
std::vector<Ensemble> run_jobs(const std::vector<Job>& jobs, const ExperimentConfig& config, RunLog* log) {
    struct Task {
        std::size_t job;
        int sample;
    };
    std::vector<Task> tasks;
    int max_L = 2;
    for (std::size_t j = 0; j < jobs.size(); ++j) {
        max_L = std::max(max_L, jobs[j].params.L);
        const int n = jobs[j].p == 0.0 ? 1 : jobs[j].n_samples;
        for (int s = 0; s < n; ++s) tasks.push_back({j, s});
    }
    const int workers = workers_for_budget(config.workers, config.memory_budget_bytes, max_L);
    if (log) {
        log->workers_used = workers;
        if (trajectory_bytes(max_L) > config.memory_budget_bytes) {
            const std::string w = "memory budget below one L=" + std::to_string(max_L) +
                                  " trajectory; running with a single worker";
            log->warnings.push_back(w);
            std::cerr << "warning: " << w << '\n';
        }
    }

    std::vector<TrajectoryRecord> results(tasks.size());
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto work = [&] {
        for (std::size_t i = next++; i < tasks.size(); i = next++) {
            try {
                const Job& job = jobs[tasks[i].job];
                const std::uint64_t seed = derive_seed(config.master_seed, job_stream(job.params.L, job.p),
                                                       static_cast<std::uint64_t>(tasks[i].sample));
                results[i] = evolve(job.params, *job.U, job.p, seed, job.n_steps, job.recorder);
            } catch (...) {
                std::lock_guard lock(failure_mutex);
                if (!failure) failure = std::current_exception();
                next = tasks.size();
            }
        }
    };
    {
        std::vector<std::jthread> pool;
        for (int w = 1; w < workers; ++w) pool.emplace_back(work);
        work();
    }
    if (failure) std::rethrow_exception(failure);

    std::vector<Ensemble> out(jobs.size());
    for (std::size_t j = 0; j < jobs.size(); ++j) {
        out[j].p = jobs[j].p;
        out[j].L = jobs[j].params.L;
        out[j].n_requested = jobs[j].n_samples;
    }
    for (std::size_t i = 0; i < tasks.size(); ++i) {
        const Job& job = jobs[tasks[i].job];
        Ensemble& ens = out[tasks[i].job];
        TrajectoryRecord& rec = results[i];
        if (log) {
            for (const auto& r : rec.redraws) log->redraws.push_back({job.p, job.params.L, tasks[i].sample, rec.seed, r});
            if (rec.aborted) log->aborts.push_back({job.p, job.params.L, tasks[i].sample, rec.seed, rec.abort_reason});
        }
        if (rec.aborted) continue;
        if (job.p == 0.0) {
            for (int s = 0; s < job.n_samples; ++s) {
                TrajectoryRecord copy = rec;
                copy.seed = derive_seed(config.master_seed, job_stream(job.params.L, job.p), static_cast<std::uint64_t>(s));
                ens.records.push_back(std::move(copy));
            }
        } else {
            ens.records.push_back(std::move(rec));
        }
    }
    for (const auto& ens : out)
        if (ens.records.empty())
            throw std::runtime_error("every trajectory aborted for p = " + format_double(ens.p) +
                                     ", L = " + std::to_string(ens.L));
    return out;
}

std::ofstream open_output(const std::filesystem::path& path) {
    std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path.string());
    return out;
}

void write_series_csv(const std::filesystem::path& path, const EnsembleSeries& s) {
    auto out = open_output(path);
    out << "step,t,mean,std_error,n\n";
    for (std::size_t i = 0; i < s.steps.size(); ++i)
        out << s.steps[i] << ',' << format_double(s.t[i]) << ',' << format_double(s.mean[i]) << ','
            << format_double(s.std_error[i]) << ',' << s.n_samples << '\n';
}

std::string series_name(const std::string& observable, double p, int L) {
    return "series_" + observable + "_p" + p_label(p) + "_L" + std::to_string(L) + ".csv";
}

std::map<int, HaarReference> haar_references(const ExperimentConfig& config, RunLog* log) {
    std::map<int, HaarReference> refs;
    for (int L : config.sizes) {
        if (refs.count(L)) continue;
        const auto dir = config.haar_cache_dir();
        const int w = workers_for_budget(config.workers, config.memory_budget_bytes, L);
        refs[L] = dir.empty() ? haar_i3_reference(L, config.haar_samples, config.haar_seed_value(), w)
                              : load_or_compute_haar_reference(dir, L, config.haar_samples, config.haar_seed_value(), w);
        if (log) log->haar[L] = refs[L];
    }
    return refs;
}

Recorder quadripartition_recorder(int L, const HaarReference& ref, int stride, int start) {
    Recorder rec;
    rec.stride = stride;
    rec.start = start;
    rec.observe = [partition = equal_quadripartition(L), ref](const EvolutionOperator& K, ObservationSink& sink) {
        const TmiSample s = ChoiState(K).tmi(partition, &ref);
        sink.add("i3", s.i3);
        sink.add("tmi", *s.i3_normalized);
    };
    return rec;
}

nlohmann::json manifest_json(const ExperimentConfig& config, const RunLog& log) {
    nlohmann::json aborts = nlohmann::json::array();
    for (const auto& a : log.aborts)
        aborts.push_back({{"p", a.p}, {"L", a.L}, {"sample", a.sample}, {"seed", a.seed}, {"reason", a.reason}});
    nlohmann::json redraws = nlohmann::json::array();
    for (const auto& r : log.redraws)
        redraws.push_back({{"p", r.p}, {"L", r.L}, {"sample", r.sample}, {"seed", r.seed},
                           {"step", r.redraw.step}, {"site", r.redraw.site}});
    nlohmann::json haar = nlohmann::json::array();
    for (const auto& [L, ref] : log.haar) haar.push_back(ref);
    const auto now = std::chrono::system_clock::now();
    return nlohmann::json{
        {"tool", "scramble-lab"},
        {"version", kVersion},
        {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                      std::to_string(EIGEN_MINOR_VERSION)},
        {"config", config},
        {"seeds", {{"master", config.master_seed}, {"haar", config.haar_seed_value()}}},
        {"workers", log.workers_used},
        {"haar_references", haar},
        {"aborted_trajectories", aborts},
        {"redraws", redraws},
        {"warnings", log.warnings},
        {"created_unix", std::chrono::duration_cast<std::chrono::seconds>(now.time_since_epoch()).count()},
    };
}

}  // namespace

PurityResult run_purity_dynamics(const ExperimentConfig& config, RunLog* log) {
    config.validate();
    const auto props = build_propagators(config);
    std::vector<Job> jobs;
    for (int L : config.sizes)
        for (double p : config.p_values) {
            Recorder rec;
            rec.stride = config.stride_for(L);
            rec.start = config.record_start;
            rec.observe = [](const EvolutionOperator& K, ObservationSink& sink) { sink.add("purity", purity_cd(K)); };
            jobs.push_back({config.model(L), props.at(L), p, config.samples_for(L), config.steps_for(L), rec});
        }
    const auto ensembles = run_jobs(jobs, config, log);

    PurityResult result;
    std::ostringstream fits_csv;
    fits_csv << "p,L,alpha,beta,r2,n_points\n";
    for (const auto& ens : ensembles) {
        EnsembleSeries s = ensemble_average(ens.records, "purity");
        std::optional<FitResult> fit;
        try {
            fit = loglog_fit(s, config.fit_t_min, config.fit_t_max);
        } catch (const std::invalid_argument&) {
            // constant purity (p = 0) has no defined R^2
        }
        if (!config.output_dir.empty()) {
            write_series_csv(config.output_dir / series_name("purity", ens.p, ens.L), s);
            fits_csv << format_double(ens.p) << ',' << ens.L << ',';
            if (fit)
                fits_csv << format_double(fit->alpha) << ',' << format_double(fit->beta) << ','
                         << format_double(fit->r_squared) << ',' << fit->n_points << '\n';
            else
                fits_csv << "nan,nan,nan,0\n";
        }
        result.series.push_back(std::move(s));
        result.fits.push_back(fit);
    }
    if (!config.output_dir.empty()) open_output(config.output_dir / "loglog_fit.csv") << fits_csv.str();
    return result;
}

TmiDynamicsResult run_tmi_dynamics(const ExperimentConfig& config, RunLog* log) {
    config.validate();
    const auto refs = haar_references(config, log);
    const auto props = build_propagators(config);
    std::vector<Job> jobs;
    for (int L : config.sizes)
        for (double p : config.p_values)
            jobs.push_back({config.model(L), props.at(L), p, config.samples_for(L), config.steps_for(L),
                            quadripartition_recorder(L, refs.at(L), config.stride_for(L), config.record_start)});
    const auto ensembles = run_jobs(jobs, config, log);

    TmiDynamicsResult result;
    std::ostringstream drift_csv;
    drift_csv << "p,L,window_start,mean_slope,std_error,z,saturated\n";
    for (const auto& ens : ensembles) {
        EnsembleSeries norm = ensemble_average(ens.records, "tmi");
        EnsembleSeries raw = ensemble_average(ens.records, "i3");
        std::optional<DriftTest> drift;
        try {
            drift = saturation_test(ens.records, "tmi", config.drift_window, config.drift_z);
        } catch (const std::invalid_argument&) {
            // too few recordings in the window
        }
        if (!config.output_dir.empty()) {
            write_series_csv(config.output_dir / series_name("tmi", ens.p, ens.L), norm);
            write_series_csv(config.output_dir / series_name("i3", ens.p, ens.L), raw);
            if (drift)
                drift_csv << format_double(ens.p) << ',' << ens.L << ',' << drift->window_start << ','
                          << format_double(drift->mean_slope) << ',' << format_double(drift->std_error) << ','
                          << format_double(drift->z) << ',' << (drift->saturated ? 1 : 0) << '\n';
        }
        result.normalized.push_back(std::move(norm));
        result.raw.push_back(std::move(raw));
        result.drift.push_back(drift);
    }
    if (!config.output_dir.empty()) open_output(config.output_dir / "saturation_check.csv") << drift_csv.str();
    return result;
}

std::vector<SaturationRow> run_tmi_saturation(const ExperimentConfig& config, RunLog* log) {
    config.validate();
    const auto refs = haar_references(config, log);
    const auto props = build_propagators(config);
    std::vector<Job> jobs;
    for (int L : config.sizes) {
        const int n_steps = config.steps_for(L);
        const int start = config.saturation_window > 0.0
                              ? n_steps - static_cast<int>(std::ceil(config.saturation_window * n_steps))
                              : n_steps;
        for (double p : config.p_values)
            jobs.push_back({config.model(L), props.at(L), p, config.samples_for(L), n_steps,
                            quadripartition_recorder(L, refs.at(L), config.stride_for(L), std::max(1, start))});
    }
    const auto ensembles = run_jobs(jobs, config, log);

    std::vector<SaturationRow> table;
    for (const auto& ens : ensembles) {
        std::vector<double> per_traj;
        for (const auto& rec : ens.records) {
            const auto& s = rec.at("tmi");
            if (config.saturation_window > 0.0) {
                double sum = 0.0;
                for (const auto& pt : s) sum += pt.value;
                per_traj.push_back(-sum / static_cast<double>(s.size()));
            } else {
                per_traj.push_back(-s.back().value);
            }
        }
        const double n = static_cast<double>(per_traj.size());
        double mean = 0.0;
        for (double v : per_traj) mean += v;
        mean /= n;
        double ss = 0.0;
        for (double v : per_traj) ss += (v - mean) * (v - mean);
        const double se = per_traj.size() > 1 ? std::sqrt(ss / (n - 1.0) / n) : std::numeric_limits<double>::quiet_NaN();
        table.push_back({ens.p, ens.L, mean, se, static_cast<int>(per_traj.size())});
    }
    if (!config.output_dir.empty()) {
        auto out = open_output(config.output_dir / "saturation.csv");
        out << "p,L,value,std_error,n\n";
        for (const auto& r : table)
            out << format_double(r.p) << ',' << r.L << ',' << format_double(r.value) << ','
                << format_double(r.std_error) << ',' << r.n << '\n';
    }
    return table;
}

std::vector<SpatialGrid> run_tmi_spatial(const ExperimentConfig& config, RunLog* log) {
    config.validate();
    // The normalization reference is the equal-quadripartition Haar value.
    const auto refs = haar_references(config, log);
    const auto props = build_propagators(config);
    std::vector<Job> jobs;
    for (int L : config.sizes)
        for (double p : config.p_values) {
            Recorder rec;
            rec.stride = config.stride_for(L);
            rec.start = config.record_start;
            std::vector<PartitionSpec> parts;
            for (int r = 0; r <= L - 4; ++r) parts.push_back(spatial_partition(L, r));
            rec.observe = [parts, ref = refs.at(L)](const EvolutionOperator& K, ObservationSink& sink) {
                ChoiState state(K);
                for (std::size_t r = 0; r < parts.size(); ++r) {
                    const TmiSample s = state.tmi(parts[r], &ref);
                    sink.add("i3_r" + std::to_string(r), s.i3);
                    sink.add("tmi_r" + std::to_string(r), *s.i3_normalized);
                }
            };
            jobs.push_back({config.model(L), props.at(L), p, config.samples_for(L), config.steps_for(L), rec});
        }
    const auto ensembles = run_jobs(jobs, config, log);

    std::vector<SpatialGrid> grids;
    for (const auto& ens : ensembles) {
        SpatialGrid g;
        g.p = ens.p;
        g.L = ens.L;
        g.n = static_cast<int>(ens.records.size());
        const int n_r = ens.L - 3;
        for (int r = 0; r < n_r; ++r) {
            const EnsembleSeries s = ensemble_average(ens.records, "tmi_r" + std::to_string(r));
            if (r == 0) {
                g.steps = s.steps;
                g.mean.assign(s.steps.size(), std::vector<double>(n_r));
                g.std_error.assign(s.steps.size(), std::vector<double>(n_r));
            }
            for (std::size_t t = 0; t < s.steps.size(); ++t) {
                g.mean[t][r] = s.mean[t];
                g.std_error[t][r] = s.std_error[t];
            }
        }
        if (!config.output_dir.empty()) {
            auto out = open_output(config.output_dir /
                                   ("heatmap_tmi_p" + p_label(g.p) + "_L" + std::to_string(g.L) + ".csv"));
            out << "step,t,r,mean,std_error,n\n";
            for (std::size_t t = 0; t < g.steps.size(); ++t)
                for (int r = 0; r < n_r; ++r)
                    out << g.steps[t] << ',' << format_double(g.steps[t] * config.delta_t) << ',' << r << ','
                        << format_double(g.mean[t][r]) << ',' << format_double(g.std_error[t][r]) << ',' << g.n
                        << '\n';
        }
        grids.push_back(std::move(g));
    }
    return grids;
}

std::vector<HaarReference> run_haar_ref(const ExperimentConfig& config, RunLog* log) {
    config.validate();
    const auto refs = haar_references(config, log);
    std::vector<HaarReference> out;
    for (const auto& [L, ref] : refs) out.push_back(ref);
    if (!config.output_dir.empty()) {
        auto csv = open_output(config.output_dir / "haar_reference.csv");
        csv << "L,mean_abs_i3,std_error,n_samples,seed\n";
        for (const auto& r : out)
            csv << r.L << ',' << format_double(r.mean_abs_i3) << ',' << format_double(r.std_error) << ','
                << r.n_samples << ',' << r.seed << '\n';
    }
    return out;
}

std::vector<ScalingPoint> to_scaling_points(const std::vector<SaturationRow>& table) {
    std::vector<ScalingPoint> pts;
    for (const auto& r : table) pts.push_back({r.p, r.L, r.value, r.std_error});
    return pts;
}

std::vector<SaturationRow> read_saturation_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read " + path.string());
    std::string line;
    std::getline(in, line);
    if (line.rfind("p,L,value", 0) != 0) throw std::runtime_error(path.string() + ": not a saturation table");
    std::vector<SaturationRow> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream ss(line);
        std::string cell;
        std::vector<std::string> cells;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        if (cells.size() < 5) throw std::runtime_error(path.string() + ": malformed row: " + line);
        rows.push_back({std::stod(cells[0]), std::stoi(cells[1]), std::stod(cells[2]), std::stod(cells[3]),
                        std::stoi(cells[4])});
    }
    return rows;
}

FssResult run_fss_fit(const ExperimentConfig& config, const std::vector<SaturationRow>& table, RunLog*) {
    if (table.empty()) throw std::invalid_argument("fss-fit: empty saturation table");
    const auto points = to_scaling_points(table);
    const auto pcs = grid_values(config.pc_min, config.pc_max, config.pc_step);
    const auto nus = grid_values(config.nu_min, config.nu_max, config.nu_step);
    FssResult fit = fss_scan(points, pcs, nus, {config.weighted_fit, 5});

    if (!config.output_dir.empty()) {
        {
            auto out = open_output(config.output_dir / "r2_surface.csv");
            out << "p_c,nu,r2\n";
            for (std::size_t i = 0; i < nus.size(); ++i)
                for (std::size_t j = 0; j < pcs.size(); ++j)
                    out << format_double(pcs[j]) << ',' << format_double(nus[i]) << ','
                        << format_double(fit.r2[i][j]) << '\n';
        }
        {
            auto out = open_output(config.output_dir / "collapse.csv");
            out << "x,y,L\n";
            for (const auto& pt : points)
                out << format_double((pt.p - fit.best_pc) * std::pow(static_cast<double>(pt.L), fit.best_nu)) << ','
                    << format_double(pt.value) << ',' << pt.L << '\n';
        }
        nlohmann::json best{{"p_c", fit.best_pc},        {"nu", fit.best_nu},
                            {"r2", fit.best_r2},         {"poly_coeffs", fit.poly_coeffs},
                            {"x_center", fit.x_center},  {"x_scale", fit.x_scale},
                            {"weighted", config.weighted_fit}};
        open_output(config.output_dir / "fss_best.json") << best.dump(2) << '\n';
    }
    return fit;
}

void run_experiment(const ExperimentConfig& config) {
    RunLog log;
    switch (config.experiment) {
        case Experiment::purity_dynamics: run_purity_dynamics(config, &log); break;
        case Experiment::tmi_dynamics: run_tmi_dynamics(config, &log); break;
        case Experiment::tmi_saturation: run_tmi_saturation(config, &log); break;
        case Experiment::tmi_spatial: run_tmi_spatial(config, &log); break;
        case Experiment::haar_ref: run_haar_ref(config, &log); break;
        case Experiment::fss_fit: {
            if (config.input.empty()) throw std::invalid_argument("fss-fit needs an input saturation table");
            run_fss_fit(config, read_saturation_csv(config.input), &log);
            break;
        }
    }
    if (!config.output_dir.empty()) open_output(config.output_dir / "manifest.json") << manifest_json(config, log).dump(2) << '\n';
}

}  // namespace scramble
