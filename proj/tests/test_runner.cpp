#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "scramble/choi.hpp"
#include "scramble/runner.hpp"

using namespace scramble;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
    auto dir = fs::temp_directory_path() / ("scramble_runner_" + name);
    fs::remove_all(dir);
    return dir;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::vector<std::string> read_rows(const fs::path& p) {
    std::ifstream in(p);
    std::vector<std::string> rows;
    for (std::string line; std::getline(in, line);) rows.push_back(line);
    return rows;
}

int data_rows(const fs::path& p) {
    std::ifstream in(p);
    std::string line;
    int n = -1;
    while (std::getline(in, line))
        if (!line.empty()) ++n;
    return n;
}

ExperimentConfig small(Experiment e) {
    ExperimentConfig c;
    c.experiment = e;
    c.sizes = {4};
    c.samples = {6};
    c.p_values = {0.0, 0.3};
    c.n_steps = 8;
    c.haar_samples = 6;
    c.master_seed = 21;
    c.workers = 1;
    return c;
}

}  // namespace

TEST_CASE("presets") {
    const auto c = parameter_preset(Preset::chaotic);
    CHECK(c.J_zz == -1.0);
    CHECK(c.h_x == 1.05);
    CHECK(c.h_z == -0.5);
    const auto i = parameter_preset(Preset::integrable);
    CHECK(i.J_zz == -1.0);
    CHECK(i.h_x == -1.0);
    CHECK(i.h_z == 0.0);
    const auto t = parameter_preset(Preset::trivial_integrable, 0.3);
    CHECK(t.J_zz == 1.0);
    CHECK(t.h_x == 0.0);
    CHECK(t.h_z == 0.3);
    CHECK(preset_from_string("trivial-integrable") == Preset::trivial_integrable);
    CHECK_THROWS(preset_from_string("random"));
    for (auto e : {Experiment::purity_dynamics, Experiment::tmi_dynamics, Experiment::tmi_saturation,
                   Experiment::tmi_spatial, Experiment::haar_ref, Experiment::fss_fit})
        CHECK(experiment_from_string(to_string(e)) == e);
}

TEST_CASE("config defaults follow the experiment") {
    ExperimentConfig c;
    c.experiment = Experiment::tmi_dynamics;
    c.sizes = {6};
    CHECK(c.model(6).boundary == Boundary::periodic);
    CHECK(c.steps_for(6) == 60);
    CHECK(c.stride_for(6) == 1);
    c.preset = Preset::integrable;
    CHECK(c.model(6).boundary == Boundary::open);
    CHECK(c.model(6).h_x == -1.0);
    c.boundary = Boundary::periodic;
    CHECK(c.model(6).boundary == Boundary::periodic);

    c = ExperimentConfig{};
    c.experiment = Experiment::tmi_spatial;
    CHECK(c.model(6).boundary == Boundary::open);
    CHECK(c.steps_for(6) == 10);
    c.experiment = Experiment::purity_dynamics;
    CHECK(c.steps_for(8) == 50);
    CHECK(c.model(8).boundary == Boundary::periodic);
    c.experiment = Experiment::tmi_saturation;
    CHECK(c.steps_for(8) == 80);
    CHECK(c.stride_for(8) == 80);
    c.h_x = 0.5;
    CHECK(c.model(8).h_x == 0.5);
    CHECK(c.haar_seed_value() == c.master_seed);
    c.haar_seed = 99;
    CHECK(c.haar_seed_value() == 99);
}

TEST_CASE("config validation") {
    auto c = small(Experiment::tmi_dynamics);
    CHECK_NOTHROW(c.validate());
    c.sizes = {5};
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
    c = small(Experiment::tmi_spatial);
    c.sizes = {2};
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
    c = small(Experiment::tmi_dynamics);
    c.p_values = {1.5};
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
    c = small(Experiment::tmi_dynamics);
    c.samples = {0};
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
    c = small(Experiment::tmi_dynamics);
    c.sizes = {4, 6};
    c.samples = {1, 2, 3};
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
    c.samples = {5, 7};
    CHECK(c.samples_for(6) == 7);
    c = small(Experiment::tmi_dynamics);
    c.stride = -1;
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
    c = small(Experiment::tmi_dynamics);
    c.memory_budget_bytes = 0;
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
}

TEST_CASE("memory budget caps the worker count") {
    CHECK(trajectory_bytes(12) > std::size_t{5} * 16 * 4096 * 4096 - 1);
    CHECK(workers_for_budget(8, trajectory_bytes(10) * 3, 10) == 3);
    CHECK(workers_for_budget(2, trajectory_bytes(10) * 3, 10) == 2);
    CHECK(workers_for_budget(8, 1, 10) == 1);
    CHECK(workers_for_budget(0, std::size_t{1} << 40, 4) >= 1);

    auto c = small(Experiment::purity_dynamics);
    c.memory_budget_bytes = 1024;
    c.workers = 4;
    RunLog log;
    run_purity_dynamics(c, &log);
    CHECK(log.workers_used == 1);
    CHECK_FALSE(log.warnings.empty());
}

TEST_CASE("format_double round-trips") {
    for (double v : {0.1, 1.0 / 3.0, -2.5e-17, 0.0, 12345.678}) CHECK(std::stod(format_double(v)) == v);
    CHECK(format_double(std::nan("")) == "nan");
    CHECK(p_label(0.0025) == "0.0025");
    CHECK(p_label(0.0) == "0");
}

TEST_CASE("purity dynamics: unmeasured runs are flat, heavy measurement purifies") {
    auto c = small(Experiment::purity_dynamics);
    c.p_values = {0.0, 1.0};
    c.samples = {50};
    c.n_steps = 10;
    const auto r = run_purity_dynamics(c);
    REQUIRE(r.series.size() == 2);
    for (double v : r.series[0].mean) CHECK(v == doctest::Approx(1.0 / 16).epsilon(1e-12));
    CHECK_FALSE(r.fits[0].has_value());
    const auto& heavy = r.series[1];
    CHECK(heavy.n_samples == 50);
    CHECK(heavy.mean[3] > 0.99);
    REQUIRE(r.fits[1].has_value());
}

TEST_CASE("tmi dynamics: outputs, t = 0 row, worker independence") {
    const auto dir1 = fresh_dir("w1"), dir3 = fresh_dir("w3");
    auto c = small(Experiment::tmi_dynamics);
    c.output_dir = dir1;
    run_experiment(c);
    c.output_dir = dir3;
    c.workers = 3;
    run_experiment(c);

    for (const char* name : {"series_tmi_p0_L4.csv", "series_tmi_p0.3_L4.csv", "series_i3_p0.3_L4.csv",
                             "saturation_check.csv"}) {
        CAPTURE(name);
        REQUIRE(fs::exists(dir1 / name));
        CHECK(slurp(dir1 / name) == slurp(dir3 / name));
    }
    CHECK(data_rows(dir1 / "series_tmi_p0.3_L4.csv") == 9);
    const auto rows = read_rows(dir1 / "series_tmi_p0.3_L4.csv");
    CHECK(rows.front() == "step,t,mean,std_error,n");
    CHECK(rows[1].rfind("0,0,", 0) == 0);
    CHECK(std::abs(std::stod(rows[1].substr(4))) < 1e-9);
    CHECK(fs::exists(dir1 / "haar-cache" / "haar_L4_n6_s21.json"));

    nlohmann::json manifest;
    std::ifstream(dir1 / "manifest.json") >> manifest;
    CHECK(manifest.at("version") == kVersion);
    CHECK(manifest.at("config").at("experiment") == "tmi-dynamics");
    CHECK(manifest.at("seeds").at("master") == 21);
    CHECK(manifest.at("aborted_trajectories").empty());
    CHECK(manifest.contains("redraws"));
    CHECK(manifest.at("haar_references").size() == 1);
}

TEST_CASE("tmi dynamics: p = 0 replicas equal a direct simulation") {
    auto c = small(Experiment::tmi_dynamics);
    c.p_values = {0.0};
    const auto r = run_tmi_dynamics(c);
    REQUIRE(r.normalized.size() == 1);
    CHECK(r.normalized[0].n_samples == 6);
    for (double se : r.normalized[0].std_error) CHECK(se < 1e-12);

    const auto ref = haar_i3_reference(4, c.haar_samples, c.haar_seed_value());
    Propagator U(build_hamiltonian(c.model(4)), 1.0);
    auto K = EvolutionOperator::identity(4);
    for (int t = 1; t <= c.n_steps; ++t) {
        step(K, U, {});
        CHECK(r.normalized[0].mean[t] == doctest::Approx(*tmi(K, equal_quadripartition(4), &ref).i3_normalized));
    }
}

TEST_CASE("tmi saturation table and fss-fit preconditions") {
    const auto dir = fresh_dir("sat");
    auto c = small(Experiment::tmi_saturation);
    c.sizes = {4, 6};
    c.samples = {8, 4};
    c.p_values = {0.0, 0.1, 0.2, 0.3};
    c.output_dir = dir;
    RunLog log;
    const auto table = run_tmi_saturation(c, &log);
    CHECK(table.size() == 8);
    for (const auto& row : table) {
        CHECK(row.n == (row.L == 4 ? 8 : 4));
        CHECK(std::isfinite(row.value));
    }
    CHECK(data_rows(dir / "saturation.csv") == 8);
    const auto back = read_saturation_csv(dir / "saturation.csv");
    REQUIRE(back.size() == table.size());
    for (std::size_t i = 0; i < table.size(); ++i) {
        CHECK(back[i].value == table[i].value);
        CHECK(back[i].L == table[i].L);
    }

    auto f = c;
    f.experiment = Experiment::fss_fit;
    f.pc_min = 0.0;
    f.pc_max = 0.3;
    f.pc_step = 0.05;
    f.nu_min = 0.5;
    f.nu_max = 1.5;
    f.nu_step = 0.5;
    const auto fit = run_fss_fit(f, table);
    CHECK(std::isfinite(fit.best_r2));
    CHECK(data_rows(dir / "r2_surface.csv") == 7 * 3);
    CHECK(data_rows(dir / "collapse.csv") == 8);
    CHECK(fs::exists(dir / "fss_best.json"));

    std::vector<SaturationRow> single;
    for (const auto& row : table)
        if (row.L == 4) single.push_back(row);
    CHECK_THROWS_AS(run_fss_fit(f, single), std::invalid_argument);
    CHECK_THROWS_AS(run_fss_fit(f, {}), std::invalid_argument);

    f.input = dir / "saturation.csv";
    f.output_dir = dir / "fit";
    CHECK_NOTHROW(run_experiment(f));
    CHECK(fs::exists(dir / "fit" / "r2_surface.csv"));
    f.input.clear();
    CHECK_THROWS(run_experiment(f));
}

TEST_CASE("saturation window average") {
    auto c = small(Experiment::tmi_saturation);
    c.saturation_window = 0.5;
    c.p_values = {0.0};
    c.samples = {2};
    const auto t = run_tmi_saturation(c);
    REQUIRE(t.size() == 1);
    CHECK(t[0].n == 2);
    CHECK(t[0].std_error < 1e-12);
}

TEST_CASE("spatial scan") {
    const auto dir = fresh_dir("spatial");
    auto c = small(Experiment::tmi_spatial);
    c.sizes = {6};
    c.p_values = {0.1};
    c.n_steps = 0;
    c.output_dir = dir;
    const auto grids = run_tmi_spatial(c);
    REQUIRE(grids.size() == 1);
    const auto& g = grids[0];
    CHECK(g.steps.size() == 11);
    REQUIRE(g.mean.front().size() == 3);
    for (double v : g.mean.front()) CHECK(std::abs(v) < 1e-9);
    CHECK(data_rows(dir / "heatmap_tmi_p0.1_L6.csv") == 11 * 3);
}

TEST_CASE("haar-ref experiment") {
    const auto dir = fresh_dir("haar");
    auto c = small(Experiment::haar_ref);
    c.sizes = {2, 4};
    c.output_dir = dir;
    run_experiment(c);
    CHECK(data_rows(dir / "haar_reference.csv") == 2);
    CHECK(fs::exists(dir / "manifest.json"));
}
