#pragma once

#include <array>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "scramble/trajectory.hpp"

namespace scramble {

// Pointwise mean over trajectories of one recorded observable.
struct EnsembleSeries {
    double p = 0.0;
    int L = 0;
    std::vector<int> steps;
    std::vector<double> t;  // steps * delta_t
    std::vector<double> mean;
    std::vector<double> std_error;  // NaN when n_samples == 1
    int n_samples = 0;

    bool has_std_error() const { return n_samples > 1; }
};

// Averages observables, never operators. Throws std::invalid_argument if the
// records disagree on params, p or recorded steps.
EnsembleSeries ensemble_average(std::span<const TrajectoryRecord> records, const std::string& observable);

struct FitResult {
    double alpha = 0.0;  // slope
    double beta = 0.0;   // intercept
    double r_squared = 0.0;
    int n_points = 0;
};

// Ordinary least squares on (x, y); needs >= 3 points and non-constant y.
FitResult linear_fit(std::span<const double> x, std::span<const double> y);

// ln(mean) = alpha ln(t) + beta over recorded steps in [t_min, t_max].
FitResult loglog_fit(const EnsembleSeries& series, int t_min = 1,
                     int t_max = std::numeric_limits<int>::max());

struct ScalingPoint {
    double p = 0.0;
    int L = 0;
    double value = 0.0;
    double std_error = std::numeric_limits<double>::quiet_NaN();
};

std::vector<double> grid_values(double lo, double hi, double step);

struct FssOptions {
    bool weighted = false;  // inverse-variance weights from ScalingPoint::std_error
    int poly_order = 5;
};

// Collapse of value(p, L) onto Psi((p - p_c) L^nu), Psi a polynomial in the
// rescaled variable u = (x - x_center) / x_scale.
struct FssResult {
    std::vector<double> grid_pc;
    std::vector<double> grid_nu;
    std::vector<std::vector<double>> r2;  // r2[i_nu][i_pc]; -inf marks a degenerate cell
    double best_pc = 0.0;
    double best_nu = 0.0;
    double best_r2 = -std::numeric_limits<double>::infinity();
    std::vector<double> poly_coeffs;  // ascending powers of u
    double x_center = 0.0;
    double x_scale = 1.0;

    double psi(double x) const;
};

struct CollapseFit {
    double r2 = -std::numeric_limits<double>::infinity();
    std::vector<double> coeffs;
    double x_center = 0.0;
    double x_scale = 1.0;
};

// Polynomial collapse quality at one (p_c, nu); r2 = -inf when degenerate.
CollapseFit collapse_fit(std::span<const ScalingPoint> data, double pc, double nu, const FssOptions& options = {});

/// Grid scan over (p_c, nu). Requires at least two system sizes with at least
/// four p values each. Ties go to the smaller nu, then the smaller p_c.
FssResult fss_scan(std::span<const ScalingPoint> data, std::span<const double> grid_pc,
                   std::span<const double> grid_nu, const FssOptions& options = {});

// Drift of an observable over the last window of a run, from per-trajectory
// least-squares slopes.
struct DriftTest {
    double mean_slope = 0.0;
    double std_error = 0.0;
    double z = 0.0;  // |mean_slope| / std_error
    int window_start = 0;
    bool saturated = true;
};

DriftTest saturation_test(std::span<const TrajectoryRecord> records, const std::string& observable,
                          double window_fraction = 0.2, double z_threshold = 3.0);

struct Crossing {
    double p = 0.0;        // interpolated crossing point
    double p_below = 0.0;  // last p resolved on one side
    double p_above = 0.0;  // first p resolved on the other side
};

// Crossing of two curves sampled on the same p grid, resolved when both
// sides differ by more than `n_sigma` combined standard errors.
std::optional<Crossing> find_crossing(std::span<const double> p, std::span<const double> y1,
                                      std::span<const double> se1, std::span<const double> y2,
                                      std::span<const double> se2, double n_sigma = 1.0);

// For each column r, the first row t at which mean + n_sigma * se < 0;
// rows.size() when never. mean[t][r], se[t][r].
std::vector<int> negativity_frontier(const std::vector<std::vector<double>>& mean,
                                     const std::vector<std::vector<double>>& se, double n_sigma = 3.0);

}  // namespace scramble
