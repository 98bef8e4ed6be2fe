#include "scramble/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <stdexcept>

#include <Eigen/Dense>

namespace scramble {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kNegInf = -std::numeric_limits<double>::infinity();

bool same_params(const ModelParams& a, const ModelParams& b) {
    return a.L == b.L && a.J_zz == b.J_zz && a.h_x == b.h_x && a.h_z == b.h_z && a.boundary == b.boundary &&
           a.delta_t == b.delta_t;
}

}  // namespace

EnsembleSeries ensemble_average(std::span<const TrajectoryRecord> records, const std::string& observable) {
    if (records.empty()) throw std::invalid_argument("ensemble_average: no records");
    const TrajectoryRecord& first = records.front();
    const auto& ref = first.at(observable);

    EnsembleSeries out;
    out.p = first.p;
    out.L = first.params.L;
    out.n_samples = static_cast<int>(records.size());
    for (const auto& pt : ref) {
        out.steps.push_back(pt.step);
        out.t.push_back(pt.step * first.params.delta_t);
    }
    const std::size_t n_points = ref.size();
    std::vector<double> sum(n_points, 0.0);
    for (const auto& rec : records) {
        if (!same_params(rec.params, first.params) || rec.p != first.p || rec.n_steps != first.n_steps)
            throw std::invalid_argument("ensemble_average: records from different experiments");
        const auto& s = rec.at(observable);
        if (s.size() != n_points) throw std::invalid_argument("ensemble_average: series lengths differ");
        for (std::size_t i = 0; i < n_points; ++i) {
            if (s[i].step != out.steps[i]) throw std::invalid_argument("ensemble_average: recorded steps differ");
            sum[i] += s[i].value;
        }
    }
    const double n = static_cast<double>(records.size());
    out.mean.resize(n_points);
    for (std::size_t i = 0; i < n_points; ++i) out.mean[i] = sum[i] / n;

    out.std_error.assign(n_points, kNaN);
    if (records.size() > 1) {
        std::vector<double> ss(n_points, 0.0);
        for (const auto& rec : records) {
            const auto& s = rec.at(observable);
            for (std::size_t i = 0; i < n_points; ++i) ss[i] += (s[i].value - out.mean[i]) * (s[i].value - out.mean[i]);
        }
        for (std::size_t i = 0; i < n_points; ++i) out.std_error[i] = std::sqrt(ss[i] / (n - 1.0) / n);
    }
    return out;
}

FitResult linear_fit(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) throw std::invalid_argument("linear_fit: size mismatch");
    const std::size_t n = x.size();
    if (n < 3) throw std::invalid_argument("linear_fit: need at least 3 points");
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= static_cast<double>(n);
    my /= static_cast<double>(n);
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
        syy += (y[i] - my) * (y[i] - my);
    }
    if (sxx <= 0.0) throw std::invalid_argument("linear_fit: abscissa is constant");
    if (syy <= 0.0) throw std::invalid_argument("linear_fit: ordinate is constant, R^2 undefined");
    FitResult fit;
    fit.alpha = sxy / sxx;
    fit.beta = my - fit.alpha * mx;
    double ss_res = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double r = y[i] - (fit.alpha * x[i] + fit.beta);
        ss_res += r * r;
    }
    fit.r_squared = 1.0 - ss_res / syy;
    fit.n_points = static_cast<int>(n);
    return fit;
}

FitResult loglog_fit(const EnsembleSeries& series, int t_min, int t_max) {
    if (t_min < 1) throw std::invalid_argument("loglog_fit: t_min must be >= 1");
    std::vector<double> x, y;
    for (std::size_t i = 0; i < series.steps.size(); ++i) {
        if (series.steps[i] < t_min || series.steps[i] > t_max) continue;
        if (!(series.mean[i] > 0.0)) throw std::invalid_argument("loglog_fit: non-positive mean");
        x.push_back(std::log(series.t[i]));
        y.push_back(std::log(series.mean[i]));
    }
    return linear_fit(x, y);
}

std::vector<double> grid_values(double lo, double hi, double step) {
    if (!(step > 0.0) || hi < lo) throw std::invalid_argument("grid_values: bad range");
    const auto n = static_cast<long>(std::floor((hi - lo) / step + 1e-9)) + 1;
    std::vector<double> v(static_cast<std::size_t>(n));
    for (long i = 0; i < n; ++i) v[static_cast<std::size_t>(i)] = lo + static_cast<double>(i) * step;
    return v;
}

double FssResult::psi(double x) const {
    const double u = (x - x_center) / x_scale;
    double acc = 0.0;
    for (auto it = poly_coeffs.rbegin(); it != poly_coeffs.rend(); ++it) acc = acc * u + *it;
    return acc;
}

CollapseFit collapse_fit(std::span<const ScalingPoint> data, double pc, double nu, const FssOptions& options) {
    CollapseFit fit;
    const int order = options.poly_order;
    const auto n = static_cast<Eigen::Index>(data.size());
    if (n < order + 1) return fit;

    Eigen::VectorXd x(n), y(n), w = Eigen::VectorXd::Ones(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto& d = data[static_cast<std::size_t>(i)];
        x(i) = (d.p - pc) * std::pow(static_cast<double>(d.L), nu);
        y(i) = d.value;
        if (options.weighted) {
            if (!(d.std_error > 0.0)) throw std::invalid_argument("fss: weighted fit needs positive std errors");
            w(i) = 1.0 / (d.std_error * d.std_error);
        }
    }
    const double lo = x.minCoeff(), hi = x.maxCoeff();
    fit.x_center = 0.5 * (lo + hi);
    fit.x_scale = 0.5 * (hi - lo);
    if (!(fit.x_scale > 0.0)) return fit;

    Eigen::MatrixXd design(n, order + 1);
    const Eigen::VectorXd sqrt_w = w.cwiseSqrt();
    for (Eigen::Index i = 0; i < n; ++i) {
        const double u = (x(i) - fit.x_center) / fit.x_scale;
        double pw = 1.0;
        for (int k = 0; k <= order; ++k, pw *= u) design(i, k) = pw * sqrt_w(i);
    }
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
    qr.setThreshold(1e-12);
    if (qr.rank() < order + 1) return fit;
    const Eigen::VectorXd coeffs = qr.solve(y.cwiseProduct(sqrt_w));

    const double w_sum = w.sum();
    const double y_bar = w.dot(y) / w_sum;
    const Eigen::VectorXd resid = design * coeffs - y.cwiseProduct(sqrt_w);
    const double ss_res = resid.squaredNorm();
    double ss_tot = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) ss_tot += w(i) * (y(i) - y_bar) * (y(i) - y_bar);
    if (!(ss_tot > 0.0)) return fit;

    fit.r2 = 1.0 - ss_res / ss_tot;
    fit.coeffs.assign(coeffs.data(), coeffs.data() + coeffs.size());
    return fit;
}

FssResult fss_scan(std::span<const ScalingPoint> data, std::span<const double> grid_pc,
                   std::span<const double> grid_nu, const FssOptions& options) {
    if (data.empty()) throw std::invalid_argument("fss_scan: empty data");
    if (grid_pc.empty() || grid_nu.empty()) throw std::invalid_argument("fss_scan: empty grid");
    std::map<int, std::set<double>> p_by_size;
    for (const auto& d : data) {
        if (!std::isfinite(d.value) || !std::isfinite(d.p)) throw std::invalid_argument("fss_scan: non-finite data");
        p_by_size[d.L].insert(d.p);
    }
    if (p_by_size.size() < 2) throw std::invalid_argument("fss_scan: need at least two system sizes");
    for (const auto& [L, ps] : p_by_size)
        if (ps.size() < 4) throw std::invalid_argument("fss_scan: need at least four p values per size");

    FssResult result;
    result.grid_pc.assign(grid_pc.begin(), grid_pc.end());
    result.grid_nu.assign(grid_nu.begin(), grid_nu.end());
    result.r2.assign(grid_nu.size(), std::vector<double>(grid_pc.size(), kNegInf));
    CollapseFit best;
    for (std::size_t i = 0; i < grid_nu.size(); ++i) {
        for (std::size_t j = 0; j < grid_pc.size(); ++j) {
            CollapseFit cell = collapse_fit(data, grid_pc[j], grid_nu[i], options);
            result.r2[i][j] = cell.r2;
            if (cell.r2 > best.r2) {
                best = std::move(cell);
                result.best_pc = grid_pc[j];
                result.best_nu = grid_nu[i];
            }
        }
    }
    if (!std::isfinite(best.r2)) throw std::runtime_error("fss_scan: every grid cell is degenerate");
    result.best_r2 = best.r2;
    result.poly_coeffs = std::move(best.coeffs);
    result.x_center = best.x_center;
    result.x_scale = best.x_scale;
    return result;
}

DriftTest saturation_test(std::span<const TrajectoryRecord> records, const std::string& observable,
                          double window_fraction, double z_threshold) {
    if (records.empty()) throw std::invalid_argument("saturation_test: no records");
    if (!(window_fraction > 0.0 && window_fraction <= 1.0))
        throw std::invalid_argument("saturation_test: window fraction must lie in (0, 1]");
    const int n_steps = records.front().n_steps;
    DriftTest test;
    test.window_start = n_steps - static_cast<int>(std::ceil(window_fraction * n_steps));

    std::vector<double> slopes;
    for (const auto& rec : records) {
        std::vector<double> t, v;
        for (const auto& pt : rec.at(observable))
            if (pt.step >= test.window_start) {
                t.push_back(pt.step * rec.params.delta_t);
                v.push_back(pt.value);
            }
        if (t.size() < 2) throw std::invalid_argument("saturation_test: fewer than two points in the window");
        double mt = 0.0, mv = 0.0;
        for (std::size_t i = 0; i < t.size(); ++i) {
            mt += t[i];
            mv += v[i];
        }
        mt /= static_cast<double>(t.size());
        mv /= static_cast<double>(t.size());
        double stt = 0.0, stv = 0.0;
        for (std::size_t i = 0; i < t.size(); ++i) {
            stt += (t[i] - mt) * (t[i] - mt);
            stv += (t[i] - mt) * (v[i] - mv);
        }
        slopes.push_back(stv / stt);
    }
    const double n = static_cast<double>(slopes.size());
    for (double s : slopes) test.mean_slope += s;
    test.mean_slope /= n;
    double ss = 0.0;
    for (double s : slopes) ss += (s - test.mean_slope) * (s - test.mean_slope);
    test.std_error = slopes.size() > 1 ? std::sqrt(ss / (n - 1.0) / n) : kNaN;
    if (test.std_error > 0.0) {
        test.z = std::abs(test.mean_slope) / test.std_error;
    } else {
        test.z = test.mean_slope == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
    }
    test.saturated = !(test.z > z_threshold);
    return test;
}

std::optional<Crossing> find_crossing(std::span<const double> p, std::span<const double> y1,
                                      std::span<const double> se1, std::span<const double> y2,
                                      std::span<const double> se2, double n_sigma) {
    const std::size_t n = p.size();
    if (y1.size() != n || y2.size() != n || se1.size() != n || se2.size() != n)
        throw std::invalid_argument("find_crossing: size mismatch");
    // Sign of the difference where it is resolved, 0 where it is not.
    std::vector<int> sign(n, 0);
    std::vector<double> diff(n);
    for (std::size_t i = 0; i < n; ++i) {
        diff[i] = y1[i] - y2[i];
        const double s = std::hypot(se1[i], se2[i]);
        if (diff[i] > n_sigma * s) sign[i] = 1;
        else if (diff[i] < -n_sigma * s) sign[i] = -1;
    }
    std::vector<std::size_t> resolved;
    for (std::size_t i = 0; i < n; ++i)
        if (sign[i] != 0) resolved.push_back(i);
    if (resolved.empty()) return std::nullopt;
    // The resolved points must form one run of each sign.
    const int first_sign = sign[resolved.front()];
    std::size_t k = 0;
    while (k < resolved.size() && sign[resolved[k]] == first_sign) ++k;
    if (k == resolved.size()) return std::nullopt;
    for (std::size_t m = k; m < resolved.size(); ++m)
        if (sign[resolved[m]] == first_sign) return std::nullopt;

    const std::size_t a = resolved[k - 1], b = resolved[k];
    Crossing c;
    c.p_below = p[a];
    c.p_above = p[b];
    c.p = p[a] + (p[b] - p[a]) * diff[a] / (diff[a] - diff[b]);
    return c;
}

std::vector<int> negativity_frontier(const std::vector<std::vector<double>>& mean,
                                     const std::vector<std::vector<double>>& se, double n_sigma) {
    if (mean.empty()) return {};
    const std::size_t n_r = mean.front().size();
    std::vector<int> frontier(n_r, static_cast<int>(mean.size()));
    for (std::size_t r = 0; r < n_r; ++r)
        for (std::size_t t = 0; t < mean.size(); ++t)
            if (mean[t][r] + n_sigma * se[t][r] < 0.0) {
                frontier[r] = static_cast<int>(t);
                break;
            }
    return frontier;
}

}  // namespace scramble
