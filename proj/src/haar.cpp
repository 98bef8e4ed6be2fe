#include "scramble/haar.hpp"

#include <atomic>
#include <cmath>
#include <fstream>
#include <limits>
#include <stdexcept>
#include <thread>
#include <vector>

#include "scramble/choi.hpp"

namespace scramble {

ComplexMatrix sample_haar_unitary(std::size_t N, Rng& rng) {
    if (N == 0) throw std::invalid_argument("sample_haar_unitary: empty dimension");
    const auto n = static_cast<Eigen::Index>(N);
    // Standard complex Gaussian: real and imaginary parts with variance 1/2.
    std::normal_distribution<double> gauss(0.0, std::sqrt(0.5));
    ComplexMatrix ginibre(n, n);
    for (Eigen::Index c = 0; c < n; ++c)
        for (Eigen::Index r = 0; r < n; ++r) {
            const double re = gauss(rng);
            const double im = gauss(rng);
            ginibre(r, c) = Complex(re, im);
        }

    Eigen::HouseholderQR<ComplexMatrix> qr(ginibre);
    ComplexMatrix Q = qr.householderQ();
    const auto R = qr.matrixQR();
    for (Eigen::Index k = 0; k < n; ++k) {
        const Complex d = R(k, k);
        const double mag = std::abs(d);
        if (mag > 0.0) Q.col(k) *= d / mag;
    }
    return Q;
}

void to_json(nlohmann::json& j, const HaarReference& ref) {
    j = nlohmann::json{{"L", ref.L},
                       {"n_samples", ref.n_samples},
                       {"seed", ref.seed},
                       {"mean_abs_i3", ref.mean_abs_i3},
                       {"std_error", std::isfinite(ref.std_error) ? nlohmann::json(ref.std_error) : nlohmann::json()}};
}

void from_json(const nlohmann::json& j, HaarReference& ref) {
    ref.L = j.at("L").get<int>();
    ref.n_samples = j.at("n_samples").get<int>();
    ref.seed = j.at("seed").get<std::uint64_t>();
    ref.mean_abs_i3 = j.at("mean_abs_i3").get<double>();
    const auto& se = j.at("std_error");
    ref.std_error = se.is_null() ? std::numeric_limits<double>::quiet_NaN() : se.get<double>();
}

HaarReference haar_i3_reference(int L, int n_samples, std::uint64_t seed, int workers) {
    if (n_samples < 1) throw std::invalid_argument("haar_i3_reference: n_samples must be >= 1");
    const PartitionSpec partition = equal_quadripartition(L);
    const std::size_t N = std::size_t{1} << L;

    std::vector<double> abs_i3(static_cast<std::size_t>(n_samples));
    std::atomic<int> next{0};
    auto work = [&] {
        for (int s = next++; s < n_samples; s = next++) {
            Rng rng(derive_seed(seed, kHaarStream, static_cast<std::uint64_t>(s)));
            const ComplexMatrix U = sample_haar_unitary(N, rng);
            abs_i3[static_cast<std::size_t>(s)] = std::abs(ChoiState(U).tmi(partition).i3);
        }
    };
    const int n_threads = std::max(1, std::min(workers, n_samples));
    std::vector<std::jthread> pool;
    for (int w = 1; w < n_threads; ++w) pool.emplace_back(work);
    work();
    pool.clear();

    double mean = 0.0;
    for (double v : abs_i3) mean += v;
    mean /= n_samples;
    double var = 0.0;
    for (double v : abs_i3) var += (v - mean) * (v - mean);
    const double se = n_samples > 1 ? std::sqrt(var / (n_samples - 1) / n_samples)
                                    : std::numeric_limits<double>::quiet_NaN();
    return {L, mean, se, n_samples, seed};
}

std::filesystem::path haar_cache_path(const std::filesystem::path& dir, int L, int n_samples, std::uint64_t seed) {
    return dir / ("haar_L" + std::to_string(L) + "_n" + std::to_string(n_samples) + "_s" + std::to_string(seed) +
                  ".json");
}

HaarReference load_or_compute_haar_reference(const std::filesystem::path& cache_dir, int L, int n_samples,
                                             std::uint64_t seed, int workers) {
    const auto path = haar_cache_path(cache_dir, L, n_samples, seed);
    if (std::ifstream in(path); in) {
        try {
            const HaarReference cached = nlohmann::json::parse(in).get<HaarReference>();
            if (cached.L == L && cached.n_samples == n_samples && cached.seed == seed) return cached;
        } catch (const nlohmann::json::exception&) {
            // unreadable cache: recompute and overwrite
        }
    }
    const HaarReference ref = haar_i3_reference(L, n_samples, seed, workers);
    std::filesystem::create_directories(cache_dir);
    const auto tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp);
        if (!out) throw std::runtime_error("cannot write Haar cache " + tmp);
        out << nlohmann::json(ref).dump(2) << '\n';
    }
    std::filesystem::rename(tmp, path);
    return ref;
}

double normalize_tmi(double i3, const HaarReference& ref, int L) {
    if (ref.L != L) throw std::invalid_argument("normalize_tmi: Haar reference built for a different L");
    if (!(ref.mean_abs_i3 > 0.0)) throw std::invalid_argument("normalize_tmi: reference magnitude must be positive");
    return i3 / ref.mean_abs_i3;
}

}  // namespace scramble
