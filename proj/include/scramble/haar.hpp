#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>

#include <json.hpp>

#include "scramble/rng.hpp"
#include "scramble/spin_core.hpp"

namespace scramble {

// Haar-random unitary of size N via QR of a complex Ginibre matrix with the
// phases of diag(R) moved into Q.
ComplexMatrix sample_haar_unitary(std::size_t N, Rng& rng);

struct HaarReference {
    int L = 0;
    double mean_abs_i3 = 0.0;  // bits
    double std_error = 0.0;    // bits; NaN when n_samples == 1
    int n_samples = 0;
    std::uint64_t seed = 0;
};

void to_json(nlohmann::json& j, const HaarReference& ref);
void from_json(const nlohmann::json& j, HaarReference& ref);

// Mean |I3| over Haar unitaries at the equal quadripartition. Sample s uses
// the sub-seed derive_seed(seed, kHaarStream, s).
HaarReference haar_i3_reference(int L, int n_samples, std::uint64_t seed, int workers = 1);

inline constexpr std::uint64_t kHaarStream = 0x4861617200000000ull;
inline constexpr int kDefaultHaarSamples = 20;

std::filesystem::path haar_cache_path(const std::filesystem::path& dir, int L, int n_samples, std::uint64_t seed);

// Reads the cache file if present and consistent; otherwise computes the
// reference and writes it.
HaarReference load_or_compute_haar_reference(const std::filesystem::path& cache_dir, int L, int n_samples,
                                             std::uint64_t seed, int workers = 1);

// i3 / |I3^Haar|. Throws if the reference was built for a different L.
double normalize_tmi(double i3, const HaarReference& ref, int L);

}  // namespace scramble
