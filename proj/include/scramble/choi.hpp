#pragma once

#include <cstdint>
#include <optional>
#include <unordered_map>
#include <vector>

#include "scramble/spin_core.hpp"
#include "scramble/trajectory.hpp"

namespace scramble {

struct HaarReference;

// The Choi state of K has 2L legs: an input leg and an output leg per site.
// Amplitude of |in = nu>|out = mu> is K(mu, nu) / sqrt(N).
struct LegSet {
    std::uint32_t in = 0;   // bit j set: input leg of site j
    std::uint32_t out = 0;  // bit j set: output leg of site j

    int size() const;
    LegSet complement(int L) const;
    // Bit pattern over the 2L legs: output legs in bits [0, L), inputs in [L, 2L).
    std::uint64_t mask(int L) const { return std::uint64_t{out} | (std::uint64_t{in} << L); }

    friend LegSet operator|(LegSet a, LegSet b) { return {a.in | b.in, a.out | b.out}; }
    friend bool operator==(LegSet a, LegSet b) = default;
};

enum class InLabel { A, B };
enum class OutLabel { C, D };

struct PartitionSpec {
    int L = 0;
    std::vector<InLabel> label_of_in;
    std::vector<OutLabel> label_of_out;

    LegSet A() const;
    LegSet B() const;
    LegSet C() const;
    LegSet D() const;
    void validate() const;
};

// A, C = first L/2 sites; B, D = the rest. L must be even.
PartitionSpec equal_quadripartition(int L);

// A = input sites {0, 1}, D = output sites {2 + r, 3 + r}, 0 <= r <= L - 4.
PartitionSpec spatial_partition(int L, int r);

enum class EntropyMethod {
    gram,  // eigenvalues of M M^dagger on the smaller side of the cut
    svd,   // singular values of the full reshaped amplitude matrix
};

// Eigenvalues below this are dropped before taking logarithms.
inline constexpr double kSpectrumFloor = 1e-14;

// Tolerance on | ||K||_F^2 / N - 1 | accepted by the entropy functions.
inline constexpr double kNormTolerance = 1e-9;

// Von Neumann entropy (bits) of the Choi state of K reduced to legs X.
double subsystem_entropy(const ComplexMatrix& K, LegSet X, EntropyMethod method = EntropyMethod::gram);
double subsystem_entropy(const EvolutionOperator& K, LegSet X, EntropyMethod method = EntropyMethod::gram);

// S_X + S_Y - S_XY; round-off negatives above -1e-9 are reported as 0.
double mutual_information(double s_x, double s_y, double s_xy);

struct EntropyBundle {
    double S_A = 0, S_B = 0, S_C = 0, S_D = 0;
    double S_AC = 0, S_AD = 0, S_CD = 0;

    // S_ACD equals S_B because the Choi state is pure.
    double S_ACD() const { return S_B; }
    double I_AC() const;
    double I_AD() const;
    double I_ACD() const;
    double I3() const { return I_AC() + I_AD() - I_ACD(); }
};

struct TmiSample {
    int step = 0;
    double i3 = 0.0;
    std::optional<double> i3_normalized;
};

/// Memoizing view of one Choi state. Entropies of a leg set and of its
/// complement share one cache slot, so scanning several partitions of the
/// same K factorizes each distinct cut once.
class ChoiState {
public:
    explicit ChoiState(const ComplexMatrix& K, EntropyMethod method = EntropyMethod::gram);
    explicit ChoiState(const EvolutionOperator& K, EntropyMethod method = EntropyMethod::gram);

    int L() const { return L_; }
    double entropy(LegSet X);
    EntropyBundle bundle(const PartitionSpec& partition);
    TmiSample tmi(const PartitionSpec& partition, const HaarReference* reference = nullptr);

private:
    const ComplexMatrix& K_;
    int L_;
    EntropyMethod method_;
    std::unordered_map<std::uint64_t, double> cache_;
};

EntropyBundle entropy_bundle(const EvolutionOperator& K, const PartitionSpec& partition);
TmiSample tmi(const EvolutionOperator& K, const PartitionSpec& partition, const HaarReference* reference = nullptr);

// tr rho_CD^2 = tr[(K K^dagger)^2] / N^2.
double purity_cd(const ComplexMatrix& K);
double purity_cd(const EvolutionOperator& K);

}  // namespace scramble
