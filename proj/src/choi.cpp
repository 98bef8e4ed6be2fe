#include "scramble/choi.hpp"

#include <bit>
#include <cmath>
#include <stdexcept>

#include "scramble/haar.hpp"

namespace scramble {

int LegSet::size() const { return std::popcount(in) + std::popcount(out); }

LegSet LegSet::complement(int L) const {
    const std::uint32_t full = (std::uint32_t{1} << L) - 1;
    return {full & ~in, full & ~out};
}

namespace {

LegSet collect_in(const PartitionSpec& p, InLabel want) {
    LegSet s;
    for (int j = 0; j < p.L; ++j)
        if (p.label_of_in[j] == want) s.in |= std::uint32_t{1} << j;
    return s;
}

LegSet collect_out(const PartitionSpec& p, OutLabel want) {
    LegSet s;
    for (int j = 0; j < p.L; ++j)
        if (p.label_of_out[j] == want) s.out |= std::uint32_t{1} << j;
    return s;
}

}  // namespace

LegSet PartitionSpec::A() const { return collect_in(*this, InLabel::A); }
LegSet PartitionSpec::B() const { return collect_in(*this, InLabel::B); }
LegSet PartitionSpec::C() const { return collect_out(*this, OutLabel::C); }
LegSet PartitionSpec::D() const { return collect_out(*this, OutLabel::D); }

void PartitionSpec::validate() const {
    if (L < 1 || L > kMaxSites) throw std::invalid_argument("PartitionSpec: bad L");
    if (static_cast<int>(label_of_in.size()) != L || static_cast<int>(label_of_out.size()) != L)
        throw std::invalid_argument("PartitionSpec: label arrays must have length L");
}

PartitionSpec equal_quadripartition(int L) {
    if (L < 2 || L % 2 != 0) throw std::invalid_argument("equal_quadripartition: L must be even and >= 2");
    if (L > kMaxSites) throw std::invalid_argument("equal_quadripartition: L too large");
    PartitionSpec p{L, std::vector<InLabel>(L, InLabel::B), std::vector<OutLabel>(L, OutLabel::D)};
    for (int j = 0; j < L / 2; ++j) {
        p.label_of_in[j] = InLabel::A;
        p.label_of_out[j] = OutLabel::C;
    }
    return p;
}

PartitionSpec spatial_partition(int L, int r) {
    if (L < 4 || L > kMaxSites) throw std::invalid_argument("spatial_partition: need 4 <= L");
    if (r < 0 || r > L - 4) throw std::out_of_range("spatial_partition: r must lie in [0, L-4]");
    PartitionSpec p{L, std::vector<InLabel>(L, InLabel::B), std::vector<OutLabel>(L, OutLabel::C)};
    p.label_of_in[0] = p.label_of_in[1] = InLabel::A;
    p.label_of_out[2 + r] = p.label_of_out[3 + r] = OutLabel::D;
    return p;
}

namespace {

int sites_of(const ComplexMatrix& K) {
    const auto N = K.rows();
    if (N != K.cols() || N < 2 || (N & (N - 1)) != 0)
        throw std::invalid_argument("Choi state: K must be square with power-of-two dimension");
    return std::countr_zero(static_cast<std::uint64_t>(N));
}

void check_normalized(const ComplexMatrix& K) {
    const double N = static_cast<double>(K.rows());
    if (std::abs(K.squaredNorm() / N - 1.0) > kNormTolerance)
        throw std::invalid_argument("Choi state: K is not normalized to ||K||_F^2 = N");
}

// Scatter table: entry i holds the bits of i deposited onto the set bits of mask.
std::vector<std::uint64_t> deposit_table(std::uint64_t mask) {
    std::vector<std::uint64_t> table(std::size_t{1} << std::popcount(mask));
    for (std::uint64_t i = 0; i < table.size(); ++i) {
        std::uint64_t out = 0, m = mask, src = i;
        while (m) {
            const std::uint64_t low = m & (~m + 1);
            if (src & 1) out |= low;
            src >>= 1;
            m ^= low;
        }
        table[i] = out;
    }
    return table;
}

// Amplitudes regrouped into a (legs in X) x (legs not in X) matrix, unnormalized.
ComplexMatrix reshape_for_cut(const ComplexMatrix& K, int L, std::uint64_t x_mask) {
    const std::uint64_t full = (std::uint64_t{1} << (2 * L)) - 1;
    const auto rows = deposit_table(x_mask);
    const auto cols = deposit_table(full & ~x_mask);
    ComplexMatrix M(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols.size()));
    const Complex* amp = K.data();  // column-major: amp[out + N * in] = K(out, in)
    for (std::size_t c = 0; c < cols.size(); ++c) {
        const std::uint64_t base = cols[c];
        Complex* dst = M.col(static_cast<Eigen::Index>(c)).data();
        for (std::size_t r = 0; r < rows.size(); ++r) dst[r] = amp[rows[r] | base];
    }
    return M;
}

double entropy_of_spectrum(const Eigen::VectorXd& probabilities) {
    double s = 0.0;
    for (Eigen::Index i = 0; i < probabilities.size(); ++i) {
        const double q = probabilities(i);
        if (q > kSpectrumFloor) s -= q * std::log2(q);
    }
    return s;
}

double entropy_unchecked(const ComplexMatrix& K, int L, LegSet X, EntropyMethod method) {
    const int nx = X.size();
    if (nx == 0 || nx == 2 * L) return 0.0;
    // The spectrum of rho_X equals that of rho_{complement}; factor the smaller side.
    if (nx > L) X = X.complement(L);
    const double inv_n = 1.0 / static_cast<double>(K.rows());
    const ComplexMatrix M = reshape_for_cut(K, L, X.mask(L));

    if (method == EntropyMethod::svd) {
        Eigen::BDCSVD<ComplexMatrix> svd(M);
        if (svd.info() != Eigen::Success) throw std::runtime_error("subsystem_entropy: SVD failed");
        return entropy_of_spectrum(svd.singularValues().array().square().matrix() * inv_n);
    }
    ComplexMatrix gram = ComplexMatrix::Zero(M.rows(), M.rows());
    gram.selfadjointView<Eigen::Lower>().rankUpdate(M, inv_n);
    Eigen::SelfAdjointEigenSolver<ComplexMatrix> eig(gram, Eigen::EigenvaluesOnly);
    if (eig.info() != Eigen::Success) throw std::runtime_error("subsystem_entropy: eigensolver failed");
    return entropy_of_spectrum(eig.eigenvalues());
}

}  // namespace

double subsystem_entropy(const ComplexMatrix& K, LegSet X, EntropyMethod method) {
    const int L = sites_of(K);
    const std::uint32_t full = (std::uint32_t{1} << L) - 1;
    if ((X.in & ~full) || (X.out & ~full)) throw std::invalid_argument("subsystem_entropy: leg outside the chain");
    check_normalized(K);
    return entropy_unchecked(K, L, X, method);
}

double subsystem_entropy(const EvolutionOperator& K, LegSet X, EntropyMethod method) {
    return subsystem_entropy(K.matrix, X, method);
}

double mutual_information(double s_x, double s_y, double s_xy) {
    const double i = s_x + s_y - s_xy;
    return (i < 0.0 && i > -1e-9) ? 0.0 : i;
}

double EntropyBundle::I_AC() const { return mutual_information(S_A, S_C, S_AC); }
double EntropyBundle::I_AD() const { return mutual_information(S_A, S_D, S_AD); }
double EntropyBundle::I_ACD() const { return mutual_information(S_A, S_CD, S_ACD()); }

ChoiState::ChoiState(const ComplexMatrix& K, EntropyMethod method) : K_(K), L_(sites_of(K)), method_(method) {
    check_normalized(K_);
}

ChoiState::ChoiState(const EvolutionOperator& K, EntropyMethod method) : ChoiState(K.matrix, method) {}

double ChoiState::entropy(LegSet X) {
    const std::uint32_t full = (std::uint32_t{1} << L_) - 1;
    if ((X.in & ~full) || (X.out & ~full)) throw std::invalid_argument("ChoiState::entropy: leg outside the chain");
    const std::uint64_t key = std::min(X.mask(L_), X.complement(L_).mask(L_));
    if (auto it = cache_.find(key); it != cache_.end()) return it->second;
    const double s = entropy_unchecked(K_, L_, X, method_);
    cache_.emplace(key, s);
    return s;
}

EntropyBundle ChoiState::bundle(const PartitionSpec& partition) {
    partition.validate();
    if (partition.L != L_) throw std::invalid_argument("ChoiState::bundle: partition size does not match K");
    const LegSet a = partition.A(), b = partition.B(), c = partition.C(), d = partition.D();
    EntropyBundle e;
    e.S_A = entropy(a);
    e.S_B = entropy(b);
    e.S_C = entropy(c);
    e.S_D = entropy(d);
    e.S_AC = entropy(a | c);
    e.S_AD = entropy(a | d);
    e.S_CD = entropy(c | d);
    return e;
}

TmiSample ChoiState::tmi(const PartitionSpec& partition, const HaarReference* reference) {
    TmiSample sample;
    sample.i3 = bundle(partition).I3();
    if (reference) sample.i3_normalized = normalize_tmi(sample.i3, *reference, L_);
    return sample;
}

EntropyBundle entropy_bundle(const EvolutionOperator& K, const PartitionSpec& partition) {
    return ChoiState(K).bundle(partition);
}

TmiSample tmi(const EvolutionOperator& K, const PartitionSpec& partition, const HaarReference* reference) {
    TmiSample sample = ChoiState(K).tmi(partition, reference);
    sample.step = K.step;
    return sample;
}

double purity_cd(const ComplexMatrix& K) {
    sites_of(K);
    check_normalized(K);
    const auto N = K.rows();
    ComplexMatrix gram = ComplexMatrix::Zero(N, N);
    gram.selfadjointView<Eigen::Lower>().rankUpdate(K.adjoint());
    double sum = 0.0;
    for (Eigen::Index c = 0; c < N; ++c) {
        sum += std::norm(gram(c, c));
        for (Eigen::Index r = c + 1; r < N; ++r) sum += 2.0 * std::norm(gram(r, c));
    }
    const double n = static_cast<double>(N);
    return sum / (n * n);
}

double purity_cd(const EvolutionOperator& K) { return purity_cd(K.matrix); }

}  // namespace scramble
