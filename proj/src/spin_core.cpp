#include "scramble/spin_core.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace scramble {

std::string to_string(Boundary b) { return b == Boundary::periodic ? "periodic" : "open"; }

Boundary boundary_from_string(const std::string& s) {
    if (s == "periodic" || s == "pbc") return Boundary::periodic;
    if (s == "open" || s == "obc") return Boundary::open;
    throw std::invalid_argument("unknown boundary condition: " + s);
}

void ModelParams::validate() const {
    if (L < 2) throw std::invalid_argument("ModelParams: L must be >= 2");
    if (L > kMaxSites) throw std::invalid_argument("ModelParams: L too large for dense evolution");
    if (!std::isfinite(J_zz) || !std::isfinite(h_x) || !std::isfinite(h_z) || !std::isfinite(delta_t))
        throw std::invalid_argument("ModelParams: non-finite parameter");
    if (delta_t <= 0.0) throw std::invalid_argument("ModelParams: delta_t must be > 0");
}

namespace {

inline double z_eigenvalue(std::size_t n, int site) { return ((n >> site) & 1u) ? -1.0 : 1.0; }

}  // namespace

HamiltonianMatrix build_hamiltonian(const ModelParams& params) {
    params.validate();
    const int L = params.L;
    const std::size_t N = params.dim();
    // Open chain has bonds (j, j+1) for j < L-1; periodic adds the wrap bond
    // (L-1, 0), which at L = 2 is the existing bond and is not counted again.
    const int n_bonds = params.boundary == Boundary::periodic && L > 2 ? L : L - 1;

    HamiltonianMatrix H{RealMatrix::Zero(N, N)};
    for (std::size_t n = 0; n < N; ++n) {
        double diag = 0.0;
        for (int b = 0; b < n_bonds; ++b) {
            const int j = b;
            const int k = (b + 1) % L;
            diag += params.J_zz * z_eigenvalue(n, j) * z_eigenvalue(n, k);
        }
        for (int j = 0; j < L; ++j) diag += params.h_z * z_eigenvalue(n, j);
        H.entries(n, n) = diag;
        if (params.h_x != 0.0) {
            for (int j = 0; j < L; ++j) H.entries(n ^ (std::size_t{1} << j), n) += params.h_x;
        }
    }
    return H;
}

Propagator::Propagator(const HamiltonianMatrix& H, double delta_t) : delta_t_(delta_t) {
    if (!(delta_t > 0.0) || !std::isfinite(delta_t))
        throw std::invalid_argument("Propagator: delta_t must be finite and > 0");
    if (H.entries.rows() != H.entries.cols() || H.entries.rows() == 0)
        throw std::invalid_argument("Propagator: Hamiltonian must be square and non-empty");
    if (!H.entries.isApprox(H.entries.transpose(), 1e-12))
        throw std::invalid_argument("Propagator: Hamiltonian is not symmetric");

    Eigen::SelfAdjointEigenSolver<RealMatrix> solver(H.entries);
    if (solver.info() != Eigen::Success)
        throw std::runtime_error("Propagator: eigendecomposition of H failed");
    eigenvalues_ = solver.eigenvalues();
    eigenvectors_ = solver.eigenvectors();
    unitary_ = std::make_shared<const ComplexMatrix>(build_power(1));
    set_power_cache_bytes(std::size_t{256} << 20);
}

ComplexMatrix Propagator::build_power(int k) const {
    const auto N = eigenvectors_.rows();
    const double angle = -static_cast<double>(k) * delta_t_;
    Eigen::VectorXd c(N), s(N);
    for (Eigen::Index i = 0; i < N; ++i) {
        c(i) = std::cos(angle * eigenvalues_(i));
        s(i) = std::sin(angle * eigenvalues_(i));
    }
    // V diag(e^{i angle lambda}) V^T, real and imaginary parts separately.
    const RealMatrix re = eigenvectors_ * c.asDiagonal() * eigenvectors_.transpose();
    const RealMatrix im = eigenvectors_ * s.asDiagonal() * eigenvectors_.transpose();
    ComplexMatrix out(N, N);
    out.real() = re;
    out.imag() = im;
    return out;
}

void Propagator::set_power_cache_bytes(std::size_t bytes) {
    const std::size_t each = sizeof(Complex) * dim() * dim();
    max_cached_ = static_cast<int>(std::max<std::size_t>(1, std::min<std::size_t>(bytes / each, 4096)));
}

std::shared_ptr<const ComplexMatrix> Propagator::power(int k) const {
    if (k < 0) throw std::invalid_argument("Propagator::power: negative exponent");
    if (k == 1) return unitary_;
    if (k == 0) return std::make_shared<const ComplexMatrix>(ComplexMatrix::Identity(dim(), dim()));
    if (k > max_cached_) return std::make_shared<const ComplexMatrix>(build_power(k));
    std::lock_guard lock(cache_mutex_);
    auto& slot = power_cache_[k];
    if (!slot) slot = std::make_shared<const ComplexMatrix>(build_power(k));
    return slot;
}

void Propagator::apply_power(int k, ComplexMatrix& K) const {
    if (k < 0) throw std::invalid_argument("Propagator::apply_power: negative exponent");
    if (K.rows() != static_cast<Eigen::Index>(dim()))
        throw std::invalid_argument("Propagator::apply_power: dimension mismatch");
    if (k == 0) return;
    if (k <= max_cached_) {
        const auto p = power(k);
        K = (*p) * K;
        return;
    }
    const double angle = -static_cast<double>(k) * delta_t_;
    const Eigen::ArrayXcd phase = (Complex(0.0, angle) * eigenvalues_.array().cast<Complex>()).exp();
    ComplexMatrix rotated = eigenvectors_.transpose() * K;
    rotated = phase.matrix().asDiagonal() * rotated;
    K.noalias() = eigenvectors_ * rotated;
}

Eigen::VectorXd z_projector(int site, int outcome, int L) {
    if (L < 1 || L > kMaxSites) throw std::invalid_argument("z_projector: bad L");
    if (site < 0 || site >= L) throw std::out_of_range("z_projector: site out of range");
    if (outcome != 1 && outcome != -1) throw std::invalid_argument("z_projector: outcome must be +1 or -1");
    const std::size_t N = std::size_t{1} << L;
    const std::size_t wanted = outcome == 1 ? 0u : 1u;
    Eigen::VectorXd mask(N);
    for (std::size_t n = 0; n < N; ++n) mask(n) = ((n >> site) & 1u) == wanted ? 1.0 : 0.0;
    return mask;
}

double unitarity_error(const ComplexMatrix& U) {
    ComplexMatrix g = U.adjoint() * U;
    g.diagonal().array() -= 1.0;
    return g.cwiseAbs().maxCoeff();
}

}  // namespace scramble
