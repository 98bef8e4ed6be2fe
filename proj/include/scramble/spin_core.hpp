#pragma once

#include <complex>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <string>

#include <Eigen/Dense>

namespace scramble {

using Complex = std::complex<double>;
using RealMatrix = Eigen::MatrixXd;
using ComplexMatrix = Eigen::MatrixXcd;

enum class Boundary { periodic, open };

std::string to_string(Boundary b);
Boundary boundary_from_string(const std::string& s);

// Parameters of the transverse-field Ising chain
//   H = sum_j [ J_zz Z_{j+1} Z_j + h_x X_j + h_z Z_j ].
// Basis convention used everywhere: site j is bit j of the basis index,
// bit value 0 is the Z = +1 eigenstate.
struct ModelParams {
    int L = 2;
    double J_zz = -1.0;
    double h_x = 1.05;
    double h_z = -0.5;
    Boundary boundary = Boundary::periodic;
    double delta_t = 1.0;

    std::size_t dim() const { return std::size_t{1} << L; }

    // Throws std::invalid_argument on L < 2, delta_t <= 0 or non-finite fields.
    void validate() const;
};

// Largest chain the dense code accepts; 2^15 x 2^15 complex is already 16 GB.
inline constexpr int kMaxSites = 15;

struct HamiltonianMatrix {
    RealMatrix entries;
    std::size_t dim() const { return static_cast<std::size_t>(entries.rows()); }
};

HamiltonianMatrix build_hamiltonian(const ModelParams& params);

/// Exact propagator U = exp(-i dt H) built from the eigendecomposition of H.
///
/// The eigenpairs are kept so that integer powers U^k are available exactly
/// as V exp(-i k dt Lambda) V^T; powers are cached because a trajectory with
/// sparse measurements needs U^k far more often than it needs U itself.
/// Thread-safe: power() may be called concurrently.
class Propagator {
public:
    Propagator(const HamiltonianMatrix& H, double delta_t);

    std::size_t dim() const { return static_cast<std::size_t>(eigenvectors_.rows()); }
    double delta_t() const { return delta_t_; }
    const ComplexMatrix& matrix() const { return *unitary_; }
    const Eigen::VectorXd& eigenvalues() const { return eigenvalues_; }
    const RealMatrix& eigenvectors() const { return eigenvectors_; }

    // U^k for k >= 0.
    std::shared_ptr<const ComplexMatrix> power(int k) const;

    // K <- U^k K. Powers up to max_cached_power() are multiplied from the
    // cache; larger ones go through the eigenbasis without materializing U^k.
    // The route depends only on k, so results do not depend on which thread
    // filled the cache first.
    void apply_power(int k, ComplexMatrix& K) const;

    // Memory allowed for cached powers; fixes max_cached_power() (at least 1).
    // Call before sharing the propagator between threads.
    void set_power_cache_bytes(std::size_t bytes);
    int max_cached_power() const { return max_cached_; }

private:
    ComplexMatrix build_power(int k) const;

    double delta_t_;
    Eigen::VectorXd eigenvalues_;
    RealMatrix eigenvectors_;
    std::shared_ptr<const ComplexMatrix> unitary_;
    int max_cached_ = 1;

    mutable std::mutex cache_mutex_;
    mutable std::map<int, std::shared_ptr<const ComplexMatrix>> power_cache_;
};

// Diagonal of the single-site projector (1 + outcome * Z_site) / 2 as a 0/1 mask.
Eigen::VectorXd z_projector(int site, int outcome, int L);

// Largest |(U^dagger U - I)_ij|.
double unitarity_error(const ComplexMatrix& U);

}  // namespace scramble
