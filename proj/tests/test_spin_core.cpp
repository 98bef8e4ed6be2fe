#include <doctest.h>

#include <cmath>
#include <random>

#include "scramble/spin_core.hpp"

using namespace scramble;

namespace {

// Dense Kronecker product, independent of Eigen's unsupported module.
RealMatrix kron(const RealMatrix& a, const RealMatrix& b) {
    RealMatrix out(a.rows() * b.rows(), a.cols() * b.cols());
    for (Eigen::Index i = 0; i < a.rows(); ++i)
        for (Eigen::Index j = 0; j < a.cols(); ++j)
            out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    return out;
}

// Pauli operator on `site`; site 0 is the rightmost factor (least significant bit).
RealMatrix pauli_on(const RealMatrix& sigma, int site, int L) {
    RealMatrix out = RealMatrix::Identity(1, 1);
    for (int j = L - 1; j >= 0; --j) out = kron(out, j == site ? sigma : RealMatrix::Identity(2, 2));
    return out;
}

RealMatrix kron_oracle(const ModelParams& m) {
    RealMatrix X(2, 2), Z(2, 2);
    X << 0, 1, 1, 0;
    Z << 1, 0, 0, -1;
    const int n = 1 << m.L;
    RealMatrix H = RealMatrix::Zero(n, n);
    const int bonds = m.boundary == Boundary::periodic && m.L > 2 ? m.L : m.L - 1;
    for (int j = 0; j < bonds; ++j)
        H += m.J_zz * pauli_on(Z, (j + 1) % m.L, m.L) * pauli_on(Z, j, m.L);
    for (int j = 0; j < m.L; ++j) H += m.h_x * pauli_on(X, j, m.L) + m.h_z * pauli_on(Z, j, m.L);
    return H;
}

ModelParams chaotic(int L, Boundary b = Boundary::periodic) {
    ModelParams m;
    m.L = L;
    m.J_zz = -1.0;
    m.h_x = 1.05;
    m.h_z = -0.5;
    m.boundary = b;
    return m;
}

}  // namespace

TEST_CASE("hamiltonian: single bond and field examples") {
    ModelParams m;
    m.L = 2;
    m.boundary = Boundary::open;
    m.J_zz = -1;
    m.h_x = 0;
    m.h_z = 0;
    Eigen::Vector4d expect(-1, 1, 1, -1);
    auto H = build_hamiltonian(m).entries;
    CHECK((H - RealMatrix(expect.asDiagonal())).cwiseAbs().maxCoeff() == 0.0);

    m.J_zz = 0;
    m.h_z = 1;
    H = build_hamiltonian(m).entries;
    CHECK((H - RealMatrix(Eigen::Vector4d(2, 0, 0, -2).asDiagonal())).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("hamiltonian matches the Kronecker construction") {
    for (int L : {2, 3, 4, 5, 6})
        for (auto b : {Boundary::periodic, Boundary::open}) {
            const ModelParams m = chaotic(L, b);
            const RealMatrix H = build_hamiltonian(m).entries;
            CAPTURE(L);
            CHECK((H - kron_oracle(m)).cwiseAbs().maxCoeff() < 1e-12);
            CHECK((H - H.transpose()).cwiseAbs().maxCoeff() == 0.0);
        }
    ModelParams integ = chaotic(5, Boundary::open);
    integ.h_x = -1.0;
    integ.h_z = 0.0;
    CHECK((build_hamiltonian(integ).entries - kron_oracle(integ)).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("periodic L=2 counts the single bond once") {
    ModelParams m;
    m.L = 2;
    m.J_zz = 1;
    m.h_x = 0;
    m.h_z = 0;
    m.boundary = Boundary::periodic;
    const RealMatrix Hp = build_hamiltonian(m).entries;
    m.boundary = Boundary::open;
    CHECK((Hp - build_hamiltonian(m).entries).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("parameter validation") {
    ModelParams m;
    m.L = 1;
    CHECK_THROWS_AS(build_hamiltonian(m), std::invalid_argument);
    m.L = 4;
    m.h_x = std::nan("");
    CHECK_THROWS_AS(build_hamiltonian(m), std::invalid_argument);
    m.h_x = 1;
    m.J_zz = INFINITY;
    CHECK_THROWS_AS(build_hamiltonian(m), std::invalid_argument);
    m.J_zz = 1;
    m.delta_t = 0;
    CHECK_THROWS_AS(m.validate(), std::invalid_argument);
    CHECK_NOTHROW(chaotic(4).validate());
    CHECK(boundary_from_string("obc") == Boundary::open);
    CHECK(boundary_from_string("periodic") == Boundary::periodic);
    CHECK_THROWS(boundary_from_string("twisted"));
}

TEST_CASE("propagator: diagonal and zero Hamiltonians") {
    HamiltonianMatrix H{RealMatrix(Eigen::Vector4d(-1, 1, 1, -1).asDiagonal())};
    Propagator U(H, 1.0);
    const Complex I(0, 1);
    ComplexMatrix expect = ComplexMatrix::Zero(4, 4);
    expect(0, 0) = std::exp(I);
    expect(1, 1) = std::exp(-I);
    expect(2, 2) = std::exp(-I);
    expect(3, 3) = std::exp(I);
    CHECK((U.matrix() - expect).cwiseAbs().maxCoeff() < 1e-14);

    Propagator Z(HamiltonianMatrix{RealMatrix::Zero(8, 8)}, 1.0);
    CHECK((Z.matrix() - ComplexMatrix::Identity(8, 8)).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("propagator rejects a non-symmetric matrix") {
    RealMatrix A = RealMatrix::Zero(4, 4);
    A(0, 1) = 1.0;
    CHECK_THROWS(Propagator(HamiltonianMatrix{A}, 1.0));
}

TEST_CASE("propagator unitarity and norm preservation") {
    std::mt19937_64 rng(11);
    std::normal_distribution<double> g;
    for (int L : {2, 4, 6, 8, 10}) {
        Propagator U(build_hamiltonian(chaotic(L)), 1.0);
        CAPTURE(L);
        CHECK(unitarity_error(U.matrix()) < 1e-10);
        Eigen::VectorXcd v(U.dim());
        for (auto& x : v) x = Complex(g(rng), g(rng));
        const Eigen::VectorXcd w = U.matrix() * (U.matrix().adjoint() * v);
        CHECK(std::abs(w.norm() - v.norm()) < 1e-10 * v.norm());
    }
}

TEST_CASE("propagator group property and cached powers") {
    const auto H = build_hamiltonian(chaotic(6));
    Propagator U1(H, 1.0);
    Propagator U2(H, 2.0);
    CHECK((U1.matrix() * U1.matrix() - U2.matrix()).cwiseAbs().maxCoeff() < 1e-9);

    ComplexMatrix pow = ComplexMatrix::Identity(64, 64);
    for (int k = 1; k <= 7; ++k) {
        pow = U1.matrix() * pow;
        CHECK((*U1.power(k) - pow).cwiseAbs().maxCoeff() < 1e-10);
    }
    CHECK((*U1.power(0) - ComplexMatrix::Identity(64, 64)).cwiseAbs().maxCoeff() == 0.0);

    // Both application routes agree with the dense power.
    U1.set_power_cache_bytes(3 * 64 * 64 * sizeof(Complex));
    REQUIRE(U1.max_cached_power() < 7);
    for (int k : {1, 2, 7}) {
        ComplexMatrix K = ComplexMatrix::Identity(64, 64);
        U1.apply_power(k, K);
        ComplexMatrix ref = ComplexMatrix::Identity(64, 64);
        for (int i = 0; i < k; ++i) ref = U1.matrix() * ref;
        CHECK((K - ref).cwiseAbs().maxCoeff() < 1e-10);
    }
}

TEST_CASE("z projectors") {
    CHECK(z_projector(0, +1, 1) == Eigen::Vector2d(1, 0));
    CHECK(z_projector(1, -1, 2) == Eigen::Vector4d(0, 0, 1, 1));
    const int L = 5;
    for (int j = 0; j < L; ++j) {
        const Eigen::VectorXd up = z_projector(j, +1, L), dn = z_projector(j, -1, L);
        CHECK((up + dn - Eigen::VectorXd::Ones(32)).cwiseAbs().maxCoeff() == 0.0);
        CHECK((up.cwiseProduct(up) - up).cwiseAbs().maxCoeff() == 0.0);
        CHECK((dn.cwiseProduct(dn) - dn).cwiseAbs().maxCoeff() == 0.0);
        CHECK(up.cwiseProduct(dn).cwiseAbs().maxCoeff() == 0.0);
    }
    CHECK_THROWS_AS(z_projector(5, 1, 5), std::out_of_range);
    CHECK_THROWS_AS(z_projector(-1, 1, 5), std::out_of_range);
}
