#include <array>
#include <cmath>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "qlink/quantum.hpp"
#include "test_util.hpp"

namespace q = qlink::quantum;
using q::BellIndex;
using q::Complex;
using q::Matrix;
using q::Vector;
using qlink::testing::random_density;
using qlink::testing::random_ket;

namespace {

constexpr double kPi = std::numbers::pi;
const double kInvSqrt2 = 1.0 / std::sqrt(2.0);

// <Bell_k|_12 (|chi>_1 |Phi+>_23), contracted index by index.
Vector contract_oracle(const Vector& chi, BellIndex k) {
    const Vector bell = q::bell_state(k).amplitudes();
    std::array<Complex, 8> psi{};
    for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b)
            for (int c = 0; c < 2; ++c) psi[4 * a + 2 * b + c] = chi(a) * (b == c ? kInvSqrt2 : 0.0);
    Vector out = Vector::Zero(2);
    for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b)
            for (int c = 0; c < 2; ++c) out(c) += std::conj(bell(2 * a + b)) * psi[4 * a + 2 * b + c];
    return out;
}

}  // namespace

TEST(BellState, Amplitudes) {
    const Vector phi = q::bell_state(BellIndex::PhiPlus).amplitudes();
    EXPECT_NEAR(phi(0).real(), kInvSqrt2, 1e-15);
    EXPECT_NEAR(phi(3).real(), kInvSqrt2, 1e-15);
    EXPECT_EQ(phi(1), Complex(0.0));
    const Vector psi = q::bell_state(BellIndex::PsiMinus).amplitudes();
    EXPECT_NEAR(psi(1).real(), kInvSqrt2, 1e-15);
    EXPECT_NEAR(psi(2).real(), -kInvSqrt2, 1e-15);
    EXPECT_EQ(psi(0), Complex(0.0));
}

TEST(BellState, OrthonormalAndComplete) {
    Matrix sum = Matrix::Zero(4, 4);
    for (BellIndex a : q::kAllBellIndices) {
        const Vector va = q::bell_state(a).amplitudes();
        sum += va * va.adjoint();
        for (BellIndex b : q::kAllBellIndices) {
            const double expect = a == b ? 1.0 : 0.0;
            EXPECT_NEAR(std::abs(va.dot(q::bell_state(b).amplitudes())), expect, 1e-12);
        }
    }
    EXPECT_LT((sum - Matrix::Identity(4, 4)).norm(), 1e-12);
}

TEST(Corrections, PairedWithOutcomes) {
    EXPECT_EQ(q::correction_for(BellIndex::PhiPlus), q::PauliCorrection::I);
    EXPECT_EQ(q::correction_for(BellIndex::PhiMinus), q::PauliCorrection::Z);
    EXPECT_EQ(q::correction_for(BellIndex::PsiPlus), q::PauliCorrection::X);
    EXPECT_EQ(q::correction_for(BellIndex::PsiMinus), q::PauliCorrection::XZ);
}

TEST(TeleportProject, FixedExamples) {
    const auto h = q::teleport_project(q::polarization_state(q::Polarization::H), BellIndex::PhiPlus);
    EXPECT_NEAR(q::overlap_modulus(h.state, q::polarization_state(q::Polarization::H)), 1.0, 1e-12);
    EXPECT_NEAR(h.probability, 0.25, 1e-12);

    const auto plus = q::teleport_project(q::polarization_state(q::Polarization::Plus), BellIndex::PsiPlus);
    EXPECT_NEAR(q::overlap_modulus(plus.state, q::polarization_state(q::Polarization::Plus)), 1.0, 1e-12);

    const auto chi = q::PureState::single(0.6, Complex(0.0, 0.8));
    const auto out = q::teleport_project(chi, BellIndex::PhiMinus);
    EXPECT_NEAR(out.probability, 0.25, 1e-12);
    EXPECT_NEAR(q::overlap_modulus(out.state, q::PureState::single(0.6, Complex(0.0, -0.8))), 1.0, 1e-12);
    const Vector oracle = contract_oracle(chi.amplitudes(), BellIndex::PhiMinus);
    EXPECT_NEAR(oracle.squaredNorm(), 0.25, 1e-12);
    EXPECT_NEAR(std::abs(out.state.amplitudes().dot(oracle / oracle.norm())), 1.0, 1e-12);
}

TEST(TeleportProject, RandomStatesMatchContractionAndCorrection) {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 1000; ++trial) {
        const Vector chi = random_ket(rng, 2);
        const auto input = q::PureState::from_amplitudes(chi);
        double total = 0.0;
        for (BellIndex k : q::kAllBellIndices) {
            const auto out = q::teleport_project(input, k);
            total += out.probability;
            const Vector oracle = contract_oracle(chi, k);
            ASSERT_NEAR(out.probability, oracle.squaredNorm(), 1e-12);
            ASSERT_NEAR(std::abs(out.state.amplitudes().dot(oracle / oracle.norm())), 1.0, 1e-10);
            const auto corrected = q::apply(q::pauli_matrix(q::correction_for(k)), out.state);
            ASSERT_GE(q::overlap_modulus(corrected, input), 1.0 - 1e-10);
        }
        ASSERT_NEAR(total, 1.0, 1e-12);
    }
}

TEST(Correlation, PhiPlusAndMixed) {
    const auto phi = q::DensityMatrix::pure(q::bell_state(BellIndex::PhiPlus));
    EXPECT_NEAR(q::correlation_E(phi, {0.0}, {kPi / 8}), std::cos(kPi / 4), 1e-12);
    const auto mixed = q::DensityMatrix::maximally_mixed(2);
    EXPECT_NEAR(q::correlation_E(mixed, {0.3}, {1.1}), 0.0, 1e-12);
}

TEST(Correlation, BellDiagonalMatchesDenseTrace) {
    const auto rho = q::DensityMatrix::bell_diagonal({0.9275, 0.0275, 0.0225, 0.0225});
    // Observable built from explicit analyzer vectors.
    auto obs = [](double phi) {
        Vector t(2), r(2);
        t << std::cos(phi), std::sin(phi);
        r << -std::sin(phi), std::cos(phi);
        return Matrix(t * t.adjoint() - r * r.adjoint());
    };
    Matrix joint(4, 4);
    const Matrix a = obs(0.0), b = obs(kPi / 8);
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) joint(i, j) = a(i / 2, j / 2) * b(i % 2, j % 2);
    Complex trace = 0.0;
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) trace += rho.matrix()(i, j) * joint(j, i);
    EXPECT_NEAR(q::correlation_E(rho, {0.0}, {kPi / 8}), trace.real(), 1e-12);
}

TEST(Chsh, OptimalSettingsAndBounds) {
    const auto phi = q::DensityMatrix::pure(q::bell_state(BellIndex::PhiPlus));
    EXPECT_NEAR(q::chsh_S(phi, {0.0}, {kPi / 4}, {kPi / 8}, {3 * kPi / 8}), 2.0 * std::sqrt(2.0), 1e-12);
    EXPECT_NEAR(q::chsh_S(q::DensityMatrix::maximally_mixed(2), {0.0}, {kPi / 4}, {kPi / 8}, {3 * kPi / 8}), 0.0,
                1e-12);

    const auto rho = q::DensityMatrix::bell_diagonal({0.9275, 0.0275, 0.0225, 0.0225});
    const double s = q::chsh_S(rho, {0.0}, {kPi / 4}, {kPi / 8}, {3 * kPi / 8});
    // Linear analyzers see the H/V and +/- correlations: S = sqrt2 (v_hv + v_pm).
    EXPECT_NEAR(s, std::sqrt(2.0) * (0.91 + 0.90), 1e-12);
    EXPECT_NEAR(s, 2.5597, 1e-4);

    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> angle(0.0, kPi);
    for (int i = 0; i < 1000; ++i) {
        const auto r = q::DensityMatrix::from_matrix(random_density(rng, 4));
        const double e = q::correlation_E(r, {angle(rng)}, {angle(rng)});
        ASSERT_LE(std::abs(e), 1.0 + 1e-12);
        ASSERT_LE(q::chsh_S(r, {angle(rng)}, {angle(rng)}, {angle(rng)}, {angle(rng)}), 2.0 * std::sqrt(2.0) + 1e-9);
    }
}

TEST(Fidelity, Examples) {
    const auto h = q::polarization_state(q::Polarization::H);
    EXPECT_NEAR(q::state_fidelity(q::DensityMatrix::pure(h), h), 1.0, 1e-15);
    EXPECT_NEAR(q::state_fidelity(q::DensityMatrix::maximally_mixed(1), q::polarization_state(q::Polarization::R)),
                0.5, 1e-15);
    const Vector plus = q::polarization_state(q::Polarization::Plus).amplitudes();
    const Matrix rho = 0.8 * plus * plus.adjoint() + 0.2 * Matrix::Identity(2, 2) / 2.0;
    // 0.8 * 1 + 0.2 * 0.5
    EXPECT_NEAR(q::state_fidelity(q::DensityMatrix::from_matrix(rho), q::polarization_state(q::Polarization::Plus)),
                0.9, 1e-12);
}

TEST(Fidelity, ComplementaryPairSumsToOne) {
    std::mt19937_64 rng(17);
    for (int i = 0; i < 200; ++i) {
        const auto rho = q::DensityMatrix::from_matrix(random_density(rng, 2));
        const Vector a = random_ket(rng, 2);
        Vector b(2);
        b << -std::conj(a(1)), std::conj(a(0));
        const double sum = q::state_fidelity(rho, q::PureState::from_amplitudes(a)) +
                           q::state_fidelity(rho, q::PureState::from_amplitudes(b));
        ASSERT_NEAR(sum, 1.0, 1e-12);
    }
}

TEST(PartialTrace, MatchesElementwiseOracle) {
    std::mt19937_64 rng(23);
    const std::vector<std::vector<int>> cases{{0}, {1}, {2}, {0, 1}, {0, 2}, {1, 2}};
    for (const auto& traced : cases) {
        const Matrix rho = random_density(rng, 8);
        const Matrix got = q::partial_trace(rho, 3, traced);
        EXPECT_LT((got - qlink::testing::dense_partial_trace(rho, 3, traced)).norm(), 1e-12);
    }
}

TEST(Kron, FirstFactorIsMostSignificant) {
    const Vector h = q::polarization_state(q::Polarization::H).amplitudes();
    const Vector v = q::polarization_state(q::Polarization::V).amplitudes();
    const Vector hv = q::kron(h, v);
    EXPECT_EQ(hv(1), Complex(1.0));
    EXPECT_EQ(q::kron(v, h)(2), Complex(1.0));
}

TEST(Validation, RejectsMalformedInput) {
    EXPECT_THROW(q::PureState::from_amplitudes(Vector::Ones(3)), std::invalid_argument);
    EXPECT_THROW(q::PureState::from_amplitudes(Vector::Ones(2)), std::invalid_argument);
    EXPECT_THROW(q::PureState::normalized(Vector::Zero(2)), std::invalid_argument);
    Matrix bad = Matrix::Identity(2, 2);
    EXPECT_THROW(q::DensityMatrix::from_matrix(bad), std::invalid_argument);
    Matrix neg(2, 2);
    neg << 1.5, 0.0, 0.0, -0.5;
    EXPECT_THROW(q::DensityMatrix::from_matrix(neg), std::invalid_argument);
    Matrix nonherm(2, 2);
    nonherm << 0.5, 0.1, 0.0, 0.5;
    EXPECT_THROW(q::DensityMatrix::from_matrix(nonherm), std::invalid_argument);
}

TEST(Settings, AngleIsModPi) {
    const auto phi = q::DensityMatrix::pure(q::bell_state(BellIndex::PhiPlus));
    EXPECT_NEAR(q::correlation_E(phi, {0.2}, {0.5}), q::correlation_E(phi, {0.2 + kPi}, {0.5 - kPi}), 1e-12);
}
