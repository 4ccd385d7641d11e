#pragma once

// Polarization-qubit linear algebra.
//
// Conventions, fixed for the whole library:
//   * single-qubit basis: |H> = index 0, |V> = index 1;
//   * multi-qubit kets are written in ascending photon-label order, and the
//     first-written photon is the most significant bit of the index, so
//     |H>_1 |V>_2 is index 1 and |V>_1 |H>_2 is index 2 (kron(A, B) order);
//   * states are compared modulo global phase (overlap modulus).

#include <array>
#include <complex>
#include <span>
#include <string_view>

#include <Eigen/Dense>

namespace qlink::quantum {

using Complex = std::complex<double>;
using Vector = Eigen::VectorXcd;
using Matrix = Eigen::MatrixXcd;

inline constexpr double kNormTolerance = 1e-12;
inline constexpr double kHermitianTolerance = 1e-12;
inline constexpr double kTraceTolerance = 1e-12;
inline constexpr double kEigenvalueFloor = -1e-10;

class PureState {
public:
    // Throws std::invalid_argument unless the length is 2^n (n = 1..3) and
    // the squared norm is 1 within kNormTolerance.
    static PureState from_amplitudes(Vector amplitudes);
    // Rescales to unit norm; throws on a zero vector.
    static PureState normalized(Vector amplitudes);
    static PureState single(Complex alpha, Complex beta) { return from_amplitudes(Vector{{alpha, beta}}); }

    int qubits() const noexcept { return qubits_; }
    const Vector& amplitudes() const noexcept { return amplitudes_; }
    Complex operator[](Eigen::Index i) const { return amplitudes_(i); }

private:
    PureState(Vector amplitudes, int qubits) : amplitudes_(std::move(amplitudes)), qubits_(qubits) {}

    Vector amplitudes_;
    int qubits_;
};

class DensityMatrix {
public:
    // Validates Hermiticity, unit trace and the eigenvalue floor.
    static DensityMatrix from_matrix(Matrix entries);
    static DensityMatrix pure(const PureState& psi);
    static DensityMatrix maximally_mixed(int qubits);
    // Mixture sum_k weights[k] |Bell_k><Bell_k| in BellIndex order.
    static DensityMatrix bell_diagonal(const std::array<double, 4>& weights);

    int qubits() const noexcept { return qubits_; }
    const Matrix& matrix() const noexcept { return entries_; }

private:
    DensityMatrix(Matrix entries, int qubits) : entries_(std::move(entries)), qubits_(qubits) {}

    Matrix entries_;
    int qubits_;
};

enum class BellIndex { PhiPlus = 0, PhiMinus = 1, PsiPlus = 2, PsiMinus = 3 };
inline constexpr std::array<BellIndex, 4> kAllBellIndices{BellIndex::PhiPlus, BellIndex::PhiMinus,
                                                          BellIndex::PsiPlus, BellIndex::PsiMinus};

// Unitary that maps photon 3 back onto the input after outcome k.
enum class PauliCorrection { I, Z, X, XZ };

constexpr PauliCorrection correction_for(BellIndex k) noexcept {
    switch (k) {
        case BellIndex::PhiPlus: return PauliCorrection::I;
        case BellIndex::PhiMinus: return PauliCorrection::Z;
        case BellIndex::PsiPlus: return PauliCorrection::X;
        case BellIndex::PsiMinus: return PauliCorrection::XZ;
    }
    return PauliCorrection::I;
}

std::string_view to_string(BellIndex k) noexcept;
std::string_view to_string(PauliCorrection c) noexcept;
Matrix pauli_matrix(PauliCorrection c);
PureState apply(const Matrix& unitary, const PureState& psi);

// Linear-polarization analyzer angle; only its value mod pi is meaningful.
struct MeasurementSetting {
    double angle_rad = 0.0;
};

// +1/-1 valued observable |phi><phi| - |phi+pi/2><phi+pi/2|.
Matrix analyzer_observable(MeasurementSetting setting);
// Projector for outcome +1 (transmitted at angle phi) or -1 (reflected).
Matrix analyzer_projector(MeasurementSetting setting, int outcome);

enum class Polarization { H, V, Plus, Minus, R, L };
inline constexpr std::array<Polarization, 6> kTableStates{Polarization::H,    Polarization::V,
                                                          Polarization::Plus, Polarization::Minus,
                                                          Polarization::R,    Polarization::L};
PureState polarization_state(Polarization p);
std::string_view to_string(Polarization p) noexcept;
bool is_pole_state(Polarization p) noexcept;

PureState bell_state(BellIndex k);

struct Projection {
    PureState state;
    double probability;
};

// Projects photons 1,2 of |chi>_1 (x) |Phi+>_23 onto <Bell_k| and returns the
// normalized photon-3 state with the outcome probability.
Projection teleport_project(const PureState& chi, BellIndex k);

// Tr[rho (A(a) (x) A(b))].
double correlation_E(const DensityMatrix& rho, MeasurementSetting a, MeasurementSetting b);

// |E(a,b) - E(a,b') + E(a',b) + E(a',b')|.
double chsh_S(const DensityMatrix& rho, MeasurementSetting a, MeasurementSetting a_prime,
              MeasurementSetting b, MeasurementSetting b_prime);

// <target|rho|target>; rho and target must have the same qubit count.
double state_fidelity(const DensityMatrix& rho, const PureState& target);

// |<a|b>|, equal to 1 when the states agree up to global phase.
double overlap_modulus(const PureState& a, const PureState& b);

Matrix kron(const Matrix& a, const Matrix& b);
Vector kron(const Vector& a, const Vector& b);

// Traces out the listed qubits (0 = most significant) of an n-qubit operator.
Matrix partial_trace(const Matrix& op, int qubits, std::span<const int> traced);

}  // namespace qlink::quantum
