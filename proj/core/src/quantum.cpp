#include "qlink/quantum.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

namespace qlink::quantum {

namespace {

int qubits_for_dimension(Eigen::Index dim) {
    switch (dim) {
        case 2: return 1;
        case 4: return 2;
        case 8: return 3;
        default:
            throw std::invalid_argument("dimension " + std::to_string(dim) + " is not 2, 4 or 8");
    }
}

const double kInvSqrt2 = 1.0 / std::numbers::sqrt2;

}  // namespace

PureState PureState::from_amplitudes(Vector amplitudes) {
    const int n = qubits_for_dimension(amplitudes.size());
    const double norm2 = amplitudes.squaredNorm();
    if (std::abs(norm2 - 1.0) > kNormTolerance) {
        throw std::invalid_argument("state is not normalized (|psi|^2 = " + std::to_string(norm2) + ")");
    }
    return PureState(std::move(amplitudes), n);
}

PureState PureState::normalized(Vector amplitudes) {
    const double norm = amplitudes.norm();
    if (norm == 0.0) throw std::invalid_argument("cannot normalize the zero vector");
    amplitudes /= norm;
    const int n = qubits_for_dimension(amplitudes.size());
    return PureState(std::move(amplitudes), n);
}

DensityMatrix DensityMatrix::from_matrix(Matrix entries) {
    if (entries.rows() != entries.cols()) throw std::invalid_argument("density matrix must be square");
    const int n = qubits_for_dimension(entries.rows());
    const double asym = (entries - entries.adjoint()).cwiseAbs().maxCoeff();
    if (asym > kHermitianTolerance) {
        throw std::invalid_argument("density matrix is not Hermitian (max deviation " + std::to_string(asym) + ")");
    }
    const Complex tr = entries.trace();
    if (std::abs(tr - Complex{1.0, 0.0}) > kTraceTolerance) {
        throw std::invalid_argument("density matrix trace is " + std::to_string(tr.real()) + ", expected 1");
    }
    // Symmetrize before the eigen solve so the solver sees an exactly
    // self-adjoint input.
    const Matrix herm = 0.5 * (entries + entries.adjoint());
    Eigen::SelfAdjointEigenSolver<Matrix> solver(herm, Eigen::EigenvaluesOnly);
    const double min_eig = solver.eigenvalues().minCoeff();
    if (min_eig < kEigenvalueFloor) {
        throw std::invalid_argument("density matrix has negative eigenvalue " + std::to_string(min_eig));
    }
    return DensityMatrix(herm, n);
}

DensityMatrix DensityMatrix::pure(const PureState& psi) {
    const Vector& v = psi.amplitudes();
    return DensityMatrix(v * v.adjoint(), psi.qubits());
}

DensityMatrix DensityMatrix::maximally_mixed(int qubits) {
    if (qubits < 1 || qubits > 3) throw std::invalid_argument("qubit count must be 1..3");
    const Eigen::Index dim = Eigen::Index{1} << qubits;
    return DensityMatrix(Matrix::Identity(dim, dim) / static_cast<double>(dim), qubits);
}

DensityMatrix DensityMatrix::bell_diagonal(const std::array<double, 4>& weights) {
    Matrix rho = Matrix::Zero(4, 4);
    for (BellIndex k : kAllBellIndices) {
        const PureState b = bell_state(k);
        rho += weights[static_cast<std::size_t>(k)] * (b.amplitudes() * b.amplitudes().adjoint());
    }
    return from_matrix(std::move(rho));
}

std::string_view to_string(BellIndex k) noexcept {
    switch (k) {
        case BellIndex::PhiPlus: return "PhiPlus";
        case BellIndex::PhiMinus: return "PhiMinus";
        case BellIndex::PsiPlus: return "PsiPlus";
        case BellIndex::PsiMinus: return "PsiMinus";
    }
    return "?";
}

std::string_view to_string(PauliCorrection c) noexcept {
    switch (c) {
        case PauliCorrection::I: return "I";
        case PauliCorrection::Z: return "Z";
        case PauliCorrection::X: return "X";
        case PauliCorrection::XZ: return "XZ";
    }
    return "?";
}

Matrix pauli_matrix(PauliCorrection c) {
    Matrix x(2, 2), z(2, 2);
    x << 0, 1, 1, 0;
    z << 1, 0, 0, -1;
    switch (c) {
        case PauliCorrection::I: return Matrix::Identity(2, 2);
        case PauliCorrection::Z: return z;
        case PauliCorrection::X: return x;
        case PauliCorrection::XZ: return x * z;
    }
    return Matrix::Identity(2, 2);
}

PureState apply(const Matrix& unitary, const PureState& psi) {
    if (unitary.cols() != psi.amplitudes().size()) throw std::invalid_argument("operator/state dimension mismatch");
    return PureState::normalized(unitary * psi.amplitudes());
}

Matrix analyzer_observable(MeasurementSetting setting) {
    const double c = std::cos(2.0 * setting.angle_rad);
    const double s = std::sin(2.0 * setting.angle_rad);
    Matrix a(2, 2);
    a << c, s, s, -c;
    return a;
}

Matrix analyzer_projector(MeasurementSetting setting, int outcome) {
    if (outcome != 1 && outcome != -1) throw std::invalid_argument("analyzer outcome must be +1 or -1");
    return 0.5 * (Matrix::Identity(2, 2) + static_cast<double>(outcome) * analyzer_observable(setting));
}

PureState polarization_state(Polarization p) {
    const Complex i{0.0, 1.0};
    switch (p) {
        case Polarization::H: return PureState::single(1.0, 0.0);
        case Polarization::V: return PureState::single(0.0, 1.0);
        case Polarization::Plus: return PureState::single(kInvSqrt2, kInvSqrt2);
        case Polarization::Minus: return PureState::single(kInvSqrt2, -kInvSqrt2);
        case Polarization::R: return PureState::single(kInvSqrt2, i * kInvSqrt2);
        case Polarization::L: return PureState::single(kInvSqrt2, -i * kInvSqrt2);
    }
    throw std::invalid_argument("unknown polarization");
}

std::string_view to_string(Polarization p) noexcept {
    switch (p) {
        case Polarization::H: return "H";
        case Polarization::V: return "V";
        case Polarization::Plus: return "+";
        case Polarization::Minus: return "-";
        case Polarization::R: return "R";
        case Polarization::L: return "L";
    }
    return "?";
}

bool is_pole_state(Polarization p) noexcept { return p == Polarization::H || p == Polarization::V; }

PureState bell_state(BellIndex k) {
    Vector v = Vector::Zero(4);
    switch (k) {
        case BellIndex::PhiPlus: v(0) = kInvSqrt2; v(3) = kInvSqrt2; break;
        case BellIndex::PhiMinus: v(0) = kInvSqrt2; v(3) = -kInvSqrt2; break;
        case BellIndex::PsiPlus: v(1) = kInvSqrt2; v(2) = kInvSqrt2; break;
        case BellIndex::PsiMinus: v(1) = kInvSqrt2; v(2) = -kInvSqrt2; break;
    }
    return PureState::from_amplitudes(std::move(v));
}

Projection teleport_project(const PureState& chi, BellIndex k) {
    if (chi.qubits() != 1) throw std::invalid_argument("teleport_project expects a single-qubit input");
    const Vector joint = kron(chi.amplitudes(), bell_state(BellIndex::PhiPlus).amplitudes());
    const Vector bell = bell_state(k).amplitudes();

    // out[q3] = sum_{q1 q2} conj(Bell_k[q1 q2]) * joint[q1 q2 q3]
    Vector out = Vector::Zero(2);
    for (Eigen::Index q12 = 0; q12 < 4; ++q12) {
        for (Eigen::Index q3 = 0; q3 < 2; ++q3) {
            out(q3) += std::conj(bell(q12)) * joint(2 * q12 + q3);
        }
    }
    const double probability = out.squaredNorm();
    return Projection{PureState::normalized(std::move(out)), probability};
}

double correlation_E(const DensityMatrix& rho, MeasurementSetting a, MeasurementSetting b) {
    if (rho.qubits() != 2) throw std::invalid_argument("correlation_E expects a two-qubit state");
    const Matrix obs = kron(analyzer_observable(a), analyzer_observable(b));
    return (rho.matrix() * obs).trace().real();
}

double chsh_S(const DensityMatrix& rho, MeasurementSetting a, MeasurementSetting a_prime, MeasurementSetting b,
              MeasurementSetting b_prime) {
    return std::abs(correlation_E(rho, a, b) - correlation_E(rho, a, b_prime) + correlation_E(rho, a_prime, b) +
                    correlation_E(rho, a_prime, b_prime));
}

double state_fidelity(const DensityMatrix& rho, const PureState& target) {
    if (rho.qubits() != target.qubits()) throw std::invalid_argument("state_fidelity: dimension mismatch");
    const Vector& t = target.amplitudes();
    return (t.adjoint() * rho.matrix() * t)(0, 0).real();
}

double overlap_modulus(const PureState& a, const PureState& b) {
    if (a.qubits() != b.qubits()) throw std::invalid_argument("overlap_modulus: dimension mismatch");
    return std::abs(a.amplitudes().dot(b.amplitudes()));
}

Matrix kron(const Matrix& a, const Matrix& b) {
    Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
        for (Eigen::Index j = 0; j < a.cols(); ++j) {
            out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
        }
    }
    return out;
}

Vector kron(const Vector& a, const Vector& b) {
    Vector out(a.size() * b.size());
    for (Eigen::Index i = 0; i < a.size(); ++i) out.segment(i * b.size(), b.size()) = a(i) * b;
    return out;
}

Matrix partial_trace(const Matrix& op, int qubits, std::span<const int> traced) {
    const Eigen::Index dim = Eigen::Index{1} << qubits;
    if (op.rows() != dim || op.cols() != dim) throw std::invalid_argument("partial_trace: operator size mismatch");

    unsigned traced_mask = 0;
    for (int q : traced) {
        if (q < 0 || q >= qubits) throw std::invalid_argument("partial_trace: qubit index out of range");
        traced_mask |= 1u << (qubits - 1 - q);
    }
    std::vector<unsigned> kept_bits;
    for (int bit = qubits - 1; bit >= 0; --bit) {
        if (!(traced_mask & (1u << bit))) kept_bits.push_back(static_cast<unsigned>(bit));
    }
    const Eigen::Index out_dim = Eigen::Index{1} << kept_bits.size();

    // Compress the kept bits of a full index into a reduced index.
    auto reduce = [&](unsigned idx) {
        unsigned r = 0;
        for (unsigned bit : kept_bits) r = (r << 1) | ((idx >> bit) & 1u);
        return static_cast<Eigen::Index>(r);
    };

    Matrix out = Matrix::Zero(out_dim, out_dim);
    for (unsigned i = 0; i < dim; ++i) {
        for (unsigned j = 0; j < dim; ++j) {
            if ((i & traced_mask) != (j & traced_mask)) continue;
            out(reduce(i), reduce(j)) += op(i, j);
        }
    }
    return out;
}

}  // namespace qlink::quantum
