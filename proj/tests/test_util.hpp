#pragma once

#include <cmath>
#include <complex>
#include <algorithm>
#include <random>
#include <vector>

#include "qlink/quantum.hpp"

namespace qlink::testing {

using quantum::Complex;
using quantum::Matrix;
using quantum::Vector;

inline Vector random_ket(std::mt19937_64& rng, int dim) {
    std::normal_distribution<double> g;
    Vector v(dim);
    for (int i = 0; i < dim; ++i) v(i) = Complex(g(rng), g(rng));
    return v / v.norm();
}

// Random full-rank density matrix: G G^dagger / Tr.
inline Matrix random_density(std::mt19937_64& rng, int dim) {
    std::normal_distribution<double> g;
    Matrix m(dim, dim);
    for (int i = 0; i < dim; ++i)
        for (int j = 0; j < dim; ++j) m(i, j) = Complex(g(rng), g(rng));
    Matrix rho = m * m.adjoint();
    rho /= rho.trace().real();
    return 0.5 * (rho + rho.adjoint().eval());
}

// Element-by-element partial trace over the listed qubits, MSB = qubit 0.
inline Matrix dense_partial_trace(const Matrix& op, int qubits, std::vector<int> traced) {
    std::vector<int> kept;
    for (int q = 0; q < qubits; ++q)
        if (std::find(traced.begin(), traced.end(), q) == traced.end()) kept.push_back(q);
    const int dk = 1 << kept.size();
    const int dt = 1 << traced.size();
    auto compose = [&](int kept_bits, int traced_bits) {
        int idx = 0;
        for (std::size_t i = 0; i < kept.size(); ++i)
            if (kept_bits >> (kept.size() - 1 - i) & 1) idx |= 1 << (qubits - 1 - kept[i]);
        for (std::size_t i = 0; i < traced.size(); ++i)
            if (traced_bits >> (traced.size() - 1 - i) & 1) idx |= 1 << (qubits - 1 - traced[i]);
        return idx;
    };
    Matrix out = Matrix::Zero(dk, dk);
    for (int r = 0; r < dk; ++r)
        for (int c = 0; c < dk; ++c)
            for (int t = 0; t < dt; ++t) out(r, c) += op(compose(r, t), compose(c, t));
    return out;
}

inline double binomial_sigma(double n, double p) { return std::sqrt(n * p * (1.0 - p)); }

}  // namespace qlink::testing
