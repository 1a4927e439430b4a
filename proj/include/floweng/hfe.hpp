#pragma once

#include "floweng/mode_algebra.hpp"

// Closed-form expansion of the flow's static sector in powers of 1/w_1,
// keeping the full dependence on the slow-frequency ratios. Order 0 collects
// the linear feed of every driving harmonic into its static partner; order 1
// collects one commutator with resummed attenuation denominators.

namespace floweng {

class ResonanceError : public std::runtime_error {
public:
    ResonanceError(const std::string& what, std::string mode_info, double denominator)
        : std::runtime_error(what), mode_info(std::move(mode_info)), denominator(denominator) {}
    std::string mode_info;
    double denominator;
};

struct HfeOptions {
    // denominators with |d| < resonance_guard * w_1 raise ResonanceError
    double resonance_guard = 1e-12;
};

// h_e0^{m_0} = (m_0 . w_0) sum_{m_1 != 0} h^m / (m . w)  +  h^{m_0}
FourierOperator effective_order0(const FourierOperator& h, const HfeOptions& options = {});

// The full 1/w_1 correction: four commutator sums over stored mode pairs with
// the exact rational coefficients in m.w. Returns the correction already
// divided by w_1, i.e. the operator to add directly to order 0.
FourierOperator effective_order1(const FourierOperator& h, const HfeOptions& options = {});

// The quasi-static-compatible reduction of the order-1 correction, valid when
// the slow frequencies are themselves treated as small:
//   -(1/w_1) sum_{n_1 != 0} (1/n_1) [h^n, h^{m_0 - n_0}]
//   +(1/2 w_1) sum_{n_1 != 0} (1/n_1) [h^n, h^{(-n_1, m_0 - n_0)}]
// Coincides with effective_order1 exactly when all stored modes live at zero
// slow harmonics, and differs by O(eta) otherwise.
FourierOperator effective_order1_simplified(const FourierOperator& h);

// order 0 for order == 0, order 0 plus the 1/w_1 correction for order == 1
FourierOperator effective_hamiltonian(const FourierOperator& h, int order,
                                      const HfeOptions& options = {});

}  // namespace floweng
