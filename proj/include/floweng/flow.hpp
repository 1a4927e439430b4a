#pragma once

#include "floweng/mode_algebra.hpp"

#include <cstdint>
#include <functional>

// Continuous flow that rotates the driving-frequency harmonics out of a
// multi-mode Fourier operator. The generator
//
//   eta(s,t) = -(i/w_1) sum_m f_m h_s^m e^{i m_0.w_0 t} (e^{i m_1 w_1 t} - 1)
//
// leaves the stroboscopic times t = 2 pi k / w_1 untouched and, for a scalar
// choice f with f_{-m} = -f_m, f_{m_0} = 0 and (m.w) f_m > 0 whenever
// m_1 != 0, attenuates every driving harmonic along the flow. What remains in
// the m_1 = 0 sector is the effective Hamiltonian.

namespace floweng {

// Scalar family f_m defining the generator. Must satisfy
//   f_{-m} = -f_m,   f_m = 0 when m_1 = 0,   (m.w) f_m > 0 when m_1 != 0.
using FlowScalars = std::function<double(const ModeIndex&, const FrequencyBasis&)>;

// sign(m.w) for m_1 != 0, zero otherwise. The simplest admissible choice:
// attenuation rate |m.w| / w_1 for every driving harmonic.
double default_flow_f(const ModeIndex& m, const FrequencyBasis& basis);

// Throws std::invalid_argument if f violates one of the three constraints on
// any of the given modes.
void validate_flow_scalars(const FlowScalars& f, const FrequencyBasis& basis,
                           const std::vector<ModeIndex>& modes);

// The generator as a Fourier series: mode m (m_1 != 0) carries
// -(i/w_1) f_m h^m and mode m_0 picks up +(i/w_1) f_m h^m from the constant
// part of the phase factor.
FourierOperator assemble_generator(const FourierOperator& h, const FlowScalars& f);

// d h_s / ds for the flow generated by eta. Mode-resolved form:
//
//   d h^{m_0}/ds = (m_0.w / w_1) sum_{m_1 != 0} f_m h^m
//                + sum_{n_1 != 0} (f_n / w_1) [h^n, h^{m_0 - n} - h^{m_0 - n_0}]
//
//   d h^m/ds    = -(m.w / w_1) f_m h^m
//                + (1/w_1) sum_{n_1 not in {0, m_1}} f_{m-n} [h^{m-n}, h^n]
//                + (1/w_1) sum_{n_1 != 0} f_n [h^{m-n_0}, h^n]
//                + (1/w_1) sum_{n_0} f_{m-n_0} [h^{m-n_0}, h^{n_0}]
//
// equal to i [eta, h] - d eta / dt collected mode by mode.
FourierOperator rhs_flow(const FourierOperator& h, const FlowScalars& f);

struct FlowOptions {
    double rtol = 1e-9;            // relative step error tolerance
    double atol_scale = 1e-12;     // absolute tolerance = atol_scale * initial norm
    double stop_tol_rel = 1e-10;   // stop when offdrive norm < stop_tol_rel * initial norm
    double s_max = 50.0;
    std::size_t max_steps = 500000;
    bool check_hermitian_each_step = false;  // debug-mode invariant check
    std::size_t max_universe = 200000;       // guard on the truncation-box size
};

struct FlowResult {
    FourierOperator effective;     // m_1 = 0 sector of the final operator
    FourierOperator final_series;  // full final operator (for diagnostics)
    double residual_offdrive_norm = 0.0;
    double s_final = 0.0;
    long step_count = 0;
    long rejected_steps = 0;
    // First-order estimate of truncation mass shed along the flow:
    // sum over accepted steps of (rhs discard) * (step size), plus the
    // initial operator's own tally.
    double discarded_norm = 0.0;
};

class FlowDivergence : public std::runtime_error {
public:
    FlowDivergence(const std::string& what, double s_reached, double residual)
        : std::runtime_error(what), s_reached(s_reached), residual(residual) {}
    double s_reached;
    double residual;
};

// Integrates the flow with an embedded Dormand-Prince 5(4) pair on the
// stacked mode matrices until the driving harmonics have decayed below the
// stop tolerance. Throws FlowDivergence when s_max or max_steps is hit first
// (near-resonant frequency ratios make some attenuation rates m.w/w_1
// arbitrarily small) and std::invalid_argument on a bad generator.
FlowResult integrate_flow(const FourierOperator& h0, const FlowScalars& f,
                          const FlowOptions& options = {});

}  // namespace floweng
