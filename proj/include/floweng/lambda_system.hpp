#pragma once

#include "floweng/hfe.hpp"
#include "floweng/mode_algebra.hpp"

#include <functional>
#include <vector>

// Three-level system with two ground states coupled to one excited state
// through a resonant drive Gamma(t) and a detuned drive Omega(t) e^{i w_1 t},
// both Fourier sums in a slow tone w_2 = eta w_1. Closed forms for the
// leading effective couplings, and inverse design of Omega(t) profiles that
// realize a target time-dependent effective splitting.

namespace floweng {

struct LambdaDrive {
    double omega1 = 1.0;
    double omega2 = 0.0;
    int harmonics = 0;            // P: components run over p in [-P, P]
    std::vector<Complex> omega;   // size 2P+1, index p + P
    std::vector<Complex> gamma;   // same layout

    double eta() const { return omega2 / omega1; }
    Complex omega_at(int p) const;
    Complex gamma_at(int p) const;
};

// Basis order |1>, |2>, |3>; the bright combination is (|1>+|2>)/sqrt(2).
// H(t) = [Gamma(t) + Omega(t) e^{i w_1 t}] |3><+| + h.c. as a two-frequency
// Fourier series.
FourierOperator build_lambda_operator(const LambdaDrive& drive);

// Order-0 effective coupling of e^{i p w_2 t} |3><+|:
//   (p eta / (1 + p eta)) Omega_p + Gamma_p.
std::vector<Complex> lambda_order0(const LambdaDrive& drive, const HfeOptions& opts = {});

// Gamma_p = -(p eta / (1 + p eta)) Omega_p, which zeroes lambda_order0.
std::vector<Complex> cancel_order0(const std::vector<Complex>& omega, int harmonics, double eta,
                                   const HfeOptions& opts = {});

// With the cancelling Gamma in place the first-order effective Hamiltonian is
// Omega_e(t) (|3><3| - |+><+|) with a real splitting
//   Omega_e(t) = (1/w_1) sum_{p,q} K_pq Omega_p conj(Omega_{p-q}) e^{i q w_2 t},
//   K_pq = (1 + (2p - q) eta) / ((1 - q^2 eta^2)(1 + p eta)(1 + (p-q) eta)).
// Returned as the coefficient table d_q for q in [-2P, 2P] (index q + 2P).
std::vector<Complex> effective_rabi_coefficients(const std::vector<Complex>& omega, int harmonics,
                                                 double eta, double omega1,
                                                 const HfeOptions& opts = {});

// Real part of sum_q d_q e^{i q w_2 t}; throws if the imaginary part is not
// negligible (the q <-> -q pairing makes the sum real by construction).
double evaluate_harmonic_sum(const std::vector<Complex>& coeffs, double omega2, double t);

double effective_rabi(const LambdaDrive& drive, double t, const HfeOptions& opts = {});

// eta -> 0 limit of the splitting: |Omega(t)|^2 / w_1.
double quasistatic_rabi(const LambdaDrive& drive, double t);

// Relative rms of Omega(t_mid + tau) - conj(Omega(t_mid - tau)) over a slow
// period, from the Fourier coefficients (Parseval), with t_mid = pi / w_2.
double mirror_symmetry_defect(const LambdaDrive& drive);

struct DesignOptions {
    int harmonics = 3;
    double eta = 0.1;
    double omega1 = 1.0;
    int samples = 256;
    int max_iterations = 400;
    double cost_tolerance = 1e-15;  // relative cost improvement below which we stop
    HfeOptions hfe{};
};

struct DesignResult {
    LambdaDrive drive;               // fitted Omega plus cancelling Gamma
    std::vector<double> times;
    std::vector<double> target;
    std::vector<double> achieved;    // Omega_e on the grid
    std::vector<double> quasistatic; // |Omega(t)|^2 / w_1 on the grid
    double max_deviation = 0.0;      // max |achieved - target| / max |target|
    double symmetry_defect = 0.0;
    double cost = 0.0;               // final sum of squared residuals
    int iterations = 0;
    bool converged = false;
};

// Damped Gauss-Newton least squares over Re/Im of Omega_p on a uniform grid
// covering one slow period; the global drive phase is gauged away by keeping
// Omega_0 real and nonnegative. Initial iterate: Fourier projection of the
// quasi-static inverse sqrt(w_1 target(t)).
DesignResult design_drive(const std::function<double(double)>& target,
                          const DesignOptions& opts = {});

}  // namespace floweng
