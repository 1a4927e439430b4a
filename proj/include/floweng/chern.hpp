#pragma once

#include "floweng/mode_algebra.hpp"

#include <array>
#include <stdexcept>
#include <vector>

// Shaken honeycomb lattice with exponentially decaying tunneling rate
// J(t) = J0 e^{-gamma t}: renormalized tunneling coefficients, effective
// lattice parameters, the fine-tune condition restoring isotropic
// nearest-neighbor tunneling, Chern numbers from the two gap functions, and
// quench trajectories through the phase diagram.

namespace floweng {

struct Vec2 {
    double x = 0.0;
    double y = 0.0;
};

struct LatticeGeometry {
    std::array<Vec2, 3> nn;   // nearest-neighbor vectors a_k (lattice units)
    std::array<Vec2, 3> nnn;  // next-nearest b_k = a_{k+1} - a_{k+2}, cyclic

    // a_1 = (1, 0), a_2 = (-1/2, sqrt3/2), a_3 = (-1/2, -sqrt3/2)
    static LatticeGeometry honeycomb();
};

// Tri-chromatic shaking at harmonics of the driving frequency: tone a
// (a = 1, 2, 3) oscillates at a * omega1 with amplitude q[a-1] and phases
// delta_x[a-1] (x component) and delta_y[a-1] (y component).
struct ShakingProfile {
    double omega1 = 1.0;
    std::array<double, 3> q{};
    std::array<double, 3> delta_x{};
    std::array<double, 3> delta_y{};
};

// q_lat(t) = sum_a q_a [ sin(a w1 t - delta_a) e_x + sin(a w1 t - delta'_a) e_y ]
Vec2 shaking_quasimomentum(const ShakingProfile& profile, double t);

// Fourier components l_k^(m) of exp[i q_lat(t) . a_k] over one drive period.
struct TunnelingTable {
    int n_max = 0;
    std::array<std::vector<Complex>, 3> l;  // index m + n_max

    Complex get(int k, int m) const {
        if (m < -n_max || m > n_max) return {0.0, 0.0};
        return l[std::size_t(k)][std::size_t(m + n_max)];
    }
    // | sum_m |l_k^(m)|^2 - 1 |, zero for an exactly unit-modulus integrand
    double parseval_defect(int k) const;
};

// Trapezoid quadrature with the sample count doubled until successive
// refinements agree to 1e-12 on every coefficient.
TunnelingTable tunneling_coefficients(const ShakingProfile& profile,
                                      const LatticeGeometry& geometry, int n_max);

// Scalar coefficient families entering the effective lattice parameters.
// C and C-tilde are real by the pairing v(n,m) = -conj(v(-n,-m)).
struct CoefficientSet {
    double c_delta = 0.0;
    double c_delta_tilde = 0.0;
    std::array<Complex, 3> d{};
    std::array<Complex, 3> d_tilde{};
    std::array<Complex, 3> e{};
    std::array<Complex, 3> e_tilde{};
    int n_cut = 0;
};

// Sums truncated at |n|, |m| <= n_cut. The table must extend to 2 n_cut
// (entries beyond its range read as zero) with Parseval tail below 1e-12.
CoefficientSet coefficient_set(const TunnelingTable& table, double delta, double omega1,
                               int n_cut);

// Quadrature plus n_cut doubling until every coefficient moves < 1e-10.
CoefficientSet stable_coefficient_set(const ShakingProfile& profile,
                                      const LatticeGeometry& geometry, double delta,
                                      int n_cut_start = 12);

struct EffectiveParams {
    double delta_tilde = 0.0;           // sublattice splitting, +/- on A/B
    std::array<Complex, 3> j_tilde{};   // nearest-neighbor rates
    std::array<Complex, 3> g_tilde{};   // next-nearest rates on sublattice A
};

// J(t) = j0 e^{-gamma t}, Jdot = -gamma J:
//   delta_tilde = delta - (J^2 C + Jdot J C~) / w1
//   j_tilde_k   = J D_k - Jdot D~_k / w1
//   g_tilde_k   = -(J^2 E_k + Jdot J E~_k) / w1
EffectiveParams effective_params(const CoefficientSet& coeffs, double j0, double gamma_quench,
                                 double delta, double omega1, double t);

// Time-independent reduction: tau1 = C - gamma C~, tau~_k = |E_k - gamma E~_k|,
// alpha_k = Arg(E_k - gamma E~_k), kappa_pm = tau1 + 2 sum_k tau~_k cos(alpha_k +- 2pi/3).
struct KappaSet {
    double tau1 = 0.0;
    std::array<double, 3> tau_tilde{};
    std::array<double, 3> alpha{};
    double kappa_plus = 0.0;
    double kappa_minus = 0.0;
};

KappaSet kappa_parameters(const CoefficientSet& coeffs, double gamma_quench);

struct GapPair {
    double h_plus = 0.0;
    double h_minus = 0.0;
};

// h_pm = delta_tilde + 2 sum_k |g~_k| cos(arg g~_k +- 2pi/3)
GapPair gaps_from_effective(const EffectiveParams& params);
// h_pm = delta - J^2 kappa_pm / w1 at J = j0 e^{-gamma t}
GapPair gaps_from_kappa(const KappaSet& kappa, double j, double delta, double omega1);

class PhaseBoundaryError : public std::runtime_error {
public:
    PhaseBoundaryError(const std::string& what, double gap)
        : std::runtime_error(what), gap(gap) {}
    double gap;
};

// C = (sgn(h+) - sgn(h-)) / 2 in {-1, 0, +1}; throws PhaseBoundaryError when
// either gap magnitude falls below gap_tol.
int chern_number(const GapPair& gaps, double gap_tol);

struct FineTuneOptions {
    double delta = 0.0;             // onsite splitting entering D_k
    int n_cut = 12;
    int max_iterations = 100;
    double residual_target = 1e-12;
    double required_residual = 1e-10;
    double fd_step = 1e-7;          // finite-difference Jacobian step
};

struct FineTuneResult {
    ShakingProfile profile;
    double residual = 0.0;   // |D_2+g D~_2 - D_1-g D~_1| + |D_3+g D~_3 - D_1-g D~_1|
    int iterations = 0;
    bool converged = false;
};

// Damped Newton on (q_2, q_3, delta_2, delta_3), holding tone 1 and the
// delta' phases at their seed values, until D_k + (gamma/w1) D~_k agree for
// all k. Throws std::runtime_error if the residual stays above
// required_residual after max_iterations.
FineTuneResult solve_fine_tune(double gamma_over_omega1, const ShakingProfile& seed,
                               const FineTuneOptions& opts = {});

struct TrajectoryRow {
    double t = 0.0;
    double x = 0.0;  // J^2 kappa_+ / (w1 delta)
    double y = 0.0;  // J^2 kappa_- / (w1 delta)
    int chern = 0;
};

struct QuenchSettings {
    double j0 = 1.0;
    double gamma_quench = 0.1;
    double delta = 1.0;
    double gap_tol_rel = 1e-8;  // gap tolerance = gap_tol_rel * |delta|
    int n_cut = 12;
};

std::vector<TrajectoryRow> quench_trajectory(const ShakingProfile& profile,
                                             const QuenchSettings& settings,
                                             const std::vector<double>& t_grid);

}  // namespace floweng
