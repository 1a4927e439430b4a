#pragma once

#include "floweng/mode_algebra.hpp"

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

// Finite lattice models used to exercise the expansion at many-body scale,
// together with random two-tone drive tables. All operators are built inside
// the zero-quasi-momentum sector (simultaneous cyclic translation of the
// chain), or optionally in the full fixed-filling space.

namespace floweng {

// d(t) = gamma_strength * w_1 * sum_{p,q} A_{pq} e^{i (p w_1 + q w_2) t}
// with A_{-p,-q} = conj(A_{pq}) so d is real.
struct DriveSpec {
    FrequencyBasis basis;
    double gamma_strength = 0.0;
    int m1_max = 0;
    int m2_max = 0;
    std::map<std::pair<int, int>, Complex> coeffs;  // full table including conjugate half

    Complex value(double t) const;
    double real_value(double t) const;
    // coefficient of the mode (p, q) including the gamma * w_1 prefactor
    Complex mode_coefficient(int p, int q) const;

    DriveSpec with_basis(const FrequencyBasis& b) const;
    DriveSpec with_gamma(double gamma) const;

    void write_record(std::ostream& out) const;
    static DriveSpec read_record(std::istream& in);
};

// Independent uniform draws on [-0.5, 0.5] for real and imaginary parts over
// the (p,q) half-space p > 0 or (p == 0, q > 0); A_00 is drawn real. The
// mapping from the mt19937_64 stream to doubles is fixed here, so a seed
// pins the drive bit-for-bit on every platform.
DriveSpec random_drive(double gamma_strength, int m1_max, int m2_max, std::uint64_t seed,
                       const FrequencyBasis& basis);

// Rescale the coefficient table so that sup_t |sum A_pq e^{i(p w1 + q w2)t}|
// is 1, making gamma_strength * w_1 the actual peak drive amplitude. The sup
// is taken over the two-tone phase torus on a fixed 384-point grid per axis,
// which keeps the convention deterministic and independent of the frequency
// ratio. Returns the factor divided out. Throws on an all-zero table.
double normalize_drive_peak(DriveSpec& drive);

struct ModelInstance {
    enum class Kind { SpinChain, FermiHubbard };
    Kind kind;
    int sites = 0;
    int n_up = 0;    // Fermi-Hubbard only
    int n_down = 0;  // Fermi-Hubbard only
    bool momentum_projected = true;
    int dim = 0;
    std::vector<CMatrix> operator_table;
    std::vector<std::string> operator_names;
};

// Periodic chain of L spins with the three coupling sums
//   sum_i sx_i,  sum_i sz_i sz_{i+1},  sum_i sy_i sy_{i+1}
// (bond sums run over i = 0..L-1 with i+1 mod L, so on L = 2 each bond is
// counted twice). With momentum projection the basis is the set of
// translation orbits at quasi-momentum zero.
ModelInstance build_spin_chain(int sites, bool momentum_project = true);

// Fermi-Hubbard chain at fixed filling. operator_table[0] is the kinetic
// term including its minus sign, -sum_{i,s} (c^+_{i+1,s} c_{i,s} + h.c.),
// operator_table[1] the interaction sum_i n_up,i n_down,i. Jordan-Wigner
// ordering is the up chain (sites 0..L-1) followed by the down chain; both
// Hamiltonian terms are bilinear within one species, so the cross-species
// strings cancel and each species carries its own fermionic signs, including
// the boundary hop parity. Translation signs are per species:
// moving an occupied last site to the front costs (-1)^(N_s - 1).
ModelInstance build_fermi_hubbard(int sites, int n_up, int n_down, bool momentum_project = true);

// H(t) = sum_k d_k(t) O_k as a Fourier series: mode (p,q) carries
// sum_k gamma_k w_1 A^k_{pq} O_k. All drives must share one frequency basis.
FourierOperator assemble_fourier_hamiltonian(const ModelInstance& model,
                                             std::span<const DriveSpec> drives);

// The static reference Hamiltonian sum_k gamma_k w_1 (sum_q A^k_{0q}) O_k:
// the drive-period average with the slow tones frozen (eta -> 0). Its ground
// state seeds the heating diagnostics.
CMatrix bare_hamiltonian(const ModelInstance& model, std::span<const DriveSpec> drives);

}  // namespace floweng
