#pragma once

#include "floweng/hfe.hpp"
#include "floweng/mode_algebra.hpp"
#include "floweng/models.hpp"

#include <functional>
#include <span>
#include <string>
#include <vector>

// Time evolution for explicitly time-dependent Hermitian Hamiltonians and the
// stroboscopic benchmarks built on top of it: gate infidelity of the static
// effective Hamiltonian against the driven evolution, and energy tracking
// over many drive periods.

namespace floweng {

struct PropagationOptions {
    double tolerance = 1e-8;   // Frobenius distance between consecutive refinements
    int initial_steps = 16;
    int max_steps = 1 << 22;
};

struct PropagationReport {
    CMatrix unitary;
    double step_defect = 0.0;      // ||U_n - U_{2n}|| at acceptance
    double unitarity_defect = 0.0; // ||U^+ U - 1||_F
    int steps = 0;                 // substep count of the accepted refinement
};

// Fourth-order commutator-free scheme: each substep multiplies two matrix
// exponentials of Gauss-node combinations of H. The substep count doubles
// until two refinements agree to the requested tolerance.
PropagationReport propagate(const std::function<CMatrix(double)>& hamiltonian, double t0,
                            double t1, const PropagationOptions& opts = {});

PropagationReport propagate(const FourierOperator& hamiltonian, double t0, double t1,
                            const PropagationOptions& opts = {});

// exp(-i h M) for Hermitian M via spectral decomposition
CMatrix hermitian_phase_exp(const CMatrix& m, double h);

// Re tr(A^+ B) / dim: 1 iff the two unitaries agree up to numerical noise
// and zero relative phase.
double gate_overlap(const CMatrix& a, const CMatrix& b);

// 1 - |tr(A^+ B)| / dim: phase-insensitive gate infidelity.
double gate_infidelity(const CMatrix& a, const CMatrix& b);

struct SweepRow {
    double eta = 0.0;
    double gamma = 0.0;
    double infidelity = 0.0;
    double discarded_norm = 0.0;
    std::string flags;  // empty when clean; "resonant:<mode>" when the expansion aborted
};

struct SweepOptions {
    int order = 1;  // effective-Hamiltonian order (0 or 1)
    PropagationOptions propagation{};
    HfeOptions hfe{};
};

// For each eta in the grid: rebuild the drives on the scaled basis
// (w_2 = eta w_1), compare driven evolution over one drive period against
// exp(-i T H_e), and record the infidelity. Resonant denominators flag the
// row instead of aborting the sweep.
std::vector<SweepRow> infidelity_sweep(const ModelInstance& model,
                                       std::span<const DriveSpec> drives,
                                       std::span<const double> eta_grid,
                                       const SweepOptions& opts = {});

struct HeatingRow {
    int k = 0;
    double t = 0.0;
    double energy_driven = 0.0;
    double energy_effective = 0.0;
};

struct HeatingOptions {
    int periods = 19;
    int order = 1;
    PropagationOptions propagation{};
    HfeOptions hfe{};
};

// Evolves the ground state of the static reference Hamiltonian under the
// driven dynamics and samples the instantaneous energy <H(t_k)> at
// stroboscopic times t_k = 2 pi k / w_1, alongside the same expectation
// propagated with the effective Hamiltonian.
std::vector<HeatingRow> heating_trace(const ModelInstance& model,
                                      std::span<const DriveSpec> drives,
                                      const HeatingOptions& opts = {});

}  // namespace floweng
