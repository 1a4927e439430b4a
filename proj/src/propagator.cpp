#include "floweng/propagator.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace floweng {

namespace {

constexpr Complex kI{0.0, 1.0};

// Gauss-Legendre nodes on [0,1] and the fourth-order commutator-free weights.
const double kSqrt3 = std::sqrt(3.0);
const double kNode1 = 0.5 - kSqrt3 / 6.0;
const double kNode2 = 0.5 + kSqrt3 / 6.0;
const double kWeight1 = 0.25 + kSqrt3 / 6.0;
const double kWeight2 = 0.25 - kSqrt3 / 6.0;

CMatrix compose_steps(const std::function<CMatrix(double)>& hamiltonian, double t0, double t1,
                      int n) {
    const double h = (t1 - t0) / n;
    CMatrix u;
    for (int k = 0; k < n; ++k) {
        const double t = t0 + k * h;
        const CMatrix h1 = hamiltonian(t + kNode1 * h);
        const CMatrix h2 = hamiltonian(t + kNode2 * h);
        const CMatrix first = kWeight1 * h1 + kWeight2 * h2;
        const CMatrix second = kWeight2 * h1 + kWeight1 * h2;
        CMatrix step = hermitian_phase_exp(second, h) * hermitian_phase_exp(first, h);
        if (k == 0)
            u = std::move(step);
        else
            u = step * u;
    }
    return u;
}

}  // namespace

CMatrix hermitian_phase_exp(const CMatrix& m, double h) {
    Eigen::SelfAdjointEigenSolver<CMatrix> es(m);
    if (es.info() != Eigen::Success)
        throw std::runtime_error("hermitian_phase_exp: eigensolver failed");
    const auto& v = es.eigenvectors();
    Eigen::VectorXcd phases(m.rows());
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        phases(i) = std::exp(-kI * (h * es.eigenvalues()(i)));
    return v * phases.asDiagonal() * v.adjoint();
}

PropagationReport propagate(const std::function<CMatrix(double)>& hamiltonian, double t0,
                            double t1, const PropagationOptions& opts) {
    if (!(opts.tolerance > 0.0)) throw std::invalid_argument("propagate: tolerance must be positive");
    if (opts.initial_steps < 1) throw std::invalid_argument("propagate: initial_steps must be >= 1");

    const Eigen::Index dim = hamiltonian(t0).rows();
    PropagationReport report;
    if (t0 == t1) {
        report.unitary = CMatrix::Identity(dim, dim);
        return report;
    }

    CMatrix prev = compose_steps(hamiltonian, t0, t1, opts.initial_steps);
    for (int n = 2 * opts.initial_steps; n <= opts.max_steps; n *= 2) {
        CMatrix cur = compose_steps(hamiltonian, t0, t1, n);
        const double defect = (cur - prev).norm();
        if (defect < opts.tolerance) {
            report.unitary = std::move(cur);
            report.step_defect = defect;
            report.steps = n;
            report.unitarity_defect =
                (report.unitary.adjoint() * report.unitary - CMatrix::Identity(dim, dim)).norm();
            return report;
        }
        prev = std::move(cur);
    }
    throw std::runtime_error("propagate: substep refinement did not reach tolerance");
}

PropagationReport propagate(const FourierOperator& hamiltonian, double t0, double t1,
                            const PropagationOptions& opts) {
    return propagate([&hamiltonian](double t) { return hamiltonian.evaluate_at(t); }, t0, t1,
                     opts);
}

double gate_overlap(const CMatrix& a, const CMatrix& b) {
    return (a.adjoint() * b).trace().real() / static_cast<double>(a.rows());
}

double gate_infidelity(const CMatrix& a, const CMatrix& b) {
    return 1.0 - std::abs((a.adjoint() * b).trace()) / static_cast<double>(a.rows());
}

std::vector<SweepRow> infidelity_sweep(const ModelInstance& model,
                                       std::span<const DriveSpec> drives,
                                       std::span<const double> eta_grid,
                                       const SweepOptions& opts) {
    if (drives.empty()) throw std::invalid_argument("infidelity_sweep: no drives");
    const double w1 = drives[0].basis.drive_frequency();
    const double period = 2.0 * std::numbers::pi / w1;

    std::vector<SweepRow> rows;
    rows.reserve(eta_grid.size());
    for (double eta : eta_grid) {
        SweepRow row;
        row.eta = eta;
        row.gamma = drives[0].gamma_strength;
        FrequencyBasis basis({w1, eta * w1});
        std::vector<DriveSpec> scaled;
        scaled.reserve(drives.size());
        for (const auto& d : drives) scaled.push_back(d.with_basis(basis));

        const FourierOperator h_fourier = assemble_fourier_hamiltonian(model, scaled);
        try {
            const FourierOperator h_eff =
                effective_hamiltonian(h_fourier, opts.order, opts.hfe);
            const CMatrix u_driven = propagate(h_fourier, 0.0, period, opts.propagation).unitary;
            const CMatrix u_eff = propagate(h_eff, 0.0, period, opts.propagation).unitary;
            row.infidelity = 1.0 - gate_overlap(u_driven, u_eff);
            row.discarded_norm = h_eff.discarded_norm();
        } catch (const ResonanceError& err) {
            row.infidelity = std::numeric_limits<double>::quiet_NaN();
            row.discarded_norm = std::numeric_limits<double>::quiet_NaN();
            row.flags = "resonant:" + err.mode_info;
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

std::vector<HeatingRow> heating_trace(const ModelInstance& model,
                                      std::span<const DriveSpec> drives,
                                      const HeatingOptions& opts) {
    if (drives.empty()) throw std::invalid_argument("heating_trace: no drives");
    const double w1 = drives[0].basis.drive_frequency();
    const double period = 2.0 * std::numbers::pi / w1;

    const FourierOperator h_fourier = assemble_fourier_hamiltonian(model, drives);
    const FourierOperator h_eff = effective_hamiltonian(h_fourier, opts.order, opts.hfe);
    const CMatrix h_bare = bare_hamiltonian(model, drives);

    Eigen::SelfAdjointEigenSolver<CMatrix> es(h_bare);
    if (es.info() != Eigen::Success)
        throw std::runtime_error("heating_trace: reference diagonalization failed");
    Eigen::VectorXcd psi = es.eigenvectors().col(0);
    Eigen::VectorXcd phi = psi;

    // both traces measure the instantaneous driven Hamiltonian
    auto energy = [&h_fourier](const Eigen::VectorXcd& v, double t) {
        const CMatrix h = h_fourier.evaluate_at(t);
        return (v.adjoint() * h * v)(0, 0).real();
    };

    std::vector<HeatingRow> rows;
    rows.push_back({0, 0.0, energy(psi, 0.0), energy(phi, 0.0)});
    for (int k = 1; k <= opts.periods; ++k) {
        const double ta = (k - 1) * period;
        const double tb = k * period;
        psi = propagate(h_fourier, ta, tb, opts.propagation).unitary * psi;
        phi = propagate(h_eff, ta, tb, opts.propagation).unitary * phi;
        rows.push_back({k, tb, energy(psi, tb), energy(phi, tb)});
    }
    return rows;
}

}  // namespace floweng
