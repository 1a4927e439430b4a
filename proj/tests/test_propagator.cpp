#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "floweng/hfe.hpp"
#include "floweng/models.hpp"
#include "floweng/propagator.hpp"

#include <cmath>
#include <numbers>

using namespace floweng;

namespace {

const Complex kI{0.0, 1.0};

CMatrix pauli_x() {
    CMatrix m(2, 2);
    m << 0, 1, 1, 0;
    return m;
}
CMatrix pauli_z() {
    CMatrix m(2, 2);
    m << 1, 0, 0, -1;
    return m;
}

}  // namespace

TEST_CASE("commuting drive reproduces the exact integral propagator") {
    // H(t) = cos(w t) sx commutes with itself at all times, so
    // U(T) = exp(-i sx sin(w T) / w)
    const double w = 3.0, T = 2.1;
    auto ham = [&](double t) { return CMatrix(std::cos(w * t) * pauli_x()); };
    PropagationOptions opts;
    opts.tolerance = 1e-12;
    auto report = propagate(ham, 0.0, T, opts);
    const double phase = std::sin(w * T) / w;
    CMatrix exact = std::cos(phase) * CMatrix::Identity(2, 2) - kI * std::sin(phase) * pauli_x();
    CHECK((report.unitary - exact).norm() == doctest::Approx(0.0).epsilon(1e-10));
    CHECK(report.unitarity_defect < 1e-12);
    CHECK(report.steps >= 2);
}

TEST_CASE("substep refinement converges at fourth order") {
    // force single-rung ladders and compare their defects: the two-point
    // commutator-free scheme must gain ~16x per step halving
    auto ham = [](double t) {
        return CMatrix(pauli_z() + std::cos(5.0 * t) * pauli_x() +
                       0.4 * std::sin(2.0 * t) * pauli_z());
    };
    PropagationOptions coarse;
    coarse.tolerance = 1e300;  // accept the first comparison
    coarse.initial_steps = 8;
    coarse.max_steps = 16;
    PropagationOptions fine = coarse;
    fine.initial_steps = 16;
    fine.max_steps = 32;
    const double d1 = propagate(ham, 0.0, 1.7, coarse).step_defect;
    const double d2 = propagate(ham, 0.0, 1.7, fine).step_defect;
    CHECK(d1 / d2 > 11.0);
    CHECK(d1 / d2 < 22.0);
}

TEST_CASE("zero-length interval yields the identity") {
    auto ham = [](double) { return CMatrix(pauli_z()); };
    auto report = propagate(ham, 0.4, 0.4);
    CHECK((report.unitary - CMatrix::Identity(2, 2)).norm() == doctest::Approx(0.0));
}

TEST_CASE("series overload agrees with the functional overload") {
    FrequencyBasis w({6.0, 2.2});
    FourierOperator::TermMap terms;
    terms[ModeIndex({0, 0})] = pauli_z();
    terms[ModeIndex({1, 0})] = 0.4 * pauli_x();
    terms[ModeIndex({-1, 0})] = 0.4 * pauli_x();
    terms[ModeIndex({0, 1})] = 0.2 * pauli_z();
    terms[ModeIndex({0, -1})] = 0.2 * pauli_z();
    auto h = FourierOperator::from_terms(2, w, terms);
    PropagationOptions opts;
    opts.tolerance = 1e-11;
    auto a = propagate(h, 0.0, 1.3, opts);
    auto b = propagate([&](double t) { return h.evaluate_at(t); }, 0.0, 1.3, opts);
    CHECK((a.unitary - b.unitary).norm() == doctest::Approx(0.0).epsilon(1e-10));
}

TEST_CASE("hermitian phase exponential matches a scaling series") {
    CMatrix m = 0.7 * pauli_x() + 0.2 * pauli_z();
    const double h = 0.31;
    CMatrix u = hermitian_phase_exp(m, h);
    // exp(-i h m) for a 2x2 hermitian with m^2 = r^2 I: cos(rh) I - i sin(rh) m / r
    const double r = std::sqrt(0.7 * 0.7 + 0.2 * 0.2);
    CMatrix exact =
        std::cos(r * h) * CMatrix::Identity(2, 2) - kI * (std::sin(r * h) / r) * m;
    CHECK((u - exact).norm() == doctest::Approx(0.0).epsilon(1e-13));
    CHECK((u.adjoint() * u - CMatrix::Identity(2, 2)).norm() == doctest::Approx(0.0));
}

TEST_CASE("gate overlap and infidelity behave at the anchors") {
    CMatrix id = CMatrix::Identity(2, 2);
    CHECK(gate_overlap(id, id) == doctest::Approx(1.0));
    CHECK(gate_infidelity(id, id) == doctest::Approx(0.0));
    // a global phase is forgiven by the modulus form, not by the real part
    CMatrix phased = std::polar(1.0, 0.7) * id;
    CHECK(gate_infidelity(id, phased) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(gate_overlap(id, phased) == doctest::Approx(std::cos(0.7)));
    CHECK(gate_overlap(id, CMatrix(pauli_x())) == doctest::Approx(0.0));
}

TEST_CASE("sweep rows fall with frequency and flag resonances") {
    auto model = build_spin_chain(2);
    FrequencyBasis w({40.0, 1.0});
    std::vector<DriveSpec> drives;
    for (std::size_t k = 0; k < model.operator_table.size(); ++k)
        drives.push_back(random_drive(0.02, 1, 1, 300 + k, w));

    SweepOptions opts;
    std::vector<double> grid = {0.31, 1.0, 0.47};
    auto rows = infidelity_sweep(model, drives, grid, opts);
    REQUIRE(rows.size() == 3);
    CHECK(rows[0].eta == doctest::Approx(0.31));
    CHECK(rows[0].gamma == doctest::Approx(0.02));
    CHECK(rows[0].flags.empty());
    CHECK(rows[0].infidelity >= 0.0);
    CHECK(rows[0].infidelity < 1e-4);

    // eta = 1 is exactly resonant: flagged, NaN infidelity, no crash
    CHECK_FALSE(rows[1].flags.empty());
    CHECK(std::isnan(rows[1].infidelity));

    CHECK(rows[2].flags.empty());
}

TEST_CASE("order 1 improves the sweep over order 0") {
    auto model = build_spin_chain(2);
    FrequencyBasis w({20.0, 1.0});
    std::vector<DriveSpec> drives;
    for (std::size_t k = 0; k < model.operator_table.size(); ++k)
        drives.push_back(random_drive(0.02, 1, 1, 600 + k, w));
    std::vector<double> grid = {0.37};
    SweepOptions o0;
    o0.order = 0;
    SweepOptions o1;
    o1.order = 1;
    const double f0 = infidelity_sweep(model, drives, grid, o0)[0].infidelity;
    const double f1 = infidelity_sweep(model, drives, grid, o1)[0].infidelity;
    CHECK(f1 < f0);
}

TEST_CASE("heating trace starts at the ground state energy and stays flat") {
    auto model = build_spin_chain(2);
    FrequencyBasis w({30.0, 30.0 * 0.353});
    std::vector<DriveSpec> drives;
    for (std::size_t k = 0; k < model.operator_table.size(); ++k)
        drives.push_back(random_drive(0.02, 2, 1, 900 + k, w));

    HeatingOptions opts;
    opts.periods = 5;
    auto rows = heating_trace(model, drives, opts);
    REQUIRE(rows.size() == 6);
    CHECK(rows[0].k == 0);
    CHECK(rows[0].t == doctest::Approx(0.0));
    CHECK(rows[0].energy_driven == doctest::Approx(rows[0].energy_effective));

    // row 0 measures H(0) in the bare ground state
    CMatrix bare = bare_hamiltonian(model, drives);
    Eigen::SelfAdjointEigenSolver<CMatrix> es(bare);
    Eigen::VectorXcd gs = es.eigenvectors().col(0);
    const CMatrix h0 = assemble_fourier_hamiltonian(model, drives).evaluate_at(0.0);
    const double e0 = (gs.adjoint() * h0 * gs)(0, 0).real();
    CHECK(rows[0].energy_driven == doctest::Approx(e0).epsilon(1e-10));

    const double period = 2.0 * std::numbers::pi / w.drive_frequency();
    CHECK(rows[3].t == doctest::Approx(3.0 * period));

    // driven and effective energies track each other on the bare-energy scale
    double mean_abs = 0.0;
    for (const auto& row : rows) mean_abs += std::abs(row.energy_driven);
    mean_abs /= rows.size();
    for (const auto& row : rows)
        CHECK(std::abs(row.energy_driven - row.energy_effective) < 0.05 * mean_abs);
}
