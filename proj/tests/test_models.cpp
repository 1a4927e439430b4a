#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "floweng/models.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <complex>
#include <sstream>
#include <vector>

using namespace floweng;

namespace {

const Complex kI{0.0, 1.0};

std::vector<double> sorted_eigenvalues(const CMatrix& m) {
    Eigen::SelfAdjointEigenSolver<CMatrix> es(m);
    std::vector<double> out(es.eigenvalues().data(),
                            es.eigenvalues().data() + es.eigenvalues().size());
    std::sort(out.begin(), out.end());
    return out;
}

// dense translation operator for a spin chain: permutes basis states by a
// cyclic shift, no signs involved
CMatrix spin_translation(int sites) {
    const int dim = 1 << sites;
    CMatrix t = CMatrix::Zero(dim, dim);
    const unsigned mask = (1u << sites) - 1u;
    for (unsigned s = 0; s < static_cast<unsigned>(dim); ++s) {
        const unsigned rotated = ((s << 1) | (s >> (sites - 1))) & mask;
        t(rotated, s) = 1.0;
    }
    return t;
}

// orthonormal basis of the +1 eigenspace of a unitary, via eigendecomposition
CMatrix unit_eigenspace(const CMatrix& u, double tol = 1e-9) {
    Eigen::ComplexEigenSolver<CMatrix> es(u);
    std::vector<int> cols;
    for (int c = 0; c < u.rows(); ++c)
        if (std::abs(es.eigenvalues()(c) - Complex(1.0, 0.0)) < tol) cols.push_back(c);
    CMatrix raw(u.rows(), cols.size());
    for (std::size_t j = 0; j < cols.size(); ++j) raw.col(j) = es.eigenvectors().col(cols[j]);
    // orthonormalize (eigenvectors of a unitary in a degenerate cluster may
    // come back non-orthogonal from the generic solver)
    Eigen::HouseholderQR<CMatrix> qr(raw);
    CMatrix q = qr.householderQ() * CMatrix::Identity(raw.rows(), raw.cols());
    return q;
}

bool spectra_match(const std::vector<double>& a, const std::vector<double>& b, double tol) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i)
        if (std::abs(a[i] - b[i]) > tol) return false;
    return true;
}

}  // namespace

TEST_CASE("two-site spin chain in the zero-momentum sector") {
    auto model = build_spin_chain(2);
    REQUIRE(model.dim == 3);
    REQUIRE(model.operator_table.size() == 3);

    // periodic bonds i -> i+1 visit each pair twice at L = 2
    auto zz = sorted_eigenvalues(model.operator_table[1]);
    CHECK(spectra_match(zz, {-2.0, 2.0, 2.0}, 1e-12));
    auto yy = sorted_eigenvalues(model.operator_table[2]);
    CHECK(spectra_match(yy, {-2.0, 2.0, 2.0}, 1e-12));
    auto xx = sorted_eigenvalues(model.operator_table[0]);
    CHECK(spectra_match(xx, {-2.0, 0.0, 2.0}, 1e-12));

    for (const auto& op : model.operator_table)
        CHECK((op - op.adjoint().eval()).norm() == doctest::Approx(0.0));
}

TEST_CASE("momentum sector dimensions follow the necklace count") {
    CHECK(build_spin_chain(2).dim == 3);
    CHECK(build_spin_chain(3).dim == 4);
    CHECK(build_spin_chain(4).dim == 6);
    CHECK(build_spin_chain(8).dim == 36);
    CHECK(build_spin_chain(4, false).dim == 16);
}

TEST_CASE("projected spin operators match the dense zero-momentum block") {
    for (int sites : {3, 4, 5}) {
        auto full = build_spin_chain(sites, false);
        auto projected = build_spin_chain(sites, true);
        CMatrix q = unit_eigenspace(spin_translation(sites));
        REQUIRE(q.cols() == projected.dim);
        for (std::size_t k = 0; k < full.operator_table.size(); ++k) {
            CMatrix block = q.adjoint() * full.operator_table[k] * q;
            CHECK(spectra_match(sorted_eigenvalues(block),
                                sorted_eigenvalues(projected.operator_table[k]), 1e-9));
        }
        // and a joint combination, to catch operators that match only one at
        // a time (spectra are basis independent, sums are not)
        CMatrix dense_sum = CMatrix::Zero(full.dim, full.dim);
        CMatrix proj_sum = CMatrix::Zero(projected.dim, projected.dim);
        for (std::size_t k = 0; k < full.operator_table.size(); ++k) {
            dense_sum += (1.0 + double(k)) * full.operator_table[k];
            proj_sum += (1.0 + double(k)) * projected.operator_table[k];
        }
        CHECK(spectra_match(sorted_eigenvalues(q.adjoint() * dense_sum * q),
                            sorted_eigenvalues(proj_sum), 1e-9));
    }
}

TEST_CASE("two-site Hubbard operators in the full (1,1) sector") {
    auto model = build_fermi_hubbard(2, 1, 1, false);
    REQUIRE(model.dim == 4);
    REQUIRE(model.operator_table.size() == 2);

    // periodic two-site hopping doubles the bond; the kinetic operator
    // -sum (c^dag c + h.c.) then has single-species eigenvalues -+2
    auto kin = sorted_eigenvalues(model.operator_table[0]);
    CHECK(spectra_match(kin, {-4.0, 0.0, 0.0, 4.0}, 1e-12));

    // interaction counts doubly occupied sites: two states with 1, two with 0
    auto inter = sorted_eigenvalues(model.operator_table[1]);
    CHECK(spectra_match(inter, {0.0, 0.0, 1.0, 1.0}, 1e-12));
    CHECK(model.operator_table[1].diagonal().real().sum() == doctest::Approx(2.0));
    CHECK(model.operator_table[1].cwiseAbs().sum() ==
          doctest::Approx(model.operator_table[1].diagonal().cwiseAbs().sum()));
}

TEST_CASE("projected Hubbard spectra embed in the dense sector") {
    // every eigenvalue of the zero-momentum block must appear in the full
    // spectrum; a wrong fermionic sign breaks this containment
    for (auto [sites, nu, nd] : {std::tuple{3, 1, 1}, std::tuple{4, 2, 1}, std::tuple{4, 2, 2}}) {
        auto full = build_fermi_hubbard(sites, nu, nd, false);
        auto projected = build_fermi_hubbard(sites, nu, nd, true);
        REQUIRE(projected.dim > 0);
        CHECK(projected.dim < full.dim);
        CMatrix dense_sum = full.operator_table[0] + 0.37 * full.operator_table[1];
        CMatrix proj_sum = projected.operator_table[0] + 0.37 * projected.operator_table[1];
        auto dense_eigs = sorted_eigenvalues(dense_sum);
        for (double ev : sorted_eigenvalues(proj_sum)) {
            double best = 1e300;
            for (double dv : dense_eigs) best = std::min(best, std::abs(dv - ev));
            CHECK(best < 1e-9);
        }
        for (const auto& op : projected.operator_table)
            CHECK((op - op.adjoint().eval()).norm() == doctest::Approx(0.0).epsilon(1e-12));
    }
}

TEST_CASE("random drives are deterministic, real, and bounded") {
    FrequencyBasis w({20.0, 7.0});
    auto d1 = random_drive(0.02, 3, 2, 123, w);
    auto d2 = random_drive(0.02, 3, 2, 123, w);
    auto d3 = random_drive(0.02, 3, 2, 124, w);
    CHECK(d1.coeffs == d2.coeffs);
    CHECK(d1.coeffs != d3.coeffs);

    // full conjugate-symmetric table over the (2 m1 + 1)(2 m2 + 1) grid,
    // minus nothing: every mode is present
    CHECK(d1.coeffs.size() == std::size_t(7 * 5));
    for (const auto& [pq, a] : d1.coeffs) {
        auto it = d1.coeffs.find({-pq.first, -pq.second});
        REQUIRE(it != d1.coeffs.end());
        CHECK(std::abs(std::conj(a) - it->second) == doctest::Approx(0.0));
        CHECK(std::abs(a.real()) <= 0.5);
        CHECK(std::abs(a.imag()) <= 0.5);
    }
    CHECK(d1.coeffs.at({0, 0}).imag() == 0.0);

    for (double t : {0.0, 0.4, 2.9}) {
        CHECK(std::abs(d1.value(t).imag()) < 1e-12);
        CHECK(d1.real_value(t) == doctest::Approx(d1.value(t).real()));
    }

    // mode_coefficient carries the documented gamma * w_1 prefactor
    CHECK(std::abs(d1.mode_coefficient(1, -2) - 0.02 * 20.0 * d1.coeffs.at({1, -2})) < 1e-15);
    CHECK(std::abs(d1.mode_coefficient(9, 9)) == 0.0);
}

TEST_CASE("drive records round trip") {
    FrequencyBasis w({20.0, 7.0});
    auto d = random_drive(0.05, 2, 1, 999, w);
    std::stringstream buffer;
    d.write_record(buffer);
    auto back = DriveSpec::read_record(buffer);
    CHECK(back.gamma_strength == d.gamma_strength);
    CHECK(back.m1_max == d.m1_max);
    CHECK(back.m2_max == d.m2_max);
    CHECK(back.basis == d.basis);
    CHECK(back.coeffs == d.coeffs);
}

TEST_CASE("drive rebasing and rescaling") {
    FrequencyBasis w({20.0, 7.0});
    auto d = random_drive(0.05, 2, 1, 7, w);
    FrequencyBasis w2({20.0, 9.0});
    auto moved = d.with_basis(w2);
    CHECK(moved.coeffs == d.coeffs);
    CHECK(moved.basis == w2);
    auto louder = d.with_gamma(0.1);
    CHECK(louder.coeffs == d.coeffs);
    CHECK(louder.mode_coefficient(1, 0) == 2.0 * d.mode_coefficient(1, 0));
}

TEST_CASE("assembled series evaluates to the sum of drives times operators") {
    auto model = build_spin_chain(3);
    FrequencyBasis w({20.0, 20.0 * 0.41});
    std::vector<DriveSpec> drives;
    for (std::size_t k = 0; k < model.operator_table.size(); ++k)
        drives.push_back(random_drive(0.02, 2, 1, 50 + k, w));

    auto h = assemble_fourier_hamiltonian(model, drives);
    CHECK(h.dim() == model.dim);
    CHECK(h.is_hermitian_series(1e-12));

    for (double t : {0.0, 0.17, 1.3}) {
        CMatrix direct = CMatrix::Zero(model.dim, model.dim);
        for (std::size_t k = 0; k < drives.size(); ++k)
            direct += drives[k].real_value(t) * model.operator_table[k];
        CHECK((h.evaluate_at(t) - direct).norm() == doctest::Approx(0.0).epsilon(1e-11));
    }

    // the time average of the assembled series is the bare Hamiltonian
    CMatrix bare = bare_hamiltonian(model, drives);
    CHECK((bare - bare.adjoint().eval()).norm() == doctest::Approx(0.0));
    CMatrix static_term = CMatrix::Zero(model.dim, model.dim);
    for (std::size_t k = 0; k < drives.size(); ++k) {
        Complex avg{0.0, 0.0};
        for (int q = -drives[k].m2_max; q <= drives[k].m2_max; ++q)
            avg += drives[k].mode_coefficient(0, q);
        static_term += avg.real() * model.operator_table[k];
    }
    CHECK((bare - static_term).norm() == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("model construction rejects bad arguments") {
    CHECK_THROWS(build_spin_chain(1));
    CHECK_THROWS(build_fermi_hubbard(2, 3, 0));   // overfilled species
    CHECK_THROWS(build_fermi_hubbard(0, 0, 0));
    CHECK_THROWS(random_drive(-0.1, 1, 1, 0, FrequencyBasis({1.0, 0.5})));
}

TEST_CASE("peak normalization makes gamma*w1 the actual drive amplitude") {
    FrequencyBasis w({20.0, 20.0 * 0.37});
    DriveSpec d = random_drive(0.06, 3, 1, 421, w);
    DriveSpec raw = d;
    const double z = normalize_drive_peak(d);
    CHECK(z > 0.0);

    // rescaling is uniform across the table
    for (const auto& [pq, a] : raw.coeffs)
        CHECK(std::abs(d.coeffs.at(pq) * z - a) < 1e-14);

    // the normalized drive value stays below gamma*w1 and gets close to it
    // somewhere; a fine incommensurate time grid samples the phase torus
    const double bound = d.gamma_strength * w.drive_frequency();
    double seen = 0.0;
    for (int i = 0; i < 20000; ++i) {
        const double t = 0.0037 * i;
        seen = std::max(seen, std::abs(d.real_value(t)));
        CHECK(std::abs(d.value(t)) <= bound * (1.0 + 1e-6));
    }
    CHECK(seen > 0.95 * bound);

    DriveSpec zero = raw;
    for (auto& [pq, a] : zero.coeffs) a = 0.0;
    CHECK_THROWS_AS(normalize_drive_peak(zero), std::invalid_argument);
}
