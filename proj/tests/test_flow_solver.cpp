#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "floweng/flow.hpp"
#include "floweng/hfe.hpp"
#include "floweng/mode_algebra.hpp"

#include <cmath>
#include <numbers>
#include <random>

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

// random hermitian two-tone series with drive harmonics up to m1 and slow
// harmonics up to m2, coefficient scale `scale`
FourierOperator random_hermitian_series(int dim, const FrequencyBasis& basis, int m1_max,
                                        int m2_max, double scale, std::uint64_t seed) {
    std::mt19937_64 eng(seed);
    std::uniform_real_distribution<> u(-1.0, 1.0);
    auto draw = [&]() {
        CMatrix m(dim, dim);
        for (int r = 0; r < dim; ++r)
            for (int c = 0; c < dim; ++c) m(r, c) = Complex(u(eng), u(eng));
        return m;
    };
    FourierOperator::TermMap terms;
    for (int a = 0; a <= m1_max; ++a)
        for (int b = -m2_max; b <= m2_max; ++b) {
            if (a == 0 && b < 0) continue;
            CMatrix g = scale * draw();
            if (a == 0 && b == 0) {
                terms[ModeIndex({0, 0})] = 0.5 * (g + g.adjoint().eval());
            } else {
                terms[ModeIndex({a, b})] = g;
                terms[ModeIndex({-a, -b})] = g.adjoint();
            }
        }
    return FourierOperator::from_terms(dim, basis, terms);
}

}  // namespace

namespace {

std::vector<ModeIndex> probe_modes(int width) {
    std::vector<ModeIndex> out;
    for (int a = -width; a <= width; ++a)
        for (int b = -width; b <= width; ++b) out.push_back(ModeIndex({a, b}));
    return out;
}

}  // namespace

TEST_CASE("default scalars have the required symmetries") {
    FrequencyBasis w({5.0, 2.0});
    CHECK(default_flow_f(ModeIndex({1, 0}), w) == 1.0);
    CHECK(default_flow_f(ModeIndex({-1, 0}), w) == -1.0);
    CHECK(default_flow_f(ModeIndex({1, -2}), w) == 1.0);   // 5 - 4 > 0
    CHECK(default_flow_f(ModeIndex({-1, 2}), w) == -1.0);
    CHECK(default_flow_f(ModeIndex({1, -3}), w) == -1.0);  // 5 - 6 < 0
    CHECK(default_flow_f(ModeIndex({0, 3}), w) == 0.0);    // static sector
    CHECK_NOTHROW(validate_flow_scalars(default_flow_f, w, probe_modes(3)));
}

TEST_CASE("invalid scalar choices are rejected") {
    FrequencyBasis w({5.0, 2.0});
    auto constant = [](const ModeIndex&, const FrequencyBasis&) { return 1.0; };
    CHECK_THROWS(validate_flow_scalars(constant, w, probe_modes(2)));  // not antisymmetric
    auto static_leak = [](const ModeIndex& m, const FrequencyBasis& b) {
        return m.is_zero() ? 0.0 : (b.dot(m) >= 0 ? 1.0 : -1.0);
    };
    CHECK_THROWS(validate_flow_scalars(static_leak, w, probe_modes(2)));  // nonzero at (0, q)
    auto wrong_sign = [](const ModeIndex& m, const FrequencyBasis& b) {
        return m.drive() == 0 ? 0.0 : -(b.dot(m) >= 0 ? 1.0 : -1.0);
    };
    CHECK_THROWS(validate_flow_scalars(wrong_sign, w, probe_modes(2)));  // (m.w) f < 0
}

TEST_CASE("generator vanishes at stroboscopic times") {
    FrequencyBasis w({7.0, 7.0 * 0.43});
    auto h = random_hermitian_series(3, w, 2, 2, 0.3, 11);
    auto g = assemble_generator(h, default_flow_f);
    const double period = 2.0 * std::numbers::pi / w.drive_frequency();
    for (int k : {0, 1, 2, 5}) {
        CHECK(g.evaluate_at(k * period).norm() == doctest::Approx(0.0).epsilon(1e-10));
    }
    // and does not vanish in between
    CHECK(g.evaluate_at(0.37 * period).norm() > 1e-3);
}

TEST_CASE("generator inherits hermiticity from the series") {
    // the flow reads dH/ds = i [eta, H] - d eta / dt, so the consistent
    // generator series is hermitian (antisymmetry of f cancels the i)
    FrequencyBasis w({7.0, 7.0 * 0.43});
    auto h = random_hermitian_series(3, w, 2, 1, 0.3, 13);
    auto g = assemble_generator(h, default_flow_f);
    CHECK(g.is_hermitian_series(1e-13));
    CHECK((adjoint_series(g) - g).total_norm() == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("mode-resolved right-hand side equals the operator expression") {
    // the paired-commutator bookkeeping must reproduce i [eta, H] - d eta / dt
    FrequencyBasis w({7.0, 7.0 * 0.61});
    for (std::uint64_t seed : {1ull, 2ull, 3ull}) {
        auto h0 = random_hermitian_series(3, w, 2, 2, 0.4, seed);
        // widen the box so nothing is discarded on either path
        auto h = h0.with_caps({8, 8});
        auto rhs = rhs_flow(h, default_flow_f);
        auto g = assemble_generator(h, default_flow_f);
        auto oracle = kI * commutator(g, h) - time_derivative(g);
        CHECK((rhs - oracle).total_norm() == doctest::Approx(0.0).epsilon(1e-12));
    }
}

TEST_CASE("scalar model follows the closed-form fixed point") {
    // dim 1 kills every commutator: attenuation and static forcing are exact.
    //   a(s) = a0 exp(-|1 - eta| s) on modes (+-1, -+1)
    //   b(infinity) = -eta a0 / (1 - eta) on modes (0, -+1)
    const double eta = 0.4;
    FrequencyBasis w({10.0, 10.0 * eta});
    FourierOperator::TermMap terms;
    terms[ModeIndex({0, 0})] = CMatrix::Constant(1, 1, 0.7);
    terms[ModeIndex({1, -1})] = CMatrix::Constant(1, 1, 0.3);
    terms[ModeIndex({-1, 1})] = CMatrix::Constant(1, 1, 0.3);
    auto h = FourierOperator::from_terms(1, w, terms);

    FlowOptions opts;
    opts.s_max = 200.0;
    auto result = integrate_flow(h, default_flow_f, opts);

    const double expected_static = -eta * 0.3 / (1.0 - eta);  // -0.2
    CHECK(result.effective.term(ModeIndex({0, 0}))(0, 0).real() == doctest::Approx(0.7));
    CHECK(result.effective.term(ModeIndex({0, -1}))(0, 0).real() ==
          doctest::Approx(expected_static).epsilon(1e-8));
    CHECK(result.effective.term(ModeIndex({0, 1}))(0, 0).real() ==
          doctest::Approx(expected_static).epsilon(1e-8));
    CHECK(result.residual_offdrive_norm < 1e-9);

    // scalar flow has no commutators, so order 0 is already exact here
    auto closed = effective_order0(h);
    CHECK((result.effective - closed).total_norm() == doctest::Approx(0.0).epsilon(1e-8));
}

TEST_CASE("pure drive pair decays at unit rate") {
    FrequencyBasis w({10.0, 4.0});
    FourierOperator::TermMap terms;
    terms[ModeIndex({1, 0})] = pauli_x();
    terms[ModeIndex({-1, 0})] = pauli_x();
    terms[ModeIndex({0, 0})] = 0.2 * pauli_x();  // commutes: stays inert
    auto h = FourierOperator::from_terms(2, w, terms);
    FlowOptions opts;
    opts.s_max = 30.0;
    auto result = integrate_flow(h, default_flow_f, opts);
    CHECK((result.effective.term(ModeIndex({0, 0})) - 0.2 * pauli_x()).norm() ==
          doctest::Approx(0.0).epsilon(1e-9));
    CHECK(result.residual_offdrive_norm < 1e-9);
    CHECK(result.s_final <= opts.s_max);
}

TEST_CASE("flow preserves hermiticity and total structure") {
    const double eta = 0.37;
    FrequencyBasis w({20.0, 20.0 * eta});
    auto h = random_hermitian_series(4, w, 1, 1, 0.02 * 20.0, 99);
    FlowOptions opts;
    opts.s_max = 200.0;  // commutators populate (1, -2), which decays at |1 - 2 eta|
    auto result = integrate_flow(h, default_flow_f, opts);
    CHECK(result.effective.is_hermitian_series(1e-8));
    CHECK(result.final_series.is_hermitian_series(1e-8));
    CHECK(result.effective.offdrive_norm() == doctest::Approx(0.0));
    CHECK(result.step_count > 0);
}

TEST_CASE("residual decreases monotonically toward the budget") {
    const double eta = 0.37;
    FrequencyBasis w({20.0, 20.0 * eta});
    auto h = random_hermitian_series(3, w, 1, 1, 0.4, 7);
    FlowOptions tight;
    tight.s_max = 3.0;
    tight.stop_tol_rel = 1e-300;  // force the budget to be the limiter
    double res3 = 0.0;
    try {
        integrate_flow(h, default_flow_f, tight);
        FAIL("expected divergence report");
    } catch (const FlowDivergence& err) {
        res3 = err.residual;
        CHECK(err.s_reached == doctest::Approx(3.0));
    }
    FlowOptions longer = tight;
    longer.s_max = 6.0;
    try {
        integrate_flow(h, default_flow_f, longer);
        FAIL("expected divergence report");
    } catch (const FlowDivergence& err) {
        CHECK(err.residual < res3);
        CHECK(err.residual > 0.0);
    }
}

TEST_CASE("near-degenerate ratios stall and raise a divergence error") {
    // eta = 1 makes m.w vanish at (1,-1): f = 0 there, the mode never decays
    FrequencyBasis w({10.0, 10.0});
    FourierOperator::TermMap terms;
    terms[ModeIndex({1, -1})] = CMatrix::Constant(1, 1, 0.5);
    terms[ModeIndex({-1, 1})] = CMatrix::Constant(1, 1, 0.5);
    auto h = FourierOperator::from_terms(1, w, terms);
    FlowOptions opts;
    opts.s_max = 5.0;
    CHECK_THROWS_AS(integrate_flow(h, default_flow_f, opts), FlowDivergence);
}

TEST_CASE("discarded norm is carried through the flow") {
    FrequencyBasis w({10.0, 3.0});
    // caps {1,1} so the (1,0) x (1,1) commutator at (2,1) falls out of the box
    FourierOperator::TermMap terms;
    terms[ModeIndex({1, 0})] = 0.8 * pauli_x();
    terms[ModeIndex({-1, 0})] = 0.8 * pauli_x();
    terms[ModeIndex({1, 1})] = 0.5 * pauli_z();
    terms[ModeIndex({-1, -1})] = 0.5 * pauli_z();
    auto h = FourierOperator::from_terms(2, w, terms, {1, 1});
    FlowOptions opts;
    opts.s_max = 80.0;
    auto result = integrate_flow(h, default_flow_f, opts);
    CHECK(result.discarded_norm > 0.0);
    CHECK(result.effective.discarded_norm() == doctest::Approx(result.discarded_norm));
}
