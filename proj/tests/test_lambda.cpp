#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "floweng/hfe.hpp"
#include "floweng/lambda_system.hpp"

#include <cmath>
#include <numbers>

using namespace floweng;

namespace {

const Complex kI{0.0, 1.0};

// |+> = (|1> + |2|)/sqrt(2), basis order |1>, |2>, |3>
Eigen::Vector3cd bright_state() {
    Eigen::Vector3cd v;
    v << 1.0 / std::sqrt(2.0), 1.0 / std::sqrt(2.0), 0.0;
    return v;
}
Eigen::Vector3cd third_state() {
    Eigen::Vector3cd v;
    v << 0.0, 0.0, 1.0;
    return v;
}

LambdaDrive make_drive(int P, double eta, std::vector<Complex> omega,
                       std::vector<Complex> gamma = {}) {
    LambdaDrive d;
    d.omega1 = 1.0;
    d.omega2 = eta;
    d.harmonics = P;
    d.omega = std::move(omega);
    if (gamma.empty())
        d.gamma.assign(2 * std::size_t(P) + 1, Complex{0.0, 0.0});
    else
        d.gamma = std::move(gamma);
    return d;
}

}  // namespace

TEST_CASE("three-level operator evaluates to the two-drive form") {
    auto drive = make_drive(1, 0.2, {Complex(0.1, -0.3), Complex(0.5, 0.0), Complex(0.0, 0.2)},
                            {Complex(0.0, 0.1), Complex(-0.2, 0.0), Complex(0.05, 0.05)});
    auto h = build_lambda_operator(drive);
    CHECK(h.dim() == 3);
    CHECK(h.is_hermitian_series(1e-14));

    for (double t : {0.0, 0.9, 3.7}) {
        Complex om{0.0, 0.0}, ga{0.0, 0.0};
        for (int p = -1; p <= 1; ++p) {
            om += drive.omega_at(p) * std::exp(kI * (p * drive.omega2 * t));
            ga += drive.gamma_at(p) * std::exp(kI * (p * drive.omega2 * t));
        }
        const Complex coupling = ga + om * std::exp(kI * drive.omega1 * t);
        Eigen::Matrix3cd direct = Eigen::Matrix3cd::Zero();
        direct += coupling * (third_state() * bright_state().adjoint());
        direct += std::conj(coupling) * (bright_state() * third_state().adjoint());
        CHECK((h.evaluate_at(t) - CMatrix(direct)).norm() == doctest::Approx(0.0).epsilon(1e-13));
    }
}

TEST_CASE("order-0 closed form matches the generic machinery") {
    const int P = 3;
    const double eta = 1.0 / std::sqrt(7.0);
    std::vector<Complex> omega = {Complex(0.05, 0.1),  Complex(-0.2, 0.0), Complex(0.3, -0.1),
                                  Complex(0.4, 0.0),   Complex(0.1, 0.2),  Complex(0.0, -0.15),
                                  Complex(-0.05, 0.05)};
    std::vector<Complex> gamma = {Complex(0.02, -0.01), Complex(0.0, 0.0), Complex(-0.1, 0.04),
                                  Complex(0.15, 0.0),   Complex(0.03, 0.0), Complex(0.0, 0.08),
                                  Complex(0.06, -0.02)};
    auto drive = make_drive(P, eta, omega, gamma);

    auto closed = lambda_order0(drive);
    auto generic = effective_order0(build_lambda_operator(drive));
    for (int q = -P; q <= P; ++q) {
        CMatrix block = generic.term(ModeIndex({0, q}));
        const Complex c = (third_state().adjoint() * block * bright_state())(0, 0);
        CHECK(std::abs(c - closed[std::size_t(q + P)]) < 1e-12);
    }
}

TEST_CASE("order-0 closed form anchors") {
    // without the detuned drive only the slow one survives, untouched
    auto d0 = make_drive(1, 0.37, {Complex(0.0, 0.0), Complex(0.0, 0.0), Complex(0.0, 0.0)},
                         {Complex(0.0, 0.3), Complex(0.2, 0.0), Complex(-0.1, 0.0)});
    auto c0 = lambda_order0(d0);
    CHECK(std::abs(c0[0] - Complex(0.0, 0.3)) < 1e-15);
    CHECK(std::abs(c0[1] - Complex(0.2, 0.0)) < 1e-15);
    CHECK(std::abs(c0[2] - Complex(-0.1, 0.0)) < 1e-15);

    // p = 1, eta = 1/2: weight eta/(1+eta) = 1/3
    auto d1 = make_drive(1, 0.5, {Complex(0.0, 0.0), Complex(0.0, 0.0), Complex(1.0, 0.0)});
    auto c1 = lambda_order0(d1);
    CHECK(std::abs(c1[2] - Complex(1.0 / 3.0, 0.0)) < 1e-15);

    // the cancelling choice makes every order-0 coefficient vanish
    auto gamma = cancel_order0(d1.omega, 1, 0.5);
    CHECK(std::abs(gamma[2] - Complex(-1.0 / 3.0, 0.0)) < 1e-15);
    auto cancelled = make_drive(1, 0.5, d1.omega, gamma);
    for (const Complex& c : lambda_order0(cancelled)) CHECK(std::abs(c) < 1e-15);
}

TEST_CASE("first-order splitting matches the generic machinery") {
    const int P = 3;
    for (double eta : {1.0 / (5.0 * std::sqrt(3.0)), 1.0 / std::sqrt(7.0)}) {
        std::vector<Complex> omega = {Complex(0.02, 0.05), Complex(-0.1, 0.02),
                                      Complex(0.15, -0.04), Complex(0.3, 0.0),
                                      Complex(0.12, 0.08),  Complex(0.0, -0.06),
                                      Complex(-0.03, 0.01)};
        auto drive = make_drive(P, eta, omega, cancel_order0(omega, P, eta));

        auto h = build_lambda_operator(drive);
        auto correction = effective_order1(h);
        auto d = effective_rabi_coefficients(omega, P, eta, drive.omega1);

        // expected: Omega_e(t) (|3><3| - |+><+|), harmonic by harmonic
        Eigen::Matrix3cd pattern = third_state() * third_state().adjoint() -
                                   bright_state() * bright_state().adjoint();
        for (int q = -2 * P; q <= 2 * P; ++q) {
            CMatrix block = correction.term(ModeIndex({0, q}));
            CMatrix expected = d[std::size_t(q + 2 * P)] * CMatrix(pattern);
            CHECK((block - expected).norm() < 1e-10);
        }
        // nothing else appears in the static sector at this order
        auto statics = mode_projection(correction,
                                       [](const ModeIndex& m) { return m.drive() == 0; });
        CHECK((statics - correction).total_norm() == doctest::Approx(0.0));
    }
}

TEST_CASE("splitting harmonics form a real signal") {
    const int P = 2;
    const double eta = 0.21;
    std::vector<Complex> omega = {Complex(0.1, -0.2), Complex(0.3, 0.1), Complex(0.4, 0.0),
                                  Complex(0.05, 0.15), Complex(-0.12, 0.06)};
    auto d = effective_rabi_coefficients(omega, P, eta, 1.0);
    for (int q = 1; q <= 2 * P; ++q)
        CHECK(std::abs(d[std::size_t(q + 2 * P)] - std::conj(d[std::size_t(-q + 2 * P)])) <
              1e-14);
    auto drive = make_drive(P, eta, omega, cancel_order0(omega, P, eta));
    for (double t : {0.0, 1.3, 8.9}) {
        const double direct = evaluate_harmonic_sum(d, drive.omega2, t);
        CHECK(effective_rabi(drive, t) == doctest::Approx(direct).epsilon(1e-12));
    }
}

TEST_CASE("quasi-static limit is approached quadratically in eta") {
    // the deviation max|Omega_e - |Omega|^2| / max||Omega|^2| shrinks as
    // eta^2: halving eta four-folds the gap. The drive is kept fixed.
    const int P = 2;
    std::vector<Complex> omega = {Complex(0.05, 0.02), Complex(0.2, -0.1), Complex(0.4, 0.0),
                                  Complex(0.15, 0.1), Complex(-0.07, 0.03)};
    auto deviation = [&](double eta) {
        auto drive = make_drive(P, eta, omega, cancel_order0(omega, P, eta));
        const double period = 2.0 * std::numbers::pi / drive.omega2;
        double dev = 0.0, scale = 0.0;
        for (int i = 0; i < 64; ++i) {
            const double t = period * i / 64.0;
            dev = std::max(dev, std::abs(effective_rabi(drive, t) - quasistatic_rabi(drive, t)));
            scale = std::max(scale, std::abs(quasistatic_rabi(drive, t)));
        }
        return dev / scale;
    };
    const double d1 = deviation(1e-2);
    const double d2 = deviation(1e-3);
    const double exponent = std::log10(d1 / d2);
    CHECK(exponent > 1.8);
    CHECK(exponent < 2.2);
}

TEST_CASE("mirror symmetry defect separates symmetric from skewed drives") {
    const int P = 2;
    const double eta = 0.3;
    // real coefficients give chi_p = (-1)^p Omega_p at the half period: clean
    std::vector<Complex> sym = {Complex(0.1, 0.0), Complex(0.3, 0.0), Complex(0.5, 0.0),
                                Complex(0.3, 0.0), Complex(0.1, 0.0)};
    auto sym_drive = make_drive(P, eta, sym, cancel_order0(sym, P, eta));
    CHECK(mirror_symmetry_defect(sym_drive) < 1e-14);

    std::vector<Complex> skew = {Complex(0.1, 0.2), Complex(0.3, -0.25), Complex(0.5, 0.0),
                                 Complex(0.1, 0.3), Complex(-0.2, 0.1)};
    auto skew_drive = make_drive(P, eta, skew, cancel_order0(skew, P, eta));
    CHECK(mirror_symmetry_defect(skew_drive) > 0.1);
}

TEST_CASE("resonant ratios are rejected with context") {
    auto drive = make_drive(1, 1.0, {Complex(0.1, 0.0), Complex(0.2, 0.0), Complex(0.3, 0.0)});
    CHECK_THROWS_AS(lambda_order0(drive), ResonanceError);  // 1 + p eta = 0 at p = -1
    std::vector<Complex> omega = {Complex(0.1, 0.0), Complex(0.2, 0.0), Complex(0.3, 0.0)};
    CHECK_THROWS_AS(effective_rabi_coefficients(omega, 1, 0.5, 1.0), ResonanceError);
}

TEST_CASE("a constant target admits an exact single-component design") {
    DesignOptions opts;
    opts.harmonics = 2;
    opts.eta = 0.15;
    opts.samples = 64;
    auto result = design_drive([](double) { return 0.04; }, opts);
    CHECK(result.converged);
    CHECK(result.max_deviation < 1e-8);
    // the achieved curve really is the first-order prediction on the grid
    for (std::size_t i = 0; i < result.times.size(); ++i)
        CHECK(result.achieved[i] ==
              doctest::Approx(effective_rabi(result.drive, result.times[i])).epsilon(1e-10));
    // order-0 coefficients are cancelled by construction
    for (const Complex& c : lambda_order0(result.drive)) CHECK(std::abs(c) < 1e-12);
}

TEST_CASE("a smooth bump is reproduced to a few percent") {
    DesignOptions opts;
    opts.harmonics = 3;
    opts.eta = 1.0 / std::sqrt(7.0);
    opts.samples = 128;
    const double period = 2.0 * std::numbers::pi / (opts.eta * opts.omega1);
    auto target = [=](double t) {
        const double u = (t - 0.5 * period) / (0.125 * period);
        return 0.05 * std::exp(-0.5 * u * u);
    };
    auto result = design_drive(target, opts);
    CHECK(result.converged);
    CHECK(result.max_deviation < 0.05);
    CHECK(result.symmetry_defect < 0.5);
}
