#include "floweng/lambda_system.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <numbers>
#include <sstream>
#include <stdexcept>

namespace floweng {

namespace {

constexpr Complex kI{0.0, 1.0};

void check_layout(const LambdaDrive& d) {
    const std::size_t n = 2 * std::size_t(d.harmonics) + 1;
    if (d.harmonics < 0 || d.omega.size() != n || d.gamma.size() != n)
        throw std::invalid_argument("LambdaDrive: coefficient vectors must hold 2P+1 entries");
    if (!(d.omega1 > 0.0) || !(d.omega2 > 0.0))
        throw std::invalid_argument("LambdaDrive: frequencies must be positive");
}

void guard_denominator(double value, double guard, const char* what, int p, int q) {
    if (std::abs(value) < guard) {
        std::ostringstream info;
        info << what << " at (p=" << p << ", q=" << q << ")";
        throw ResonanceError("lambda closed form: resonant denominator", info.str(), value);
    }
}

Complex harmonic_sum(const std::vector<Complex>& coeffs, int max_index, double omega2, double t) {
    Complex acc{0.0, 0.0};
    for (int p = -max_index; p <= max_index; ++p)
        acc += coeffs[std::size_t(p + max_index)] * std::exp(kI * (p * omega2 * t));
    return acc;
}

}  // namespace

Complex LambdaDrive::omega_at(int p) const {
    if (std::abs(p) > harmonics) return {0.0, 0.0};
    return omega[std::size_t(p + harmonics)];
}

Complex LambdaDrive::gamma_at(int p) const {
    if (std::abs(p) > harmonics) return {0.0, 0.0};
    return gamma[std::size_t(p + harmonics)];
}

FourierOperator build_lambda_operator(const LambdaDrive& drive) {
    check_layout(drive);
    const int P = drive.harmonics;
    const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
    CMatrix s = CMatrix::Zero(3, 3);  // |3><+|
    s(2, 0) = inv_sqrt2;
    s(2, 1) = inv_sqrt2;
    const CMatrix sdag = s.adjoint();

    std::map<ModeIndex, CMatrix> terms;
    auto add = [&](int m1, int p, const CMatrix& mat) {
        ModeIndex m({m1, p});
        auto it = terms.try_emplace(m, CMatrix::Zero(3, 3)).first;
        it->second += mat;
    };
    for (int p = -P; p <= P; ++p) {
        const Complex om = drive.omega_at(p);
        const Complex ga = drive.gamma_at(p);
        if (om != Complex{0.0, 0.0}) {
            add(1, p, om * s);
            add(-1, -p, std::conj(om) * sdag);
        }
        if (ga != Complex{0.0, 0.0}) {
            add(0, p, ga * s);
            add(0, -p, std::conj(ga) * sdag);
        }
    }
    FrequencyBasis basis({drive.omega1, drive.omega2});
    return FourierOperator::from_terms(3, basis, std::move(terms), std::vector<int>{2, 4 * P});
}

std::vector<Complex> lambda_order0(const LambdaDrive& drive, const HfeOptions& opts) {
    check_layout(drive);
    const int P = drive.harmonics;
    const double eta = drive.eta();
    std::vector<Complex> out(2 * std::size_t(P) + 1);
    for (int p = -P; p <= P; ++p) {
        const double den = 1.0 + p * eta;
        guard_denominator(den, opts.resonance_guard, "1 + p eta", p, 0);
        out[std::size_t(p + P)] = (p * eta / den) * drive.omega_at(p) + drive.gamma_at(p);
    }
    return out;
}

std::vector<Complex> cancel_order0(const std::vector<Complex>& omega, int harmonics, double eta,
                                   const HfeOptions& opts) {
    if (omega.size() != 2 * std::size_t(harmonics) + 1)
        throw std::invalid_argument("cancel_order0: coefficient vector must hold 2P+1 entries");
    std::vector<Complex> gamma(omega.size());
    for (int p = -harmonics; p <= harmonics; ++p) {
        const double den = 1.0 + p * eta;
        guard_denominator(den, opts.resonance_guard, "1 + p eta", p, 0);
        gamma[std::size_t(p + harmonics)] = -(p * eta / den) * omega[std::size_t(p + harmonics)];
    }
    return gamma;
}

std::vector<Complex> effective_rabi_coefficients(const std::vector<Complex>& omega, int harmonics,
                                                 double eta, double omega1,
                                                 const HfeOptions& opts) {
    if (omega.size() != 2 * std::size_t(harmonics) + 1)
        throw std::invalid_argument(
            "effective_rabi_coefficients: coefficient vector must hold 2P+1 entries");
    const int P = harmonics;
    std::vector<Complex> coeffs(4 * std::size_t(P) + 1, Complex{0.0, 0.0});
    for (int q = -2 * P; q <= 2 * P; ++q) {
        const double den_q = 1.0 - double(q) * q * eta * eta;
        for (int p = -P; p <= P; ++p) {
            const int r = p - q;
            if (std::abs(r) > P) continue;
            const Complex prod = omega[std::size_t(p + P)] * std::conj(omega[std::size_t(r + P)]);
            if (prod == Complex{0.0, 0.0}) continue;
            guard_denominator(den_q, opts.resonance_guard, "1 - q^2 eta^2", p, q);
            const double den_p = 1.0 + p * eta;
            guard_denominator(den_p, opts.resonance_guard, "1 + p eta", p, q);
            const double den_r = 1.0 + r * eta;
            guard_denominator(den_r, opts.resonance_guard, "1 + (p-q) eta", p, q);
            const double k_pq = (1.0 + (2.0 * p - q) * eta) / (den_q * den_p * den_r);
            coeffs[std::size_t(q + 2 * P)] += k_pq * prod / omega1;
        }
    }
    return coeffs;
}

double evaluate_harmonic_sum(const std::vector<Complex>& coeffs, double omega2, double t) {
    if (coeffs.size() % 2 == 0)
        throw std::invalid_argument("evaluate_harmonic_sum: even-sized coefficient table");
    const int max_index = (static_cast<int>(coeffs.size()) - 1) / 2;
    const Complex value = harmonic_sum(coeffs, max_index, omega2, t);
    const double scale = std::abs(value) + 1e-300;
    if (std::abs(value.imag()) > 1e-10 * scale + 1e-12)
        throw std::runtime_error("evaluate_harmonic_sum: sum is not real");
    return value.real();
}

double effective_rabi(const LambdaDrive& drive, double t, const HfeOptions& opts) {
    check_layout(drive);
    const auto coeffs =
        effective_rabi_coefficients(drive.omega, drive.harmonics, drive.eta(), drive.omega1, opts);
    return evaluate_harmonic_sum(coeffs, drive.omega2, t);
}

double quasistatic_rabi(const LambdaDrive& drive, double t) {
    check_layout(drive);
    const Complex om = harmonic_sum(drive.omega, drive.harmonics, drive.omega2, t);
    return std::norm(om) / drive.omega1;
}

double mirror_symmetry_defect(const LambdaDrive& drive) {
    check_layout(drive);
    const double t_mid = std::numbers::pi / drive.omega2;
    double asym = 0.0;
    double total = 0.0;
    for (int p = -drive.harmonics; p <= drive.harmonics; ++p) {
        const Complex chi = drive.omega_at(p) * std::exp(kI * (p * drive.omega2 * t_mid));
        asym += 4.0 * chi.imag() * chi.imag();  // |chi - conj(chi)|^2
        total += std::norm(chi);
    }
    if (total == 0.0) return 0.0;
    return std::sqrt(asym / total);
}

namespace {

struct FitGrid {
    std::vector<double> times;
    std::vector<double> target;
};

// Omega_e(t) and its Wirtinger derivatives wrt Omega_k and conj(Omega_k).
struct RabiModel {
    int P;
    double eta;
    double omega1;
    double omega2;
    double guard;

    double k_factor(int p, int q) const {
        const double den_q = 1.0 - double(q) * q * eta * eta;
        const double den_p = 1.0 + p * eta;
        const double den_r = 1.0 + (p - q) * eta;
        guard_denominator(den_q, guard, "1 - q^2 eta^2", p, q);
        guard_denominator(den_p, guard, "1 + p eta", p, q);
        guard_denominator(den_r, guard, "1 + (p-q) eta", p, q);
        return (1.0 + (2.0 * p - q) * eta) / (den_q * den_p * den_r);
    }

    double value(const std::vector<Complex>& om, double t) const {
        Complex acc{0.0, 0.0};
        for (int p = -P; p <= P; ++p)
            for (int q = p - P; q <= p + P; ++q) {
                const int r = p - q;
                const Complex prod = om[std::size_t(p + P)] * std::conj(om[std::size_t(r + P)]);
                if (prod == Complex{0.0, 0.0}) continue;
                acc += k_factor(p, q) * prod * std::exp(kI * (q * omega2 * t));
            }
        return acc.real() / omega1;
    }

    // d Omega_e / d Omega_k and d Omega_e / d conj(Omega_k) at fixed t
    void derivatives(const std::vector<Complex>& om, double t, int k, Complex& d_om,
                     Complex& d_conj) const {
        d_om = {0.0, 0.0};
        d_conj = {0.0, 0.0};
        for (int q = k - P; q <= k + P; ++q) {
            const int r = k - q;
            d_om += k_factor(k, q) * std::conj(om[std::size_t(r + P)]) *
                    std::exp(kI * (q * omega2 * t));
        }
        for (int p = -P; p <= P; ++p) {
            const int q = p - k;
            if (std::abs(q) > 2 * P) continue;
            d_conj += k_factor(p, q) * om[std::size_t(p + P)] * std::exp(kI * (q * omega2 * t));
        }
        d_om /= omega1;
        d_conj /= omega1;
    }
};

void gauge_fix(std::vector<Complex>& om, int P) {
    const Complex c0 = om[std::size_t(P)];
    if (std::abs(c0) < 1e-300) return;
    const Complex phase = c0 / std::abs(c0);
    for (auto& c : om) c /= phase;
    om[std::size_t(P)] = Complex(std::abs(c0), 0.0);
}

}  // namespace

DesignResult design_drive(const std::function<double(double)>& target, const DesignOptions& opts) {
    if (opts.harmonics < 0) throw std::invalid_argument("design_drive: negative harmonic cap");
    if (opts.samples < 4 * opts.harmonics + 2)
        throw std::invalid_argument("design_drive: grid must oversample the unknowns");
    const int P = opts.harmonics;
    const int N = opts.samples;
    const double omega2 = opts.eta * opts.omega1;
    const double period = 2.0 * std::numbers::pi / omega2;

    FitGrid grid;
    grid.times.resize(N);
    grid.target.resize(N);
    for (int i = 0; i < N; ++i) {
        grid.times[i] = period * i / N;
        grid.target[i] = target(grid.times[i]);
    }

    // quasi-static initial iterate: Omega(t) = sqrt(w1 * target(t)), projected
    // onto the 2P+1 lowest harmonics by the discrete Fourier sum
    std::vector<Complex> om(2 * std::size_t(P) + 1, Complex{0.0, 0.0});
    for (int p = -P; p <= P; ++p) {
        Complex acc{0.0, 0.0};
        for (int i = 0; i < N; ++i) {
            const double v = std::max(grid.target[i], 0.0);
            acc += std::sqrt(opts.omega1 * v) *
                   std::exp(-kI * (p * omega2 * grid.times[i]));
        }
        om[std::size_t(p + P)] = acc / double(N);
    }
    gauge_fix(om, P);

    const RabiModel model{P, opts.eta, opts.omega1, omega2, opts.hfe.resonance_guard};
    const int n_par = 2 * (2 * P + 1);

    auto cost_of = [&](const std::vector<Complex>& c) {
        double s = 0.0;
        for (int i = 0; i < N; ++i) {
            const double r = model.value(c, grid.times[i]) - grid.target[i];
            s += r * r;
        }
        return s;
    };

    double cost = cost_of(om);
    double damping = 1e-3;
    int iterations = 0;
    bool converged = false;

    Eigen::MatrixXd jac(N, n_par);
    Eigen::VectorXd res(N);
    for (int iter = 0; iter < opts.max_iterations; ++iter) {
        ++iterations;
        for (int i = 0; i < N; ++i) {
            res(i) = model.value(om, grid.times[i]) - grid.target[i];
            for (int k = -P; k <= P; ++k) {
                Complex d_om, d_conj;
                model.derivatives(om, grid.times[i], k, d_om, d_conj);
                // real-parameter derivatives of the (real) model value
                jac(i, 2 * (k + P)) = (d_om + d_conj).real();
                jac(i, 2 * (k + P) + 1) = (kI * (d_om - d_conj)).real();
            }
        }
        const Eigen::MatrixXd jtj = jac.transpose() * jac;
        const Eigen::VectorXd jtr = jac.transpose() * res;

        bool accepted = false;
        for (int attempt = 0; attempt < 25; ++attempt) {
            Eigen::MatrixXd lhs = jtj;
            for (int d = 0; d < n_par; ++d)
                lhs(d, d) += damping * (jtj(d, d) + 1e-12);
            const Eigen::VectorXd step = lhs.ldlt().solve(-jtr);
            std::vector<Complex> trial = om;
            for (int k = -P; k <= P; ++k)
                trial[std::size_t(k + P)] +=
                    Complex(step(2 * (k + P)), step(2 * (k + P) + 1));
            gauge_fix(trial, P);
            const double trial_cost = cost_of(trial);
            if (trial_cost < cost) {
                const double rel_drop = (cost - trial_cost) / (cost + 1e-300);
                om = std::move(trial);
                cost = trial_cost;
                damping = std::max(damping / 3.0, 1e-14);
                accepted = true;
                if (rel_drop < opts.cost_tolerance) converged = true;
                break;
            }
            damping *= 4.0;
        }
        if (!accepted) converged = true;  // no damping level improves: at a minimum
        if (converged) break;
    }

    DesignResult result;
    result.drive.omega1 = opts.omega1;
    result.drive.omega2 = omega2;
    result.drive.harmonics = P;
    result.drive.omega = om;
    result.drive.gamma = cancel_order0(om, P, opts.eta, opts.hfe);
    result.times = grid.times;
    result.target = grid.target;
    result.achieved.resize(N);
    result.quasistatic.resize(N);
    double peak = 0.0;
    double dev = 0.0;
    for (int i = 0; i < N; ++i) {
        result.achieved[i] = model.value(om, grid.times[i]);
        result.quasistatic[i] = quasistatic_rabi(result.drive, grid.times[i]);
        peak = std::max(peak, std::abs(grid.target[i]));
        dev = std::max(dev, std::abs(result.achieved[i] - grid.target[i]));
    }
    result.max_deviation = (peak > 0.0) ? dev / peak : dev;
    result.symmetry_defect = mirror_symmetry_defect(result.drive);
    result.cost = cost;
    result.iterations = iterations;
    result.converged = converged;
    return result;
}

}  // namespace floweng
