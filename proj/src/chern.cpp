#include "floweng/chern.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <numbers>
#include <sstream>

namespace floweng {

namespace {

constexpr Complex kI{0.0, 1.0};
const double kThird = 2.0 * std::numbers::pi / 3.0;

}  // namespace

LatticeGeometry LatticeGeometry::honeycomb() {
    const double s = std::sqrt(3.0) / 2.0;
    LatticeGeometry g;
    g.nn = {Vec2{1.0, 0.0}, Vec2{-0.5, s}, Vec2{-0.5, -s}};
    for (int k = 0; k < 3; ++k) {
        const Vec2& p = g.nn[std::size_t((k + 1) % 3)];
        const Vec2& q = g.nn[std::size_t((k + 2) % 3)];
        g.nnn[std::size_t(k)] = Vec2{p.x - q.x, p.y - q.y};
    }
    return g;
}

Vec2 shaking_quasimomentum(const ShakingProfile& profile, double t) {
    Vec2 out;
    for (int a = 1; a <= 3; ++a) {
        const double w = a * profile.omega1;
        const double amp = profile.q[std::size_t(a - 1)];
        out.x += amp * std::sin(w * t - profile.delta_x[std::size_t(a - 1)]);
        out.y += amp * std::sin(w * t - profile.delta_y[std::size_t(a - 1)]);
    }
    return out;
}

double TunnelingTable::parseval_defect(int k) const {
    double s = 0.0;
    for (const Complex& c : l[std::size_t(k)]) s += std::norm(c);
    return std::abs(s - 1.0);
}

TunnelingTable tunneling_coefficients(const ShakingProfile& profile,
                                      const LatticeGeometry& geometry, int n_max) {
    if (n_max < 0) throw std::invalid_argument("tunneling_coefficients: negative n_max");
    const double period = 2.0 * std::numbers::pi / profile.omega1;

    auto compute = [&](int samples) {
        TunnelingTable table;
        table.n_max = n_max;
        for (auto& v : table.l) v.assign(2 * std::size_t(n_max) + 1, Complex{0.0, 0.0});
        for (int j = 0; j < samples; ++j) {
            const double t = period * j / samples;
            const Vec2 q = shaking_quasimomentum(profile, t);
            for (int k = 0; k < 3; ++k) {
                const Vec2& a = geometry.nn[std::size_t(k)];
                const Complex f = std::exp(kI * (q.x * a.x + q.y * a.y));
                for (int m = -n_max; m <= n_max; ++m)
                    table.l[std::size_t(k)][std::size_t(m + n_max)] +=
                        f * std::exp(-kI * (m * profile.omega1 * t));
            }
        }
        for (auto& v : table.l)
            for (auto& c : v) c /= double(samples);
        return table;
    };

    int samples = std::max(256, 8 * n_max);
    TunnelingTable prev = compute(samples);
    for (int round = 0; round < 12; ++round) {
        samples *= 2;
        TunnelingTable cur = compute(samples);
        double drift = 0.0;
        for (int k = 0; k < 3; ++k)
            for (std::size_t i = 0; i < cur.l[std::size_t(k)].size(); ++i)
                drift = std::max(drift,
                                 std::abs(cur.l[std::size_t(k)][i] - prev.l[std::size_t(k)][i]));
        if (drift < 1e-12) return cur;
        prev = std::move(cur);
    }
    throw std::runtime_error("tunneling_coefficients: quadrature did not converge");
}

namespace {

Complex v_pair(const TunnelingTable& t, int n, int m) {
    Complex acc{0.0, 0.0};
    for (int k = 0; k < 3; ++k)
        acc += std::conj(t.get(k, -n)) * t.get(k, m) - t.get(k, n) * std::conj(t.get(k, -m));
    return acc;
}

Complex p_pair(const TunnelingTable& t, int k, int n, int m) {
    const int i = (k + 1) % 3;
    const int j = (k + 2) % 3;
    return t.get(i, m) * std::conj(t.get(j, -n)) - t.get(i, n) * std::conj(t.get(j, -m));
}

}  // namespace

CoefficientSet coefficient_set(const TunnelingTable& table, double delta, double omega1,
                               int n_cut) {
    if (n_cut < 1) throw std::invalid_argument("coefficient_set: n_cut must be >= 1");
    for (int k = 0; k < 3; ++k)
        if (table.parseval_defect(k) > 1e-12) {
            std::ostringstream msg;
            msg << "coefficient_set: tunneling table tail mass " << table.parseval_defect(k)
                << " on direction " << (k + 1);
            throw std::invalid_argument(msg.str());
        }

    CoefficientSet out;
    out.n_cut = n_cut;

    Complex c_delta{0.0, 0.0};
    Complex c_delta_tilde{0.0, 0.0};
    for (int n = -n_cut; n <= n_cut; ++n) {
        if (n == 0) continue;
        c_delta += (v_pair(table, n, 0) - 0.5 * v_pair(table, n, -n)) / double(n);
        c_delta_tilde += 3.0 * v_pair(table, n, 0) / double(n * n);
        for (int k = 0; k < 3; ++k) {
            out.e[std::size_t(k)] +=
                (p_pair(table, k, n, 0) - 0.5 * p_pair(table, k, n, -n)) / double(n);
            out.e_tilde[std::size_t(k)] += 3.0 * p_pair(table, k, n, 0) / double(n * n);
            out.d[std::size_t(k)] -= (2.0 * delta / omega1) * table.get(k, n) / double(n);
            out.d_tilde[std::size_t(k)] +=
                kI * table.get(k, n) / double(n) * (1.0 + 4.0 * delta / (n * omega1));
        }
        for (int m = -n_cut; m <= n_cut; ++m) {
            if (m == 0) continue;
            const double mn = double(m) * double(n);
            c_delta_tilde += v_pair(table, m, n) / mn;
            for (int k = 0; k < 3; ++k)
                out.e_tilde[std::size_t(k)] += p_pair(table, k, m, n) / mn;
            if (n != m) {
                c_delta_tilde += v_pair(table, n, m - n) / mn;
                for (int k = 0; k < 3; ++k)
                    out.e_tilde[std::size_t(k)] += p_pair(table, k, n, m - n) / mn;
            }
        }
    }
    for (int k = 0; k < 3; ++k) {
        out.d[std::size_t(k)] += table.get(k, 0);
        out.e_tilde[std::size_t(k)] *= kI / omega1;
    }
    out.c_delta = (c_delta).real();
    out.c_delta_tilde = (kI / omega1 * c_delta_tilde).real();
    return out;
}

CoefficientSet stable_coefficient_set(const ShakingProfile& profile,
                                      const LatticeGeometry& geometry, double delta,
                                      int n_cut_start) {
    int n_cut = std::max(n_cut_start, 2);
    auto eval = [&](int cut) {
        const TunnelingTable table = tunneling_coefficients(profile, geometry, 2 * cut + 4);
        return coefficient_set(table, delta, profile.omega1, cut);
    };
    CoefficientSet prev = eval(n_cut);
    for (int round = 0; round < 6; ++round) {
        n_cut *= 2;
        CoefficientSet cur = eval(n_cut);
        double drift = std::abs(cur.c_delta - prev.c_delta);
        drift = std::max(drift, std::abs(cur.c_delta_tilde - prev.c_delta_tilde));
        for (int k = 0; k < 3; ++k) {
            drift = std::max(drift, std::abs(cur.d[std::size_t(k)] - prev.d[std::size_t(k)]));
            drift = std::max(drift,
                             std::abs(cur.d_tilde[std::size_t(k)] - prev.d_tilde[std::size_t(k)]));
            drift = std::max(drift, std::abs(cur.e[std::size_t(k)] - prev.e[std::size_t(k)]));
            drift = std::max(drift,
                             std::abs(cur.e_tilde[std::size_t(k)] - prev.e_tilde[std::size_t(k)]));
        }
        if (drift < 1e-10) return cur;
        prev = std::move(cur);
    }
    throw std::runtime_error("stable_coefficient_set: coefficients did not settle");
}

EffectiveParams effective_params(const CoefficientSet& coeffs, double j0, double gamma_quench,
                                 double delta, double omega1, double t) {
    const double j = j0 * std::exp(-gamma_quench * t);
    const double jdot = -gamma_quench * j;
    EffectiveParams out;
    out.delta_tilde = delta - (j * j * coeffs.c_delta + jdot * j * coeffs.c_delta_tilde) / omega1;
    for (int k = 0; k < 3; ++k) {
        out.j_tilde[std::size_t(k)] =
            j * coeffs.d[std::size_t(k)] - jdot * coeffs.d_tilde[std::size_t(k)] / omega1;
        out.g_tilde[std::size_t(k)] =
            -(j * j * coeffs.e[std::size_t(k)] + jdot * j * coeffs.e_tilde[std::size_t(k)]) /
            omega1;
    }
    return out;
}

KappaSet kappa_parameters(const CoefficientSet& coeffs, double gamma_quench) {
    KappaSet out;
    out.tau1 = coeffs.c_delta - gamma_quench * coeffs.c_delta_tilde;
    out.kappa_plus = out.tau1;
    out.kappa_minus = out.tau1;
    for (int k = 0; k < 3; ++k) {
        const Complex w =
            coeffs.e[std::size_t(k)] - gamma_quench * coeffs.e_tilde[std::size_t(k)];
        out.tau_tilde[std::size_t(k)] = std::abs(w);
        out.alpha[std::size_t(k)] = std::arg(w);
        out.kappa_plus += 2.0 * out.tau_tilde[std::size_t(k)] *
                          std::cos(out.alpha[std::size_t(k)] + kThird);
        out.kappa_minus += 2.0 * out.tau_tilde[std::size_t(k)] *
                           std::cos(out.alpha[std::size_t(k)] - kThird);
    }
    return out;
}

GapPair gaps_from_effective(const EffectiveParams& params) {
    GapPair out{params.delta_tilde, params.delta_tilde};
    for (int k = 0; k < 3; ++k) {
        const double mag = std::abs(params.g_tilde[std::size_t(k)]);
        if (mag == 0.0) continue;
        const double phase = std::arg(params.g_tilde[std::size_t(k)]);
        out.h_plus += 2.0 * mag * std::cos(phase + kThird);
        out.h_minus += 2.0 * mag * std::cos(phase - kThird);
    }
    return out;
}

GapPair gaps_from_kappa(const KappaSet& kappa, double j, double delta, double omega1) {
    return {delta - j * j * kappa.kappa_plus / omega1,
            delta - j * j * kappa.kappa_minus / omega1};
}

int chern_number(const GapPair& gaps, double gap_tol) {
    if (std::abs(gaps.h_plus) < gap_tol || std::abs(gaps.h_minus) < gap_tol) {
        std::ostringstream msg;
        msg << "chern_number: gap closes on a phase boundary (h+ = " << gaps.h_plus
            << ", h- = " << gaps.h_minus << ")";
        throw PhaseBoundaryError(msg.str(), std::min(std::abs(gaps.h_plus),
                                                     std::abs(gaps.h_minus)));
    }
    const int sp = gaps.h_plus > 0.0 ? 1 : -1;
    const int sm = gaps.h_minus > 0.0 ? 1 : -1;
    return (sp - sm) / 2;
}

namespace {

Eigen::Vector4d fine_tune_residual(const ShakingProfile& profile, double gamma_over_omega1,
                                   const FineTuneOptions& opts) {
    const CoefficientSet coeffs = stable_coefficient_set(
        profile, LatticeGeometry::honeycomb(), opts.delta, opts.n_cut);
    std::array<Complex, 3> m;
    for (int k = 0; k < 3; ++k)
        m[std::size_t(k)] = coeffs.d[std::size_t(k)] +
                            gamma_over_omega1 * coeffs.d_tilde[std::size_t(k)];
    Eigen::Vector4d r;
    r(0) = (m[1] - m[0]).real();
    r(1) = (m[1] - m[0]).imag();
    r(2) = (m[2] - m[0]).real();
    r(3) = (m[2] - m[0]).imag();
    return r;
}

void apply_unknowns(ShakingProfile& profile, const Eigen::Vector4d& x) {
    profile.q[1] = x(0);
    profile.q[2] = x(1);
    profile.delta_x[1] = x(2);
    profile.delta_x[2] = x(3);
}

Eigen::Vector4d extract_unknowns(const ShakingProfile& profile) {
    return Eigen::Vector4d(profile.q[1], profile.q[2], profile.delta_x[1], profile.delta_x[2]);
}

}  // namespace

FineTuneResult solve_fine_tune(double gamma_over_omega1, const ShakingProfile& seed,
                               const FineTuneOptions& opts) {
    ShakingProfile profile = seed;
    Eigen::Vector4d x = extract_unknowns(profile);
    Eigen::Vector4d r = fine_tune_residual(profile, gamma_over_omega1, opts);

    FineTuneResult result;
    for (int iter = 0; iter < opts.max_iterations; ++iter) {
        result.iterations = iter;
        if (r.norm() < opts.residual_target) break;

        Eigen::Matrix4d jac;
        for (int col = 0; col < 4; ++col) {
            Eigen::Vector4d xp = x;
            xp(col) += opts.fd_step;
            ShakingProfile probe = profile;
            apply_unknowns(probe, xp);
            jac.col(col) = (fine_tune_residual(probe, gamma_over_omega1, opts) - r) / opts.fd_step;
        }

        const Eigen::Vector4d full_step = jac.fullPivLu().solve(-r);
        double scale = 1.0;
        bool accepted = false;
        for (int attempt = 0; attempt < 20; ++attempt) {
            ShakingProfile trial = profile;
            apply_unknowns(trial, Eigen::Vector4d(x + scale * full_step));
            Eigen::Vector4d rt;
            try {
                rt = fine_tune_residual(trial, gamma_over_omega1, opts);
            } catch (const std::exception&) {
                // overshot into amplitudes the truncated table cannot hold
                scale *= 0.5;
                continue;
            }
            if (rt.norm() < r.norm()) {
                profile = trial;
                x = x + scale * full_step;
                r = rt;
                accepted = true;
                break;
            }
            scale *= 0.5;
        }
        if (!accepted) break;
    }

    result.profile = profile;
    result.residual = std::abs(Complex(r(0), r(1))) + std::abs(Complex(r(2), r(3)));
    result.converged = result.residual < opts.required_residual;
    if (!result.converged) {
        std::ostringstream msg;
        msg << "solve_fine_tune: residual " << result.residual
            << " above target after " << result.iterations
            << " iterations; re-seed the profile";
        throw std::runtime_error(msg.str());
    }
    return result;
}

std::vector<TrajectoryRow> quench_trajectory(const ShakingProfile& profile,
                                             const QuenchSettings& settings,
                                             const std::vector<double>& t_grid) {
    const CoefficientSet coeffs = stable_coefficient_set(
        profile, LatticeGeometry::honeycomb(), settings.delta, settings.n_cut);
    const KappaSet kappa = kappa_parameters(coeffs, settings.gamma_quench);
    const double gap_tol = settings.gap_tol_rel * std::abs(settings.delta);

    std::vector<TrajectoryRow> rows;
    rows.reserve(t_grid.size());
    for (double t : t_grid) {
        const double j = settings.j0 * std::exp(-settings.gamma_quench * t);
        TrajectoryRow row;
        row.t = t;
        row.x = j * j * kappa.kappa_plus / (profile.omega1 * settings.delta);
        row.y = j * j * kappa.kappa_minus / (profile.omega1 * settings.delta);
        row.chern = chern_number(gaps_from_kappa(kappa, j, settings.delta, profile.omega1),
                                 gap_tol);
        rows.push_back(row);
    }
    return rows;
}

}  // namespace floweng
