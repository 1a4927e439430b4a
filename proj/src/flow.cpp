#include "floweng/flow.hpp"

#include <algorithm>
#include <cmath>

namespace floweng {

double default_flow_f(const ModeIndex& m, const FrequencyBasis& basis) {
    if (m.drive() == 0) return 0.0;
    const double mw = basis.dot(m);
    if (mw > 0.0) return 1.0;
    if (mw < 0.0) return -1.0;
    return 0.0;  // exactly resonant harmonic: no admissible sign exists
}

void validate_flow_scalars(const FlowScalars& f, const FrequencyBasis& basis,
                           const std::vector<ModeIndex>& modes) {
    for (const ModeIndex& m : modes) {
        const double fm = f(m, basis);
        if (!std::isfinite(fm)) throw std::invalid_argument("flow scalars: non-finite value at " + m.to_string());
        if (std::abs(fm + f(-m, basis)) > 1e-13 * (1.0 + std::abs(fm)))
            throw std::invalid_argument("flow scalars: f is not antisymmetric at " + m.to_string());
        if (m.drive() == 0) {
            if (fm != 0.0)
                throw std::invalid_argument("flow scalars: f must vanish on the static sector, violated at " + m.to_string());
        } else if (basis.dot(m) != 0.0) {
            if (basis.dot(m) * fm <= 0.0)
                throw std::invalid_argument("flow scalars: (m.w) f_m must be positive at " + m.to_string());
        } else {
            // exactly resonant harmonic: no admissible f can attenuate it, so
            // the only consistent choice is zero (the flow then stalls and the
            // integrator reports the stuck residual)
            if (fm != 0.0)
                throw std::invalid_argument("flow scalars: f must vanish on exactly resonant modes, violated at " + m.to_string());
        }
    }
}

FourierOperator assemble_generator(const FourierOperator& h, const FlowScalars& f) {
    const FrequencyBasis& basis = h.basis();
    const double w1 = basis.drive_frequency();
    FourierOperator::TermMap acc;
    auto add = [&](const ModeIndex& m, const CMatrix& mat) {
        auto [it, fresh] = acc.try_emplace(m, mat);
        if (!fresh) it->second += mat;
    };
    for (const auto& [m, mat] : h.terms()) {
        if (m.drive() == 0) continue;
        const double fm = f(m, basis);
        const Complex c(0.0, -fm / w1);
        add(m, c * mat);
        add(m.drive_zeroed(), (-c) * mat);
    }
    return FourierOperator::from_terms(h.dim(), basis, std::move(acc), h.truncation_caps());
}

FourierOperator rhs_flow(const FourierOperator& h, const FlowScalars& f) {
    const FrequencyBasis& basis = h.basis();
    const double w1 = basis.drive_frequency();
    const int dim = h.dim();

    struct Entry {
        const ModeIndex* m;
        const CMatrix* mat;
        double fval;
        int drive;
    };
    std::vector<Entry> entries;
    std::vector<ModeIndex> modes;
    entries.reserve(h.term_count());
    modes.reserve(h.term_count());
    for (const auto& [m, mat] : h.terms()) modes.push_back(m);
    validate_flow_scalars(f, basis, modes);
    std::size_t i = 0;
    for (const auto& [m, mat] : h.terms()) {
        entries.push_back(Entry{&modes[i], &mat, f(m, basis), m.drive()});
        ++i;
    }

    FourierOperator::TermMap acc;
    auto add = [&](const ModeIndex& m, const CMatrix& mat) {
        auto [it, fresh] = acc.try_emplace(m, mat);
        if (!fresh) it->second += mat;
    };

    // Linear part: attenuation of every driving harmonic plus the forcing it
    // exerts on its static partner mode.
    for (const Entry& e : entries) {
        if (e.drive == 0) continue;
        add(*e.m, Complex(-basis.dot(*e.m) / w1 * e.fval) * (*e.mat));
        add(e.m->drive_zeroed(), Complex(basis.static_dot(*e.m) / w1 * e.fval) * (*e.mat));
    }

    // Commutator sums. [h^j, h^k] is shared by up to two of the displayed
    // sums; the index restrictions select which target each pair feeds:
    //   j_1 != 0, k_1 != 0 : full mode sum j+k (covers the static-sector sum
    //                        over m_0 - n and the restricted sum n_1 not in
    //                        {0, m_1});
    //   k_1 != 0           : the m_0-shifted sum, target j + k_0, weight f_k;
    //   j_1 != 0, k_1 == 0 : the sum over static partner modes, weight f_j.
    CMatrix comm(dim, dim);
    for (const Entry& ej : entries) {
        for (const Entry& ek : entries) {
            if (ej.drive == 0 && ek.drive == 0) continue;
            comm.noalias() = (*ej.mat) * (*ek.mat);
            comm.noalias() -= (*ek.mat) * (*ej.mat);
            if (ej.drive != 0) {
                // same arithmetic whether k sits in the static sector or not
                add(*ej.m + *ek.m, Complex(ej.fval / w1) * comm);
            }
            if (ek.drive != 0) {
                add(*ej.m + ek.m->drive_zeroed(), Complex(ek.fval / w1) * comm);
            }
        }
    }

    return FourierOperator::from_terms(dim, basis, std::move(acc), h.truncation_caps());
}

namespace {

// Dormand-Prince 5(4) tableau
constexpr double A21 = 1.0 / 5;
constexpr double A31 = 3.0 / 40, A32 = 9.0 / 40;
constexpr double A41 = 44.0 / 45, A42 = -56.0 / 15, A43 = 32.0 / 9;
constexpr double A51 = 19372.0 / 6561, A52 = -25360.0 / 2187, A53 = 64448.0 / 6561, A54 = -212.0 / 729;
constexpr double A61 = 9017.0 / 3168, A62 = -355.0 / 33, A63 = 46732.0 / 5247, A64 = 49.0 / 176,
                 A65 = -5103.0 / 18656;
constexpr double B1 = 35.0 / 384, B3 = 500.0 / 1113, B4 = 125.0 / 192, B5 = -2187.0 / 6784,
                 B6 = 11.0 / 84;
constexpr double E1 = 35.0 / 384 - 5179.0 / 57600, E3 = 500.0 / 1113 - 7571.0 / 16695,
                 E4 = 125.0 / 192 - 393.0 / 640, E5 = -2187.0 / 6784 + 92097.0 / 339200,
                 E6 = 11.0 / 84 - 187.0 / 2100, E7 = -1.0 / 40;

struct Universe {
    std::vector<ModeIndex> modes;
    std::map<ModeIndex, std::size_t> slot;
    std::vector<bool> offdrive;
};

void enumerate_box(const std::vector<int>& caps, std::vector<int>& cur, std::size_t j,
                   std::vector<ModeIndex>& out) {
    if (j == caps.size()) {
        out.emplace_back(cur);
        return;
    }
    for (int v = -caps[j]; v <= caps[j]; ++v) {
        cur[j] = v;
        enumerate_box(caps, cur, j + 1, out);
    }
}

Universe build_universe(const FourierOperator& h0, std::size_t max_universe) {
    Universe u;
    std::size_t count = 1;
    for (int c : h0.truncation_caps()) {
        count *= static_cast<std::size_t>(2 * c + 1);
        if (count > max_universe) throw std::invalid_argument("flow universe exceeds the configured size guard");
    }
    std::vector<int> cur(h0.truncation_caps().size(), 0);
    enumerate_box(h0.truncation_caps(), cur, 0, u.modes);
    std::sort(u.modes.begin(), u.modes.end());
    for (std::size_t i = 0; i < u.modes.size(); ++i) {
        u.slot.emplace(u.modes[i], i);
        u.offdrive.push_back(u.modes[i].drive() != 0);
    }
    return u;
}

}  // namespace

FlowResult integrate_flow(const FourierOperator& h0, const FlowScalars& f,
                          const FlowOptions& opt) {
    const int dim = h0.dim();
    const std::size_t block = static_cast<std::size_t>(dim) * dim;
    const Universe uni = build_universe(h0, opt.max_universe);
    const std::size_t nslots = uni.modes.size();

    Eigen::VectorXcd y = Eigen::VectorXcd::Zero(nslots * block);
    for (const auto& [m, mat] : h0.terms()) {
        const std::size_t s = uni.slot.at(m);
        Eigen::Map<CMatrix>(y.data() + s * block, dim, dim) = mat;
    }

    const double scale0 = std::max(h0.total_norm(), 1e-300);
    const double atol = opt.atol_scale * scale0;
    const double stop = opt.stop_tol_rel * scale0;

    double rhs_discard = 0.0;
    auto unpack = [&](const Eigen::VectorXcd& v) {
        FourierOperator::TermMap terms;
        for (std::size_t s = 0; s < nslots; ++s) {
            Eigen::Map<const CMatrix> mat(v.data() + s * block, dim, dim);
            if (mat.norm() > 0.0) terms.emplace(uni.modes[s], mat);
        }
        return FourierOperator::from_terms(dim, h0.basis(), std::move(terms), h0.truncation_caps());
    };
    auto rhs = [&](const Eigen::VectorXcd& v, Eigen::VectorXcd& dv) {
        const FourierOperator cur = unpack(v);
        const FourierOperator d = rhs_flow(cur, f);
        rhs_discard = d.discarded_norm();
        dv.setZero();
        for (const auto& [m, mat] : d.terms()) {
            const std::size_t s = uni.slot.at(m);
            Eigen::Map<CMatrix>(dv.data() + s * block, dim, dim) = mat;
        }
    };
    auto offdrive_norm = [&](const Eigen::VectorXcd& v) {
        double acc = 0.0;
        for (std::size_t s = 0; s < nslots; ++s) {
            if (!uni.offdrive[s]) continue;
            acc += v.segment(s * block, block).squaredNorm();
        }
        return std::sqrt(acc);
    };

    FlowResult result{FourierOperator(dim, h0.basis()), FourierOperator(dim, h0.basis())};
    result.discarded_norm = h0.discarded_norm();

    double s = 0.0;
    double residual = offdrive_norm(y);

    const std::size_t n = y.size();
    Eigen::VectorXcd k1(n), k2(n), k3(n), k4(n), k5(n), k6(n), k7(n), ytmp(n), ynew(n), err(n);
    rhs(y, k1);
    bool have_k1 = true;

    double hstep = 0.0;
    {
        const double fn = k1.norm();
        const double yn = std::max(y.norm(), atol);
        hstep = (fn > 0.0) ? std::min(0.1, 0.01 * yn / fn) : 0.1;
        hstep = std::min(hstep, opt.s_max);
    }

    auto error_norm = [&](const Eigen::VectorXcd& e, const Eigen::VectorXcd& y0,
                          const Eigen::VectorXcd& y1) {
        double acc = 0.0;
        for (Eigen::Index i = 0; i < e.size(); ++i) {
            const double sc = atol + opt.rtol * std::max(std::abs(y0[i]), std::abs(y1[i]));
            const double q = std::abs(e[i]) / sc;
            acc += q * q;
        }
        return std::sqrt(acc / static_cast<double>(e.size()));
    };

    while (residual > stop) {
        if (s >= opt.s_max || result.step_count + result.rejected_steps >= static_cast<long>(opt.max_steps)) {
            throw FlowDivergence(
                "flow did not converge before s_max; a near-resonant mode decays too slowly "
                "(residual " + std::to_string(residual) + " at s = " + std::to_string(s) + ")",
                s, residual);
        }
        hstep = std::min(hstep, opt.s_max - s);
        if (!have_k1) {
            rhs(y, k1);
            have_k1 = true;
        }
        const double k1_discard = rhs_discard;

        ytmp = y + hstep * (A21 * k1);
        rhs(ytmp, k2);
        ytmp = y + hstep * (A31 * k1 + A32 * k2);
        rhs(ytmp, k3);
        ytmp = y + hstep * (A41 * k1 + A42 * k2 + A43 * k3);
        rhs(ytmp, k4);
        ytmp = y + hstep * (A51 * k1 + A52 * k2 + A53 * k3 + A54 * k4);
        rhs(ytmp, k5);
        ytmp = y + hstep * (A61 * k1 + A62 * k2 + A63 * k3 + A64 * k4 + A65 * k5);
        rhs(ytmp, k6);
        ynew = y + hstep * (B1 * k1 + B3 * k3 + B4 * k4 + B5 * k5 + B6 * k6);
        rhs(ynew, k7);
        err = hstep * (E1 * k1 + E3 * k3 + E4 * k4 + E5 * k5 + E6 * k6 + E7 * k7);

        const double en = error_norm(err, y, ynew);
        if (en <= 1.0) {
            s += hstep;
            y.swap(ynew);
            k1.swap(k7);  // first-same-as-last
            result.step_count += 1;
            result.discarded_norm += k1_discard * hstep;
            residual = offdrive_norm(y);
            if (opt.check_hermitian_each_step) {
                const FourierOperator cur = unpack(y);
                if (!cur.is_hermitian_series(1e-8 * std::max(1.0, cur.total_norm())))
                    throw FlowDivergence("hermiticity lost along the flow", s, residual);
            }
        } else {
            result.rejected_steps += 1;
            have_k1 = true;  // k1 still belongs to y
        }
        const double fac = (en > 0.0) ? 0.9 * std::pow(en, -0.2) : 5.0;
        hstep *= std::clamp(fac, 0.2, 5.0);
        if (hstep < 1e-14) {
            throw FlowDivergence("flow step size underflow", s, residual);
        }
    }

    result.final_series = unpack(y).with_added_discard(result.discarded_norm);
    result.effective = mode_projection(result.final_series,
                                       [](const ModeIndex& m) { return m.drive() == 0; });
    result.residual_offdrive_norm = residual;
    result.s_final = s;
    return result;
}

}  // namespace floweng
