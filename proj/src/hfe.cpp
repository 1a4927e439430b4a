#include "floweng/hfe.hpp"

#include <cmath>

namespace floweng {

namespace {

double guarded(double denominator, double w1, double guard, const ModeIndex& n,
               const ModeIndex& j, const char* which) {
    if (std::abs(denominator) < guard * w1) {
        throw ResonanceError(
            std::string("resonant denominator in ") + which + " for modes n=" + n.to_string() +
                ", partner=" + j.to_string() + " (value " + std::to_string(denominator) + ")",
            n.to_string() + "," + j.to_string(), denominator);
    }
    return denominator;
}

}  // namespace

FourierOperator effective_order0(const FourierOperator& h, const HfeOptions& opt) {
    const FrequencyBasis& basis = h.basis();
    const double w1 = basis.drive_frequency();
    FourierOperator::TermMap acc;
    auto add = [&](const ModeIndex& m, const CMatrix& mat) {
        auto [it, fresh] = acc.try_emplace(m, mat);
        if (!fresh) it->second += mat;
    };
    for (const auto& [m, mat] : h.terms()) {
        if (m.drive() == 0) {
            add(m, mat);
            continue;
        }
        const double mw = guarded(basis.dot(m), w1, opt.resonance_guard, m, m, "order-0 feed");
        const double pref = basis.static_dot(m) / mw;
        if (pref != 0.0) add(m.drive_zeroed(), Complex(pref) * mat);
    }
    return FourierOperator::from_terms(h.dim(), basis, std::move(acc), h.truncation_caps());
}

FourierOperator effective_order1(const FourierOperator& h, const HfeOptions& opt) {
    const FrequencyBasis& basis = h.basis();
    const double w1 = basis.drive_frequency();
    const double guard = opt.resonance_guard;
    const int dim = h.dim();

    FourierOperator::TermMap acc;
    auto add = [&](const ModeIndex& m, double coef, const CMatrix& mat) {
        if (coef == 0.0) return;
        auto [it, fresh] = acc.try_emplace(m, coef * mat);
        if (!fresh) it->second += coef * mat;
    };

    CMatrix comm(dim, dim);
    for (const auto& [n, hn] : h.terms()) {
        const int n1 = n.drive();
        if (n1 == 0) continue;
        const double nw = basis.dot(n);
        const double n0w0 = basis.static_dot(n);
        for (const auto& [j, hj] : h.terms()) {
            const int j1 = j.drive();
            const ModeIndex target = n.drive_zeroed() + j.drive_zeroed();
            const double tw0 = basis.static_dot(target);
            const double j0w0 = basis.static_dot(j);

            comm.noalias() = hn * hj;
            comm.noalias() -= hj * hn;
            if (comm.norm() < kTermPruneTolerance) continue;

            if (j1 == 0) {
                // pairs with a static partner: -n_1 w_1 / [(n.w)(m_0.w_0 + n_1 w_1)]
                const double d1 = guarded(nw, w1, guard, n, j, "order-1 static-partner sum");
                const double d2 = guarded(tw0 + n1 * w1, w1, guard, n, j, "order-1 static-partner sum");
                add(target, -(n1 * w1) / (d1 * d2), comm);
                continue;
            }

            // both harmonics nonzero: the remaining three sums apply
            const double jw = basis.dot(j);

            {
                // cross-harmonic sum:
                // -[j_1 w_1 (j_0.w_0) + (m_0.w_0)^2] / [(j.w)(n.w)(j_1 w_1 + m_0.w_0)]
                const double num = j1 * w1 * j0w0 + tw0 * tw0;
                const double d1 = guarded(jw, w1, guard, n, j, "order-1 cross sum");
                const double d2 = guarded(nw, w1, guard, n, j, "order-1 cross sum");
                const double d3 = guarded(j1 * w1 + tw0, w1, guard, n, j, "order-1 cross sum");
                add(target, -num / (d1 * d2 * d3), comm);
            }

            if (j1 == -n1) {
                // opposite-harmonic sum:
                // -(1/2) n_1^2 w_1^2 [(j_0 - n_0).w_0 - n_1 w_1]
                //   / [(n.w)((m_0.w_0)^2 - n_1^2 w_1^2)(j.w)]
                const double num = n1 * w1 * n1 * w1 * (j0w0 - n0w0 - n1 * w1);
                const double d1 = guarded(nw, w1, guard, n, j, "order-1 opposite sum");
                const double d2 = guarded(tw0 * tw0 - n1 * w1 * n1 * w1, w1 * w1, guard, n, j,
                                          "order-1 opposite sum");
                const double d3 = guarded(jw, w1, guard, n, j, "order-1 opposite sum");
                add(target, -0.5 * num / (d1 * d2 * d3), comm);
            } else {
                // generic pair sum, total harmonic m_1 = n_1 + j_1 != 0:
                // -(1/2)(m_1 - n_1) n_1 w_1^2
                //   [m_0.w_0 ((n_0 - j_0).w_0 - j_1 w_1) + m_1 w_1 (n_0.w_0)]
                //   / [(m.w)(n.w)(j.w)(m_0.w_0 + n_1 w_1)(m_0.w_0 + j_1 w_1)]
                const double m1w1 = (n1 + j1) * w1;
                const double num = tw0 * (n0w0 - j0w0 - j1 * w1) + m1w1 * n0w0;
                const double d1 = guarded(m1w1 + tw0, w1, guard, n, j, "order-1 generic sum");
                const double d2 = guarded(nw, w1, guard, n, j, "order-1 generic sum");
                const double d3 = guarded(jw, w1, guard, n, j, "order-1 generic sum");
                const double d4 = guarded(tw0 + n1 * w1, w1, guard, n, j, "order-1 generic sum");
                const double d5 = guarded(tw0 + j1 * w1, w1, guard, n, j, "order-1 generic sum");
                add(target, -0.5 * (j1 * n1 * w1 * w1) * num / (d1 * d2 * d3 * d4 * d5), comm);
            }
        }
    }
    return FourierOperator::from_terms(dim, basis, std::move(acc), h.truncation_caps());
}

FourierOperator effective_order1_simplified(const FourierOperator& h) {
    const FrequencyBasis& basis = h.basis();
    const double w1 = basis.drive_frequency();
    const int dim = h.dim();
    FourierOperator::TermMap acc;
    auto add = [&](const ModeIndex& m, double coef, const CMatrix& mat) {
        auto [it, fresh] = acc.try_emplace(m, coef * mat);
        if (!fresh) it->second += coef * mat;
    };
    CMatrix comm(dim, dim);
    for (const auto& [n, hn] : h.terms()) {
        const int n1 = n.drive();
        if (n1 == 0) continue;
        for (const auto& [j, hj] : h.terms()) {
            const int j1 = j.drive();
            if (j1 != 0 && j1 != -n1) continue;
            comm.noalias() = hn * hj;
            comm.noalias() -= hj * hn;
            if (comm.norm() < kTermPruneTolerance) continue;
            const ModeIndex target = n.drive_zeroed() + j.drive_zeroed();
            if (j1 == 0) {
                add(target, -1.0 / (n1 * w1), comm);
            } else {
                add(target, 0.5 / (n1 * w1), comm);
            }
        }
    }
    return FourierOperator::from_terms(dim, basis, std::move(acc), h.truncation_caps());
}

FourierOperator effective_hamiltonian(const FourierOperator& h, int order, const HfeOptions& opt) {
    if (order < 0 || order > 1) throw std::invalid_argument("effective_hamiltonian: order must be 0 or 1");
    FourierOperator e0 = effective_order0(h, opt);
    if (order == 0) return e0;
    return e0 + effective_order1(h, opt);
}

}  // namespace floweng
