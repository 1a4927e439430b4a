#include "floweng/models.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <istream>
#include <numbers>
#include <ostream>
#include <random>
#include <sstream>
#include <stdexcept>

namespace floweng {

namespace {

constexpr Complex kI{0.0, 1.0};

double phase_arg(const FrequencyBasis& basis, int p, int q, double t) {
    return (p * basis[0] + q * basis[1]) * t;
}

}  // namespace

Complex DriveSpec::value(double t) const {
    Complex acc{0.0, 0.0};
    for (const auto& [pq, a] : coeffs)
        acc += a * std::exp(kI * phase_arg(basis, pq.first, pq.second, t));
    return gamma_strength * basis[0] * acc;
}

double DriveSpec::real_value(double t) const { return value(t).real(); }

Complex DriveSpec::mode_coefficient(int p, int q) const {
    auto it = coeffs.find({p, q});
    if (it == coeffs.end()) return {0.0, 0.0};
    return gamma_strength * basis[0] * it->second;
}

DriveSpec DriveSpec::with_basis(const FrequencyBasis& b) const {
    DriveSpec out = *this;
    out.basis = b;
    return out;
}

DriveSpec DriveSpec::with_gamma(double gamma) const {
    DriveSpec out = *this;
    out.gamma_strength = gamma;
    return out;
}

void DriveSpec::write_record(std::ostream& out) const {
    auto put = [&out](double v) {
        char buf[40];
        std::snprintf(buf, sizeof buf, "%.17g", v);
        out << buf;
    };
    out << "floweng-drive v1\n";
    out << "basis " << basis.size();
    for (std::size_t i = 0; i < basis.size(); ++i) {
        out << ' ';
        put(basis[i]);
    }
    out << "\ngamma ";
    put(gamma_strength);
    out << "\nmmax " << m1_max << ' ' << m2_max << '\n';
    out << "coeffs " << coeffs.size() << '\n';
    for (const auto& [pq, a] : coeffs) {
        out << pq.first << ' ' << pq.second << ' ';
        put(a.real());
        out << ' ';
        put(a.imag());
        out << '\n';
    }
    out << "end\n";
}

DriveSpec DriveSpec::read_record(std::istream& in) {
    std::string tag, version;
    in >> tag >> version;
    if (!in || tag != "floweng-drive" || version != "v1")
        throw std::runtime_error("drive record: bad header");
    std::string key;
    std::size_t n = 0;
    in >> key >> n;
    if (!in || key != "basis") throw std::runtime_error("drive record: expected basis");
    std::vector<double> ws(n);
    for (auto& w : ws) in >> w;
    DriveSpec spec{FrequencyBasis(ws), 0.0, 0, 0, {}};
    in >> key >> spec.gamma_strength;
    if (!in || key != "gamma") throw std::runtime_error("drive record: expected gamma");
    in >> key >> spec.m1_max >> spec.m2_max;
    if (!in || key != "mmax") throw std::runtime_error("drive record: expected mmax");
    std::size_t k = 0;
    in >> key >> k;
    if (!in || key != "coeffs") throw std::runtime_error("drive record: expected coeffs");
    for (std::size_t i = 0; i < k; ++i) {
        int p, q;
        double re, im;
        in >> p >> q >> re >> im;
        spec.coeffs[{p, q}] = Complex(re, im);
    }
    in >> key;
    if (!in || key != "end") throw std::runtime_error("drive record: expected end");
    return spec;
}

DriveSpec random_drive(double gamma_strength, int m1_max, int m2_max, std::uint64_t seed,
                       const FrequencyBasis& basis) {
    if (m1_max < 0 || m2_max < 0) throw std::invalid_argument("random_drive: negative mode cap");
    if (gamma_strength < 0.0) throw std::invalid_argument("random_drive: negative drive strength");
    std::mt19937_64 eng(seed);
    // 53-bit mantissa mapping, pinned here instead of uniform_real_distribution
    // (whose output is implementation defined).
    auto draw = [&eng]() { return static_cast<double>(eng() >> 11) * 0x1.0p-53 - 0.5; };

    DriveSpec spec{basis, gamma_strength, m1_max, m2_max, {}};
    for (int p = 0; p <= m1_max; ++p) {
        for (int q = -m2_max; q <= m2_max; ++q) {
            if (p == 0 && q < 0) continue;
            if (p == 0 && q == 0) {
                spec.coeffs[{0, 0}] = Complex(draw(), 0.0);
                continue;
            }
            const double re = draw();
            const double im = draw();
            spec.coeffs[{p, q}] = Complex(re, im);
            spec.coeffs[{-p, -q}] = Complex(re, -im);
        }
    }
    return spec;
}

double normalize_drive_peak(DriveSpec& drive) {
    constexpr int kGrid = 384;
    int p_lo = 0, p_hi = 0, q_lo = 0, q_hi = 0;
    for (const auto& [pq, a] : drive.coeffs) {
        p_lo = std::min(p_lo, pq.first);
        p_hi = std::max(p_hi, pq.first);
        q_lo = std::min(q_lo, pq.second);
        q_hi = std::max(q_hi, pq.second);
    }
    // phase tables e^{i p theta} / e^{i q theta} for every grid angle
    const auto phase_table = [](int lo, int hi) {
        std::vector<std::vector<Complex>> table(kGrid);
        for (int i = 0; i < kGrid; ++i) {
            const double theta = 2.0 * std::numbers::pi * i / kGrid;
            table[i].resize(std::size_t(hi - lo + 1));
            for (int m = lo; m <= hi; ++m)
                table[i][std::size_t(m - lo)] = std::exp(Complex(0.0, m * theta));
        }
        return table;
    };
    const auto zp = phase_table(p_lo, p_hi);
    const auto zq = phase_table(q_lo, q_hi);

    double peak = 0.0;
    for (int i = 0; i < kGrid; ++i) {
        for (int j = 0; j < kGrid; ++j) {
            Complex v{0.0, 0.0};
            for (const auto& [pq, a] : drive.coeffs)
                v += a * zp[std::size_t(i)][std::size_t(pq.first - p_lo)] *
                     zq[std::size_t(j)][std::size_t(pq.second - q_lo)];
            peak = std::max(peak, std::abs(v));
        }
    }
    if (!(peak > 0.0)) throw std::invalid_argument("normalize_drive_peak: zero drive");
    for (auto& [pq, a] : drive.coeffs) a /= peak;
    return peak;
}

namespace {

// --- translation machinery -------------------------------------------------

inline std::uint32_t rotate_state(std::uint32_t s, int L) {
    const std::uint32_t mask = (L == 32) ? 0xffffffffu : ((1u << L) - 1u);
    return ((s << 1) | (s >> (L - 1))) & mask;
}

inline int parity_sign(std::uint32_t bits) { return (std::popcount(bits) & 1) ? -1 : 1; }

inline std::uint32_t below_mask(int i) { return (1u << i) - 1u; }

struct SectorBasis {
    // per Fock key: orbit id (-1 if the orbit has no zero-momentum state)
    // and sign s_c with |c> = s_c T^{l_c} |rep>
    std::map<std::uint64_t, std::pair<int, double>> member;
    std::vector<std::uint64_t> reps;
    std::vector<int> orbit_size;
};

// Walks translation orbits over the supplied Fock keys. step(key) must
// return {next_key, sign}. Orbits whose accumulated sign around the loop is
// -1 carry no zero-momentum state and are dropped.
template <typename Step>
SectorBasis build_sector(const std::vector<std::uint64_t>& keys, Step step) {
    SectorBasis basis;
    std::map<std::uint64_t, char> seen;
    for (std::uint64_t start : keys) {
        if (seen.count(start)) continue;
        std::vector<std::pair<std::uint64_t, double>> orbit;
        std::uint64_t cur = start;
        double sign = 1.0;
        do {
            orbit.push_back({cur, sign});
            seen[cur] = 1;
            auto [nxt, s] = step(cur);
            cur = nxt;
            sign *= s;
        } while (cur != start);
        const bool allowed = sign > 0.0;
        // re-anchor signs to the smallest key so representatives are canonical
        std::size_t anchor = 0;
        for (std::size_t i = 1; i < orbit.size(); ++i)
            if (orbit[i].first < orbit[anchor].first) anchor = i;
        const double anchor_sign = orbit[anchor].second;
        int id = -1;
        if (allowed) {
            id = static_cast<int>(basis.reps.size());
            basis.reps.push_back(orbit[anchor].first);
            basis.orbit_size.push_back(static_cast<int>(orbit.size()));
        }
        for (auto& [key, s] : orbit)
            basis.member[key] = {id, allowed ? s / anchor_sign : 0.0};
    }
    return basis;
}

// Accumulates O|rep_a> expressed in Fock states into the sector matrix.
struct SectorAccumulator {
    const SectorBasis& basis;
    CMatrix& mat;
    int col;
    double sqrt_Ra;

    void add(std::uint64_t key, Complex w) const {
        auto it = basis.member.find(key);
        if (it == basis.member.end())
            throw std::logic_error("sector accumulator: state left the sector");
        const auto [b, s_c] = it->second;
        if (b < 0) return;  // orbit without a zero-momentum state
        mat(b, col) += w * s_c * sqrt_Ra / std::sqrt(double(basis.orbit_size[b]));
    }
};

}  // namespace

ModelInstance build_spin_chain(int sites, bool momentum_project) {
    if (sites < 2 || sites > 24) throw std::invalid_argument("build_spin_chain: sites out of range");
    const int L = sites;
    const std::uint32_t nstates = 1u << L;

    std::vector<std::uint64_t> keys(nstates);
    for (std::uint32_t s = 0; s < nstates; ++s) keys[s] = s;

    ModelInstance model;
    model.kind = ModelInstance::Kind::SpinChain;
    model.sites = L;
    model.momentum_projected = momentum_project;
    model.operator_names = {"transverse sum sx", "bond sum sz sz", "bond sum sy sy"};

    auto zval = [](std::uint32_t s, int i) { return 1.0 - 2.0 * ((s >> i) & 1u); };

    auto apply_ops = [&](std::uint32_t a, auto&& emit) {
        // emit(op_index, state, weight)
        double zz = 0.0;
        for (int i = 0; i < L; ++i) {
            emit(0, a ^ (1u << i), Complex(1.0, 0.0));
            const int j = (i + 1) % L;
            zz += zval(a, i) * zval(a, j);
            const bool equal = ((a >> i) & 1u) == ((a >> j) & 1u);
            emit(2, a ^ (1u << i) ^ (1u << j), Complex(equal ? -1.0 : 1.0, 0.0));
        }
        emit(1, a, Complex(zz, 0.0));
    };

    if (!momentum_project) {
        model.dim = static_cast<int>(nstates);
        model.operator_table.assign(3, CMatrix::Zero(model.dim, model.dim));
        for (std::uint32_t a = 0; a < nstates; ++a)
            apply_ops(a, [&](int op, std::uint32_t c, Complex w) {
                model.operator_table[op](c, a) += w;
            });
        return model;
    }

    auto sector = build_sector(keys, [&](std::uint64_t key) {
        return std::pair<std::uint64_t, double>(rotate_state(static_cast<std::uint32_t>(key), L), 1.0);
    });

    model.dim = static_cast<int>(sector.reps.size());
    model.operator_table.assign(3, CMatrix::Zero(model.dim, model.dim));
    for (int col = 0; col < model.dim; ++col) {
        const auto rep = static_cast<std::uint32_t>(sector.reps[col]);
        const double sqrt_Ra = std::sqrt(double(sector.orbit_size[col]));
        std::vector<SectorAccumulator> acc;
        for (auto& m : model.operator_table) acc.push_back({sector, m, col, sqrt_Ra});
        apply_ops(rep, [&](int op, std::uint32_t c, Complex w) { acc[op].add(c, w); });
    }
    return model;
}

namespace {

struct Hop {
    std::uint32_t state;
    double sign;
};

// c^+_j c_i with Jordan-Wigner strings inside one species; returns nothing
// when the hop is blocked.
inline bool jw_hop(std::uint32_t m, int i, int j, Hop& out) {
    if (!((m >> i) & 1u) || ((m >> j) & 1u)) return false;
    double sign = parity_sign(m & below_mask(i));
    const std::uint32_t m1 = m ^ (1u << i);
    sign *= parity_sign(m1 & below_mask(j));
    out.state = m1 | (1u << j);
    out.sign = sign;
    return true;
}

std::vector<std::uint32_t> filled_masks(int L, int n) {
    std::vector<std::uint32_t> out;
    for (std::uint32_t m = 0; m < (1u << L); ++m)
        if (std::popcount(m) == n) out.push_back(m);
    return out;
}

}  // namespace

ModelInstance build_fermi_hubbard(int sites, int n_up, int n_down, bool momentum_project) {
    if (sites < 2 || sites > 14)
        throw std::invalid_argument("build_fermi_hubbard: sites out of range");
    if (n_up < 0 || n_up > sites || n_down < 0 || n_down > sites)
        throw std::invalid_argument("build_fermi_hubbard: filling out of range");
    const int L = sites;

    const auto ups = filled_masks(L, n_up);
    const auto downs = filled_masks(L, n_down);
    auto pack = [L](std::uint32_t mu, std::uint32_t md) {
        return (std::uint64_t(mu) << L) | md;
    };
    auto unpack = [L](std::uint64_t key) {
        const std::uint32_t mask = (1u << L) - 1u;
        return std::pair<std::uint32_t, std::uint32_t>(std::uint32_t(key >> L),
                                                       std::uint32_t(key) & mask);
    };

    std::vector<std::uint64_t> keys;
    keys.reserve(ups.size() * downs.size());
    for (auto mu : ups)
        for (auto md : downs) keys.push_back(pack(mu, md));
    std::sort(keys.begin(), keys.end());

    ModelInstance model;
    model.kind = ModelInstance::Kind::FermiHubbard;
    model.sites = L;
    model.n_up = n_up;
    model.n_down = n_down;
    model.momentum_projected = momentum_project;
    model.operator_names = {"kinetic sum (with minus sign)", "on-site interaction sum"};

    // translation of one species: cyclic shift; an occupied last site wrapping
    // to the front passes the other N_s - 1 fermions of its species.
    auto translate_species = [L](std::uint32_t m, int n_filled) {
        double sign = 1.0;
        if ((m >> (L - 1)) & 1u) sign = ((n_filled - 1) & 1) ? -1.0 : 1.0;
        return std::pair<std::uint32_t, double>(rotate_state(m, L), sign);
    };

    auto apply_ops = [&](std::uint64_t akey, auto&& emit) {
        const auto [mu, md] = unpack(akey);
        for (int i = 0; i < L; ++i) {
            const int j = (i + 1) % L;
            Hop h;
            if (jw_hop(mu, i, j, h)) emit(0, pack(h.state, md), Complex(-h.sign, 0.0));
            if (jw_hop(mu, j, i, h)) emit(0, pack(h.state, md), Complex(-h.sign, 0.0));
            if (jw_hop(md, i, j, h)) emit(0, pack(mu, h.state), Complex(-h.sign, 0.0));
            if (jw_hop(md, j, i, h)) emit(0, pack(mu, h.state), Complex(-h.sign, 0.0));
        }
        emit(1, akey, Complex(double(std::popcount(mu & md)), 0.0));
    };

    if (!momentum_project) {
        model.dim = static_cast<int>(keys.size());
        std::map<std::uint64_t, int> index;
        for (std::size_t i = 0; i < keys.size(); ++i) index[keys[i]] = static_cast<int>(i);
        model.operator_table.assign(2, CMatrix::Zero(model.dim, model.dim));
        for (std::size_t a = 0; a < keys.size(); ++a)
            apply_ops(keys[a], [&](int op, std::uint64_t c, Complex w) {
                model.operator_table[op](index.at(c), static_cast<int>(a)) += w;
            });
        return model;
    }

    auto sector = build_sector(keys, [&](std::uint64_t key) {
        const auto [mu, md] = unpack(key);
        const auto [mu2, su] = translate_species(mu, n_up);
        const auto [md2, sd] = translate_species(md, n_down);
        return std::pair<std::uint64_t, double>(pack(mu2, md2), su * sd);
    });

    model.dim = static_cast<int>(sector.reps.size());
    model.operator_table.assign(2, CMatrix::Zero(model.dim, model.dim));
    for (int col = 0; col < model.dim; ++col) {
        const double sqrt_Ra = std::sqrt(double(sector.orbit_size[col]));
        std::vector<SectorAccumulator> acc;
        for (auto& m : model.operator_table) acc.push_back({sector, m, col, sqrt_Ra});
        apply_ops(sector.reps[col], [&](int op, std::uint64_t c, Complex w) { acc[op].add(c, w); });
    }
    return model;
}

FourierOperator assemble_fourier_hamiltonian(const ModelInstance& model,
                                             std::span<const DriveSpec> drives) {
    if (drives.size() != model.operator_table.size())
        throw std::invalid_argument("assemble_fourier_hamiltonian: one drive per operator required");
    const FrequencyBasis& basis = drives[0].basis;
    for (const auto& d : drives)
        if (d.basis.size() != basis.size())
            throw std::invalid_argument("assemble_fourier_hamiltonian: mismatched frequency bases");

    std::map<ModeIndex, CMatrix> terms;
    for (std::size_t k = 0; k < drives.size(); ++k) {
        const double scale = drives[k].gamma_strength * basis[0];
        for (const auto& [pq, a] : drives[k].coeffs) {
            ModeIndex m({pq.first, pq.second});
            auto it = terms.try_emplace(m, CMatrix::Zero(model.dim, model.dim)).first;
            it->second += scale * a * model.operator_table[k];
        }
    }
    return FourierOperator::from_terms(model.dim, basis, std::move(terms));
}

CMatrix bare_hamiltonian(const ModelInstance& model, std::span<const DriveSpec> drives) {
    if (drives.size() != model.operator_table.size())
        throw std::invalid_argument("bare_hamiltonian: one drive per operator required");
    CMatrix h = CMatrix::Zero(model.dim, model.dim);
    for (std::size_t k = 0; k < drives.size(); ++k) {
        Complex c{0.0, 0.0};
        for (const auto& [pq, a] : drives[k].coeffs)
            if (pq.first == 0) c += a;
        h += (drives[k].gamma_strength * drives[k].basis[0] * c.real()) *
             model.operator_table[k];
    }
    return h;
}

}  // namespace floweng
