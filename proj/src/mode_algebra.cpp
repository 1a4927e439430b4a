#include "floweng/mode_algebra.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>

namespace floweng {

namespace {

void require(bool ok, const char* what) {
    if (!ok) throw std::invalid_argument(what);
}

std::vector<int> width_of(const FourierOperator::TermMap& terms, std::size_t n) {
    std::vector<int> w(n, 0);
    for (const auto& [m, mat] : terms) {
        for (std::size_t j = 0; j < n; ++j) w[j] = std::max(w[j], std::abs(m[j]));
    }
    return w;
}

}  // namespace

ModeIndex::ModeIndex(std::vector<int> components) : c_(std::move(components)) {
    require(c_.size() >= 2, "ModeIndex needs at least two components");
}

ModeIndex::ModeIndex(std::initializer_list<int> components) : c_(components) {
    require(c_.size() >= 2, "ModeIndex needs at least two components");
}

ModeIndex ModeIndex::drive_zeroed() const {
    ModeIndex r = *this;
    r.c_[0] = 0;
    return r;
}

ModeIndex ModeIndex::operator-() const {
    ModeIndex r = *this;
    for (int& v : r.c_) v = -v;
    return r;
}

ModeIndex ModeIndex::operator+(const ModeIndex& o) const {
    require(c_.size() == o.c_.size(), "mode index length mismatch");
    ModeIndex r = *this;
    for (std::size_t j = 0; j < c_.size(); ++j) r.c_[j] += o.c_[j];
    return r;
}

ModeIndex ModeIndex::operator-(const ModeIndex& o) const {
    require(c_.size() == o.c_.size(), "mode index length mismatch");
    ModeIndex r = *this;
    for (std::size_t j = 0; j < c_.size(); ++j) r.c_[j] -= o.c_[j];
    return r;
}

bool ModeIndex::is_zero() const {
    return std::all_of(c_.begin(), c_.end(), [](int v) { return v == 0; });
}

std::string ModeIndex::to_string() const {
    std::string s = "(";
    for (std::size_t j = 0; j < c_.size(); ++j) {
        if (j) s += ",";
        s += std::to_string(c_[j]);
    }
    return s + ")";
}

FrequencyBasis::FrequencyBasis(std::vector<double> omega) : w_(std::move(omega)) {
    require(w_.size() >= 2, "FrequencyBasis needs at least two frequencies");
    for (double w : w_) require(w > 0.0 && std::isfinite(w), "frequencies must be positive and finite");
}

double FrequencyBasis::dot(const ModeIndex& m) const {
    require(m.size() == w_.size(), "mode index does not match frequency basis");
    double s = 0.0;
    for (std::size_t j = 0; j < w_.size(); ++j) s += m[j] * w_[j];
    return s;
}

double FrequencyBasis::static_dot(const ModeIndex& m) const {
    require(m.size() == w_.size(), "mode index does not match frequency basis");
    double s = 0.0;
    for (std::size_t j = 1; j < w_.size(); ++j) s += m[j] * w_[j];
    return s;
}

FrequencyBasis FrequencyBasis::scaled(double factor) const {
    std::vector<double> w = w_;
    for (double& v : w) v *= factor;
    return FrequencyBasis(w);
}

FourierOperator::FourierOperator(int dim, FrequencyBasis basis)
    : dim_(dim), basis_(std::move(basis)), caps_(basis_.size(), 0) {
    require(dim >= 1, "operator dimension must be positive");
}

FourierOperator FourierOperator::from_terms(int dim, const FrequencyBasis& basis, TermMap terms) {
    std::vector<int> caps = width_of(terms, basis.size());
    for (int& c : caps) c *= 2;
    return from_terms(dim, basis, std::move(terms), std::move(caps));
}

FourierOperator FourierOperator::from_terms(int dim, const FrequencyBasis& basis, TermMap terms,
                                            std::vector<int> caps) {
    require(caps.size() == basis.size(), "caps length must match frequency basis");
    for (int c : caps) require(c >= 0, "caps must be non-negative");
    FourierOperator op(dim, basis);
    op.caps_ = std::move(caps);
    for (auto& [m, mat] : terms) {
        require(m.size() == basis.size(), "mode index does not match frequency basis");
        require(mat.rows() == dim && mat.cols() == dim, "term matrix has wrong shape");
        if (!op.within_caps(m)) {
            op.discarded_ += mat.norm();
            continue;
        }
        op.terms_.emplace(m, std::move(mat));
    }
    op.prune_and_charge();
    return op;
}

bool FourierOperator::within_caps(const ModeIndex& m) const {
    for (std::size_t j = 0; j < caps_.size(); ++j) {
        if (std::abs(m[j]) > caps_[j]) return false;
    }
    return true;
}

void FourierOperator::prune_and_charge() {
    for (auto it = terms_.begin(); it != terms_.end();) {
        const double n = it->second.norm();
        if (n < kTermPruneTolerance) {
            discarded_ += n;
            it = terms_.erase(it);
        } else {
            ++it;
        }
    }
}

CMatrix FourierOperator::term(const ModeIndex& m) const {
    auto it = terms_.find(m);
    if (it == terms_.end()) return CMatrix::Zero(dim_, dim_);
    return it->second;
}

CMatrix FourierOperator::evaluate_at(double t) const {
    CMatrix out = CMatrix::Zero(dim_, dim_);
    for (const auto& [m, mat] : terms_) {
        const double phase = basis_.dot(m) * t;
        out += std::polar(1.0, phase) * mat;
    }
    return out;
}

double FourierOperator::total_norm() const {
    double s = 0.0;
    for (const auto& [m, mat] : terms_) s += mat.squaredNorm();
    return std::sqrt(s);
}

double FourierOperator::offdrive_norm() const {
    double s = 0.0;
    for (const auto& [m, mat] : terms_) {
        if (m.drive() != 0) s += mat.squaredNorm();
    }
    return std::sqrt(s);
}

bool FourierOperator::is_hermitian_series(double tol) const {
    for (const auto& [m, mat] : terms_) {
        const CMatrix other = term(-m);
        if ((mat - other.adjoint()).norm() > tol) return false;
    }
    return true;
}

FourierOperator FourierOperator::with_caps(std::vector<int> caps) const {
    require(caps.size() == basis_.size(), "caps length must match frequency basis");
    FourierOperator op(dim_, basis_);
    op.caps_ = std::move(caps);
    op.discarded_ = discarded_;
    for (const auto& [m, mat] : terms_) {
        if (op.within_caps(m)) {
            op.terms_.emplace(m, mat);
        } else {
            op.discarded_ += mat.norm();
        }
    }
    return op;
}

FourierOperator FourierOperator::with_added_discard(double extra) const {
    require(extra >= 0.0, "discard charge must be non-negative");
    FourierOperator op = *this;
    op.discarded_ += extra;
    return op;
}

FourierOperator linear_combine(std::span<const Complex> coeff,
                               std::span<const FourierOperator> ops) {
    require(coeff.size() == ops.size() && !ops.empty(), "linear_combine needs matching, non-empty inputs");
    const FourierOperator& first = ops[0];
    for (const FourierOperator& op : ops) {
        require(op.dim() == first.dim(), "linear_combine: dimension mismatch");
        require(op.basis() == first.basis(), "linear_combine: frequency basis mismatch");
    }
    FourierOperator out(first.dim(), first.basis());
    out.caps_.assign(first.basis().size(), 0);
    for (const FourierOperator& op : ops) {
        for (std::size_t j = 0; j < out.caps_.size(); ++j)
            out.caps_[j] = std::max(out.caps_[j], op.truncation_caps()[j]);
    }
    for (std::size_t i = 0; i < ops.size(); ++i) {
        out.discarded_ += std::abs(coeff[i]) * ops[i].discarded_norm();
        if (coeff[i] == Complex(0.0, 0.0)) continue;
        for (const auto& [m, mat] : ops[i].terms()) {
            auto [it, fresh] = out.terms_.try_emplace(m, coeff[i] * mat);
            if (!fresh) it->second += coeff[i] * mat;
        }
    }
    out.prune_and_charge();
    return out;
}

FourierOperator commutator(const FourierOperator& a, const FourierOperator& b) {
    require(a.dim() == b.dim(), "commutator: dimension mismatch");
    require(a.basis() == b.basis(), "commutator: frequency basis mismatch");
    FourierOperator out(a.dim(), a.basis());
    out.caps_.assign(a.basis().size(), 0);
    for (std::size_t j = 0; j < out.caps_.size(); ++j)
        out.caps_[j] = std::max(a.truncation_caps()[j], b.truncation_caps()[j]);
    out.discarded_ = a.discarded_norm() + b.discarded_norm();
    CMatrix c(a.dim(), a.dim());
    for (const auto& [ma, A] : a.terms()) {
        for (const auto& [mb, B] : b.terms()) {
            c.noalias() = A * B;
            c.noalias() -= B * A;
            const ModeIndex m = ma + mb;
            if (!out.within_caps(m)) {
                out.discarded_ += c.norm();
                continue;
            }
            auto [it, fresh] = out.terms_.try_emplace(m, c);
            if (!fresh) it->second += c;
        }
    }
    out.prune_and_charge();
    return out;
}

FourierOperator mode_projection(const FourierOperator& a,
                                const std::function<bool(const ModeIndex&)>& keep) {
    FourierOperator out(a.dim(), a.basis());
    out.caps_ = a.truncation_caps();
    out.discarded_ = a.discarded_norm();
    for (const auto& [m, mat] : a.terms()) {
        if (keep(m)) out.terms_.emplace(m, mat);
    }
    return out;
}

FourierOperator adjoint_series(const FourierOperator& a) {
    FourierOperator out(a.dim(), a.basis());
    out.caps_ = a.truncation_caps();
    out.discarded_ = a.discarded_norm();
    for (const auto& [m, mat] : a.terms()) out.terms_.emplace(-m, mat.adjoint());
    return out;
}

FourierOperator time_derivative(const FourierOperator& a) {
    FourierOperator out(a.dim(), a.basis());
    out.caps_ = a.truncation_caps();
    out.discarded_ = a.discarded_norm();
    for (const auto& [m, mat] : a.terms()) {
        out.terms_.emplace(m, Complex(0.0, a.basis().dot(m)) * mat);
    }
    out.prune_and_charge();
    return out;
}

FourierOperator operator+(const FourierOperator& a, const FourierOperator& b) {
    const Complex c[2] = {Complex(1.0), Complex(1.0)};
    const FourierOperator ops[2] = {a, b};
    return linear_combine(c, ops);
}

FourierOperator operator-(const FourierOperator& a, const FourierOperator& b) {
    const Complex c[2] = {Complex(1.0), Complex(-1.0)};
    const FourierOperator ops[2] = {a, b};
    return linear_combine(c, ops);
}

FourierOperator operator*(Complex c, const FourierOperator& a) {
    const Complex cc[1] = {c};
    const FourierOperator ops[1] = {a};
    return linear_combine(cc, ops);
}

namespace {

void put_double(std::ostream& out, double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    out << buf;
}

}  // namespace

void FourierOperator::write_record(std::ostream& out) const {
    out << "floweng-fourier-operator v1\n";
    out << "dim " << dim_ << "\n";
    out << "basis " << basis_.size();
    for (std::size_t j = 0; j < basis_.size(); ++j) {
        out << " ";
        put_double(out, basis_[j]);
    }
    out << "\n";
    out << "caps";
    for (int c : caps_) out << " " << c;
    out << "\n";
    out << "discarded ";
    put_double(out, discarded_);
    out << "\n";
    out << "terms " << terms_.size() << "\n";
    for (const auto& [m, mat] : terms_) {
        out << "m";
        for (std::size_t j = 0; j < m.size(); ++j) out << " " << m[j];
        out << "\n";
        for (int r = 0; r < dim_; ++r) {
            for (int c = 0; c < dim_; ++c) {
                if (c) out << " ";
                put_double(out, mat(r, c).real());
                out << " ";
                put_double(out, mat(r, c).imag());
            }
            out << "\n";
        }
    }
    out << "end\n";
}

FourierOperator FourierOperator::read_record(std::istream& in) {
    auto fail = [](const char* what) -> void { throw std::runtime_error(std::string("fourier operator record: ") + what); };
    std::string word;
    in >> word;
    if (word != "floweng-fourier-operator") fail("bad magic");
    in >> word;
    if (word != "v1") fail("unsupported version");
    int dim = 0;
    in >> word >> dim;
    if (word != "dim" || dim < 1) fail("bad dim");
    std::size_t nbasis = 0;
    in >> word >> nbasis;
    if (word != "basis" || nbasis < 2) fail("bad basis");
    std::vector<double> w(nbasis);
    for (double& v : w) in >> v;
    FrequencyBasis basis(w);
    in >> word;
    if (word != "caps") fail("bad caps");
    std::vector<int> caps(nbasis);
    for (int& c : caps) in >> c;
    double discarded = 0.0;
    in >> word >> discarded;
    if (word != "discarded") fail("bad discarded");
    std::size_t nterms = 0;
    in >> word >> nterms;
    if (word != "terms") fail("bad terms");
    TermMap terms;
    for (std::size_t k = 0; k < nterms; ++k) {
        in >> word;
        if (word != "m") fail("bad term header");
        std::vector<int> comps(nbasis);
        for (int& v : comps) in >> v;
        CMatrix mat(dim, dim);
        for (int r = 0; r < dim; ++r) {
            for (int c = 0; c < dim; ++c) {
                double re = 0.0, im = 0.0;
                in >> re >> im;
                mat(r, c) = Complex(re, im);
            }
        }
        terms.emplace(ModeIndex(comps), std::move(mat));
    }
    in >> word;
    if (word != "end" || !in) fail("truncated record");
    FourierOperator op = from_terms(dim, basis, std::move(terms), std::move(caps));
    op.discarded_ = discarded;
    return op;
}

}  // namespace floweng
