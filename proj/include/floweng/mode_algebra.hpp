#pragma once

#include <Eigen/Dense>
#include <complex>
#include <functional>
#include <iosfwd>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

// Sparse algebra for multi-mode Fourier operator series
//
//   H(t) = sum_m  h^m exp(i m.w t),   m in Z^n,  w = (w_1, ..., w_n)
//
// with w_1 the driving frequency (component 0 of every mode index).
// Coefficients h^m are dense complex matrices; the series of a hermitian
// operator satisfies h^{-m} = (h^m)^dagger.

namespace floweng {

using Complex = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;

// Integer mode vector. Component 0 is the index of the driving frequency
// (m_1 in the usual notation); the remaining components address the slow
// incommensurate tones.
class ModeIndex {
public:
    ModeIndex() = default;
    explicit ModeIndex(std::vector<int> components);
    ModeIndex(std::initializer_list<int> components);

    std::size_t size() const { return c_.size(); }
    int operator[](std::size_t j) const { return c_[j]; }

    // m_1, the harmonic of the driving frequency
    int drive() const { return c_[0]; }
    bool in_static_sector() const { return c_[0] == 0; }

    // m_0: same vector with the driving component zeroed
    ModeIndex drive_zeroed() const;

    ModeIndex operator-() const;
    ModeIndex operator+(const ModeIndex& o) const;
    ModeIndex operator-(const ModeIndex& o) const;

    bool operator==(const ModeIndex& o) const { return c_ == o.c_; }
    bool operator!=(const ModeIndex& o) const { return c_ != o.c_; }
    bool operator<(const ModeIndex& o) const { return c_ < o.c_; }

    bool is_zero() const;
    std::string to_string() const;  // "(1,-2)"

private:
    std::vector<int> c_;
};

// Strictly positive frequencies, component 0 is the driving frequency.
class FrequencyBasis {
public:
    explicit FrequencyBasis(std::vector<double> omega);

    std::size_t size() const { return w_.size(); }
    double operator[](std::size_t j) const { return w_[j]; }
    double drive_frequency() const { return w_[0]; }

    // eta_j = w_j / w_1 for j >= 1
    double ratio(std::size_t j) const { return w_[j] / w_[0]; }

    // m . w
    double dot(const ModeIndex& m) const;
    // m_0 . w_0: the dot product with the driving component skipped
    double static_dot(const ModeIndex& m) const;

    bool operator==(const FrequencyBasis& o) const { return w_ == o.w_; }

    // doubled() scales every frequency by the given factor; used for
    // Richardson-style scaling checks at fixed frequency ratios.
    FrequencyBasis scaled(double factor) const;

private:
    std::vector<double> w_;
};

// Terms with Frobenius norm below this are dropped after each operation.
inline constexpr double kTermPruneTolerance = 1e-14;

// A finite multi-mode Fourier series of matrices. Values are immutable once
// built; all operations return new objects. Each operator carries
// per-component truncation caps: mode sums falling outside the caps are
// dropped and their Frobenius norm is added to discarded_norm(), which is
// monotonically non-decreasing under composition of operations.
class FourierOperator {
public:
    using TermMap = std::map<ModeIndex, CMatrix>;

    FourierOperator(int dim, FrequencyBasis basis);  // zero operator

    // Caps default to twice the componentwise mode width of `terms`.
    static FourierOperator from_terms(int dim, const FrequencyBasis& basis, TermMap terms);
    static FourierOperator from_terms(int dim, const FrequencyBasis& basis, TermMap terms,
                                      std::vector<int> caps);

    int dim() const { return dim_; }
    const FrequencyBasis& basis() const { return basis_; }
    const TermMap& terms() const { return terms_; }
    const std::vector<int>& truncation_caps() const { return caps_; }
    double discarded_norm() const { return discarded_; }
    std::size_t term_count() const { return terms_.size(); }

    bool has_term(const ModeIndex& m) const { return terms_.count(m) != 0; }
    // Zero matrix when the mode is absent.
    CMatrix term(const ModeIndex& m) const;

    CMatrix evaluate_at(double t) const;

    // sqrt of the sum of squared Frobenius norms over all stored modes
    double total_norm() const;
    // same, restricted to modes with nonzero driving harmonic
    double offdrive_norm() const;

    bool is_hermitian_series(double tol) const;

    bool within_caps(const ModeIndex& m) const;

    FourierOperator with_caps(std::vector<int> caps) const;
    // Same operator with `extra` added to the discard ledger; used when a
    // computation tracks truncation loss outside the term algebra.
    FourierOperator with_added_discard(double extra) const;

    void write_record(std::ostream& out) const;
    static FourierOperator read_record(std::istream& in);

    friend FourierOperator linear_combine(std::span<const Complex> coeff,
                                          std::span<const FourierOperator> ops);
    friend FourierOperator commutator(const FourierOperator& a, const FourierOperator& b);
    friend FourierOperator mode_projection(const FourierOperator& a,
                                           const std::function<bool(const ModeIndex&)>& keep);
    friend FourierOperator adjoint_series(const FourierOperator& a);
    friend FourierOperator time_derivative(const FourierOperator& a);

private:
    void prune_and_charge();

    int dim_;
    FrequencyBasis basis_;
    TermMap terms_;
    std::vector<int> caps_;
    double discarded_ = 0.0;
};

FourierOperator linear_combine(std::span<const Complex> coeff,
                               std::span<const FourierOperator> ops);
FourierOperator commutator(const FourierOperator& a, const FourierOperator& b);
// Keeps the modes selected by the predicate. No discard charge: projection is
// deliberate, not truncation loss.
FourierOperator mode_projection(const FourierOperator& a,
                                const std::function<bool(const ModeIndex&)>& keep);
// term(m) -> term(-m)^dagger; the series of H^dagger.
FourierOperator adjoint_series(const FourierOperator& a);
// term(m) -> i (m.w) term(m); the series of dH/dt.
FourierOperator time_derivative(const FourierOperator& a);

FourierOperator operator+(const FourierOperator& a, const FourierOperator& b);
FourierOperator operator-(const FourierOperator& a, const FourierOperator& b);
FourierOperator operator*(Complex c, const FourierOperator& a);

}  // namespace floweng
