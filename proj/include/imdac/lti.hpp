#pragma once

// Single-input single-output LTI substrate: polynomials, transfer functions,
// controllable canonical realizations and observer gain placement.

#include <algorithm>
#include <cmath>
#include <complex>
#include <initializer_list>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "imdac/error.hpp"

namespace imdac {

using cplx = std::complex<double>;

/// Real polynomial stored in ascending powers: coeffs()[k] multiplies s^k.
/// Trailing coefficients with magnitude <= kLeadingTolerance are dropped, so
/// the zero polynomial is the empty sequence.
class Polynomial {
public:
    static constexpr double kLeadingTolerance = 1e-12;

    Polynomial() = default;
    Polynomial(std::initializer_list<double> ascending) : c_(ascending) { trim(); }
    explicit Polynomial(std::vector<double> ascending) : c_(std::move(ascending)) { trim(); }

    static Polynomial constant(double v) { return Polynomial(std::vector<double>{v}); }

    /// Monic real polynomial with the given roots. Roots must be closed under conjugation.
    static Polynomial from_roots(std::span<const cplx> roots) {
        std::vector<cplx> acc{cplx(1.0)};
        for (const cplx& r : roots) {
            std::vector<cplx> next(acc.size() + 1, cplx(0.0));
            for (std::size_t k = 0; k < acc.size(); ++k) {
                next[k + 1] += acc[k];
                next[k] -= r * acc[k];
            }
            acc = std::move(next);
        }
        double scale = 1.0;
        for (const cplx& a : acc) scale = std::max(scale, std::abs(a));
        std::vector<double> real(acc.size());
        for (std::size_t k = 0; k < acc.size(); ++k) {
            if (std::abs(acc[k].imag()) > 1e-9 * scale)
                throw Error("roots are not closed under conjugation");
            real[k] = acc[k].real();
        }
        return Polynomial(std::move(real));
    }

    const std::vector<double>& coeffs() const noexcept { return c_; }
    bool is_zero() const noexcept { return c_.empty(); }
    /// -1 for the zero polynomial.
    int degree() const noexcept { return static_cast<int>(c_.size()) - 1; }
    double leading() const noexcept { return c_.empty() ? 0.0 : c_.back(); }
    double operator[](std::size_t k) const noexcept { return k < c_.size() ? c_[k] : 0.0; }

    double max_abs_coeff() const noexcept {
        double m = 0.0;
        for (double v : c_) m = std::max(m, std::abs(v));
        return m;
    }

    template <typename T>
    T operator()(T s) const {
        T acc(0.0);
        for (auto it = c_.rbegin(); it != c_.rend(); ++it) acc = acc * s + T(*it);
        return acc;
    }

    Polynomial monic() const {
        if (is_zero()) throw Error("zero polynomial has no monic form");
        std::vector<double> out(c_);
        const double lead = c_.back();
        for (double& v : out) v /= lead;
        return Polynomial(std::move(out));
    }

    friend bool operator==(const Polynomial&, const Polynomial&) = default;

private:
    void trim() {
        while (!c_.empty() && std::abs(c_.back()) <= kLeadingTolerance) c_.pop_back();
    }

    std::vector<double> c_;
};

inline Polynomial operator+(const Polynomial& a, const Polynomial& b) {
    std::vector<double> out(std::max(a.coeffs().size(), b.coeffs().size()), 0.0);
    for (std::size_t k = 0; k < out.size(); ++k) out[k] = a[k] + b[k];
    return Polynomial(std::move(out));
}

inline Polynomial operator*(double k, const Polynomial& p) {
    std::vector<double> out(p.coeffs());
    for (double& v : out) v *= k;
    return Polynomial(std::move(out));
}

inline Polynomial operator-(const Polynomial& a, const Polynomial& b) { return a + (-1.0) * b; }

inline Polynomial poly_mul(const Polynomial& a, const Polynomial& b) {
    if (a.is_zero() || b.is_zero()) return {};
    std::vector<double> out(a.coeffs().size() + b.coeffs().size() - 1, 0.0);
    for (std::size_t i = 0; i < a.coeffs().size(); ++i)
        for (std::size_t j = 0; j < b.coeffs().size(); ++j) out[i + j] += a[i] * b[j];
    return Polynomial(std::move(out));
}

inline Polynomial operator*(const Polynomial& a, const Polynomial& b) { return poly_mul(a, b); }

struct PolyDivision {
    Polynomial quotient;
    Polynomial remainder;
};

inline PolyDivision poly_divmod(const Polynomial& num, const Polynomial& den) {
    if (den.is_zero()) throw Error("division by zero polynomial");
    const int dn = den.degree();
    if (num.degree() < dn) return {Polynomial{}, num};
    std::vector<double> rem(num.coeffs());
    std::vector<double> quot(static_cast<std::size_t>(num.degree() - dn + 1), 0.0);
    const double lead = den.leading();
    for (int k = num.degree() - dn; k >= 0; --k) {
        const double q = rem[static_cast<std::size_t>(k + dn)] / lead;
        quot[static_cast<std::size_t>(k)] = q;
        for (int j = 0; j <= dn; ++j) rem[static_cast<std::size_t>(k + j)] -= q * den[static_cast<std::size_t>(j)];
        rem[static_cast<std::size_t>(k + dn)] = 0.0;
    }
    rem.resize(static_cast<std::size_t>(dn));
    return {Polynomial(std::move(quot)), Polynomial(std::move(rem))};
}

/// Quotient when `den` divides `num`; the remainder counts as zero when every
/// coefficient is below 1e-9 * (1 + max|num coeff|).
inline std::pair<bool, Polynomial> poly_divides(const Polynomial& num, const Polynomial& den) {
    auto [q, r] = poly_divmod(num, den);
    const double tol = 1e-9 * (1.0 + num.max_abs_coeff());
    for (double v : r.coeffs())
        if (std::abs(v) >= tol) return {false, q};
    return {true, q};
}

inline std::vector<cplx> eigenvalues(const Eigen::MatrixXd& m, int max_iterations_per_value = 500) {
    if (m.rows() == 0) return {};
    Eigen::EigenSolver<Eigen::MatrixXd> es;
    es.setMaxIterations(static_cast<Eigen::Index>(max_iterations_per_value) * m.rows());
    es.compute(m, false);
    if (es.info() != Eigen::Success) throw Error("eigenvalue iteration did not converge");
    std::vector<cplx> out(es.eigenvalues().begin(), es.eigenvalues().end());
    return out;
}

/// Roots as eigenvalues of the monic top-companion matrix.
inline std::vector<cplx> poly_roots(const Polynomial& p) {
    if (p.degree() < 1) throw Error("no roots defined");
    const int m = p.degree();
    Eigen::MatrixXd comp = Eigen::MatrixXd::Zero(m, m);
    for (int k = 0; k < m; ++k) comp(0, k) = -p[static_cast<std::size_t>(m - 1 - k)] / p.leading();
    for (int k = 1; k < m; ++k) comp(k, k - 1) = 1.0;
    return eigenvalues(comp);
}

/// Proper SISO transfer function num/den with monic, coprime denominator.
class TransferFunction {
public:
    TransferFunction() : num_(Polynomial{}), den_(Polynomial{1.0}) {}

    TransferFunction(Polynomial num, Polynomial den) {
        if (den.is_zero()) throw Error("transfer function denominator is zero");
        if (num.degree() > den.degree()) throw Error("transfer function is improper");
        const double lead = den.leading();
        num_ = (1.0 / lead) * num;
        den_ = (1.0 / lead) * den;
        check_coprime();
    }

    const Polynomial& num() const noexcept { return num_; }
    const Polynomial& den() const noexcept { return den_; }
    bool strictly_proper() const noexcept { return num_.degree() < den_.degree(); }

    cplx operator()(cplx s) const { return num_(s) / den_(s); }

    friend bool operator==(const TransferFunction&, const TransferFunction&) = default;

private:
    void check_coprime() const {
        if (num_.degree() < 1 || den_.degree() < 1) return;
        const auto zn = poly_roots(num_);
        for (const cplx& r : poly_roots(den_))
            for (const cplx& z : zn)
                if (std::abs(r - z) < 1e-8 * std::max(1.0, std::abs(r)))
                    throw Error("numerator and denominator share a common root");
    }

    Polynomial num_;
    Polynomial den_;
};

struct StateSpace {
    Eigen::MatrixXd A;
    Eigen::VectorXd B;
    Eigen::RowVectorXd C;
    double D = 0.0;

    int order() const noexcept { return static_cast<int>(A.rows()); }
};

/// Top-companion controllable canonical form: row 1 of A holds -a_{m-1}..-a_0,
/// ones on the subdiagonal, B = e1, C = b_{m-1}..b_0.
inline StateSpace tf_realize(const TransferFunction& tf) {
    const Polynomial& den = tf.den();
    const int m = den.degree();
    if (m < 1) throw Error("realization needs a denominator of degree >= 1");
    if (tf.num().degree() > m) throw Error("transfer function is improper");

    StateSpace ss;
    ss.D = tf.num().degree() == m ? tf.num().leading() : 0.0;
    const Polynomial strict = tf.num() - ss.D * den;

    ss.A = Eigen::MatrixXd::Zero(m, m);
    ss.B = Eigen::VectorXd::Zero(m);
    ss.C = Eigen::RowVectorXd::Zero(m);
    for (int k = 0; k < m; ++k) {
        const auto pow = static_cast<std::size_t>(m - 1 - k);
        ss.A(0, k) = -den[pow];
        ss.C(k) = strict[pow];
    }
    for (int k = 1; k < m; ++k) ss.A(k, k - 1) = 1.0;
    ss.B(0) = 1.0;
    return ss;
}

/// C (sI - A)^{-1} B + D through a pivoted LU solve.
inline cplx ss_eval(const StateSpace& ss, cplx s) {
    const int m = ss.order();
    const Eigen::MatrixXcd M = s * Eigen::MatrixXcd::Identity(m, m) - ss.A.cast<cplx>();
    Eigen::FullPivLU<Eigen::MatrixXcd> lu(M);
    lu.setThreshold(1e-10);
    if (!lu.isInvertible()) throw Error("evaluation at pole");
    const Eigen::VectorXcd x = lu.solve(ss.B.cast<cplx>());
    return (ss.C.cast<cplx>() * x)(0) + ss.D;
}

struct HurwitzReport {
    bool stable = true;
    double max_real_part = -std::numeric_limits<double>::infinity();
};

inline HurwitzReport is_hurwitz(const Eigen::MatrixXd& m) {
    if (m.rows() != m.cols()) throw Error("is_hurwitz needs a square matrix");
    HurwitzReport rep;
    for (const cplx& ev : eigenvalues(m)) rep.max_real_part = std::max(rep.max_real_part, ev.real());
    rep.stable = rep.max_real_part < -1e-9;
    return rep;
}

inline Eigen::MatrixXd observability_matrix(const Eigen::MatrixXd& A, const Eigen::RowVectorXd& C) {
    const Eigen::Index m = A.rows();
    Eigen::MatrixXd O(m, m);
    Eigen::RowVectorXd row = C;
    for (Eigen::Index k = 0; k < m; ++k) {
        O.row(k) = row;
        row = row * A;
    }
    return O;
}

namespace detail {

inline int numerical_rank(const Eigen::JacobiSVD<Eigen::MatrixXd>& svd) {
    const auto& sv = svd.singularValues();
    if (sv.size() == 0 || sv(0) == 0.0) return 0;
    int r = 0;
    for (Eigen::Index k = 0; k < sv.size(); ++k)
        if (sv(k) > 1e-9 * sv(0)) ++r;
    return r;
}

inline void require_open_lhp(std::span<const cplx> poles) {
    for (const cplx& p : poles)
        if (!(p.real() < 0.0)) throw Error("desired observer poles must lie in the open left half-plane");
}

}  // namespace detail

/// Observer gain K with eig(A - K C) = desired_poles, by Ackermann's formula
/// on the dual pair. Requires (A, C) observable.
inline Eigen::VectorXd place_observer_gain(const Eigen::MatrixXd& A, const Eigen::RowVectorXd& C,
                                           std::span<const cplx> desired_poles) {
    const Eigen::Index m = A.rows();
    if (A.cols() != m || C.size() != m) throw Error("place_observer_gain: dimension mismatch");
    if (static_cast<Eigen::Index>(desired_poles.size()) != m)
        throw Error("place_observer_gain: need one desired pole per state");
    detail::require_open_lhp(desired_poles);

    const Eigen::MatrixXd O = observability_matrix(A, C);
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(O);
    if (detail::numerical_rank(svd) < m) throw Error("pair not observable");

    const Polynomial p = Polynomial::from_roots(desired_poles);
    Eigen::MatrixXd pA = Eigen::MatrixXd::Zero(m, m);
    for (int k = p.degree(); k >= 0; --k)
        pA = pA * A + p[static_cast<std::size_t>(k)] * Eigen::MatrixXd::Identity(m, m);

    const Eigen::VectorXd em = Eigen::VectorXd::Unit(m, m - 1);
    return pA * O.fullPivLu().solve(em);
}

/// Numerical rank of the observability matrix of (A, C).
inline int observable_rank(const Eigen::MatrixXd& A, const Eigen::RowVectorXd& C) {
    return detail::numerical_rank(Eigen::JacobiSVD<Eigen::MatrixXd>(observability_matrix(A, C)));
}

struct DetectablePlacement {
    Eigen::VectorXd K;
    int observable_rank = 0;
    std::vector<cplx> fixed_modes;  // eigenvalues of the unobservable block
};

/// Gain placement for detectable pairs. An orthogonal observable decomposition
/// splits the state; the r observable poles are assigned by Ackermann, the
/// unobservable modes stay where they are and must be stable. `desired_poles`
/// holds either the r assignable poles or all m poles, in which case the fixed
/// modes must appear in it. The gain has no component along the unobservable
/// subspace, which makes it the minimum-norm choice.
inline DetectablePlacement place_observer_gain_detectable(const Eigen::MatrixXd& A,
                                                          const Eigen::RowVectorXd& C,
                                                          std::span<const cplx> desired_poles) {
    const Eigen::Index m = A.rows();
    if (A.cols() != m || C.size() != m) throw Error("place_observer_gain: dimension mismatch");
    detail::require_open_lhp(desired_poles);

    const Eigen::MatrixXd O = observability_matrix(A, C);
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(O, Eigen::ComputeFullV);
    const int r = detail::numerical_rank(svd);
    const Eigen::MatrixXd Qo = svd.matrixV().leftCols(r);
    const Eigen::MatrixXd Qu = svd.matrixV().rightCols(m - r);

    DetectablePlacement out;
    out.observable_rank = r;
    out.fixed_modes = eigenvalues(Qu.transpose() * A * Qu);
    for (const cplx& mode : out.fixed_modes)
        if (!(mode.real() < -1e-9)) throw Error("pair not detectable");

    std::vector<cplx> assign;
    if (static_cast<int>(desired_poles.size()) == r) {
        assign.assign(desired_poles.begin(), desired_poles.end());
    } else if (static_cast<Eigen::Index>(desired_poles.size()) == m) {
        std::vector<cplx> pool(desired_poles.begin(), desired_poles.end());
        for (const cplx& mode : out.fixed_modes) {
            auto best = std::min_element(pool.begin(), pool.end(), [&](const cplx& a, const cplx& b) {
                return std::abs(a - mode) < std::abs(b - mode);
            });
            if (best == pool.end() || std::abs(*best - mode) > 1e-6 * std::max(1.0, std::abs(mode)))
                throw Error("requested poles omit an unobservable mode, which cannot be moved");
            pool.erase(best);
        }
        assign = std::move(pool);
    } else {
        throw Error("place_observer_gain: expected " + std::to_string(r) + " assignable poles or " +
                    std::to_string(m) + " poles in total");
    }

    if (r == 0) {
        out.K = Eigen::VectorXd::Zero(m);
        return out;
    }
    const Eigen::MatrixXd Aoo = Qo.transpose() * A * Qo;
    const Eigen::RowVectorXd Co = C * Qo;
    out.K = Qo * place_observer_gain(Aoo, Co, assign);
    return out;
}

}  // namespace imdac
