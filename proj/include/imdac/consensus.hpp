#pragma once

// Per-agent dynamics of the internally stable (ISAC) and robust (RAC)
// internal-model average consensus estimators, the reference signals they
// track, and the design-condition verifier.

#include <cmath>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "imdac/error.hpp"
#include "imdac/lti.hpp"

namespace imdac {

enum class EstimatorKind { isac, rac };

inline std::string to_string(EstimatorKind k) { return k == EstimatorKind::isac ? "isac" : "rac"; }

/// h(s), g(s), their realizations and the internal model d(s).
/// ISAC needs h strictly proper, RAC needs g strictly proper.
class EstimatorDesign {
public:
    EstimatorDesign(EstimatorKind kind, TransferFunction h, TransferFunction g, Polynomial d)
        : kind_(kind), h_tf_(std::move(h)), g_tf_(std::move(g)), d_(std::move(d)) {
        if (kind_ == EstimatorKind::isac && !h_tf_.strictly_proper())
            throw Error("ISAC requires a strictly proper h(s)");
        if (kind_ == EstimatorKind::rac && !g_tf_.strictly_proper())
            throw Error("RAC requires a strictly proper g(s)");
        if (d_.degree() < 1) throw Error("internal model d(s) must have degree >= 1");
        h_ = tf_realize(h_tf_);
        g_ = tf_realize(g_tf_);
    }

    EstimatorKind kind() const noexcept { return kind_; }
    const TransferFunction& h_tf() const noexcept { return h_tf_; }
    const TransferFunction& g_tf() const noexcept { return g_tf_; }
    const Polynomial& d() const noexcept { return d_; }
    const StateSpace& h() const noexcept { return h_; }
    const StateSpace& g() const noexcept { return g_; }
    int m1() const noexcept { return h_.order(); }
    int m2() const noexcept { return g_.order(); }

    EstimatorDesign with_kind(EstimatorKind k) const { return {k, h_tf_, g_tf_, d_}; }

    friend bool operator==(const EstimatorDesign& a, const EstimatorDesign& b) {
        return a.kind_ == b.kind_ && a.h_tf_ == b.h_tf_ && a.g_tf_ == b.g_tf_ && a.d_ == b.d_;
    }

private:
    EstimatorKind kind_;
    TransferFunction h_tf_;
    TransferFunction g_tf_;
    Polynomial d_;
    StateSpace h_;
    StateSpace g_;
};

struct AgentState {
    Eigen::VectorXd x1;  // h(s) subsystem
    Eigen::VectorXd x2;  // g(s) subsystem

    static AgentState zero(const EstimatorDesign& d) {
        return {Eigen::VectorXd::Zero(d.m1()), Eigen::VectorXd::Zero(d.m2())};
    }
};

struct IsacRates {
    Eigen::VectorXd dx1;
    Eigen::VectorXd dx2;
    double nu = 0.0;
    double mu = 0.0;
};

struct RacRates {
    Eigen::VectorXd dx1;
    Eigen::VectorXd dx2;
    double nu = 0.0;
    double eta = 0.0;
};

namespace detail {

// `coupling` is the already-formed neighbour sum; the public wrappers and the
// network simulator only differ in how they build it.

/// Returns mu_i.
inline double isac_rates(const EstimatorDesign& d, const Eigen::Ref<const Eigen::VectorXd>& x1,
                         const Eigen::Ref<const Eigen::VectorXd>& x2, double phi, double coupling,
                         Eigen::Ref<Eigen::VectorXd> dx1, Eigen::Ref<Eigen::VectorXd> dx2) {
    const StateSpace& h = d.h();
    const StateSpace& g = d.g();
    const double mu = g.C.dot(x2) + g.D * coupling - phi;
    dx1.noalias() = h.A * x1;
    dx1 -= h.B * mu;
    dx2.noalias() = g.A * x2;
    dx2 += g.B * coupling;
    return mu;
}

/// Returns nu_i.
inline double rac_rates(const EstimatorDesign& d, const Eigen::Ref<const Eigen::VectorXd>& x1,
                        const Eigen::Ref<const Eigen::VectorXd>& x2, double phi, double coupling,
                        Eigen::Ref<Eigen::VectorXd> dx1, Eigen::Ref<Eigen::VectorXd> dx2) {
    const StateSpace& h = d.h();
    const StateSpace& g = d.g();
    const double u = phi - coupling;
    const double nu = h.C.dot(x1) + h.D * u;
    dx1.noalias() = h.A * x1;
    dx1 += h.B * u;
    dx2.noalias() = g.A * x2;
    dx2 += g.B * nu;
    return nu;
}

inline IsacRates isac_from_coupling(const EstimatorDesign& d, const AgentState& s, double phi, double coupling) {
    if (d.kind() != EstimatorKind::isac) throw Error("design is not ISAC");
    IsacRates r{Eigen::VectorXd(d.m1()), Eigen::VectorXd(d.m2())};
    r.mu = isac_rates(d, s.x1, s.x2, phi, coupling, r.dx1, r.dx2);
    r.nu = d.h().C.dot(s.x1);
    return r;
}

inline RacRates rac_from_coupling(const EstimatorDesign& d, const AgentState& s, double phi, double coupling) {
    if (d.kind() != EstimatorKind::rac) throw Error("design is not RAC");
    RacRates r{Eigen::VectorXd(d.m1()), Eigen::VectorXd(d.m2())};
    r.nu = rac_rates(d, s.x1, s.x2, phi, coupling, r.dx1, r.dx2);
    r.eta = d.g().C.dot(s.x2);
    return r;
}

inline double laplacian_sum(double self, std::span<const double> neighbors) {
    double acc = 0.0;
    for (double v : neighbors) acc += self - v;
    return acc;
}

}  // namespace detail

/// X1' = A1 X1 - B1 mu, X2' = A2 X2 + B2 sum(nu_i - nu_j),
/// mu = C2 X2 + D2 sum(nu_i - nu_j) - phi, nu = C1 X1.
inline IsacRates isac_derivative(const EstimatorDesign& d, const AgentState& s, double phi, double nu_self,
                                 std::span<const double> nu_neighbors) {
    return detail::isac_from_coupling(d, s, phi, detail::laplacian_sum(nu_self, nu_neighbors));
}

/// u = phi - sum(eta_i - eta_j), X1' = A1 X1 + B1 u, nu = C1 X1 + D1 u,
/// X2' = A2 X2 + B2 nu, eta = C2 X2.
inline RacRates rac_derivative(const EstimatorDesign& d, const AgentState& s, double phi, double eta_self,
                               std::span<const double> eta_neighbors) {
    return detail::rac_from_coupling(d, s, phi, detail::laplacian_sum(eta_self, eta_neighbors));
}

enum class Waveform { sin, cos };

/// amplitude * sin|cos(frequency * t + phase)
struct ReferenceSignal {
    double amplitude = 1.0;
    double phase = 0.0;
    double frequency = 1.0;
    Waveform waveform = Waveform::sin;

    double operator()(double t) const {
        const double arg = frequency * t + phase;
        return amplitude * (waveform == Waveform::sin ? std::sin(arg) : std::cos(arg));
    }

    /// Annihilating polynomial s^2 + w^2.
    Polynomial model() const { return Polynomial{frequency * frequency, 0.0, 1.0}; }

    friend bool operator==(const ReferenceSignal&, const ReferenceSignal&) = default;
};

/// phi_i = i sin(w t + i pi/4) for i = 1..5, i cos(w t + i pi/4) for i = 6..9.
inline std::vector<ReferenceSignal> reference_signals(double omega, int n = 9) {
    std::vector<ReferenceSignal> out;
    for (int i = 1; i <= n; ++i)
        out.push_back({static_cast<double>(i), i * std::numbers::pi / 4.0, omega,
                       i <= 5 ? Waveform::sin : Waveform::cos});
    return out;
}

inline double average_signal(std::span<const ReferenceSignal> signals, double t) {
    if (signals.empty()) throw Error("average of an empty signal set");
    double acc = 0.0;
    for (const auto& s : signals) acc += s(t);
    return acc / static_cast<double>(signals.size());
}

struct Lemma1Report {
    // premises
    double lambda2 = 0.0;
    bool connected = false;
    bool no_common_unstable_poles = false;

    std::vector<bool> cond_i;  // per declared signal
    bool cond_i_ok = true;

    bool h_stable = false;
    bool nh_minus_dh_divisible = false;
    Polynomial p;
    bool cond_ii = false;

    std::vector<double> worst_real_part;  // per lambda_i, i >= 2
    bool cond_iii = false;

    Polynomial p_g;
    bool cond_iv = false;

    bool overall = false;
};

/// Numerical check of the zero steady-state error conditions for a given
/// Laplacian spectrum (ascending, lambda_1 ~ 0). Signals, when supplied, are
/// checked for having their poles among the roots of d.
inline Lemma1Report verify_lemma1(const TransferFunction& h, const TransferFunction& g, const Polynomial& d,
                                  std::span<const double> spectrum,
                                  std::span<const ReferenceSignal> signals = {}) {
    if (d.degree() < 1) throw Error("internal model d(s) must have degree >= 1");
    if (spectrum.empty()) throw Error("empty Laplacian spectrum");
    Lemma1Report rep;

    rep.lambda2 = spectrum.size() > 1 ? spectrum[1] : 0.0;
    rep.connected = spectrum.size() == 1 || rep.lambda2 > 1e-9;

    rep.no_common_unstable_poles = true;
    if (h.den().degree() >= 1 && g.den().degree() >= 1) {
        const auto gp = poly_roots(g.den());
        for (const cplx& a : poly_roots(h.den())) {
            if (a.real() < -1e-9) continue;
            for (const cplx& b : gp)
                if (std::abs(a - b) < 1e-8 * std::max(1.0, std::abs(a))) rep.no_common_unstable_poles = false;
        }
    }

    for (const auto& s : signals) {
        const bool ok = poly_divides(d, s.model()).first;
        rep.cond_i.push_back(ok);
        rep.cond_i_ok = rep.cond_i_ok && ok;
    }

    const Polynomial& nh = h.num();
    const Polynomial& dh = h.den();
    const Polynomial& ng = g.num();
    const Polynomial& dg = g.den();

    auto [div_ii, p] = poly_divides(nh - dh, d);
    rep.nh_minus_dh_divisible = div_ii;
    rep.p = p;
    rep.h_stable = dh.degree() < 1 || [&] {
        for (const cplx& r : poly_roots(dh))
            if (!(r.real() < -1e-9)) return false;
        return true;
    }();
    rep.cond_ii = rep.nh_minus_dh_divisible && rep.h_stable;

    rep.cond_iii = true;
    const Polynomial dd = dg * dh;
    const Polynomial nn = ng * nh;
    for (std::size_t i = 1; i < spectrum.size(); ++i) {
        const Polynomial charp = dd + spectrum[i] * nn;
        double worst = -std::numeric_limits<double>::infinity();
        if (charp.degree() >= 1)
            for (const cplx& r : poly_roots(charp)) worst = std::max(worst, r.real());
        rep.worst_real_part.push_back(worst);
        if (!(worst < -1e-9)) rep.cond_iii = false;
    }

    auto [div_iv, pg] = poly_divides(dg, d);
    rep.cond_iv = div_iv;
    rep.p_g = pg;

    rep.overall = rep.connected && rep.no_common_unstable_poles && rep.cond_i_ok && rep.cond_ii &&
                  rep.cond_iii && rep.cond_iv;
    return rep;
}

/// h(s) = (2w s + 3w^2)/(s^2 + 2w s + 4w^2), g(s) = 1.5 s/(s^2 + w^2), d(s) = s^2 + w^2.
inline EstimatorDesign reference_design(EstimatorKind kind, double omega = 1.5) {
    const double w2 = omega * omega;
    return {kind, TransferFunction({3.0 * w2, 2.0 * omega}, {4.0 * w2, 2.0 * omega, 1.0}),
            TransferFunction({0.0, 1.5}, {w2, 0.0, 1.0}), Polynomial{w2, 0.0, 1.0}};
}

}  // namespace imdac
