#pragma once

// Edge-fault detection with unknown input observers and the accommodation
// terms that feed the fault estimates back into the consensus update.
//
// Agent i watching the link from agent l models l's subsystem state augmented
// with the link fault f as an extra state driven by the unknown input f':
//
//   x' = A x + B u + E f',   y = C x,
//   A = [[A_s, B_s], [0, 0]],  B = [-B_s; 0],  E = [0; 1],  C = [C_s, 1].
//
// For ISAC the subsystem is h(s) with u = received mu and y = received nu.
// For RAC it is g(s) with u = received nu (sent negated) and y = received eta.

#include <cmath>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "imdac/consensus.hpp"
#include "imdac/error.hpp"
#include "imdac/lti.hpp"

namespace imdac {

struct ExtendedSystem {
    Eigen::MatrixXd A;
    Eigen::VectorXd B;
    Eigen::RowVectorXd C;
    Eigen::VectorXd E;
    EstimatorKind flavor = EstimatorKind::isac;

    int size() const noexcept { return static_cast<int>(A.rows()); }
};

inline ExtendedSystem build_extended(const StateSpace& sub, EstimatorKind flavor) {
    if (sub.D != 0.0) throw Error("extended system needs a strictly proper subsystem");
    const int m = sub.order();
    ExtendedSystem ext;
    ext.flavor = flavor;
    ext.A = Eigen::MatrixXd::Zero(m + 1, m + 1);
    ext.A.topLeftCorner(m, m) = sub.A;
    ext.A.topRightCorner(m, 1) = sub.B;
    ext.B = Eigen::VectorXd::Zero(m + 1);
    ext.B.head(m) = -sub.B;
    ext.E = Eigen::VectorXd::Unit(m + 1, m);
    ext.C = Eigen::RowVectorXd(m + 1);
    ext.C << sub.C, 1.0;
    return ext;
}

inline ExtendedSystem build_extended(const EstimatorDesign& d) {
    if (d.kind() == EstimatorKind::isac) {
        if (!d.h_tf().strictly_proper()) throw Error("ISAC extended system needs a strictly proper h(s)");
        return build_extended(d.h(), EstimatorKind::isac);
    }
    if (!d.g_tf().strictly_proper()) throw Error("RAC extended system needs a strictly proper g(s)");
    return build_extended(d.g(), EstimatorKind::rac);
}

struct UioExistence {
    double CE = 0.0;
    bool rank_ok = false;
    Polynomial zero_polynomial;  // det of the Rosenbrock pencil
    std::vector<cplx> zeros;
    bool zeros_ok = false;

    bool ok() const noexcept { return rank_ok && zeros_ok; }
};

namespace detail {

inline double rosenbrock_det(const ExtendedSystem& ext, double s) {
    const int n = ext.size();
    Eigen::MatrixXd P = Eigen::MatrixXd::Zero(n + 1, n + 1);
    P.topLeftCorner(n, n) = s * Eigen::MatrixXd::Identity(n, n) - ext.A;
    P.topRightCorner(n, 1) = -ext.E;
    P.bottomLeftCorner(1, n) = ext.C;
    return P.determinant();
}

}  // namespace detail

/// rank(CE) = rank(E) and stability of the invariant zeros of (A, E, C).
/// The zeros are the roots of det [[sI - A, -E], [C, 0]], recovered by
/// evaluating the determinant at Chebyshev points and interpolating.
inline UioExistence uio_existence_check(const ExtendedSystem& ext) {
    UioExistence rep;
    rep.CE = ext.C.dot(ext.E);
    rep.rank_ok = std::abs(rep.CE) > 1e-12;

    const int npts = ext.size() + 2;  // pencil order + 1 samples
    const double radius = 1.0 + ext.A.lpNorm<Eigen::Infinity>();
    Eigen::MatrixXd V(npts, npts);
    Eigen::VectorXd vals(npts);
    for (int k = 0; k < npts; ++k) {
        const double s = radius * std::cos(std::numbers::pi * (2.0 * k + 1.0) / (2.0 * npts));
        double pw = 1.0;
        for (int j = 0; j < npts; ++j) {
            V(k, j) = pw;
            pw *= s;
        }
        vals(k) = detail::rosenbrock_det(ext, s);
    }
    const Eigen::VectorXd c = V.colPivHouseholderQr().solve(vals);
    std::vector<double> coeffs(c.data(), c.data() + c.size());
    double scale = 0.0;
    for (double v : coeffs) scale = std::max(scale, std::abs(v));
    while (!coeffs.empty() && std::abs(coeffs.back()) <= 1e-9 * scale) coeffs.pop_back();
    rep.zero_polynomial = Polynomial(coeffs);

    if (rep.zero_polynomial.is_zero()) {
        rep.zeros_ok = false;  // singular pencil: every s is a zero
        return rep;
    }
    if (rep.zero_polynomial.degree() >= 1) rep.zeros = poly_roots(rep.zero_polynomial);
    rep.zeros_ok = true;
    for (const cplx& z : rep.zeros)
        if (!(z.real() < -1e-9)) rep.zeros_ok = false;
    return rep;
}

/// Either explicit K1, or requested poles, or (both empty) the default poles.
struct ObserverSpec {
    std::vector<cplx> poles;
    std::vector<double> k1;

    friend bool operator==(const ObserverSpec&, const ObserverSpec&) = default;
};

/// Fastest-first {-3, -2.5, -2, -1.5, ...} * omega / 1.5, truncated to `count`.
inline std::vector<cplx> default_observer_poles(int count, double omega) {
    std::vector<cplx> out;
    for (int k = 0; k < count; ++k) out.emplace_back(-(3.0 - 0.5 * k) * omega / 1.5, 0.0);
    for (auto& p : out)
        if (p.real() >= 0.0) p = cplx(-0.25 * omega / 1.5, 0.0);
    return out;
}

struct ObserverMatrices {
    Eigen::MatrixXd F;
    Eigen::MatrixXd T;
    Eigen::VectorXd H;
    Eigen::VectorXd K;
    Eigen::VectorXd K1;
    Eigen::VectorXd K2;
    Eigen::VectorXd TB;  // T * B, the drive gain of the observer

    int size() const noexcept { return static_cast<int>(F.rows()); }
};

/// H = E [(CE)^T (CE)]^{-1} (CE)^T, T = I - HC, F = A - HCA - K1 C, K2 = F H, K = K1 + K2.
inline ObserverMatrices uio_design(const ExtendedSystem& ext, const ObserverSpec& spec, double omega = 1.5) {
    const UioExistence ex = uio_existence_check(ext);
    if (!ex.rank_ok) throw Error("UIO does not exist: rank(CE) != rank(E)");
    if (!ex.zeros_ok) throw Error("UIO does not exist: invariant zeros of (A, E, C) are not strictly stable");

    const int n = ext.size();
    const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(n, n);
    ObserverMatrices obs;
    obs.H = ext.E / (ex.CE * ex.CE) * ex.CE;
    obs.T = I - obs.H * ext.C;
    const Eigen::MatrixXd A0 = ext.A - obs.H * (ext.C * ext.A);

    if (!spec.k1.empty()) {
        if (static_cast<int>(spec.k1.size()) != n)
            throw Error("explicit K1 needs " + std::to_string(n) + " entries");
        obs.K1 = Eigen::Map<const Eigen::VectorXd>(spec.k1.data(), n);
    } else if (!spec.poles.empty()) {
        obs.K1 = place_observer_gain_detectable(A0, ext.C, spec.poles).K;
    } else {
        const int r = observable_rank(A0, ext.C);
        obs.K1 = place_observer_gain_detectable(A0, ext.C, default_observer_poles(r, omega)).K;
    }

    obs.F = A0 - obs.K1 * ext.C;
    if (!is_hurwitz(obs.F).stable) throw Error("observer matrix F is not Hurwitz");
    obs.K2 = obs.F * obs.H;
    obs.K = obs.K1 + obs.K2;
    obs.TB = obs.T * ext.B;
    return obs;
}

struct ObserverRates {
    Eigen::VectorXd dz;
    Eigen::VectorXd xhat;
    double fhat = 0.0;
};

namespace detail {

/// dz = F z + TB * driving + K * measured; returns fhat = (z + H measured)_last.
inline double observer_rates(const ObserverMatrices& obs, const Eigen::Ref<const Eigen::VectorXd>& z,
                             double measured, double driving, Eigen::Ref<Eigen::VectorXd> dz) {
    dz.noalias() = obs.F * z;
    dz += obs.TB * driving + obs.K * measured;
    const Eigen::Index last = z.size() - 1;
    return z(last) + obs.H(last) * measured;
}

}  // namespace detail

/// `measured` is the received output (nu~ for ISAC, eta~ for RAC); `driving`
/// is the received input (mu~ for ISAC, nu~ = -nu_l + f for RAC).
inline ObserverRates observer_derivative(const ObserverMatrices& obs, const Eigen::VectorXd& z, double measured,
                                         double driving) {
    if (z.size() != obs.size()) throw Error("observer state has the wrong length");
    ObserverRates r{Eigen::VectorXd(z.size()), z + obs.H * measured};
    detail::observer_rates(obs, z, measured, driving, r.dz);
    r.fhat = r.xhat(r.xhat.size() - 1);
    return r;
}

enum class FaultShape { constant, ramp, sin, cos };

inline std::string to_string(FaultShape s) {
    switch (s) {
        case FaultShape::constant: return "constant";
        case FaultShape::ramp: return "ramp";
        case FaultShape::sin: return "sin";
        case FaultShape::cos: return "cos";
    }
    return "?";
}

/// Directed link fault on the channel from agent `from` to agent `to`
/// (1-based). Zero up to and including `onset`.
struct FaultModel {
    int from = 1;
    int to = 2;
    double onset = 0.0;
    FaultShape shape = FaultShape::constant;
    double amplitude = 1.0;
    double frequency = 0.0;
    double phase = 0.0;
    bool symmetric = false;  // the reverse channel carries the same signal

    /// Waveform with the onset gate removed (ramp still measured from onset).
    double active_value(double t) const {
        switch (shape) {
            case FaultShape::constant: return amplitude;
            case FaultShape::ramp: return amplitude * (t - onset);
            case FaultShape::sin: return amplitude * std::sin(frequency * t + phase);
            case FaultShape::cos: return amplitude * std::cos(frequency * t + phase);
        }
        return 0.0;
    }

    double value(double t) const { return t <= onset ? 0.0 : active_value(t); }

    bool affects(int sender, int receiver) const {
        return (from == sender && to == receiver) || (symmetric && from == receiver && to == sender);
    }

    friend bool operator==(const FaultModel&, const FaultModel&) = default;
};

inline double corrupt(double value, const FaultModel& fault, double t) { return value + fault.value(t); }

/// Link 1 <-> 2 fault: 0 for t <= 25, cos(w t / 2) afterwards.
inline FaultModel reference_fault(double omega = 1.5) {
    return {1, 2, 25.0, FaultShape::cos, 1.0, 0.5 * omega, 0.0, true};
}

/// A value received over a monitored link together with its fault estimate.
struct EstimatedReception {
    double received = 0.0;
    double fhat = 0.0;
};

/// ISAC update where each monitored neighbour contributes (nu_i - nu~ + fhat).
inline IsacRates accommodate_isac(const EstimatorDesign& d, const AgentState& s, double phi, double nu_self,
                                  std::span<const double> clean_neighbor_nus,
                                  std::span<const EstimatedReception> faulty) {
    double coupling = detail::laplacian_sum(nu_self, clean_neighbor_nus);
    for (const auto& r : faulty) coupling += nu_self - r.received + r.fhat;
    return detail::isac_from_coupling(d, s, phi, coupling);
}

/// RAC update where each monitored neighbour contributes (eta_i - eta~ + fhat).
inline RacRates accommodate_rac(const EstimatorDesign& d, const AgentState& s, double phi, double eta_self,
                                std::span<const double> clean_neighbor_etas,
                                std::span<const EstimatedReception> faulty) {
    double coupling = detail::laplacian_sum(eta_self, clean_neighbor_etas);
    for (const auto& r : faulty) coupling += eta_self - r.received + r.fhat;
    return detail::rac_from_coupling(d, s, phi, coupling);
}

}  // namespace imdac
