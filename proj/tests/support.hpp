#pragma once

// Shared helpers for the unit suites and the acceptance binary.

#include <cmath>
#include <random>
#include <vector>

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

#include "imdac/fdi.hpp"
#include "imdac/graph.hpp"
#include "imdac/lti.hpp"
#include "imdac/sim.hpp"

namespace imdac::support {

inline Eigen::MatrixXd expm(const Eigen::MatrixXd& m) { return m.exp(); }

/// Monic real polynomial of the given degree with roots in Re in [-hi, -lo].
inline Polynomial random_stable_poly(std::mt19937_64& rng, int degree, double lo = 0.3, double hi = 3.0) {
    std::uniform_real_distribution<double> re(lo, hi), im(0.2, 2.5);
    std::vector<cplx> roots;
    while (static_cast<int>(roots.size()) < degree) {
        if (degree - static_cast<int>(roots.size()) >= 2 && rng() % 2 == 0) {
            const double a = -re(rng), b = im(rng);
            roots.emplace_back(a, b);
            roots.emplace_back(a, -b);
        } else {
            roots.emplace_back(-re(rng), 0.0);
        }
    }
    return Polynomial::from_roots(roots);
}

inline Polynomial random_poly(std::mt19937_64& rng, int degree) {
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    std::vector<double> c(static_cast<std::size_t>(degree) + 1);
    for (auto& v : c) v = u(rng);
    if (std::abs(c.back()) < 0.3) c.back() = c.back() < 0 ? -0.5 : 0.5;
    return Polynomial(c);
}

/// Random stable strictly proper transfer function of order <= max_order.
inline TransferFunction random_stable_tf(std::mt19937_64& rng, int max_order = 3) {
    const int m = 1 + static_cast<int>(rng() % static_cast<unsigned>(max_order));
    for (;;) {
        const Polynomial den = random_stable_poly(rng, m);
        const Polynomial num = random_poly(rng, m - 1);
        try {
            return TransferFunction(num, den);
        } catch (const Error&) {
        }
    }
}

/// Random simple graph on n nodes with each edge present with probability p.
inline Graph random_graph(std::mt19937_64& rng, int n, double p) {
    std::bernoulli_distribution coin(p);
    std::vector<Graph::Edge> edges;
    for (int i = 1; i <= n; ++i)
        for (int j = i + 1; j <= n; ++j)
            if (coin(rng)) edges.emplace_back(i, j);
    return Graph(n, edges);
}

/// Stand-alone extended plant and one UIO, integrated together with RK4.
/// The neighbour subsystem runs x_s' = A_s x_s - B_s u(t); the observer sees
/// y = C_s x_s + f and the corrupted drive u + f.
struct ObserverHarness {
    StateSpace sub;
    ObserverMatrices obs;
    FaultModel fault;
    double dt = 1e-3;

    template <typename Drive>
    std::vector<Eigen::VectorXd> errors(const Eigen::VectorXd& xs0, const Eigen::VectorXd& z0, Drive&& u,
                                        const std::vector<double>& times) const {
        const int m = sub.order();
        const auto onset_step = static_cast<std::size_t>(std::max(0.0, std::ceil(fault.onset / dt - 1e-9)));
        Eigen::VectorXd x(2 * m + 1);
        x << xs0, z0;
        Rk4Workspace ws;
        std::vector<Eigen::VectorXd> out;
        std::size_t next = 0;
        for (std::size_t step = 0; next < times.size(); ++step) {
            const double t = static_cast<double>(step) * dt;
            const double f_now = step >= onset_step ? fault.active_value(t) : 0.0;
            if (std::abs(t - times[next]) < 0.5 * dt) {
                Eigen::VectorXd truth(m + 1);
                truth << x.head(m), f_now;
                const double y = sub.C.dot(x.head(m)) + f_now;
                out.push_back(truth - (x.tail(m + 1) + obs.H * y));
                ++next;
            }
            rk4_step(
                [&](double tt, const Eigen::VectorXd& xx, Eigen::VectorXd& dx) {
                    const double f = step >= onset_step ? fault.active_value(tt) : 0.0;
                    const auto xs = xx.head(m);
                    const double y = sub.C.dot(xs) + f;
                    const double drive = u(tt) + f;
                    dx.resize(xx.size());
                    dx.head(m) = sub.A * xs - sub.B * u(tt);
                    Eigen::VectorXd dz(m + 1);
                    detail::observer_rates(obs, xx.tail(m + 1), y, drive, dz);
                    dx.tail(m + 1) = dz;
                },
                t, dt, x, ws);
        }
        return out;
    }
};

}  // namespace imdac::support
