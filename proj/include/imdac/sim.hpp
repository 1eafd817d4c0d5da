#pragma once

// Fixed-step RK4 simulation of a consensus network with per-link unknown input
// observers, edge faults, fault accommodation and edge-removal events.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "imdac/consensus.hpp"
#include "imdac/error.hpp"
#include "imdac/fdi.hpp"
#include "imdac/graph.hpp"
#include "imdac/lti.hpp"

namespace imdac {

using Link = std::pair<int, int>;  // directed (from, to), 1-based

struct TopologyEvent {
    double time = 0.0;
    int i = 0;
    int j = 0;

    friend bool operator==(const TopologyEvent&, const TopologyEvent&) = default;
};

struct InitialConditions {
    std::vector<std::vector<double>> x1;  // per agent, empty = zeros
    std::vector<std::vector<double>> x2;
    std::vector<double> z_offset;  // added to every observer's z(0), empty = zeros

    friend bool operator==(const InitialConditions&, const InitialConditions&) = default;
};

struct Scenario {
    Graph graph = reference_graph();
    EstimatorDesign design = reference_design(EstimatorKind::isac);
    double omega = 1.5;
    std::vector<ReferenceSignal> signals = reference_signals(1.5);
    std::vector<FaultModel> faults;
    std::vector<TopologyEvent> events;

    bool observers = false;
    std::optional<std::vector<Link>> monitored;  // nullopt = every in-link
    ObserverSpec observer;
    bool accommodation = false;

    InitialConditions initial;
    double dt = 1e-3;
    double t_end = 50.0;
    int record_stride = 10;
    double window_start = 40.0;
    double window_end = 50.0;

    friend bool operator==(const Scenario&, const Scenario&) = default;
};

struct ObserverTrace {
    Link link;
    std::vector<double> fhat;
    std::vector<double> f_true;
    std::vector<double> error_norm;  // |x - xhat|, harness-side truth
};

struct TimeSeries {
    int n = 0;
    std::vector<double> t;
    std::vector<std::vector<double>> nu;      // [node][sample]
    std::vector<std::vector<double>> err;     // nu_i - component average
    std::vector<std::vector<double>> x2norm;  // |X2_i|
    std::vector<std::vector<double>> phibar;  // [final component][sample]
    std::vector<std::vector<int>> final_components;
    std::vector<ObserverTrace> observers;
    Eigen::VectorXd final_state;
    std::vector<std::string> warnings;
};

inline std::size_t step_count(double t_end, double dt) {
    const double r = t_end / dt;
    const double n = std::round(r);
    if (std::abs(r - n) > 1e-6 * std::max(1.0, r)) throw Error("t_end must be an integer multiple of dt");
    return static_cast<std::size_t>(n);
}

inline void validate(const Scenario& s) {
    if (!(s.dt > 0.0)) throw Error("dt must be positive");
    if (!(s.t_end > 0.0)) throw Error("t_end must be positive");
    step_count(s.t_end, s.dt);
    if (s.record_stride < 1) throw Error("record_stride must be >= 1");
    const int n = s.graph.size();
    if (static_cast<int>(s.signals.size()) != n)
        throw Error("need one reference signal per node (" + std::to_string(n) + ")");
    for (const auto& sig : s.signals)
        if (!(sig.frequency > 0.0)) throw Error("reference signal frequency must be positive");
    for (const auto& ev : s.events) {
        if (ev.time < 0.0 || ev.time > s.t_end) throw Error("event time outside [0, t_end]");
        const double r = ev.time / s.dt;
        if (std::abs(r - std::round(r)) > 1e-6) throw Error("event time must be a multiple of dt");
    }
    for (const auto& f : s.faults)
        if (!s.graph.has_edge(f.from, f.to))
            throw Error("fault on link " + std::to_string(f.from) + "->" + std::to_string(f.to) +
                        " which is not an edge");
    if (s.monitored)
        for (auto [a, b] : *s.monitored)
            if (!s.graph.has_edge(a, b))
                throw Error("monitored link " + std::to_string(a) + "->" + std::to_string(b) + " is not an edge");
    if (s.accommodation && !s.observers) throw Error("accommodation needs observers");
    auto check_ic = [&](const std::vector<std::vector<double>>& v, int dim, const char* what) {
        if (v.empty()) return;
        if (static_cast<int>(v.size()) != n) throw Error(std::string(what) + " needs one row per agent");
        for (const auto& row : v)
            if (static_cast<int>(row.size()) != dim)
                throw Error(std::string(what) + " rows need " + std::to_string(dim) + " entries");
    };
    check_ic(s.initial.x1, s.design.m1(), "initial x1");
    check_ic(s.initial.x2, s.design.m2(), "initial x2");
    const int ne = (s.design.kind() == EstimatorKind::isac ? s.design.m1() : s.design.m2()) + 1;
    if (!s.initial.z_offset.empty() && static_cast<int>(s.initial.z_offset.size()) != ne)
        throw Error("observer z offset needs " + std::to_string(ne) + " entries");
    if (!(s.window_start < s.window_end)) throw Error("metrics window must have start < end");
}

struct Rk4Workspace {
    Eigen::VectorXd k1, k2, k3, k4, tmp;
};

/// One classical RK4 step; `f(t, x, dx)` writes the derivative into dx.
template <typename Deriv>
void rk4_step(Deriv&& f, double t, double dt, Eigen::VectorXd& x, Rk4Workspace& ws) {
    const Eigen::Index n = x.size();
    ws.k1.resize(n);
    ws.k2.resize(n);
    ws.k3.resize(n);
    ws.k4.resize(n);
    f(t, x, ws.k1);
    ws.tmp = x + 0.5 * dt * ws.k1;
    f(t + 0.5 * dt, ws.tmp, ws.k2);
    ws.tmp = x + 0.5 * dt * ws.k2;
    f(t + 0.5 * dt, ws.tmp, ws.k3);
    ws.tmp = x + dt * ws.k3;
    f(t + dt, ws.tmp, ws.k4);
    x += (dt / 6.0) * (ws.k1 + 2.0 * ws.k2 + 2.0 * ws.k3 + ws.k4);
}

namespace detail {

struct LinkFault {
    Link link;
    std::size_t onset_step = 0;
    FaultModel model;
};

/// Stacked network state and its derivative. Layout: per agent [X1 | X2],
/// then one block of (m+1) per observer.
class NetworkModel {
public:
    struct Outputs {
        std::vector<double> nu;
        std::vector<double> fhat;    // per observer, NaN when inactive
        std::vector<double> f_true;  // per observer
        std::vector<double> xerr;    // per observer
    };

    explicit NetworkModel(const Scenario& s)
        : s_(s), design_(s.design), n_(s.graph.size()), m1_(design_.m1()), m2_(design_.m2()) {
        const bool isac = design_.kind() == EstimatorKind::isac;
        ne_ = (isac ? m1_ : m2_) + 1;
        if (s.observers) {
            ext_ = build_extended(design_);
            obs_ = uio_design(*ext_, s.observer, s.omega);
            std::vector<Link> links;
            if (s.monitored) {
                links = *s.monitored;
            } else {
                for (auto [a, b] : s.graph.edges()) {
                    links.emplace_back(a, b);
                    links.emplace_back(b, a);
                }
                std::sort(links.begin(), links.end(), [](const Link& x, const Link& y) {
                    return std::pair(x.second, x.first) < std::pair(y.second, y.first);
                });
            }
            for (const Link& l : links) {
                observer_of_[l] = static_cast<int>(observer_links_.size());
                observer_links_.push_back(l);
                observer_active_.push_back(true);
            }
        }
        for (const auto& f : s.faults) {
            const auto onset_step = static_cast<std::size_t>(std::max(0.0, std::ceil(f.onset / s.dt - 1e-9)));
            faults_.push_back({{f.from, f.to}, onset_step, f});
            if (f.symmetric) faults_.push_back({{f.to, f.from}, onset_step, f});
        }
        set_graph(s.graph);
        phi_.resize(static_cast<std::size_t>(n_));
        nu_.resize(static_cast<std::size_t>(n_));
        aux_.resize(static_cast<std::size_t>(n_));
    }

    int agent_block() const { return m1_ + m2_; }
    Eigen::Index state_size() const {
        return static_cast<Eigen::Index>(n_) * agent_block() + static_cast<Eigen::Index>(observer_links_.size()) * ne_;
    }
    const std::vector<Link>& observer_links() const { return observer_links_; }
    const Graph& graph() const { return graph_; }
    int observer_size() const { return ne_; }
    Eigen::Index observer_offset(std::size_t o) const {
        return static_cast<Eigen::Index>(n_) * agent_block() + static_cast<Eigen::Index>(o) * ne_;
    }

    void set_graph(const Graph& g) {
        graph_ = g;
        neighbors_.assign(static_cast<std::size_t>(n_), {});
        for (int i = 1; i <= n_; ++i)
            for (int j : g.neighbors(i)) neighbors_[static_cast<std::size_t>(i - 1)].push_back(j - 1);
        for (std::size_t o = 0; o < observer_links_.size(); ++o)
            if (!g.has_edge(observer_links_[o].first, observer_links_[o].second)) observer_active_[o] = false;
    }

    Eigen::VectorXd initial_state() const {
        Eigen::VectorXd x = Eigen::VectorXd::Zero(state_size());
        for (int k = 0; k < n_; ++k) {
            const auto ks = static_cast<std::size_t>(k);
            if (!s_.initial.x1.empty())
                x.segment(k * agent_block(), m1_) = Eigen::Map<const Eigen::VectorXd>(s_.initial.x1[ks].data(), m1_);
            if (!s_.initial.x2.empty())
                x.segment(k * agent_block() + m1_, m2_) =
                    Eigen::Map<const Eigen::VectorXd>(s_.initial.x2[ks].data(), m2_);
        }
        if (!s_.initial.z_offset.empty())
            for (std::size_t o = 0; o < observer_links_.size(); ++o)
                x.segment(observer_offset(o), ne_) = Eigen::Map<const Eigen::VectorXd>(s_.initial.z_offset.data(), ne_);
        return x;
    }

    double fault_on(int sender, int receiver, double t, std::size_t step) const {
        double f = 0.0;
        for (const auto& lf : faults_)
            if (lf.link.first == sender && lf.link.second == receiver && step >= lf.onset_step)
                f += lf.model.active_value(t);
        return f;
    }

    /// Evaluates the network at (t, x). Faults are gated by the step index so a
    /// fault onset never falls inside an RK4 step. Either output may be null.
    void evaluate(double t, std::size_t step, const Eigen::VectorXd& x, std::span<const double> phi,
                  Eigen::VectorXd* dx, Outputs* out) {
        const bool isac = design_.kind() == EstimatorKind::isac;
        const StateSpace& h = design_.h();
        const StateSpace& g = design_.g();
        const int blk = agent_block();
        if (dx) dx->resize(x.size());

        auto x1 = [&](int k) { return x.segment(k * blk, m1_); };
        auto x2 = [&](int k) { return x.segment(k * blk + m1_, m2_); };

        // value agent k transmits on the consensus channel: nu (ISAC) or eta (RAC)
        if (isac)
            for (int k = 0; k < n_; ++k) nu_[static_cast<std::size_t>(k)] = h.C.dot(x1(k));
        else
            for (int k = 0; k < n_; ++k) aux_[static_cast<std::size_t>(k)] = g.C.dot(x2(k));
        const std::vector<double>& sent = isac ? nu_ : aux_;

        Eigen::VectorXd scratch1(m1_), scratch2(m2_);
        for (int i = 0; i < n_; ++i) {
            const auto is = static_cast<std::size_t>(i);
            double coupling = 0.0;
            for (int l : neighbors_[is]) {
                const double recv = sent[static_cast<std::size_t>(l)] + fault_on(l + 1, i + 1, t, step);
                double term = sent[is] - recv;
                if (s_.accommodation) {
                    const auto it = observer_of_.find({l + 1, i + 1});
                    if (it != observer_of_.end() && observer_active_[static_cast<std::size_t>(it->second)]) {
                        const auto o = static_cast<std::size_t>(it->second);
                        term += x(observer_offset(o) + ne_ - 1) + obs_->H(ne_ - 1) * recv;
                    }
                }
                coupling += term;
            }
            auto d1 = dx ? dx->segment(i * blk, m1_) : scratch1.segment(0, m1_);
            auto d2 = dx ? dx->segment(i * blk + m1_, m2_) : scratch2.segment(0, m2_);
            if (isac)
                aux_[is] = isac_rates(design_, x1(i), x2(i), phi[is], coupling, d1, d2);  // mu_i
            else
                nu_[is] = rac_rates(design_, x1(i), x2(i), phi[is], coupling, d1, d2);
        }

        if (out) {
            out->nu = nu_;
            out->fhat.assign(observer_links_.size(), std::numeric_limits<double>::quiet_NaN());
            out->f_true.assign(observer_links_.size(), 0.0);
            out->xerr.assign(observer_links_.size(), std::numeric_limits<double>::quiet_NaN());
        }
        Eigen::VectorXd dz_scratch(ne_);
        for (std::size_t o = 0; o < observer_links_.size(); ++o) {
            const Eigen::Index off = observer_offset(o);
            if (!observer_active_[o]) {
                if (dx) dx->segment(off, ne_).setZero();
                continue;
            }
            const int l = observer_links_[o].first - 1;
            const int i = observer_links_[o].second - 1;
            const auto ls = static_cast<std::size_t>(l);
            const double f = fault_on(l + 1, i + 1, t, step);
            // ISAC: measured nu~ = nu_l + f, driving mu~ = mu_l + f
            // RAC:  measured eta~ = eta_l + f, driving nu~ = -nu_l + f
            const double measured = isac ? nu_[ls] + f : aux_[ls] + f;
            const double driving = isac ? aux_[ls] + f : -nu_[ls] + f;
            const auto z = x.segment(off, ne_);
            auto dz = dx ? dx->segment(off, ne_) : dz_scratch.segment(0, ne_);
            const double fhat = observer_rates(*obs_, z, measured, driving, dz);
            if (out) {
                out->fhat[o] = fhat;
                out->f_true[o] = f;
                Eigen::VectorXd truth(ne_);
                truth << (isac ? x1(l) : x2(l)), f;
                out->xerr[o] = (truth - (z + obs_->H * measured)).norm();
            }
        }
    }

    const std::optional<ObserverMatrices>& observer_matrices() const { return obs_; }

private:
    const Scenario& s_;
    const EstimatorDesign& design_;
    int n_, m1_, m2_, ne_ = 0;
    Graph graph_;
    std::vector<std::vector<int>> neighbors_;
    std::optional<ExtendedSystem> ext_;
    std::optional<ObserverMatrices> obs_;
    std::vector<Link> observer_links_;
    std::vector<bool> observer_active_;
    std::map<Link, int> observer_of_;
    std::vector<LinkFault> faults_;
    std::vector<double> phi_, nu_, aux_;  // aux = mu (ISAC) or eta (RAC)
};

inline std::string format_time(double t) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.9g", t);
    return buf;
}

}  // namespace detail

/// Integrates the scenario with fixed-step RK4. Topology events apply before
/// the step that starts at their time. Throws DivergenceError on NaN/Inf.
inline TimeSeries run(const Scenario& s) {
    validate(s);
    detail::NetworkModel model(s);
    const std::size_t steps = step_count(s.t_end, s.dt);
    const int n = s.graph.size();

    TimeSeries ts;
    ts.n = n;
    {
        const Laplacian lap = laplacian(s.graph);
        std::vector<double> spec(lap.eigenvalues.data(), lap.eigenvalues.data() + lap.eigenvalues.size());
        try {
            const Lemma1Report rep = verify_lemma1(s.design.h_tf(), s.design.g_tf(), s.design.d(), spec, s.signals);
            if (!rep.overall) ts.warnings.push_back("design conditions for zero steady-state error are not met");
        } catch (const Error& e) {
            ts.warnings.push_back(std::string("design check failed: ") + e.what());
        }
    }

    std::vector<std::pair<std::size_t, TopologyEvent>> events;
    for (const auto& ev : s.events) events.emplace_back(static_cast<std::size_t>(std::llround(ev.time / s.dt)), ev);
    std::stable_sort(events.begin(), events.end(), [](const auto& a, const auto& b) { return a.first < b.first; });

    {
        Graph g = s.graph;
        for (const auto& [step, ev] : events) g = remove_edge(g, ev.i, ev.j);
        ts.final_components = components(g);
    }
    const std::size_t ncomp = ts.final_components.size();
    ts.nu.assign(static_cast<std::size_t>(n), {});
    ts.err.assign(static_cast<std::size_t>(n), {});
    ts.x2norm.assign(static_cast<std::size_t>(n), {});
    ts.phibar.assign(ncomp, {});
    for (const Link& l : model.observer_links()) ts.observers.push_back({l, {}, {}, {}});

    Eigen::VectorXd x = model.initial_state();
    std::vector<double> phi(static_cast<std::size_t>(n));
    auto fill_phi = [&](double t) {
        for (int k = 0; k < n; ++k) phi[static_cast<std::size_t>(k)] = s.signals[static_cast<std::size_t>(k)](t);
    };
    std::vector<std::vector<int>> comps = components(model.graph());
    detail::NetworkModel::Outputs out;

    auto record = [&](std::size_t step, double t) {
        fill_phi(t);
        model.evaluate(t, step, x, phi, nullptr, &out);
        ts.t.push_back(t);
        std::vector<double> target(static_cast<std::size_t>(n));
        for (const auto& c : comps) {
            double acc = 0.0;
            for (int v : c) acc += phi[static_cast<std::size_t>(v - 1)];
            acc /= static_cast<double>(c.size());
            for (int v : c) target[static_cast<std::size_t>(v - 1)] = acc;
        }
        const int blk = model.agent_block();
        for (int k = 0; k < n; ++k) {
            const auto ks = static_cast<std::size_t>(k);
            ts.nu[ks].push_back(out.nu[ks]);
            ts.err[ks].push_back(out.nu[ks] - target[ks]);
            ts.x2norm[ks].push_back(x.segment(k * blk + s.design.m1(), s.design.m2()).norm());
        }
        for (std::size_t c = 0; c < ncomp; ++c)
            ts.phibar[c].push_back(target[static_cast<std::size_t>(ts.final_components[c].front() - 1)]);
        for (std::size_t o = 0; o < ts.observers.size(); ++o) {
            ts.observers[o].fhat.push_back(out.fhat[o]);
            ts.observers[o].f_true.push_back(out.f_true[o]);
            ts.observers[o].error_norm.push_back(out.xerr[o]);
        }
    };

    Rk4Workspace ws;
    std::size_t next_event = 0;
    for (std::size_t step = 0;; ++step) {
        const double t = static_cast<double>(step) * s.dt;
        bool changed = false;
        while (next_event < events.size() && events[next_event].first == step) {
            const auto& ev = events[next_event].second;
            model.set_graph(remove_edge(model.graph(), ev.i, ev.j));
            ++next_event;
            changed = true;
        }
        if (changed) comps = components(model.graph());
        if (step % static_cast<std::size_t>(s.record_stride) == 0 || step == steps) record(step, t);
        if (step == steps) break;

        rk4_step(
            [&](double tt, const Eigen::VectorXd& xx, Eigen::VectorXd& dx) {
                fill_phi(tt);
                model.evaluate(tt, step, xx, phi, &dx, nullptr);
            },
            t, s.dt, x, ws);
        if (!x.allFinite()) {
            const double tf = t + s.dt;
            throw DivergenceError(tf, "divergence at t=" + detail::format_time(tf));
        }
    }
    ts.final_state = x;
    return ts;
}

/// Fault-free input-to-estimate LTI map of the whole network,
/// x' = A x + B phi, nu = C x + D phi, assembled by probing the per-agent
/// derivative with unit vectors.
struct GlobalLti {
    Eigen::MatrixXd A, B, C, D;

    /// C (sI - A)^{-1} B + D
    Eigen::MatrixXcd eval(cplx s) const {
        const Eigen::Index m = A.rows();
        const Eigen::MatrixXcd M = s * Eigen::MatrixXcd::Identity(m, m) - A.cast<cplx>();
        return C.cast<cplx>() * M.partialPivLu().solve(B.cast<cplx>()) + D.cast<cplx>();
    }
};

inline GlobalLti linearize_network(const EstimatorDesign& design, const Graph& graph) {
    Scenario s;
    s.graph = graph;
    s.design = design;
    s.signals.assign(static_cast<std::size_t>(graph.size()), ReferenceSignal{});
    detail::NetworkModel model(s);
    const Eigen::Index N = model.state_size();
    const int n = graph.size();
    GlobalLti sys{Eigen::MatrixXd(N, N), Eigen::MatrixXd(N, n), Eigen::MatrixXd(n, N), Eigen::MatrixXd(n, n)};
    std::vector<double> phi(static_cast<std::size_t>(n), 0.0);
    Eigen::VectorXd dx;
    detail::NetworkModel::Outputs out;
    for (Eigen::Index j = 0; j < N; ++j) {
        model.evaluate(0.0, 0, Eigen::VectorXd::Unit(N, j), phi, &dx, &out);
        sys.A.col(j) = dx;
        for (int k = 0; k < n; ++k) sys.C(k, j) = out.nu[static_cast<std::size_t>(k)];
    }
    const Eigen::VectorXd zero = Eigen::VectorXd::Zero(N);
    for (int k = 0; k < n; ++k) {
        std::fill(phi.begin(), phi.end(), 0.0);
        phi[static_cast<std::size_t>(k)] = 1.0;
        model.evaluate(0.0, 0, zero, phi, &dx, &out);
        sys.B.col(k) = dx;
        for (int r = 0; r < n; ++r) sys.D(r, k) = out.nu[static_cast<std::size_t>(r)];
    }
    return sys;
}

struct ObserverMetrics {
    Link link;
    double fhat_rms_error = 0.0;
};

struct MetricsReport {
    double start = 0.0;
    double end = 0.0;
    std::vector<double> rms_err;     // per node
    std::vector<double> max_abs_err;  // per node
    std::vector<double> max_x2norm;   // per node
    std::vector<ObserverMetrics> observers;

    double worst_rms() const { return rms_err.empty() ? 0.0 : *std::max_element(rms_err.begin(), rms_err.end()); }
};

/// RMS and maxima over recorded samples with start <= t <= end.
inline MetricsReport metrics(const TimeSeries& ts, double start, double end) {
    if (ts.t.empty()) throw Error("empty time series");
    const double eps = 1e-9 * std::max(1.0, std::abs(ts.t.back()));
    if (start < ts.t.front() - eps || end > ts.t.back() + eps || !(start <= end))
        throw Error("metrics window outside the recorded range");
    std::vector<std::size_t> idx;
    for (std::size_t k = 0; k < ts.t.size(); ++k)
        if (ts.t[k] >= start - eps && ts.t[k] <= end + eps) idx.push_back(k);
    if (idx.empty()) throw Error("empty metrics window");

    auto rms = [&](const std::vector<double>& v) {
        double acc = 0.0;
        for (std::size_t k : idx) acc += v[k] * v[k];
        return std::sqrt(acc / static_cast<double>(idx.size()));
    };
    auto maxabs = [&](const std::vector<double>& v) {
        double m = 0.0;
        for (std::size_t k : idx) m = std::max(m, std::abs(v[k]));
        return m;
    };

    MetricsReport rep;
    rep.start = start;
    rep.end = end;
    for (int i = 0; i < ts.n; ++i) {
        const auto is = static_cast<std::size_t>(i);
        rep.rms_err.push_back(rms(ts.err[is]));
        rep.max_abs_err.push_back(maxabs(ts.err[is]));
        rep.max_x2norm.push_back(maxabs(ts.x2norm[is]));
    }
    for (const auto& o : ts.observers) {
        std::vector<double> diff(o.fhat.size());
        for (std::size_t k = 0; k < diff.size(); ++k) diff[k] = o.fhat[k] - o.f_true[k];
        rep.observers.push_back({o.link, rms(diff)});
    }
    return rep;
}

struct ConvergenceResult {
    double order = 0.0;
    std::vector<double> dts;     // descending
    std::vector<double> errors;  // final-state error vs the extrapolated reference
};

/// Observed RK4 order from final states at successively refined steps.
/// Order comes from ratios of successive differences; errors are measured
/// against the Richardson extrapolation of the two finest runs.
inline ConvergenceResult step_convergence_check(Scenario s, std::vector<double> dts) {
    if (dts.size() < 3) throw Error("convergence check needs at least three step sizes");
    if (!s.events.empty() || !s.faults.empty()) throw Error("convergence check needs a smooth scenario");
    std::sort(dts.begin(), dts.end(), std::greater<>());
    std::vector<Eigen::VectorXd> finals;
    for (double dt : dts) {
        s.dt = dt;
        s.record_stride = static_cast<int>(step_count(s.t_end, dt));
        finals.push_back(run(s).final_state);
    }
    ConvergenceResult res;
    res.dts = dts;
    double slope_acc = 0.0;
    int slope_n = 0;
    for (std::size_t k = 0; k + 2 < finals.size(); ++k) {
        const double d1 = (finals[k] - finals[k + 1]).norm();
        const double d2 = (finals[k + 1] - finals[k + 2]).norm();
        slope_acc += std::log(d1 / d2) / std::log(dts[k + 1] / dts[k + 2]);
        ++slope_n;
    }
    res.order = slope_acc / slope_n;
    const std::size_t last = finals.size() - 1;
    const double r = std::pow(dts[last - 1] / dts[last], res.order);
    const Eigen::VectorXd ref = finals[last] + (finals[last] - finals[last - 1]) / (r - 1.0);
    for (const auto& f : finals) res.errors.push_back((f - ref).norm());
    return res;
}

}  // namespace imdac
