#include <cmath>
#include <numbers>

#include <gtest/gtest.h>

#include "imdac/scenarios.hpp"
#include "imdac/sim.hpp"
#include "support.hpp"

using namespace imdac;

namespace {

Scenario short_run(Scenario s, double t_end) {
    s.t_end = t_end;
    s.window_start = 0.0;
    s.window_end = t_end;
    return s;
}

std::size_t index_of(const TimeSeries& ts, double t) {
    for (std::size_t k = 0; k < ts.t.size(); ++k)
        if (std::abs(ts.t[k] - t) < 1e-9) return k;
    throw std::runtime_error("time not recorded");
}

}  // namespace

TEST(Rk4, ScalarDecayIsFourthOrder) {
    double err_prev = 0.0;
    for (double dt : {0.1, 0.05, 0.025}) {
        Eigen::VectorXd x = Eigen::VectorXd::Ones(1);
        Rk4Workspace ws;
        const int steps = static_cast<int>(std::lround(1.0 / dt));
        for (int k = 0; k < steps; ++k)
            rk4_step([](double, const Eigen::VectorXd& xx, Eigen::VectorXd& dx) { dx = -xx; }, k * dt, dt, x, ws);
        const double err = std::abs(x(0) - std::exp(-1.0));
        if (dt == 0.025) EXPECT_LT(err, 1e-8);
        if (err_prev > 0.0) EXPECT_GT(std::log2(err_prev / err), 3.8);
        err_prev = err;
    }
}

TEST(Rk4, ObservedOrderOnNetwork) {
    Scenario s = short_run(example1(Variant::clean, EstimatorKind::rac), 2.0);
    const ConvergenceResult c = step_convergence_check(s, {0.04, 0.02, 0.01, 0.005});
    EXPECT_GE(c.order, 3.5);
    EXPECT_LT(c.errors.back(), c.errors.front());
    EXPECT_THROW(step_convergence_check(s, {0.01, 0.005}), Error);
    EXPECT_THROW(step_convergence_check(example1(Variant::fault), {0.04, 0.02, 0.01}), Error);
}

TEST(Validate, RejectsInconsistentScenarios) {
    Scenario s = example1(Variant::clean);
    s.dt = 0.0;
    EXPECT_THROW(validate(s), Error);
    s = example1(Variant::clean);
    s.t_end = 1.0005;
    EXPECT_THROW(validate(s), Error);
    s = example1(Variant::clean);
    s.signals.pop_back();
    EXPECT_THROW(validate(s), Error);
    s = example1(Variant::clean);
    s.accommodation = true;
    EXPECT_THROW(validate(s), Error);
    s = example1(Variant::fault);
    s.faults[0].to = 3;
    EXPECT_THROW(validate(s), Error);
    s = example1(Variant::clean);
    s.events.push_back({30.0005, 3, 6});
    EXPECT_THROW(validate(s), Error);
    s = example1(Variant::clean);
    s.initial.x1 = {{1.0, 2.0}};
    EXPECT_THROW(validate(s), Error);
    s = example1(Variant::fault);
    s.monitored = std::vector<Link>{{1, 3}};
    EXPECT_THROW(validate(s), Error);
    s = example1(Variant::fault);
    s.initial.z_offset = {1.0};
    EXPECT_THROW(validate(s), Error);
    s = example1(Variant::clean);
    s.window_start = 50.0;
    EXPECT_THROW(validate(s), Error);
    EXPECT_NO_THROW(validate(example2(Variant::accommodated)));
}

TEST(Run, IsDeterministic) {
    const Scenario s = short_run(example2(Variant::fault), 35.0);
    const TimeSeries a = run(s), b = run(s);
    EXPECT_EQ(a.t, b.t);
    EXPECT_EQ(a.nu, b.nu);
    EXPECT_EQ(a.final_state, b.final_state);
}

TEST(Run, RecordsStrideAndFinalSample) {
    Scenario s = short_run(example1(Variant::clean), 1.0);
    s.record_stride = 300;
    const TimeSeries ts = run(s);
    EXPECT_EQ(ts.t, (std::vector<double>{0.0, 0.3, 0.6, 0.9, 1.0}));
    EXPECT_EQ(ts.phibar.size(), 1u);
    EXPECT_NEAR(ts.phibar[0][0], 2.2896224130886904, 1e-12);
    EXPECT_NEAR(ts.err[3][0], -2.2896224130886904, 1e-12);
}

TEST(Run, MatchesExosystemMatrixExponential) {
    // Stack the linear network with oscillators generating each reference signal
    // and compare the simulated estimates with exp(M t) at t = 10.
    for (EstimatorKind kind : {EstimatorKind::isac, EstimatorKind::rac}) {
        Scenario s = short_run(example1(Variant::clean, kind), 10.0);
        const GlobalLti sys = linearize_network(s.design, s.graph);
        const Eigen::Index N = sys.A.rows();
        const int n = s.graph.size();
        Eigen::MatrixXd M = Eigen::MatrixXd::Zero(N + 2 * n, N + 2 * n);
        Eigen::VectorXd x0 = Eigen::VectorXd::Zero(N + 2 * n);
        M.topLeftCorner(N, N) = sys.A;
        Eigen::MatrixXd Cw = Eigen::MatrixXd::Zero(n, 2 * n);
        for (int i = 0; i < n; ++i) {
            const ReferenceSignal& r = s.signals[static_cast<std::size_t>(i)];
            // w = [sin(theta), cos(theta)] with theta = omega t + phase
            M(N + 2 * i, N + 2 * i + 1) = r.frequency;
            M(N + 2 * i + 1, N + 2 * i) = -r.frequency;
            x0(N + 2 * i) = std::sin(r.phase);
            x0(N + 2 * i + 1) = std::cos(r.phase);
            Cw(i, 2 * i + (r.waveform == Waveform::sin ? 0 : 1)) = r.amplitude;
        }
        M.topRightCorner(N, 2 * n) = sys.B * Cw;
        const Eigen::VectorXd xt = support::expm(M * 10.0) * x0;
        const Eigen::VectorXd nu_ref = sys.C * xt.head(N) + sys.D * Cw * xt.tail(2 * n);

        const TimeSeries ts = run(s);
        for (int i = 0; i < n; ++i)
            EXPECT_NEAR(ts.nu[static_cast<std::size_t>(i)].back(), nu_ref(i), 1e-8) << to_string(kind) << " node " << i + 1;
        EXPECT_LT((ts.final_state - xt.head(N)).cwiseAbs().maxCoeff(), 1e-8);
    }
}

TEST(Run, TopologyEventAppliesBeforeStepAndRecord) {
    Scenario s = example2(Variant::clean, EstimatorKind::rac);
    s.t_end = 31.0;
    s.window_start = 30.0;
    s.window_end = 31.0;
    const TimeSeries ts = run(s);
    ASSERT_EQ(ts.final_components.size(), 2u);
    ASSERT_EQ(ts.phibar.size(), 2u);
    const std::size_t before = index_of(ts, 29.99), at = index_of(ts, 30.0);
    // before the event both columns carry the global average
    EXPECT_DOUBLE_EQ(ts.phibar[0][before], ts.phibar[1][before]);
    // from the event sample on each column carries its own component average
    double a = 0.0, b = 0.0;
    for (int v : ts.final_components[0]) a += s.signals[static_cast<std::size_t>(v - 1)](30.0);
    for (int v : ts.final_components[1]) b += s.signals[static_cast<std::size_t>(v - 1)](30.0);
    EXPECT_NEAR(ts.phibar[0][at], a / 6.0, 1e-12);
    EXPECT_NEAR(ts.phibar[1][at], b / 3.0, 1e-12);
    EXPECT_NEAR(ts.err[5][at], ts.nu[5][at] - b / 3.0, 1e-12);
}

TEST(Run, ObserversOnRemovedEdgeGoInactive) {
    Scenario s = example2(Variant::fault, EstimatorKind::rac);
    s.t_end = 31.0;
    s.window_start = 30.0;
    s.window_end = 31.0;
    const TimeSeries ts = run(s);
    for (const auto& o : ts.observers) {
        const bool removed = (o.link == Link{3, 6} || o.link == Link{6, 3});
        EXPECT_EQ(std::isnan(o.fhat.back()), removed);
        EXPECT_FALSE(std::isnan(o.fhat[index_of(ts, 29.99)]));
    }
}

TEST(Run, FaultOnsetIsGatedByStep) {
    Scenario s = short_run(example1(Variant::fault), 0.02);
    s.faults[0].onset = 0.0105;  // first active step starts at t = 0.011
    s.record_stride = 1;
    const TimeSeries ts = run(s);
    const auto& tr = ts.observers[0];
    EXPECT_EQ(tr.f_true[index_of(ts, 0.010)], 0.0);
    EXPECT_NEAR(tr.f_true[index_of(ts, 0.011)], std::cos(0.75 * 0.011), 1e-15);
}

TEST(Run, ObserverErrorNormMatchesMatrixExponential) {
    Scenario s = short_run(example1(Variant::fault), 3.0);
    s.faults[0].onset = 1.0;
    s.initial.z_offset = {0.5, -0.5, 1.0};
    s.monitored = std::vector<Link>{{1, 2}};
    const TimeSeries ts = run(s);
    const ObserverMatrices obs = uio_design(build_extended(s.design), s.observer);
    // e(0) = x(0) - z(0) - H y(0) with zero network state
    const Eigen::Vector3d e0(-0.5, 0.5, -1.0);
    for (double t : {0.0, 0.5, 1.0, 1.5, 2.0, 3.0}) {
        const double ref = (support::expm(obs.F * t) * e0).norm();
        EXPECT_NEAR(ts.observers[0].error_norm[index_of(ts, t)], ref, 1e-7) << "t = " << t;
    }
}

TEST(Run, UnstableDesignRaisesDivergence) {
    Scenario s = example1(Variant::clean);
    s.design = EstimatorDesign(EstimatorKind::isac, TransferFunction(Polynomial{1.0}, Polynomial{-40.0, 1.0}),
                               s.design.g_tf(), s.design.d());
    s.t_end = 50.0;
    try {
        run(s);
        FAIL() << "expected divergence";
    } catch (const DivergenceError& e) {
        EXPECT_GT(e.time(), 0.0);
        EXPECT_EQ(std::string(e.what()).rfind("divergence at t=", 0), 0u);
    }
}

TEST(Run, WarnsWhenDesignConditionsFail) {
    Scenario s = short_run(example1(Variant::clean), 0.1);
    s.graph = remove_edge(s.graph, 3, 6);
    EXPECT_FALSE(run(s).warnings.empty());
    EXPECT_TRUE(run(short_run(example1(Variant::clean), 0.1)).warnings.empty());
}

TEST(Metrics, WindowChecks) {
    const TimeSeries ts = run(short_run(example1(Variant::clean), 1.0));
    EXPECT_THROW(metrics(ts, 0.0, 2.0), Error);
    EXPECT_THROW(metrics(ts, 0.5, 0.4), Error);
    EXPECT_THROW(metrics(ts, 0.501, 0.505), Error);
    const MetricsReport m = metrics(ts, 0.0, 1.0);
    EXPECT_EQ(m.rms_err.size(), 9u);
    EXPECT_GE(m.max_abs_err[0], m.rms_err[0]);
}

TEST(Linearization, MatchesGlobalTransferFunction) {
    std::mt19937_64 rng(41);
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    const Graph g = reference_graph();
    const Eigen::MatrixXcd L = laplacian(g).L.cast<cplx>();
    const Eigen::MatrixXcd I = Eigen::MatrixXcd::Identity(9, 9);
    Eigen::MatrixXcd first;
    const cplx s0(0.3, 0.8);
    for (EstimatorKind kind : {EstimatorKind::isac, EstimatorKind::rac}) {
        const EstimatorDesign d = reference_design(kind);
        const GlobalLti sys = linearize_network(d, g);
        for (int k = 0; k < 5; ++k) {
            const cplx s(u(rng), u(rng));
            const cplx hs = d.h_tf()(s), gs = d.g_tf()(s);
            const Eigen::MatrixXcd ref = (I + hs * gs * L).lu().solve(hs * I);
            EXPECT_LT((sys.eval(s) - ref).cwiseAbs().maxCoeff(), 1e-8);
        }
        if (kind == EstimatorKind::isac) first = sys.eval(s0);
        else EXPECT_LT((sys.eval(s0) - first).cwiseAbs().maxCoeff(), 1e-10);
    }
}

TEST(InternalState, IsacBoundedRacGrowing) {
    const TimeSeries i = run(example1(Variant::clean, EstimatorKind::isac));
    const TimeSeries r = run(example1(Variant::clean, EstimatorKind::rac));
    auto peak = [](const TimeSeries& ts, double a, double b) {
        const auto v = metrics(ts, a, b).max_x2norm;
        return *std::max_element(v.begin(), v.end());
    };
    EXPECT_LT(peak(i, 0.0, 50.0), 10.0 * peak(i, 0.0, 10.0));
    EXPECT_GT(peak(r, 40.0, 50.0), 2.0 * peak(r, 0.0, 10.0));
}
