#pragma once

// Command implementations behind the imdac executable. Each returns the
// process exit code: 0 ok, 1 configuration error, 2 divergence, 3 failed check.

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <string>

#include "imdac/error.hpp"
#include "imdac/fdi.hpp"
#include "imdac/scenario_io.hpp"
#include "imdac/sim.hpp"

namespace imdac::cli {

enum Exit : int { ok = 0, config_error = 1, diverged = 2, check_failed = 3 };

struct Overrides {
    std::optional<double> dt;
    std::optional<double> t_end;
};

namespace detail {

inline std::string g9(double v) {
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 9);
    return std::string(buf, ptr);
}

inline std::string g6(double v) {
    if (std::abs(v) < 5e-13) v = 0.0;
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 6);
    return std::string(buf, ptr);
}

inline std::string g6(cplx z) {
    if (std::abs(z.imag()) < 5e-13) return g6(z.real());
    return g6(z.real()) + (z.imag() < 0 ? " - " : " + ") + g6(std::abs(z.imag())) + "i";
}

inline std::string vec6(const Eigen::VectorXd& v) {
    std::string out = "[";
    for (Eigen::Index k = 0; k < v.size(); ++k) out += (k ? ", " : "") + g6(v(k));
    return out + "]";
}

inline std::string mat6(const Eigen::MatrixXd& m) {
    std::string out = "[";
    for (Eigen::Index r = 0; r < m.rows(); ++r) out += (r ? ", " : "") + vec6(m.row(r).transpose());
    return out + "]";
}

inline std::string window_tag(double a, double b) { return g9(a) + "_" + g9(b); }

inline std::string yes(bool b) { return b ? "yes" : "no"; }

inline Scenario load(const std::string& arg, const Overrides& ov) {
    Scenario s = load_scenario(arg);
    if (ov.dt) s.dt = *ov.dt;
    if (ov.t_end) {
        s.t_end = *ov.t_end;
        // a window that no longer fits becomes the last fifth of the run
        if (s.window_end > s.t_end) {
            s.window_start = 0.8 * s.t_end;
            s.window_end = s.t_end;
        }
    }
    validate(s);
    return s;
}

inline void write_trajectory(const TimeSeries& ts, const std::filesystem::path& file) {
    std::ofstream out(file);
    if (!out) throw Error("cannot write " + file.string());
    out << "t";
    for (int i = 1; i <= ts.n; ++i) out << ",nu_" << i;
    for (int i = 1; i <= ts.n; ++i) out << ",err_" << i;
    for (std::size_t c = 1; c <= ts.phibar.size(); ++c) out << ",phibar_" << c;
    for (const auto& o : ts.observers) out << ",fhat_" << o.link.first << "_" << o.link.second;
    for (int i = 1; i <= ts.n; ++i) out << ",x2norm_" << i;
    out << "\n";
    for (std::size_t k = 0; k < ts.t.size(); ++k) {
        out << g9(ts.t[k]);
        for (const auto& v : ts.nu) out << "," << g9(v[k]);
        for (const auto& v : ts.err) out << "," << g9(v[k]);
        for (const auto& v : ts.phibar) out << "," << g9(v[k]);
        for (const auto& o : ts.observers) out << "," << g9(o.fhat[k]);
        for (const auto& v : ts.x2norm) out << "," << g9(v[k]);
        out << "\n";
    }
}

inline void write_metrics(const Scenario& s, const TimeSeries& ts, const std::filesystem::path& file) {
    std::ofstream out(file);
    if (!out) throw Error("cannot write " + file.string());
    out << "estimator = " << to_string(s.design.kind()) << "\n";
    out << "components = " << ts.final_components.size() << "\n";
    out << "samples = " << ts.t.size() << "\n";

    const MetricsReport m = metrics(ts, s.window_start, s.window_end);
    const std::string w = window_tag(m.start, m.end);
    for (int i = 0; i < ts.n; ++i) out << "rms_err_node" << i + 1 << "_" << w << " = " << g9(m.rms_err[static_cast<std::size_t>(i)]) << "\n";
    for (int i = 0; i < ts.n; ++i)
        out << "max_abs_err_node" << i + 1 << "_" << w << " = " << g9(m.max_abs_err[static_cast<std::size_t>(i)]) << "\n";
    out << "rms_err_worst_" << w << " = " << g9(m.worst_rms()) << "\n";
    for (int i = 0; i < ts.n; ++i)
        out << "max_x2norm_node" << i + 1 << "_" << w << " = " << g9(m.max_x2norm[static_cast<std::size_t>(i)]) << "\n";
    if (s.t_end >= 10.0) {
        const MetricsReport early = metrics(ts, 0.0, 10.0);
        for (int i = 0; i < ts.n; ++i)
            out << "max_x2norm_node" << i + 1 << "_0_10 = " << g9(early.max_x2norm[static_cast<std::size_t>(i)]) << "\n";
    }
    for (const auto& o : m.observers)
        out << "rms_fhat_err_" << o.link.first << "_" << o.link.second << "_" << w << " = " << g9(o.fhat_rms_error) << "\n";
}

}  // namespace detail

inline int cmd_run(const std::string& scenario, const std::string& out_dir, const Overrides& ov, std::ostream& out,
                   std::ostream& err) {
    Scenario s;
    try {
        s = detail::load(scenario, ov);
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return config_error;
    }
    TimeSeries ts;
    try {
        ts = run(s);
    } catch (const DivergenceError& e) {
        err << "error: " << e.what() << "\n";
        return diverged;
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return config_error;
    }
    for (const auto& w : ts.warnings) err << "warning: " << w << "\n";
    try {
        const std::filesystem::path dir(out_dir);
        std::filesystem::create_directories(dir);
        detail::write_trajectory(ts, dir / "trajectory.csv");
        detail::write_metrics(s, ts, dir / "metrics.txt");
        const MetricsReport m = metrics(ts, s.window_start, s.window_end);
        out << "wrote " << (dir / "trajectory.csv").string() << " and " << (dir / "metrics.txt").string() << "\n";
        out << "worst RMS consensus error over [" << detail::g9(m.start) << ", " << detail::g9(m.end)
            << "] = " << detail::g9(m.worst_rms()) << "\n";
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return config_error;
    }
    return ok;
}

inline int cmd_check(const std::string& scenario, const Overrides& ov, std::ostream& out, std::ostream& err) {
    Scenario s;
    try {
        s = detail::load(scenario, ov);
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return config_error;
    }
    try {
        using detail::g6;
        using detail::yes;
        const Laplacian lap = laplacian(s.graph);
        std::vector<double> spec(lap.eigenvalues.data(), lap.eigenvalues.data() + lap.eigenvalues.size());
        const Lemma1Report r = verify_lemma1(s.design.h_tf(), s.design.g_tf(), s.design.d(), spec, s.signals);

        out << "estimator: " << to_string(s.design.kind()) << "\n";
        out << "laplacian eigenvalues:";
        for (double l : spec) out << " " << g6(l);
        out << "\n";
        out << "graph connected (lambda2 = " << g6(r.lambda2) << "): " << yes(r.connected) << "\n";
        out << "no common unstable poles of h and g: " << yes(r.no_common_unstable_poles) << "\n";
        out << "(i)   signal poles are roots of d: " << yes(r.cond_i_ok) << "\n";
        out << "(ii)  h stable and d divides n_h - d_h: " << yes(r.cond_ii) << " (h stable " << yes(r.h_stable)
            << ", divides " << yes(r.nh_minus_dh_divisible) << ")\n";
        double worst = -std::numeric_limits<double>::infinity();
        for (double w : r.worst_real_part) worst = std::max(worst, w);
        out << "(iii) closed loop stable for every nonzero eigenvalue (worst real part " << g6(worst)
            << "): " << yes(r.cond_iii) << "\n";
        out << "(iv)  d divides the denominator of g: " << yes(r.cond_iv) << "\n";
        out << "zero steady-state error conditions: " << (r.overall ? "PASS" : "FAIL") << "\n";

        const ExtendedSystem ext = build_extended(s.design);
        const UioExistence ex = uio_existence_check(ext);
        out << "CE = " << g6(ex.CE) << ", rank(CE) = rank(E): " << yes(ex.rank_ok) << "\n";
        out << "invariant zeros:";
        for (const cplx& z : ex.zeros) out << " " << g6(z) << ";";
        out << " stable: " << yes(ex.zeros_ok) << "\n";
        out << "UIO existence: " << (ex.ok() ? "PASS" : "FAIL") << "\n";
        return r.overall && ex.ok() ? ok : check_failed;
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return check_failed;
    }
}

inline int cmd_design(const std::string& scenario, const Overrides& ov, std::ostream& out, std::ostream& err) {
    Scenario s;
    try {
        s = detail::load(scenario, ov);
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return config_error;
    }
    using detail::g6;
    ExtendedSystem ext;
    try {
        ext = build_extended(s.design);
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return check_failed;
    }
    const UioExistence ex = uio_existence_check(ext);
    if (!ex.rank_ok) {
        err << "UIO existence failed: rank(CE) != rank(E)\n";
        return check_failed;
    }
    if (!ex.zeros_ok) {
        err << "UIO existence failed: invariant zeros are not strictly stable\n";
        return check_failed;
    }
    ObserverMatrices obs;
    try {
        obs = uio_design(ext, s.observer, s.omega);
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return check_failed;
    }
    out << "estimator: " << to_string(s.design.kind()) << " (extended order " << ext.size() << ")\n";
    out << "H  = " << detail::vec6(obs.H) << "\n";
    out << "T  = " << detail::mat6(obs.T) << "\n";
    out << "F  = " << detail::mat6(obs.F) << "\n";
    out << "K1 = " << detail::vec6(obs.K1) << "\n";
    out << "K2 = " << detail::vec6(obs.K2) << "\n";
    out << "K  = " << detail::vec6(obs.K) << "\n";
    out << "eig(F) =";
    for (const cplx& z : eigenvalues(obs.F)) out << " " << g6(z) << ";";
    out << "\n";
    return ok;
}

inline int cmd_show(const std::string& scenario, std::ostream& out, std::ostream& err) {
    try {
        out << serialize_scenario(load_scenario(scenario));
        return ok;
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return config_error;
    }
}

}  // namespace imdac::cli
