#pragma once

// Scenario documents: a small TOML-like format.
//
//   # coefficient lists are ascending powers: [c0, c1, c2] = c0 + c1 s + c2 s^2
//   [graph]
//   builtin = "paper9"            # or: nodes = 3 / edges = [[1, 2], [2, 3]]
//   [estimator]
//   kind = "isac"                 # isac | rac
//   omega = 1.5
//   h_num = [6.75, 3]             # each of h_num, h_den, g_num, g_den, d
//   h_den = [9, 3, 1]             # defaults to the reference design at omega
//   [signals]
//   builtin = "eq23"              # or per-node lists: amplitude, phase, frequency, waveform
//   [[faults]]
//   from = 1
//   to = 2
//   onset = 25
//   waveform = "cos"              # constant | ramp | sin | cos
//   amplitude = 1
//   frequency = 0.75
//   symmetric = true
//   [[events]]
//   time = 30
//   action = "remove_edge"
//   i = 3
//   j = 6
//   [observer]
//   k1 = [5.3993, 12.1485, 1.7998]   # or poles = [-3, [-1, 2], [-1, -2]]
//   monitored = "all"                # or [[1, 2], [2, 1]]
//   [initial]
//   x1 = [[...], ...]  x2 = [[...], ...]  z_offset = [0, 0, 1]
//   [run]
//   dt = 0.001
//   t_end = 50
//   accommodation = true
//   record_stride = 10
//   metrics_window = [40, 50]
//
// One key per line; arrays stay on a single line. Errors carry line numbers.

#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "imdac/error.hpp"
#include "imdac/scenarios.hpp"
#include "imdac/sim.hpp"

namespace imdac {

namespace toml_lite {

struct Value;
using Array = std::vector<Value>;

struct Value {
    std::variant<double, bool, std::string, Array> v;
    int line = 0;

    bool is_number() const { return std::holds_alternative<double>(v); }
    bool is_string() const { return std::holds_alternative<std::string>(v); }
    bool is_array() const { return std::holds_alternative<Array>(v); }

    double number(std::string_view key) const {
        if (!is_number()) throw ParseError(line, std::string(key) + " must be a number");
        return std::get<double>(v);
    }
    int integer(std::string_view key) const {
        const double d = number(key);
        if (d != std::floor(d) || std::abs(d) > 1e9) throw ParseError(line, std::string(key) + " must be an integer");
        return static_cast<int>(d);
    }
    bool boolean(std::string_view key) const {
        if (!std::holds_alternative<bool>(v)) throw ParseError(line, std::string(key) + " must be true or false");
        return std::get<bool>(v);
    }
    const std::string& string(std::string_view key) const {
        if (!is_string()) throw ParseError(line, std::string(key) + " must be a quoted string");
        return std::get<std::string>(v);
    }
    const Array& array(std::string_view key) const {
        if (!is_array()) throw ParseError(line, std::string(key) + " must be an array");
        return std::get<Array>(v);
    }
    std::vector<double> numbers(std::string_view key) const {
        std::vector<double> out;
        for (const auto& e : array(key)) out.push_back(e.number(key));
        return out;
    }
};

struct Table {
    int line = 0;
    std::map<std::string, Value> entries;
    mutable std::set<std::string> used;

    const Value* find(const std::string& key) const {
        auto it = entries.find(key);
        if (it == entries.end()) return nullptr;
        used.insert(key);
        return &it->second;
    }
    const Value& at(const std::string& key, std::string_view section) const {
        if (const Value* v = find(key)) return *v;
        throw ParseError(line, "[" + std::string(section) + "] is missing '" + key + "'");
    }
    void reject_unknown(std::string_view section) const {
        for (const auto& [k, v] : entries)
            if (!used.count(k)) throw ParseError(v.line, "unknown key '" + k + "' in [" + std::string(section) + "]");
    }
};

struct Document {
    std::map<std::string, Table> tables;
    std::map<std::string, std::vector<Table>> arrays;
};

class Parser {
public:
    Parser(std::string_view text, int line) : s_(text), line_(line) {}

    Value value() {
        skip_ws();
        if (pos_ >= s_.size()) fail("expected a value");
        const char c = s_[pos_];
        Value out;
        out.line = line_;
        if (c == '"') {
            const auto end = s_.find('"', pos_ + 1);
            if (end == std::string_view::npos) fail("unterminated string");
            out.v = std::string(s_.substr(pos_ + 1, end - pos_ - 1));
            pos_ = end + 1;
        } else if (c == '[') {
            ++pos_;
            Array arr;
            skip_ws();
            if (peek(']')) {
                ++pos_;
            } else {
                for (;;) {
                    arr.push_back(value());
                    skip_ws();
                    if (peek(',')) {
                        ++pos_;
                        skip_ws();
                        if (peek(']')) {
                            ++pos_;
                            break;
                        }
                        continue;
                    }
                    if (peek(']')) {
                        ++pos_;
                        break;
                    }
                    fail("expected ',' or ']' in array");
                }
            }
            out.v = std::move(arr);
        } else if (s_.substr(pos_, 4) == "true") {
            out.v = true;
            pos_ += 4;
        } else if (s_.substr(pos_, 5) == "false") {
            out.v = false;
            pos_ += 5;
        } else {
            std::size_t start = pos_;
            if (s_[pos_] == '+') ++start;
            double d = 0.0;
            const auto [ptr, ec] = std::from_chars(s_.data() + start, s_.data() + s_.size(), d);
            if (ec != std::errc() || ptr == s_.data() + start) fail("malformed value");
            pos_ = static_cast<std::size_t>(ptr - s_.data());
            out.v = d;
        }
        return out;
    }

    void expect_end() {
        skip_ws();
        if (pos_ != s_.size()) fail("unexpected trailing characters");
    }

private:
    [[noreturn]] void fail(const std::string& msg) const { throw ParseError(line_, msg); }
    bool peek(char c) const { return pos_ < s_.size() && s_[pos_] == c; }
    void skip_ws() {
        while (pos_ < s_.size() && (s_[pos_] == ' ' || s_[pos_] == '\t')) ++pos_;
    }

    std::string_view s_;
    std::size_t pos_ = 0;
    int line_;
};

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

inline std::string_view strip_comment(std::string_view s) {
    bool in_string = false;
    for (std::size_t k = 0; k < s.size(); ++k) {
        if (s[k] == '"') in_string = !in_string;
        if (s[k] == '#' && !in_string) return s.substr(0, k);
    }
    return s;
}

inline bool valid_key(std::string_view k) {
    if (k.empty()) return false;
    for (char c : k)
        if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-')) return false;
    return true;
}

inline Document parse(std::string_view text) {
    Document doc;
    Table* current = nullptr;
    int lineno = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const auto nl = text.find('\n', pos);
        const std::string_view raw = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
        pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
        ++lineno;
        const std::string_view line = trim(strip_comment(raw));
        if (line.empty()) continue;

        if (line.starts_with("[[")) {
            if (!line.ends_with("]]")) throw ParseError(lineno, "malformed array-table header");
            const std::string name(trim(line.substr(2, line.size() - 4)));
            if (!valid_key(name)) throw ParseError(lineno, "malformed array-table name");
            if (doc.tables.count(name)) throw ParseError(lineno, "'" + name + "' is already a plain section");
            auto& vec = doc.arrays[name];
            vec.push_back(Table{lineno, {}, {}});
            current = &vec.back();
        } else if (line.starts_with("[")) {
            if (!line.ends_with("]")) throw ParseError(lineno, "malformed section header");
            const std::string name(trim(line.substr(1, line.size() - 2)));
            if (!valid_key(name)) throw ParseError(lineno, "malformed section name");
            if (doc.tables.count(name) || doc.arrays.count(name))
                throw ParseError(lineno, "duplicate section [" + name + "]");
            current = &doc.tables[name];
            current->line = lineno;
        } else {
            const auto eq = line.find('=');
            if (eq == std::string_view::npos) throw ParseError(lineno, "expected 'key = value'");
            const std::string key(trim(line.substr(0, eq)));
            if (!valid_key(key)) throw ParseError(lineno, "malformed key");
            if (!current) throw ParseError(lineno, "key '" + key + "' outside of any section");
            Parser p(line.substr(eq + 1), lineno);
            Value v = p.value();
            p.expect_end();
            if (!current->entries.emplace(key, std::move(v)).second)
                throw ParseError(lineno, "duplicate key '" + key + "'");
        }
    }
    return doc;
}

}  // namespace toml_lite

namespace detail {

inline Polynomial poly_from(const toml_lite::Value& v, std::string_view key) {
    return Polynomial(v.numbers(key));
}

inline cplx pole_from(const toml_lite::Value& v) {
    if (v.is_number()) return {v.number("poles"), 0.0};
    const auto pair = v.numbers("poles");
    if (pair.size() != 2) throw ParseError(v.line, "complex pole must be [re, im]");
    return {pair[0], pair[1]};
}

inline std::vector<Link> links_from(const toml_lite::Value& v, std::string_view key) {
    std::vector<Link> out;
    for (const auto& e : v.array(key)) {
        const auto& pair = e.array(key);
        if (pair.size() != 2) throw ParseError(e.line, std::string(key) + " entries must be [i, j] pairs");
        out.emplace_back(pair[0].integer(key), pair[1].integer(key));
    }
    return out;
}

inline std::vector<std::vector<double>> rows_from(const toml_lite::Value& v, std::string_view key) {
    std::vector<std::vector<double>> out;
    for (const auto& e : v.array(key)) out.push_back(e.numbers(key));
    return out;
}

template <typename Fn>
auto at_line(int line, Fn&& fn) -> decltype(fn()) {
    try {
        return fn();
    } catch (const ParseError&) {
        throw;
    } catch (const Error& e) {
        throw ParseError(line, e.what());
    }
}

}  // namespace detail

inline Scenario parse_scenario(std::string_view text) {
    using toml_lite::Table;
    using toml_lite::Value;
    const toml_lite::Document doc = toml_lite::parse(text);
    for (const auto& [name, t] : doc.tables)
        if (name != "graph" && name != "estimator" && name != "signals" && name != "observer" && name != "initial" &&
            name != "run")
            throw ParseError(t.line, "unknown section [" + name + "]");
    for (const auto& [name, v] : doc.arrays)
        if (name != "faults" && name != "events") throw ParseError(v.front().line, "unknown section [[" + name + "]]");

    auto section = [&](const std::string& name) -> const Table* {
        auto it = doc.tables.find(name);
        return it == doc.tables.end() ? nullptr : &it->second;
    };

    Scenario s;

    // graph
    const Table* g = section("graph");
    if (!g) throw ParseError(0, "missing [graph] section");
    if (const Value* b = g->find("builtin")) {
        if (b->string("builtin") != "paper9") throw ParseError(b->line, "unknown builtin graph '" + b->string("builtin") + "'");
        s.graph = reference_graph();
    } else {
        const Value& nodes = g->at("nodes", "graph");
        std::vector<Link> edges;
        int edges_line = g->line;
        if (const Value* e = g->find("edges")) {
            edges = detail::links_from(*e, "edges");
            edges_line = e->line;
        }
        const int n = nodes.integer("nodes");
        s.graph = detail::at_line(edges_line, [&] { return Graph(n, edges); });
    }
    g->reject_unknown("graph");

    // estimator
    const Table* est = section("estimator");
    if (!est) throw ParseError(0, "missing [estimator] section");
    {
        const Value& kind = est->at("kind", "estimator");
        EstimatorKind k;
        if (kind.string("kind") == "isac") k = EstimatorKind::isac;
        else if (kind.string("kind") == "rac") k = EstimatorKind::rac;
        else throw ParseError(kind.line, "kind must be \"isac\" or \"rac\"");
        if (const Value* w = est->find("omega")) {
            s.omega = w->number("omega");
            if (!(s.omega > 0.0)) throw ParseError(w->line, "omega must be positive");
        }
        const EstimatorDesign ref = reference_design(k, s.omega);
        auto poly = [&](const char* key, const Polynomial& fallback) {
            const Value* v = est->find(key);
            return v ? detail::poly_from(*v, key) : fallback;
        };
        const Polynomial hn = poly("h_num", ref.h_tf().num()), hd = poly("h_den", ref.h_tf().den());
        const Polynomial gn = poly("g_num", ref.g_tf().num()), gd = poly("g_den", ref.g_tf().den());
        const Polynomial d = poly("d", ref.d());
        s.design = detail::at_line(est->line, [&] {
            return EstimatorDesign(k, TransferFunction(hn, hd), TransferFunction(gn, gd), d);
        });
    }
    est->reject_unknown("estimator");

    // signals
    const int n = s.graph.size();
    s.signals = reference_signals(s.omega, n);
    if (const Table* sig = section("signals")) {
        if (const Value* b = sig->find("builtin")) {
            if (b->string("builtin") != "eq23") throw ParseError(b->line, "unknown builtin signals '" + b->string("builtin") + "'");
        } else {
            auto per_node = [&](const char* key, std::vector<double> fallback) {
                const Value* v = sig->find(key);
                if (!v) return fallback;
                if (v->is_number()) return std::vector<double>(static_cast<std::size_t>(n), v->number(key));
                auto vals = v->numbers(key);
                if (static_cast<int>(vals.size()) != n)
                    throw ParseError(v->line, std::string(key) + " needs one entry per node");
                return vals;
            };
            const auto amp = per_node("amplitude", std::vector<double>(static_cast<std::size_t>(n), 1.0));
            const auto ph = per_node("phase", std::vector<double>(static_cast<std::size_t>(n), 0.0));
            const auto fr = per_node("frequency", std::vector<double>(static_cast<std::size_t>(n), s.omega));
            std::vector<Waveform> wf(static_cast<std::size_t>(n), Waveform::sin);
            if (const Value* w = sig->find("waveform")) {
                auto parse_wf = [](const Value& e) {
                    const auto& name = e.string("waveform");
                    if (name == "sin") return Waveform::sin;
                    if (name == "cos") return Waveform::cos;
                    throw ParseError(e.line, "waveform must be \"sin\" or \"cos\"");
                };
                if (w->is_string()) {
                    wf.assign(static_cast<std::size_t>(n), parse_wf(*w));
                } else {
                    const auto& arr = w->array("waveform");
                    if (static_cast<int>(arr.size()) != n) throw ParseError(w->line, "waveform needs one entry per node");
                    for (std::size_t k = 0; k < arr.size(); ++k) wf[k] = parse_wf(arr[k]);
                }
            }
            s.signals.clear();
            for (std::size_t k = 0; k < static_cast<std::size_t>(n); ++k) s.signals.push_back({amp[k], ph[k], fr[k], wf[k]});
        }
        sig->reject_unknown("signals");
    }

    // faults
    if (auto it = doc.arrays.find("faults"); it != doc.arrays.end()) {
        for (const Table& t : it->second) {
            FaultModel f;
            f.from = t.at("from", "faults").integer("from");
            f.to = t.at("to", "faults").integer("to");
            if (const Value* v = t.find("onset")) f.onset = v->number("onset");
            if (const Value* v = t.find("waveform")) {
                const auto& w = v->string("waveform");
                if (w == "constant") f.shape = FaultShape::constant;
                else if (w == "ramp") f.shape = FaultShape::ramp;
                else if (w == "sin") f.shape = FaultShape::sin;
                else if (w == "cos") f.shape = FaultShape::cos;
                else throw ParseError(v->line, "fault waveform must be constant, ramp, sin or cos");
            }
            if (const Value* v = t.find("amplitude")) f.amplitude = v->number("amplitude");
            if (const Value* v = t.find("frequency")) f.frequency = v->number("frequency");
            if (const Value* v = t.find("phase")) f.phase = v->number("phase");
            if (const Value* v = t.find("symmetric")) f.symmetric = v->boolean("symmetric");
            t.reject_unknown("faults");
            if (!s.graph.has_edge(f.from, f.to))
                throw ParseError(t.line, "fault on " + std::to_string(f.from) + "->" + std::to_string(f.to) +
                                             ", which is not an edge");
            s.faults.push_back(f);
        }
    }

    // events
    if (auto it = doc.arrays.find("events"); it != doc.arrays.end()) {
        for (const Table& t : it->second) {
            TopologyEvent ev;
            ev.time = t.at("time", "events").number("time");
            const Value& action = t.at("action", "events");
            if (action.string("action") != "remove_edge") throw ParseError(action.line, "only action = \"remove_edge\" is supported");
            ev.i = t.at("i", "events").integer("i");
            ev.j = t.at("j", "events").integer("j");
            t.reject_unknown("events");
            s.events.push_back(ev);
        }
    }

    // observer
    if (const Table* obs = section("observer")) {
        s.observers = true;
        if (const Value* v = obs->find("enabled")) s.observers = v->boolean("enabled");
        if (const Value* v = obs->find("k1")) s.observer.k1 = v->numbers("k1");
        if (const Value* v = obs->find("poles")) {
            if (!s.observer.k1.empty()) throw ParseError(v->line, "give either k1 or poles, not both");
            for (const auto& e : v->array("poles")) s.observer.poles.push_back(detail::pole_from(e));
        }
        if (const Value* v = obs->find("monitored")) {
            if (v->is_string()) {
                if (v->string("monitored") != "all") throw ParseError(v->line, "monitored must be \"all\" or a list of links");
            } else {
                s.monitored = detail::links_from(*v, "monitored");
            }
        }
        obs->reject_unknown("observer");
    }

    // initial conditions
    if (const Table* ic = section("initial")) {
        if (const Value* v = ic->find("x1")) s.initial.x1 = detail::rows_from(*v, "x1");
        if (const Value* v = ic->find("x2")) s.initial.x2 = detail::rows_from(*v, "x2");
        if (const Value* v = ic->find("z_offset")) s.initial.z_offset = v->numbers("z_offset");
        ic->reject_unknown("initial");
    }

    // run
    int run_line = 0;
    if (const Table* r = section("run")) {
        run_line = r->line;
        if (const Value* v = r->find("dt")) s.dt = v->number("dt");
        if (const Value* v = r->find("t_end")) s.t_end = v->number("t_end");
        if (const Value* v = r->find("accommodation")) s.accommodation = v->boolean("accommodation");
        if (const Value* v = r->find("record_stride")) s.record_stride = v->integer("record_stride");
        if (const Value* v = r->find("metrics_window")) {
            const auto w = v->numbers("metrics_window");
            if (w.size() != 2) throw ParseError(v->line, "metrics_window must be [start, end]");
            s.window_start = w[0];
            s.window_end = w[1];
        }
        r->reject_unknown("run");
    }

    detail::at_line(run_line, [&] {
        validate(s);
        return 0;
    });
    return s;
}

inline Scenario load_scenario_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot read scenario file '" + path + "'");
    std::stringstream buf;
    buf << in.rdbuf();
    try {
        return parse_scenario(buf.str());
    } catch (const ParseError& e) {
        throw Error(path + ": " + e.what());
    }
}

/// "builtin:<name>" selects a bundled scenario, anything else is a file path.
inline Scenario load_scenario(const std::string& arg) {
    constexpr std::string_view prefix = "builtin:";
    if (std::string_view(arg).starts_with(prefix)) return builtin_scenario(std::string_view(arg).substr(prefix.size()));
    return load_scenario_file(arg);
}

namespace detail {

inline std::string num(double v) {
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
}

inline std::string list(const std::vector<double>& v) {
    std::string out = "[";
    for (std::size_t k = 0; k < v.size(); ++k) out += (k ? ", " : "") + num(v[k]);
    return out + "]";
}

inline std::string links(const std::vector<Link>& v) {
    std::string out = "[";
    for (std::size_t k = 0; k < v.size(); ++k)
        out += (k ? ", [" : "[") + std::to_string(v[k].first) + ", " + std::to_string(v[k].second) + "]";
    return out + "]";
}

inline std::string rows(const std::vector<std::vector<double>>& v) {
    std::string out = "[";
    for (std::size_t k = 0; k < v.size(); ++k) out += (k ? ", " : "") + list(v[k]);
    return out + "]";
}

}  // namespace detail

/// Explicit (builtin-free) document that parses back to an equal Scenario.
inline std::string serialize_scenario(const Scenario& s) {
    using detail::list;
    using detail::num;
    std::ostringstream o;
    o << "# coefficient lists are ascending powers: [c0, c1, c2] = c0 + c1 s + c2 s^2\n";
    o << "[graph]\nnodes = " << s.graph.size() << "\n";
    o << "edges = " << detail::links({s.graph.edges().begin(), s.graph.edges().end()}) << "\n\n";

    o << "[estimator]\nkind = \"" << to_string(s.design.kind()) << "\"\n";
    o << "omega = " << num(s.omega) << "\n";
    o << "h_num = " << list(s.design.h_tf().num().coeffs()) << "\n";
    o << "h_den = " << list(s.design.h_tf().den().coeffs()) << "\n";
    o << "g_num = " << list(s.design.g_tf().num().coeffs()) << "\n";
    o << "g_den = " << list(s.design.g_tf().den().coeffs()) << "\n";
    o << "d = " << list(s.design.d().coeffs()) << "\n\n";

    std::vector<double> amp, ph, fr;
    std::string wf = "[";
    for (std::size_t k = 0; k < s.signals.size(); ++k) {
        amp.push_back(s.signals[k].amplitude);
        ph.push_back(s.signals[k].phase);
        fr.push_back(s.signals[k].frequency);
        wf += std::string(k ? ", " : "") + (s.signals[k].waveform == Waveform::sin ? "\"sin\"" : "\"cos\"");
    }
    o << "[signals]\namplitude = " << list(amp) << "\nphase = " << list(ph) << "\nfrequency = " << list(fr)
      << "\nwaveform = " << wf << "]\n\n";

    if (s.observers || s.monitored || !s.observer.k1.empty() || !s.observer.poles.empty()) {
        o << "[observer]\n";
        if (!s.observers) o << "enabled = false\n";
        o << "monitored = " << (s.monitored ? detail::links(*s.monitored) : std::string("\"all\"")) << "\n";
        if (!s.observer.k1.empty()) o << "k1 = " << list(s.observer.k1) << "\n";
        if (!s.observer.poles.empty()) {
            o << "poles = [";
            for (std::size_t k = 0; k < s.observer.poles.size(); ++k)
                o << (k ? ", " : "") << "[" << num(s.observer.poles[k].real()) << ", " << num(s.observer.poles[k].imag()) << "]";
            o << "]\n";
        }
        o << "\n";
    }

    if (!s.initial.x1.empty() || !s.initial.x2.empty() || !s.initial.z_offset.empty()) {
        o << "[initial]\n";
        if (!s.initial.x1.empty()) o << "x1 = " << detail::rows(s.initial.x1) << "\n";
        if (!s.initial.x2.empty()) o << "x2 = " << detail::rows(s.initial.x2) << "\n";
        if (!s.initial.z_offset.empty()) o << "z_offset = " << list(s.initial.z_offset) << "\n";
        o << "\n";
    }

    o << "[run]\ndt = " << num(s.dt) << "\nt_end = " << num(s.t_end) << "\naccommodation = "
      << (s.accommodation ? "true" : "false") << "\nrecord_stride = " << s.record_stride << "\nmetrics_window = ["
      << num(s.window_start) << ", " << num(s.window_end) << "]\n";

    for (const auto& f : s.faults) {
        o << "\n[[faults]]\nfrom = " << f.from << "\nto = " << f.to << "\nonset = " << num(f.onset) << "\nwaveform = \""
          << to_string(f.shape) << "\"\namplitude = " << num(f.amplitude) << "\nfrequency = " << num(f.frequency)
          << "\nphase = " << num(f.phase) << "\nsymmetric = " << (f.symmetric ? "true" : "false") << "\n";
    }
    for (const auto& ev : s.events)
        o << "\n[[events]]\ntime = " << num(ev.time) << "\naction = \"remove_edge\"\ni = " << ev.i << "\nj = " << ev.j
          << "\n";
    return o.str();
}

}  // namespace imdac
