#pragma once

// Bundled replications of the two evaluation scenarios.

#include <string>
#include <string_view>
#include <vector>

#include "imdac/error.hpp"
#include "imdac/sim.hpp"

namespace imdac {

enum class Variant { clean, fault, accommodated };

inline std::string to_string(Variant v) {
    switch (v) {
        case Variant::clean: return "clean";
        case Variant::fault: return "fault";
        case Variant::accommodated: return "accommodated";
    }
    return "?";
}

/// Gain reported for the ISAC replication; places the single assignable
/// observer pole at about -100.
inline std::vector<double> reference_isac_k1() { return {5.3993, 12.1485, 1.7998}; }

namespace detail {

inline Scenario reference_base(EstimatorKind kind, Variant v) {
    Scenario s;
    s.design = reference_design(kind, s.omega);
    if (kind == EstimatorKind::isac) s.observer.k1 = reference_isac_k1();
    if (v != Variant::clean) {
        s.faults.push_back(reference_fault(s.omega));
        s.observers = true;
    }
    s.accommodation = v == Variant::accommodated;
    return s;
}

}  // namespace detail

/// Default 9-node graph, sinusoidal inputs, link 1<->2 fault from t = 25.
inline Scenario example1(Variant v, EstimatorKind kind = EstimatorKind::isac) {
    return detail::reference_base(kind, v);
}

/// As example1, plus removal of edge 3-6 at t = 30; metrics over [45, 50].
inline Scenario example2(Variant v, EstimatorKind kind = EstimatorKind::rac) {
    Scenario s = detail::reference_base(kind, v);
    s.events.push_back({30.0, 3, 6});
    s.window_start = 45.0;
    return s;
}

inline std::vector<std::string> builtin_names() {
    std::vector<std::string> out;
    for (const char* base : {"example1_isac", "example1_rac", "example2_rac", "example2_isac"})
        for (const char* v : {"clean", "fault", "accommodated"}) out.push_back(std::string(base) + "/" + v);
    return out;
}

/// Names look like "example1_isac/accommodated"; a bare base name means "clean".
inline Scenario builtin_scenario(std::string_view name) {
    std::string_view base = name;
    Variant v = Variant::clean;
    if (const auto slash = name.find('/'); slash != std::string_view::npos) {
        base = name.substr(0, slash);
        const std::string_view var = name.substr(slash + 1);
        if (var == "clean") v = Variant::clean;
        else if (var == "fault") v = Variant::fault;
        else if (var == "accommodated") v = Variant::accommodated;
        else throw Error("unknown scenario variant '" + std::string(var) + "'");
    }
    if (base == "example1_isac") return example1(v, EstimatorKind::isac);
    if (base == "example1_rac") return example1(v, EstimatorKind::rac);
    if (base == "example2_rac") return example2(v, EstimatorKind::rac);
    if (base == "example2_isac") return example2(v, EstimatorKind::isac);
    throw Error("unknown builtin scenario '" + std::string(name) + "'");
}

}  // namespace imdac
