#pragma once

#include <cstdint>
#include <limits>
#include <string>

#include <json.hpp>

namespace epicsim {

enum class Knob { g_na, g_k, g_ca, input_gain };

/// What an intervention addresses. `id` names a population (Neuron,
/// Population) or a projection (Synapse, Projection).
struct Selector {
    enum class Kind { Neuron, Synapse, Projection, Population } kind = Kind::Neuron;
    std::string id;
    std::uint32_t index = 0; // neuron index, or sender index for a synapse
    std::uint32_t post = 0;  // receiver index for a synapse

    static Selector neuron(std::string pop, std::uint32_t idx) { return {Kind::Neuron, std::move(pop), idx, 0}; }
    static Selector synapse(std::string proj, std::uint32_t pre, std::uint32_t post) {
        return {Kind::Synapse, std::move(proj), pre, post};
    }
    static Selector projection(std::string proj) { return {Kind::Projection, std::move(proj), 0, 0}; }
    static Selector population(std::string pop) { return {Kind::Population, std::move(pop), 0, 0}; }
};

enum class InterventionKind { SetKnob, ClampThreshold, PlasticityOnOff, Lesion, SetLatency, InjectCurrent };

struct Intervention {
    double at = 0.0; // ms
    Selector target;
    InterventionKind kind = InterventionKind::Lesion;
    Knob knob = Knob::g_na;   // SetKnob
    double value = 0.0;       // knob gain, threshold (inf allowed), latency ms, or current amplitude
    bool enabled = true;      // PlasticityOnOff
    double duration = 0.0;    // InjectCurrent, ms

    static Intervention set_knob(double at, Selector s, Knob k, double gain) {
        Intervention i{at, std::move(s), InterventionKind::SetKnob};
        i.knob = k;
        i.value = gain;
        return i;
    }
    static Intervention clamp_threshold(double at, Selector s, double theta) {
        Intervention i{at, std::move(s), InterventionKind::ClampThreshold};
        i.value = theta;
        return i;
    }
    static Intervention never_fire(double at, Selector s) {
        return clamp_threshold(at, std::move(s), std::numeric_limits<double>::infinity());
    }
    static Intervention plasticity(double at, Selector s, bool on) {
        Intervention i{at, std::move(s), InterventionKind::PlasticityOnOff};
        i.enabled = on;
        return i;
    }
    static Intervention lesion(double at, Selector s) { return {at, std::move(s), InterventionKind::Lesion}; }
    static Intervention set_latency(double at, Selector s, double ms) {
        Intervention i{at, std::move(s), InterventionKind::SetLatency};
        i.value = ms;
        return i;
    }
    static Intervention inject(double at, Selector s, double amplitude, double duration) {
        Intervention i{at, std::move(s), InterventionKind::InjectCurrent};
        i.value = amplitude;
        i.duration = duration;
        return i;
    }
};

struct Ack {
    bool accepted = false;
    std::uint64_t id = 0;
    std::string message;
};

std::string to_string(Knob k);
std::string to_string(InterventionKind k);
std::string to_string(Selector::Kind k);

/// {"at", "kind", "target": {"kind", "id", "index", "post"}, ...}; infinite
/// values are written as the string "inf".
nlohmann::json intervention_to_json(const Intervention& iv);
/// Throws Validation with the offending field path.
Intervention intervention_from_json(const nlohmann::json& doc);

} // namespace epicsim
