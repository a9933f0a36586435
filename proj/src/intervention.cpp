#include "epicsim/intervention.hpp"

#include <array>
#include <utility>

#include "epicsim/error.hpp"
#include "json_util.hpp"

namespace epicsim {

using nlohmann::json;

namespace {

constexpr std::array<std::pair<Knob, const char*>, 4> kKnobs{{
    {Knob::g_na, "g_na"}, {Knob::g_k, "g_k"}, {Knob::g_ca, "g_ca"}, {Knob::input_gain, "input_gain"}}};

constexpr std::array<std::pair<InterventionKind, const char*>, 6> kKinds{{
    {InterventionKind::SetKnob, "set_knob"},
    {InterventionKind::ClampThreshold, "clamp_threshold"},
    {InterventionKind::PlasticityOnOff, "plasticity"},
    {InterventionKind::Lesion, "lesion"},
    {InterventionKind::SetLatency, "set_latency"},
    {InterventionKind::InjectCurrent, "inject_current"}}};

constexpr std::array<std::pair<Selector::Kind, const char*>, 4> kSelectors{{
    {Selector::Kind::Neuron, "neuron"},
    {Selector::Kind::Synapse, "synapse"},
    {Selector::Kind::Projection, "projection"},
    {Selector::Kind::Population, "population"}}};

template <class E, std::size_t N>
std::string name_of(const std::array<std::pair<E, const char*>, N>& table, E v) {
    for (const auto& [k, n] : table)
        if (k == v) return n;
    return "unknown";
}

template <class E, std::size_t N>
E value_of(const std::array<std::pair<E, const char*>, N>& table, const json& j, const std::string& path) {
    if (!j.is_string()) fail(ErrorKind::Validation, path + ": expected a string");
    const auto& s = j.get_ref<const std::string&>();
    std::string valid;
    for (const auto& [k, n] : table) {
        if (s == n) return k;
        valid += (valid.empty() ? "" : ", ") + std::string(n);
    }
    fail(ErrorKind::Validation, path + ": unknown value '" + s + "' (valid: " + valid + ")");
}

std::uint32_t index_field(const json& obj, const char* key, const std::string& path) {
    if (!obj.contains(key)) return 0;
    const json& j = obj.at(key);
    if (!j.is_number_integer() || j.get<std::int64_t>() < 0 || j.get<std::int64_t>() > 0xffffffffLL)
        fail(ErrorKind::Validation, path + "." + key + ": expected a non-negative integer");
    return j.get<std::uint32_t>();
}

double number_field(const json& obj, const char* key, const std::string& path, double fallback) {
    if (!obj.contains(key)) return fallback;
    return detail::decode_double(obj.at(key), path + "." + key);
}

} // namespace

std::string to_string(Knob k) { return name_of(kKnobs, k); }
std::string to_string(InterventionKind k) { return name_of(kKinds, k); }
std::string to_string(Selector::Kind k) { return name_of(kSelectors, k); }

json intervention_to_json(const Intervention& iv) {
    json target{{"kind", to_string(iv.target.kind)}, {"id", iv.target.id}};
    if (iv.target.kind == Selector::Kind::Neuron || iv.target.kind == Selector::Kind::Synapse)
        target["index"] = iv.target.index;
    if (iv.target.kind == Selector::Kind::Synapse) target["post"] = iv.target.post;

    json doc{{"at", detail::encode_double(iv.at)}, {"kind", to_string(iv.kind)}, {"target", std::move(target)}};
    switch (iv.kind) {
    case InterventionKind::SetKnob:
        doc["knob"] = to_string(iv.knob);
        doc["value"] = detail::encode_double(iv.value);
        break;
    case InterventionKind::ClampThreshold:
    case InterventionKind::SetLatency:
        doc["value"] = detail::encode_double(iv.value);
        break;
    case InterventionKind::PlasticityOnOff: doc["enabled"] = iv.enabled; break;
    case InterventionKind::Lesion: break;
    case InterventionKind::InjectCurrent:
        doc["value"] = detail::encode_double(iv.value);
        doc["duration"] = detail::encode_double(iv.duration);
        break;
    }
    return doc;
}

Intervention intervention_from_json(const json& doc) {
    const std::string root = "intervention";
    if (!doc.is_object()) fail(ErrorKind::Validation, root + ": expected an object");
    if (!doc.contains("kind")) fail(ErrorKind::Validation, root + ".kind: missing required field");
    if (!doc.contains("target")) fail(ErrorKind::Validation, root + ".target: missing required field");

    Intervention iv;
    iv.kind = value_of(kKinds, doc.at("kind"), root + ".kind");
    iv.at = number_field(doc, "at", root, 0.0);

    const json& t = doc.at("target");
    const std::string tp = root + ".target";
    if (!t.is_object()) fail(ErrorKind::Validation, tp + ": expected an object");
    if (!t.contains("kind")) fail(ErrorKind::Validation, tp + ".kind: missing required field");
    if (!t.contains("id") || !t.at("id").is_string()) fail(ErrorKind::Validation, tp + ".id: expected a string");
    iv.target.kind = value_of(kSelectors, t.at("kind"), tp + ".kind");
    iv.target.id = t.at("id").get<std::string>();
    iv.target.index = index_field(t, "index", tp);
    iv.target.post = index_field(t, "post", tp);

    const auto require = [&](const char* key) {
        if (!doc.contains(key)) fail(ErrorKind::Validation, root + "." + key + ": missing required field");
    };
    switch (iv.kind) {
    case InterventionKind::SetKnob:
        require("knob");
        require("value");
        iv.knob = value_of(kKnobs, doc.at("knob"), root + ".knob");
        iv.value = number_field(doc, "value", root, 0.0);
        break;
    case InterventionKind::ClampThreshold:
    case InterventionKind::SetLatency:
        require("value");
        iv.value = number_field(doc, "value", root, 0.0);
        break;
    case InterventionKind::PlasticityOnOff:
        require("enabled");
        if (!doc.at("enabled").is_boolean()) fail(ErrorKind::Validation, root + ".enabled: expected a boolean");
        iv.enabled = doc.at("enabled").get<bool>();
        break;
    case InterventionKind::Lesion: break;
    case InterventionKind::InjectCurrent:
        require("value");
        require("duration");
        iv.value = number_field(doc, "value", root, 0.0);
        iv.duration = number_field(doc, "duration", root, 0.0);
        break;
    }
    return iv;
}

} // namespace epicsim
