#pragma once

#include <string>

#include <json.hpp>

#include "epicsim/spec.hpp"

namespace testing_support {

inline nlohmann::json pop(const std::string& id, unsigned size, nlohmann::json soma = nlohmann::json::object()) {
    nlohmann::json p{{"id", id}, {"size", size}};
    if (!soma.empty()) p["soma"] = soma;
    return p;
}

inline nlohmann::json proj(const std::string& id, const std::string& from, const std::string& to,
                           nlohmann::json extra = nlohmann::json::object()) {
    nlohmann::json p{{"id", id}, {"sender", from}, {"receiver", to}};
    for (auto& [k, v] : extra.items()) p[k] = v;
    return p;
}

inline epicsim::NetworkSpec spec_of(nlohmann::json pops, nlohmann::json projs = nlohmann::json::array(),
                                    nlohmann::json extra = nlohmann::json::object()) {
    nlohmann::json doc{{"version", 1}, {"populations", pops}, {"projections", projs}};
    for (auto& [k, v] : extra.items()) doc[k] = v;
    return epicsim::parse_spec(doc);
}

} // namespace testing_support
