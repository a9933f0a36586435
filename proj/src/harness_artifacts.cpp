#include <fstream>

#include "epicsim/error.hpp"
#include "epicsim/harness.hpp"
#include "epicsim/hash.hpp"

namespace epicsim {

nlohmann::json Manifest::to_json() const {
    return {{"format", "epicsim-manifest"}, {"manifest_version", 1}, {"spec_hash", spec_hash},
            {"seed", seed},                 {"version", version},    {"command", command},
            {"args", args},                 {"artifacts", artifacts}};
}

Manifest Manifest::from_json(const nlohmann::json& j) {
    Manifest m;
    try {
        if (j.value("format", std::string{}) != "epicsim-manifest")
            fail(ErrorKind::Validation, "manifest: format must be 'epicsim-manifest'");
        m.spec_hash = j.at("spec_hash").get<std::string>();
        m.seed = j.at("seed").get<std::uint64_t>();
        m.version = j.at("version").get<std::string>();
        m.command = j.at("command").get<std::string>();
        m.args = j.value("args", nlohmann::json::object());
        m.artifacts = j.value("artifacts", std::vector<std::string>{});
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::Validation, std::string("manifest: ") + e.what());
    }
    return m;
}

std::string spec_hash(const NetworkSpec& spec) { return sha256_hex(spec_to_json(spec).dump()); }

void write_raster_jsonl(const std::filesystem::path& path, const std::vector<SpikeRecord>& raster, const Network& net,
                        double dt) {
    std::ofstream os(path, std::ios::binary);
    if (!os) fail(ErrorKind::Runtime, "cannot write " + path.string());
    for (const auto& r : raster)
        os << nlohmann::json{{"t", static_cast<double>(r.step) * dt}, {"pop", net.populations[r.pop].id}, {"idx", r.index}}
                  .dump()
           << '\n';
}

nlohmann::json ledger_report(const EnergyLedger& ledger) {
    nlohmann::json cats = nlohmann::json::object();
    for (auto c : kEnergyCategories)
        cats[std::string(to_string(c))] = {{"fj", ledger.tally_fj(c)}, {"count", ledger.count(c)}};
    return {{"categories", cats}, {"total_fj", ledger.total_fj()}, {"total_j", ledger.total_joules()}};
}

void write_json(const std::filesystem::path& path, const nlohmann::json& doc) {
    std::ofstream os(path, std::ios::binary);
    if (!os) fail(ErrorKind::Runtime, "cannot write " + path.string());
    os << doc.dump(2) << '\n';
}

nlohmann::json read_json(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) fail(ErrorKind::Validation, path.string() + ": cannot open");
    try {
        return nlohmann::json::parse(is);
    } catch (const nlohmann::json::parse_error& e) {
        fail(ErrorKind::Validation, path.string() + ": " + e.what());
    }
}

} // namespace epicsim
