#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "epicsim/ledger.hpp"
#include "epicsim/soma.hpp"
#include "epicsim/synapse.hpp"

namespace epicsim {

inline constexpr int kSpecVersion = 1;

enum class Medium { Electronic, Photonic };
enum class Polarity { Excitatory, Inhibitory };
enum class PlasticityRule { None, XCAL, STDP };

struct Connectivity {
    enum class Kind { Dense, Bernoulli } kind = Kind::Dense;
    double p = 1.0;
};

struct PhotonicSpec {
    double laser_dbm = 0.0;
    std::uint32_t mzi_count = 1;
    double coupler_db = 0.0;
    double detector_dbm = -30.0;
    std::optional<std::uint32_t> input_port;
    std::optional<std::uint32_t> output_port;
    bool always_on = false; // charges laser_static_power continuously
};

struct WeightInit {
    double low = 0.2;
    double high = 0.4;
};

struct PopulationSpec {
    std::string id;
    std::uint32_t size = 1;
    SomaParams soma;
    std::string region;
    int plane = 0;
};

struct ProjectionSpec {
    std::string id;
    std::string sender;
    std::string receiver;
    std::optional<std::uint32_t> branch;
    Medium medium = Medium::Electronic;
    Polarity polarity = Polarity::Excitatory;
    Connectivity connectivity;
    std::string device_name = "ecram";
    DeviceModel device;
    DendriteKernel kernel;
    std::optional<double> latency_ms; // default: one dt photonic, 1 ms electronic
    double gain = 1.0;
    WeightInit init;
    PlasticityRule plasticity = PlasticityRule::None;
    PhotonicSpec photonic;
    // Synapses (sender index, receiver index) left out of the built mask.
    std::vector<std::pair<std::uint32_t, std::uint32_t>> exclude;
};

struct EngineParams {
    double dt = 0.1;           // ms
    std::uint64_t seed = 1;
    double max_rate_hz = 100;  // activity 1.0 <-> this firing rate
    double settle_eps = 1e-3;
};

struct NetworkSpec {
    int version = kSpecVersion;
    std::string name = "network";
    EngineParams engine;
    std::uint32_t awgr_size = 64;
    std::uint32_t max_fanout = 8000;
    EnergyParams energy;
    XcalParams xcal;
    StdpParams stdp;
    std::map<std::string, DeviceModel> devices; // named device overrides
    std::vector<PopulationSpec> populations;
    std::vector<ProjectionSpec> projections;
    std::optional<std::string> input_layer;
    std::optional<std::string> output_layer;
};

/// Parses and validates a spec document, filling defaults. Errors are
/// Validation errors whose message starts with the offending document path,
/// e.g. "projections[0].sender: unknown id 'x'".
NetworkSpec parse_spec(const nlohmann::json& doc);
NetworkSpec load_spec(const std::filesystem::path& path);

/// Canonical document (sorted keys, every field explicit).
nlohmann::json spec_to_json(const NetworkSpec& spec);

/// Cross-reference checks shared by parse_spec and build_network.
void validate_spec(const NetworkSpec& spec);

std::string to_string(Medium m);
std::string to_string(Polarity p);
std::string to_string(PlasticityRule r);
std::string to_string(SomaModel m);
std::string to_string(KernelKind k);
std::string to_string(DeviceKind k);

} // namespace epicsim
