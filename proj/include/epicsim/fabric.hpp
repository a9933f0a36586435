#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "epicsim/rng.hpp"
#include "epicsim/spec.hpp"

namespace epicsim {

// Loss constants for the photonic path model.
inline constexpr double kMziLossDbPerPi = 0.0055;
inline constexpr double kTsovLossDb = 1.0; // worst case of the "< 1 dB" figure

struct PhotonicPath {
    double laser_dbm = 0.0;
    std::uint32_t mzi_count = 0;
    std::vector<double> mzi_phases; // radians; elements beyond the list sit at phase 0
    std::uint32_t tsov_count = 0;
    double coupler_loss_db = 0.0;
    double detector_sensitivity_dbm = -30.0;
    std::uint32_t wavelength = 0;
};

struct LossBudget {
    double total_db = 0.0;
    double margin_db = 0.0;
    bool ok() const { return margin_db >= 0.0; }
};

/// total = sum 0.0055 |phi|/pi + 1.0 per TSOV + coupler; margin = laser - total - sensitivity.
LossBudget loss_budget(const PhotonicPath& path);

/// Joins two path segments end to end (the laser and detector of `a` are kept).
PhotonicPath concatenate(const PhotonicPath& a, const PhotonicPath& b);

/// Cyclic arrayed-waveguide router: (input + wavelength) mod n.
std::uint32_t awgr_route(std::uint32_t n_ports, std::uint32_t input_port, std::uint32_t wavelength);

struct Population {
    std::string id;
    std::uint32_t size = 0;
    SomaParams soma;
    std::string region;
    int plane = 0;
    std::uint32_t offset = 0; // first global neuron index
};

struct PhotonicRoute {
    std::uint32_t input_port = 0;
    std::uint32_t output_port = 0;
    PhotonicPath path;  // worst case: every MZI at phi = pi
    LossBudget budget;
    double base_loss_db = 0.0; // TSOVs + coupler, excludes the programmed MZI
};

struct Projection {
    std::string id;
    std::uint32_t sender = 0;   // population index
    std::uint32_t receiver = 0; // population index
    std::uint32_t branch = 0;
    Medium medium = Medium::Electronic;
    Polarity polarity = Polarity::Excitatory;
    DeviceModel device;
    DendriteKernel kernel;
    double latency_ms = 1.0;
    double gain = 1.0;
    PlasticityRule rule = PlasticityRule::None;
    bool plastic = false;     // rule != None and not switched off
    double input_gain = 1.0;  // per-projection excitation knob
    bool always_on = false;
    std::uint32_t n_pre = 0;
    std::uint32_t n_post = 0;
    std::vector<SynapseState> synapses; // row-major [pre * n_post + post]
    std::vector<std::uint8_t> built;
    std::vector<std::uint8_t> pruned;
    std::vector<std::uint8_t> lesioned;
    std::optional<PhotonicRoute> route;

    std::size_t at(std::uint32_t pre, std::uint32_t post) const { return std::size_t{pre} * n_post + post; }
    bool active(std::size_t k) const { return built[k] && !pruned[k] && !lesioned[k]; }
    bool active(std::uint32_t pre, std::uint32_t post) const { return active(at(pre, post)); }
    double weight(std::uint32_t pre, std::uint32_t post) const { return weight_of(synapses[at(pre, post)], device); }
    std::size_t built_count() const;
    std::size_t active_count() const;
    /// Optical power fraction reaching the detector for synapse k: w * 10^(-loss/10).
    double photonic_transmission(std::size_t k) const;
};

struct ValidationReport {
    std::vector<std::string> warnings;
    std::vector<std::string> loss_failures;
};

class Network {
public:
    NetworkSpec spec;
    std::vector<Population> populations;
    std::vector<Projection> projections;
    std::uint32_t awgr_size = 64;
    std::uint32_t max_fanout = 8000;
    std::uint32_t neuron_count = 0;
    ValidationReport report;

    std::optional<std::uint32_t> find_population(const std::string& id) const;
    std::optional<std::uint32_t> find_projection(const std::string& id) const;
    const Population& population(const std::string& id) const;
    Projection& projection(const std::string& id);
    const Projection& projection(const std::string& id) const;
    /// Outgoing projection indices per population.
    const std::vector<std::uint32_t>& outgoing(std::uint32_t population) const { return outgoing_[population]; }
    const std::vector<std::uint32_t>& incoming(std::uint32_t population) const { return incoming_[population]; }
    /// Count of active photonic synapses leaving a neuron.
    std::uint32_t optical_fanout(std::uint32_t population, std::uint32_t index) const;
    void index_topology();

private:
    std::vector<std::vector<std::uint32_t>> outgoing_;
    std::vector<std::vector<std::uint32_t>> incoming_;
};

/// Instantiates populations and projections. Sparse masks and initial weights
/// are drawn from a per-projection stream keyed by the seed and projection id,
/// so adding or excluding one projection's synapses leaves the rest unchanged.
Network build_network(const NetworkSpec& spec);
Network build_network(const NetworkSpec& spec, std::uint64_t seed);

/// Removes the floor(fraction * built) smallest-|w| synapses of a projection
/// (ties by lowest (sender, receiver)). The pruned set is a function of the
/// fraction, so the operation is idempotent and monotone in the fraction.
void prune_in_place(Network& net, const std::string& projection_id, double fraction);
Network prune(Network net, const std::string& projection_id, double fraction);
/// Keeps at most floor(density * built) synapses by pruning the weakest active
/// ones. Never un-prunes, so a density above the current one is a no-op.
void prune_to_density(Network& net, const std::string& projection_id, double density);

/// SHA-256 over masks, levels, routes and budgets.
std::string network_hash(const Network& net);

} // namespace epicsim
