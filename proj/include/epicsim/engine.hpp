#pragma once

#include <cstdint>
#include <deque>
#include <limits>
#include <map>
#include <optional>
#include <queue>
#include <string>
#include <vector>

#include <json.hpp>

#include "epicsim/fabric.hpp"
#include "epicsim/intervention.hpp"
#include "epicsim/ledger.hpp"
#include "epicsim/rng.hpp"

namespace epicsim {

inline constexpr int kSnapshotVersion = 1;
inline constexpr const char* kSnapshotFormat = "epicsim-snapshot";

struct NeuronRef {
    std::uint32_t pop = 0;
    std::uint32_t index = 0;
    bool operator==(const NeuronRef&) const = default;
};

struct StimulusEntry {
    enum class Kind { Current, Clamp } kind = Kind::Current;
    std::string population;
    std::optional<std::uint32_t> index; // whole population when absent
    double value = 0.0;                 // current, or clamp activity in [0, 1]
    double start_ms = 0.0;
    double end_ms = std::numeric_limits<double>::infinity();
};

struct Stimulus {
    std::vector<StimulusEntry> entries;
};

Stimulus parse_stimulus(const nlohmann::json& doc);
nlohmann::json stimulus_to_json(const Stimulus& s);

struct SpikeRecord {
    std::uint64_t step = 0;
    std::uint32_t pop = 0;
    std::uint32_t index = 0;
    bool operator==(const SpikeRecord&) const = default;
};

/// One energy attribution. Spikes contribute a soma entry plus an optical
/// fanout entry when the neuron drives photonic links; deliveries, writes
/// and static laser power contribute one entry each.
struct TomographyEntry {
    enum class Kind { Spike, Delivery, Write, Laser } kind = Kind::Spike;
    std::uint64_t emit_step = 0;
    std::uint64_t arrival_step = 0;
    std::int32_t projection = -1; // -1 for soma-level charges
    NeuronRef source;
    std::uint32_t target = 0;     // receiver index for deliveries and writes
    EnergyCategory category = EnergyCategory::SomaSpike;
    double energy_fj = 0.0;
};

struct Clamp {
    NeuronRef neuron;
    double activity = 0.0;
};

struct SettleRequest {
    std::vector<Clamp> clamps;
    std::vector<std::pair<NeuronRef, double>> currents;
    double phase_len = 50.0; // ms
    double eps = 1e-3;
};

struct SettleResult {
    std::vector<double> traces; // per global neuron
    std::uint64_t steps = 0;
    bool early_exit = false;
};

struct TrialResult {
    std::vector<double> minus; // per global neuron
    std::vector<double> plus;
    std::map<std::string, std::vector<double>> raw_dw; // per XCAL projection, row-major, 0 off-mask
    std::vector<double> readout;                       // minus-phase output-layer traces
    std::uint64_t writes = 0;
    std::uint64_t stuck_warnings = 0;
};

class Engine;

/// Read-only hooks called by the engine at step boundaries.
class Observer {
public:
    virtual ~Observer() = default;
    virtual void on_spike(const Engine&, const SpikeRecord&) {}
    virtual void on_step(const Engine&) {}
};


class Engine {
public:
    explicit Engine(Network net);
    Engine(Network net, std::uint64_t seed);

    // Clock
    std::uint64_t step_index() const { return step_; }
    double dt() const { return dt_; }
    double now() const { return static_cast<double>(step_) * dt_; }

    const Network& network() const { return net_; }
    std::uint64_t seed() const { return seed_; }

    /// Throws Validation before anything runs if a target does not resolve.
    void set_stimulus(Stimulus s);
    const Stimulus& stimulus() const { return stimulus_; }

    void step();
    void advance(std::uint64_t steps);
    /// ms must be a multiple of dt.
    void run_for(double ms);

    // Observation
    const std::vector<SpikeRecord>& raster() const { return raster_; }
    std::string raster_hash() const;
    const EnergyLedger& ledger() const { return ledger_; }
    const RunStats& stats() const { return stats_; }
    std::uint32_t global_index(NeuronRef n) const;
    NeuronRef ref_of(std::uint32_t global) const;
    NeuronRef resolve(const std::string& pop, std::uint32_t index) const;
    const SomaState& soma(std::uint32_t global) const { return somas_[global]; }
    double trace(std::uint32_t global) const { return traces_[global]; }
    const std::vector<double>& traces() const { return traces_; }
    /// Total input current used in the most recent step.
    double input_current(std::uint32_t global) const { return inputs_[global]; }
    bool lesioned(std::uint32_t global) const { return neuron_lesioned_[global] != 0; }
    std::size_t pending_events() const { return queue_.size(); }

    void enable_tomography(bool on) { tomography_on_ = on; }
    const std::vector<TomographyEntry>& tomography() const { return tomography_; }

    void add_observer(Observer* o);
    void remove_observer(Observer* o);

    /// Queues an intervention for the first step boundary with clock >= at.
    /// Rejections leave the engine untouched.
    Ack submit(const Intervention& iv);
    std::size_t pending_interventions() const { return interventions_.size(); }

    // Two-phase learning
    SettleResult settle(const SettleRequest& req);
    TrialResult train_trial(const std::vector<double>& input, const std::vector<double>& target);
    TrialResult train_trial(const std::vector<double>& input, const std::vector<double>& target,
                            const XcalParams& xcal);
    /// Minus-phase readout of the output layer.
    std::vector<double> infer(const std::vector<double>& input);
    /// Returns somas, traces, kernels and the queue to rest; keeps weights and the clock.
    void reset_dynamics();

    const std::string& input_layer() const;
    const std::string& output_layer() const;

    // Structural edits between steps
    void prune(const std::string& projection_id, double fraction);
    void prune_to_density(const std::string& projection_id, double density);
    void set_plasticity(const std::string& projection_id, bool on);

    // Snapshots
    nlohmann::json snapshot() const;
    static Engine restore(const nlohmann::json& doc);

private:
    struct Event {
        std::uint64_t arrival = 0;
        std::uint32_t source = 0; // global neuron index
        std::uint32_t projection = 0;
        std::uint64_t emit = 0;
        bool operator>(const Event& o) const {
            if (arrival != o.arrival) return arrival > o.arrival;
            if (source != o.source) return source > o.source;
            return projection > o.projection;
        }
    };
    struct KernelBank {
        std::vector<double> a;
        std::vector<double> b;
        std::vector<std::deque<std::pair<std::uint64_t, double>>> history;
        double decay = 1.0;
    };
    struct ClampState {
        bool on = false;
        double value = 0.0;
        std::uint64_t start = 0;
    };
    struct Injection {
        std::vector<std::uint32_t> targets;
        double amplitude = 0.0;
        std::uint64_t start = 0;
        std::uint64_t end = 0;
    };
    struct ResolvedEntry {
        StimulusEntry::Kind kind;
        std::uint32_t first = 0;
        std::uint32_t count = 0;
        double value = 0.0;
        std::uint64_t start = 0;
        std::uint64_t end = 0;
    };
    struct Pending {
        std::uint64_t id = 0;
        Intervention iv;
    };

    void init_runtime();
    void apply_due_interventions();
    void apply(const Intervention& iv);
    std::vector<std::uint32_t> neurons_of(const Selector& s) const;
    void validate(const Intervention& iv) const;
    void deliver(const Event& ev);
    void emit_spike(std::uint32_t g);
    void stdp_on_post(std::uint32_t g);
    void program(std::uint32_t proj, std::size_t k, double dw, std::uint64_t* writes, std::uint64_t* stuck);
    double activity_of(std::uint32_t g) const;
    std::uint64_t latency_steps(const Projection& p) const;
    std::uint64_t to_step(double ms) const;
    std::vector<ResolvedEntry> resolve_stimulus(const Stimulus& s) const;
    void record(TomographyEntry e);

    Network net_;
    std::uint64_t seed_ = 1;
    double dt_ = 0.1;
    std::uint64_t step_ = 0;
    std::uint64_t origin_ = 0; // activity estimator origin (last reset)

    std::vector<SomaParams> params_;
    std::vector<SomaState> somas_;
    std::vector<double> traces_;
    std::vector<double> inputs_;
    std::vector<std::int64_t> last_spike_;
    std::vector<std::int64_t> prev_spike_;
    std::vector<std::uint8_t> neuron_lesioned_;
    std::vector<std::optional<double>> theta_clamp_;
    std::vector<ClampState> settle_clamp_;
    std::vector<double> settle_current_;
    std::vector<KernelBank> kernels_;
    std::vector<std::vector<std::int64_t>> last_arrival_; // per projection, per sender (STDP)
    std::priority_queue<Event, std::vector<Event>, std::greater<Event>> queue_;
    std::vector<RngStream> write_rng_; // per projection, purpose "write:<id>"
    std::vector<Injection> injections_;
    std::vector<Pending> interventions_;
    std::uint64_t next_intervention_id_ = 1;
    Stimulus stimulus_;
    std::vector<ResolvedEntry> resolved_;
    std::vector<ClampState> stim_clamp_;
    double tau_avg_ = 10.0;
    double rmax_step_ = 0.01; // max rate per step

    EnergyLedger ledger_;
    RunStats stats_;
    std::vector<SpikeRecord> raster_;
    bool tomography_on_ = false;
    std::vector<TomographyEntry> tomography_;
    std::vector<Observer*> observers_;
};

struct RunOptions {
    bool tomography = false;
    std::vector<Observer*> observers;
    std::vector<Intervention> interventions;
};

struct RunTrace {
    double dt = 0.1;
    std::vector<SpikeRecord> raster;
    std::string raster_hash;
    EnergyLedger ledger;
    RunStats stats;
    std::vector<TomographyEntry> tomography;
};

/// Builds an engine over `net`, runs `duration_ms` and returns the trace.
RunTrace run(const Network& net, const Stimulus& stimulus, double duration_ms, std::uint64_t seed,
             const RunOptions& options = {});

/// Canonical raster lines "t pop idx" with t in ms.
std::string raster_text(const std::vector<SpikeRecord>& raster, const Network& net, double dt);
std::string raster_hash(const std::vector<SpikeRecord>& raster);

} // namespace epicsim
