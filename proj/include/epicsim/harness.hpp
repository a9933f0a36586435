#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "epicsim/engine.hpp"
#include "epicsim/fabric.hpp"
#include "epicsim/probe.hpp"
#include "epicsim/spec.hpp"

namespace epicsim {

inline constexpr const char* kVersion = "0.1.0";

// ---- pattern association ---------------------------------------------------

struct PatternPair {
    std::vector<double> input;  // 0/1
    std::vector<double> target; // 0/1
};

struct PatternDataset {
    std::uint32_t input_size = 0;
    std::uint32_t output_size = 0;
    double sparsity = 0.25;
    std::uint64_t seed = 0;
    std::vector<PatternPair> pairs;
};

/// Number of active bits in a pattern of `size` at `sparsity`: round(sparsity * size), at least 1.
std::uint32_t active_bits(std::uint32_t size, double sparsity);

/// Every pattern has exactly active_bits() ones. Inputs are pairwise distinct;
/// targets are drawn independently. Throws Domain when n_pairs exceeds the
/// number of distinct input patterns.
PatternDataset gen_pattern_task(std::uint32_t n_pairs, std::uint32_t input_size, std::uint32_t output_size,
                                double sparsity, std::uint64_t seed);

/// Overlap of the top-k output units with the k target bits, divided by k.
/// Units tied at the k-th value share the remaining slots fractionally, so an
/// all-equal output scores k/n (chance).
double recall_score(const std::vector<double>& output, const std::vector<double>& target);

/// Activity levels fed as plus-phase clamps for target bits.
struct TeacherLevels {
    double on = 0.95;
    double off = 0.05;
};

struct TrainOptions {
    std::uint32_t max_epochs = 50;
    double criterion = 0.95;   // stop once mean recall reaches this
    bool stop_at_criterion = true;
    TeacherLevels teacher;
    std::uint64_t shuffle_seed = 0; // per-epoch presentation order
};

struct EpochRecord {
    std::uint32_t epoch = 0; // 1-based
    double recall = 0.0;     // mean over the dataset after the epoch
    double energy_fj = 0.0;  // ledger total spent during the epoch's training trials
    std::uint32_t trials = 0;
};

struct TaskResult {
    double accuracy = 0.0; // recall or success rate, in [0, 1]
    double mean_steps = 0.0;
    double optimal_steps = 0.0;
    double energy_per_trial_j = 0.0;
    std::uint32_t trials = 0;
    std::uint64_t seed = 0;
    std::vector<EpochRecord> epochs;
    std::optional<std::uint32_t> epochs_to_criterion;

    nlohmann::json to_json() const;
};

/// Default two-layer XCAL network for an in -> out association task.
NetworkSpec pattern_network_spec(std::uint32_t input_size, std::uint32_t output_size, std::uint64_t seed = 1);

/// Mean recall of the engine's minus-phase readout over the dataset.
double evaluate_patterns(Engine& engine, const PatternDataset& data);

TaskResult train_patterns(Engine& engine, const PatternDataset& data, const TrainOptions& opts = {});

// ---- grid world ------------------------------------------------------------

struct Cell {
    int x = 0;
    int y = 0;
    bool operator==(const Cell&) const = default;
    auto operator<=>(const Cell&) const = default;
};

enum class Action { N = 0, E = 1, S = 2, W = 3 };
inline constexpr int kActionCount = 4;
std::string to_string(Action a);

enum class NavMode { Beacon, Route, Map };
std::string to_string(NavMode m);
NavMode nav_mode_from(const std::string& s);

struct GridWorld {
    int width = 5;
    int height = 5;
    std::vector<Cell> walls;
    Cell goal{4, 4};
    Cell start{0, 0};
    bool beacon_visible = true;
    NavMode mode = NavMode::Beacon;
    std::uint32_t max_steps = 50;

    /// Throws Validation when start or goal is out of bounds or on a wall.
    void validate() const;
    bool in_bounds(Cell c) const { return c.x >= 0 && c.y >= 0 && c.x < width && c.y < height; }
    bool is_wall(Cell c) const;
    /// Walls and borders block; the agent stays in place. y grows southwards.
    Cell transition(Cell c, Action a) const;
    int cell_index(Cell c) const { return c.y * width + c.x; }

    /// Observation vector: width*height one-hot position, 4 beacon units, 4 instruction units.
    std::uint32_t observation_size() const { return static_cast<std::uint32_t>(width * height) + 8; }
};

GridWorld parse_gridworld(const nlohmann::json& doc);
nlohmann::json gridworld_to_json(const GridWorld& w);

/// Shortest path length from `from` to the goal, or nullopt when unreachable.
std::optional<std::uint32_t> bfs_distance(const GridWorld& w, Cell from);
/// Optimal first action from `from` (lowest index among optimal moves); nullopt at the goal or when unreachable.
std::optional<Action> bfs_action(const GridWorld& w, Cell from);
/// Actions of the lowest-index shortest route from `from` to the goal.
std::vector<Action> bfs_route(const GridWorld& w, Cell from);

/// Beacon units: activity toward the goal along each axis, normalized by the Manhattan distance.
std::vector<double> beacon_signal(const GridWorld& w, Cell at);

/// Full observation for `at`. `instruction` is the current route token (Route mode only).
std::vector<double> encode_observation(const GridWorld& w, Cell at, std::optional<Action> instruction = {});

/// The policy the agent is trained to imitate in each mode.
Action teacher_action(const GridWorld& w, Cell at, std::optional<Action> instruction = {});

/// Argmax with ties to the lowest index. Throws Validation unless 4 entries.
Action select_action(const std::vector<double>& action_rates);

struct Trajectory {
    std::vector<Cell> cells; // visited cells, starting with the start cell
    std::vector<Action> actions;
    bool success = false;
};

struct EpisodeResult {
    Trajectory trajectory;
    std::uint32_t steps = 0;
    std::uint32_t optimal_steps = 0;
    bool success = false;
    std::uint64_t seed = 0;
    double energy_fj = 0.0;
};

/// Network with input layer "obs" and a 4-unit action layer "action".
NetworkSpec navigation_network_spec(const GridWorld& world, std::uint64_t seed = 1);

/// Runs one closed-loop episode. The engine's output layer must have 4 units.
EpisodeResult run_episode(const GridWorld& world, Engine& agent, std::uint64_t seed);

/// Random distinct start and goal on an otherwise fixed world (pure function of the seed).
GridWorld seeded_world(const GridWorld& base, std::uint64_t seed);

struct NavTrainOptions {
    std::uint32_t epochs = 20;
    std::uint32_t samples_per_epoch = 50; // random (start, goal) states per epoch
    TeacherLevels teacher;
    std::uint64_t seed = 7;
};

/// Imitation training against teacher_action on states drawn from seeded worlds.
TaskResult train_navigation(Engine& agent, const GridWorld& base, const NavTrainOptions& opts = {});

/// Runs `episodes` seeded episodes (seeds first_seed ...) and aggregates.
TaskResult evaluate_navigation(Engine& agent, const GridWorld& base, std::uint32_t episodes, std::uint64_t first_seed);

// ---- recipes ---------------------------------------------------------------

inline const std::vector<std::string> kRecipes = {"pruning_trajectory", "oscillations", "efficiency_sweep"};

struct PruningStage {
    double density = 1.0;
    std::uint32_t epochs = 5;
};

struct PruningRow {
    double requested_density = 1.0;
    double density = 1.0; // realized active / built
    double accuracy = 0.0;
    double energy_per_trial_j = 0.0;
};

std::vector<PruningRow> pruning_trajectory(const NetworkSpec& spec, const std::string& projection_id,
                                           const PatternDataset& data, const std::vector<PruningStage>& schedule);

struct OscillationOptions {
    std::string population = "E";
    double duration_ms = 4200.0;
    double window_ms = 2000.0; // BandPowers per window
    double hop_ms = 1000.0;
    double discard_ms = 200.0; // transient dropped before analysis
    double smooth_ms = 5.0;    // exponential low-pass on the population rate (0 = raw)
};

struct OscillationReport {
    double peak_hz = 0.0;       // dominant frequency of the analysed span
    double gamma_peak_hz = 0.0; // strongest bin inside the gamma band
    double resolution_hz = 0.0;
    double volley_period_ms = 0.0; // mean spacing of population volleys in the raster
    BandPowers bands;                                  // whole analysed span
    std::vector<std::pair<double, BandPowers>> windows; // (window start ms, powers)
    std::string raster_hash;
};

/// Spec of an excitatory/inhibitory loop whose population volleys repeat every `round_trip_ms`.
NetworkSpec ei_loop_spec(double round_trip_ms = 25.0, std::uint64_t seed = 1);
/// Constant drive that keeps the excitatory population of ei_loop_spec firing.
Stimulus ei_loop_stimulus();

OscillationReport oscillations(const NetworkSpec& spec, const Stimulus& stimulus, const OscillationOptions& opts);

struct Topology {
    std::string name;
    NetworkSpec spec;
};

struct EfficiencyRow {
    std::string topology;
    double accuracy = 0.0;
    double joules_per_trial = 0.0;
    std::size_t synapses = 0;
};

std::vector<EfficiencyRow> efficiency_sweep(const std::vector<Topology>& topologies, const PatternDataset& data,
                                            const TrainOptions& opts);

/// Generic entry used by the CLI. `args` carries recipe-specific settings.
/// Throws Validation listing the recipes when the name is unknown.
nlohmann::json run_recipe(const std::string& name, const NetworkSpec& spec, const nlohmann::json& args);

// ---- run artifacts ---------------------------------------------------------

struct Manifest {
    std::string spec_hash; // sha256 of the canonical spec document
    std::uint64_t seed = 0;
    std::string version = kVersion;
    std::string command;
    nlohmann::json args = nlohmann::json::object();
    std::vector<std::string> artifacts;

    nlohmann::json to_json() const;
    static Manifest from_json(const nlohmann::json& j);
};

std::string spec_hash(const NetworkSpec& spec);

/// One line per spike: {"t": ms, "pop": id, "idx": i}.
void write_raster_jsonl(const std::filesystem::path& path, const std::vector<SpikeRecord>& raster, const Network& net,
                        double dt);
/// Per-category totals and counts plus the grand total.
nlohmann::json ledger_report(const EnergyLedger& ledger);
/// Writes `doc` with sorted keys and a trailing newline.
void write_json(const std::filesystem::path& path, const nlohmann::json& doc);
nlohmann::json read_json(const std::filesystem::path& path);

} // namespace epicsim
