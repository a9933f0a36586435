#include <algorithm>
#include <cmath>

#include "epicsim/error.hpp"
#include "epicsim/harness.hpp"

namespace epicsim {

namespace {

// Synaptic and somatic delay between an E volley and the next one beyond
// the two projection latencies: I integration plus E recovery from inhibition.
constexpr double kLoopOverheadMs = 10.9;

std::string recipe_list() {
    std::string s;
    for (const auto& r : kRecipes) s += (s.empty() ? "" : ", ") + r;
    return s;
}

double realized_density(const Engine& e, const std::string& projection_id) {
    const auto& p = e.network().projection(projection_id);
    const auto built = p.built_count();
    return built == 0 ? 0.0 : static_cast<double>(p.active_count()) / static_cast<double>(built);
}

// Mean spacing of volley onsets; a volley starts after a silent gap of at least `gap_ms`.
double volley_period(const std::vector<SpikeRecord>& raster, std::uint32_t pop, std::uint64_t from_step, double dt,
                     double gap_ms = 5.0) {
    std::vector<double> onsets;
    double last = -1e300;
    for (const auto& r : raster) {
        if (r.pop != pop || r.step < from_step) continue;
        const double t = static_cast<double>(r.step) * dt;
        if (t - last >= gap_ms) onsets.push_back(t);
        last = t;
    }
    if (onsets.size() < 2) return 0.0;
    return (onsets.back() - onsets.front()) / static_cast<double>(onsets.size() - 1);
}

PatternDataset dataset_from(const nlohmann::json& args, std::uint32_t in, std::uint32_t out) {
    return gen_pattern_task(args.value("pairs", 10u), in, out, args.value("sparsity", 0.25), args.value("data_seed", 1u));
}

nlohmann::json bands_json(const BandPowers& b) {
    return {{"theta", b.theta}, {"alpha", b.alpha}, {"beta", b.beta}, {"gamma", b.gamma}};
}

} // namespace

std::vector<PruningRow> pruning_trajectory(const NetworkSpec& spec, const std::string& projection_id,
                                           const PatternDataset& data, const std::vector<PruningStage>& schedule) {
    if (schedule.empty()) fail(ErrorKind::Validation, "pruning_trajectory: schedule is empty");
    Engine engine(build_network(spec));
    engine.network().projection(projection_id); // throws on an unknown id before any work
    std::vector<PruningRow> rows;
    for (std::size_t s = 0; s < schedule.size(); ++s) {
        const auto& stage = schedule[s];
        if (!(stage.density >= 0.0 && stage.density <= 1.0))
            fail(ErrorKind::Validation, "schedule[" + std::to_string(s) + "].density: must be in [0, 1]");
        engine.prune_to_density(projection_id, stage.density);
        TrainOptions opts;
        opts.max_epochs = stage.epochs;
        opts.stop_at_criterion = false;
        opts.shuffle_seed = s;
        PruningRow row{stage.density, realized_density(engine, projection_id), 0.0, 0.0};
        if (stage.epochs > 0) {
            const auto r = train_patterns(engine, data, opts);
            row.accuracy = r.accuracy;
            row.energy_per_trial_j = r.energy_per_trial_j;
        } else {
            row.accuracy = evaluate_patterns(engine, data);
        }
        rows.push_back(row);
    }
    return rows;
}

NetworkSpec ei_loop_spec(double round_trip_ms, std::uint64_t seed) {
    if (!(round_trip_ms > kLoopOverheadMs + 2.0))
        fail(ErrorKind::Domain, "ei_loop_spec: round trip must exceed " + std::to_string(kLoopOverheadMs + 2.0) + " ms");
    const double leg = (round_trip_ms - kLoopOverheadMs) / 2.0;
    // E stays refractory until just before the inhibition returns, so each cell
    // fires once per volley and the loop, not the drive, sets the next volley.
    const nlohmann::json e_soma{{"model", "LIF"}, {"tau_m", 10.0}, {"t_ref", 2.0 * leg}, {"theta0", 1.0}};
    const nlohmann::json i_soma{{"model", "LIF"}, {"tau_m", 2.0}, {"t_ref", 2.0}, {"theta0", 1.0}};
    nlohmann::json doc{
        {"version", kSpecVersion},
        {"name", "ei_loop"},
        {"engine", {{"dt", 0.1}, {"seed", seed}}},
        {"populations", {{{"id", "E"}, {"size", 40}, {"soma", e_soma}}, {{"id", "I"}, {"size", 10}, {"soma", i_soma}}}},
        {"projections",
         {{{"id", "e_to_i"},
           {"sender", "E"},
           {"receiver", "I"},
           {"kernel", {{"kind", "leaky_recurrent"}, {"tau", 1.0}}},
           {"gain", 1.0},
           {"latency_ms", leg}},
          {{"id", "i_to_e"},
           {"sender", "I"},
           {"receiver", "E"},
           {"polarity", "inhibitory"},
           {"kernel", {{"kind", "leaky_recurrent"}, {"tau", 2.0}}},
           {"gain", 4.0},
           {"latency_ms", leg}}}}};
    return parse_spec(doc);
}

Stimulus ei_loop_stimulus() {
    Stimulus s;
    s.entries.push_back({StimulusEntry::Kind::Current, "E", std::nullopt, 3.0, 0.0,
                         std::numeric_limits<double>::infinity()});
    return s;
}

OscillationReport oscillations(const NetworkSpec& spec, const Stimulus& stimulus, const OscillationOptions& opts) {
    const Network net = build_network(spec);
    const auto pop = net.find_population(opts.population);
    if (!pop) fail(ErrorKind::Validation, "oscillations: unknown population '" + opts.population + "'");
    if (!(opts.discard_ms >= 0.0 && opts.duration_ms - opts.discard_ms >= kMinSpectrumMs))
        fail(ErrorKind::Validation, "oscillations: need at least " + std::to_string(static_cast<int>(kMinSpectrumMs)) +
                                        " ms after the discarded transient");
    if (opts.window_ms < kMinSpectrumMs || opts.hop_ms <= 0.0)
        fail(ErrorKind::Validation, "oscillations: window must be >= 2000 ms and hop positive");

    const auto trace = run(net, stimulus, opts.duration_ms, spec.engine.seed);
    const double dt = trace.dt;
    const auto steps = static_cast<std::uint64_t>(std::llround(opts.duration_ms / dt));
    auto rate = population_rate(trace.raster, net, *pop, steps, dt);
    // Sharp volleys put near-equal power in every harmonic; a synaptic-scale
    // low-pass (an LFP-like signal) leaves the fundamental dominant.
    if (opts.smooth_ms > 0.0) {
        const double decay = std::exp(-dt / opts.smooth_ms);
        double y = 0.0;
        for (auto& x : rate) x = y = decay * y + (1.0 - decay) * x;
    }
    const auto skip = static_cast<std::size_t>(std::llround(opts.discard_ms / dt));

    OscillationReport rep;
    rep.raster_hash = trace.raster_hash;
    const std::span<const double> span(rate.data() + skip, rate.size() - skip);
    const auto sp = spectrum(span, dt);
    rep.peak_hz = sp.dominant_hz;
    rep.resolution_hz = sp.resolution_hz;
    rep.bands = sp.bands;
    double best = -1.0;
    const BandEdges edges;
    for (std::size_t k = 0; k < sp.freqs_hz.size(); ++k)
        if (sp.freqs_hz[k] >= edges.gamma_lo && sp.freqs_hz[k] < edges.gamma_hi && sp.psd[k] > best) {
            best = sp.psd[k];
            rep.gamma_peak_hz = sp.freqs_hz[k];
        }
    rep.volley_period_ms = volley_period(trace.raster, *pop, skip, dt);

    const auto win = static_cast<std::size_t>(std::llround(opts.window_ms / dt));
    const auto hop = static_cast<std::size_t>(std::llround(opts.hop_ms / dt));
    for (std::size_t start = skip; start + win <= rate.size(); start += hop)
        rep.windows.emplace_back(static_cast<double>(start) * dt,
                                 spectrum(std::span<const double>(rate.data() + start, win), dt).bands);
    return rep;
}

std::vector<EfficiencyRow> efficiency_sweep(const std::vector<Topology>& topologies, const PatternDataset& data,
                                            const TrainOptions& opts) {
    std::vector<EfficiencyRow> rows;
    for (const auto& t : topologies) {
        Engine engine(build_network(t.spec));
        const auto r = train_patterns(engine, data, opts);
        std::size_t synapses = 0;
        for (const auto& p : engine.network().projections) synapses += p.active_count();
        rows.push_back({t.name, r.accuracy, r.energy_per_trial_j, synapses});
    }
    return rows;
}

nlohmann::json run_recipe(const std::string& name, const NetworkSpec& spec, const nlohmann::json& args) {
    if (std::find(kRecipes.begin(), kRecipes.end(), name) == kRecipes.end())
        fail(ErrorKind::Validation, "unknown recipe '" + name + "' (expected one of: " + recipe_list() + ")");
    if (!args.is_object()) fail(ErrorKind::Validation, "recipe arguments must be an object");
    nlohmann::json rep{{"recipe", name}, {"version", kVersion}};

    const auto layer_sizes = [&] {
        if (!spec.input_layer || !spec.output_layer)
            fail(ErrorKind::Validation, "recipe '" + name + "': spec needs layers.input and layers.output");
        const Network net = build_network(spec);
        return std::pair{net.population(*spec.input_layer).size, net.population(*spec.output_layer).size};
    };

    try {
        if (name == "pruning_trajectory") {
            const auto [in, out] = layer_sizes();
            std::vector<PruningStage> schedule;
            for (const auto& s : args.at("schedule"))
                schedule.push_back({s.at("density").get<double>(), s.value("epochs", 5u)});
            const std::string projection = args.value("projection", spec.projections.empty() ? std::string{} : spec.projections.front().id);
            auto& rows = rep["rows"] = nlohmann::json::array();
            for (const auto& r : pruning_trajectory(spec, projection, dataset_from(args, in, out), schedule))
                rows.push_back({{"requested_density", r.requested_density},
                                {"density", r.density},
                                {"accuracy", r.accuracy},
                                {"energy_per_trial_j", r.energy_per_trial_j}});
        } else if (name == "oscillations") {
            OscillationOptions o;
            o.population = args.value("population", o.population);
            o.duration_ms = args.value("duration_ms", o.duration_ms);
            o.window_ms = args.value("window_ms", o.window_ms);
            o.hop_ms = args.value("hop_ms", o.hop_ms);
            o.discard_ms = args.value("discard_ms", o.discard_ms);
            o.smooth_ms = args.value("smooth_ms", o.smooth_ms);
            const Stimulus stim = args.contains("stimulus") ? parse_stimulus(args.at("stimulus")) : ei_loop_stimulus();
            const auto r = oscillations(spec, stim, o);
            rep["peak_hz"] = r.peak_hz;
            rep["gamma_peak_hz"] = r.gamma_peak_hz;
            rep["resolution_hz"] = r.resolution_hz;
            rep["volley_period_ms"] = r.volley_period_ms;
            rep["bands"] = bands_json(r.bands);
            rep["raster_hash"] = r.raster_hash;
            auto& w = rep["windows"] = nlohmann::json::array();
            for (const auto& [t, b] : r.windows) w.push_back({{"start_ms", t}, {"bands", bands_json(b)}});
        } else {
            const auto [in, out] = layer_sizes();
            std::vector<Topology> tops;
            for (const auto& t : args.at("topologies")) {
                nlohmann::json doc = spec_to_json(spec);
                // Each topology overrides connectivity of the named projection.
                for (auto& p : doc["projections"])
                    if (p["id"] == t.value("projection", p["id"].get<std::string>()) && t.contains("connectivity"))
                        p["connectivity"] = t.at("connectivity");
                tops.push_back({t.at("name").get<std::string>(), parse_spec(doc)});
            }
            TrainOptions opts;
            opts.max_epochs = args.value("epochs", 10u);
            opts.stop_at_criterion = false;
            auto& rows = rep["rows"] = nlohmann::json::array();
            for (const auto& r : efficiency_sweep(tops, dataset_from(args, in, out), opts))
                rows.push_back({{"topology", r.topology},
                                {"accuracy", r.accuracy},
                                {"joules_per_trial", r.joules_per_trial},
                                {"synapses", r.synapses}});
        }
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::Validation, "recipe '" + name + "': bad arguments: " + e.what());
    }
    return rep;
}

} // namespace epicsim
