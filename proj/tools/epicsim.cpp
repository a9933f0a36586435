// epicsim command line: build, run, train, episode, recipe, ising, report, serve.
//
// Every verb that produces artifacts normalizes its options into a JSON
// argument object, executes from that object alone and records it in
// manifest.json. `report --verify` replays the manifest into a fresh
// directory and compares every artifact byte for byte.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "epicsim/error.hpp"
#include "epicsim/gateway.hpp"
#include "epicsim/harness.hpp"
#include "epicsim/hash.hpp"
#include "epicsim/ising.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace epicsim;

namespace {

struct Run {
    fs::path out;
    Manifest manifest;

    void json_artifact(const std::string& name, const json& doc) {
        write_json(out / name, doc);
        manifest.artifacts.push_back(name);
    }
};

NetworkSpec spec_from(const json& args, const fs::path& base) {
    if (!args.contains("spec")) fail(ErrorKind::Validation, "--spec is required");
    return load_spec(base / args["spec"].get<std::string>());
}

Engine make_engine(const NetworkSpec& spec, std::uint64_t seed) { return Engine(build_network(spec, seed), seed); }

json network_summary(const Network& net) {
    json pops = json::array(), projs = json::array();
    for (const auto& p : net.populations) pops.push_back({{"id", p.id}, {"size", p.size}});
    for (const auto& p : net.projections)
        projs.push_back({{"id", p.id},
                         {"sender", net.populations[p.sender].id},
                         {"receiver", net.populations[p.receiver].id},
                         {"medium", to_string(p.medium)},
                         {"synapses", p.active_count()}});
    return {{"populations", pops},
            {"projections", projs},
            {"neurons", net.neuron_count},
            {"warnings", net.report.warnings},
            {"loss_failures", net.report.loss_failures}};
}

void write_vm(const fs::path& path, Engine& engine, std::uint64_t steps, std::uint32_t every) {
    std::ofstream os(path, std::ios::binary);
    if (!os) fail(ErrorKind::Runtime, "cannot write " + path.string());
    for (std::uint64_t i = 0; i < steps; ++i) {
        engine.step();
        if (every == 0 || engine.step_index() % every != 0) continue;
        json v = json::array();
        for (std::uint32_t g = 0; g < engine.network().neuron_count; ++g) v.push_back(engine.soma(g).v_m);
        os << json{{"t", engine.now()}, {"v", v}}.dump() << '\n';
    }
}

// ---- verbs, each driven only by its argument object ------------------------

void do_build(Run& run, const json& args, const fs::path& base) {
    const auto spec = spec_from(args, base);
    const Network net = build_network(spec, run.manifest.seed);
    run.manifest.spec_hash = spec_hash(spec);
    run.json_artifact("spec.json", spec_to_json(spec));
    run.json_artifact("network.json", network_summary(net));
    std::cout << "built '" << spec.name << "': " << net.populations.size() << " populations, " << net.neuron_count
              << " neurons, " << net.projections.size() << " projections\n";
}

void do_run(Run& run, const json& args, const fs::path& base) {
    const auto spec = spec_from(args, base);
    Engine engine = make_engine(spec, run.manifest.seed);
    if (args.contains("stimulus")) engine.set_stimulus(parse_stimulus(args["stimulus"]));
    const double duration = args.value("duration_ms", 100.0);
    const double steps_f = duration / engine.dt();
    if (!(duration >= 0) || std::abs(steps_f - std::round(steps_f)) > 1e-6)
        fail(ErrorKind::Validation, "--duration must be a non-negative multiple of dt");
    write_vm(run.out / "vm.jsonl", engine, static_cast<std::uint64_t>(std::llround(steps_f)), args.value("vm_every", 10u));
    run.manifest.artifacts.push_back("vm.jsonl");
    write_raster_jsonl(run.out / "raster.jsonl", engine.raster(), engine.network(), engine.dt());
    run.manifest.artifacts.push_back("raster.jsonl");
    run.manifest.spec_hash = spec_hash(spec);
    run.json_artifact("spec.json", spec_to_json(spec));
    run.json_artifact("ledger.json", ledger_report(engine.ledger()));
    std::cout << "ran " << duration << " ms: " << engine.raster().size() << " spikes, raster " << engine.raster_hash()
              << "\n";
}

void do_train(Run& run, const json& args, const fs::path& base) {
    const auto in = args.value("input_size", 32u), out = args.value("output_size", 32u);
    const auto spec = args.contains("spec") ? spec_from(args, base) : pattern_network_spec(in, out, run.manifest.seed);
    const auto data = gen_pattern_task(args.value("pairs", 8u), in, out, args.value("sparsity", 0.25),
                                       args.value("data_seed", run.manifest.seed));
    Engine engine = make_engine(spec, run.manifest.seed);
    TrainOptions opts;
    opts.max_epochs = args.value("epochs", opts.max_epochs);
    opts.criterion = args.value("criterion", opts.criterion);
    opts.shuffle_seed = run.manifest.seed;
    const auto result = train_patterns(engine, data, opts);
    run.manifest.spec_hash = spec_hash(spec);
    run.json_artifact("spec.json", spec_to_json(spec));
    run.json_artifact("result.json", result.to_json());
    run.json_artifact("ledger.json", ledger_report(engine.ledger()));
    std::cout << "recall " << result.accuracy << " after " << result.epochs.size() << " epochs\n";
}

void do_episode(Run& run, const json& args, const fs::path&) {
    GridWorld world = args.contains("world") ? parse_gridworld(args["world"]) : GridWorld{};
    if (args.contains("mode")) world.mode = nav_mode_from(args["mode"].get<std::string>());
    world.validate();
    const auto spec = navigation_network_spec(world, run.manifest.seed);
    Engine agent = make_engine(spec, run.manifest.seed);
    NavTrainOptions opts;
    opts.epochs = args.value("train_epochs", opts.epochs);
    opts.seed = run.manifest.seed;
    const auto trained = train_navigation(agent, world, opts);
    const auto episodes = args.value("episodes", 20u);
    const auto result = evaluate_navigation(agent, world, episodes, run.manifest.seed);

    json traj = json::array();
    for (std::uint32_t e = 0; e < std::min(episodes, 5u); ++e) {
        const auto w = seeded_world(world, run.manifest.seed + e);
        const auto ep = run_episode(w, agent, run.manifest.seed + e);
        json cells = json::array(), acts = json::array();
        for (const auto& c : ep.trajectory.cells) cells.push_back({c.x, c.y});
        for (auto a : ep.trajectory.actions) acts.push_back(to_string(a));
        traj.push_back({{"seed", ep.seed},
                        {"cells", cells},
                        {"actions", acts},
                        {"success", ep.success},
                        {"steps", ep.steps},
                        {"optimal_steps", ep.optimal_steps}});
    }
    run.manifest.spec_hash = spec_hash(spec);
    run.json_artifact("spec.json", spec_to_json(spec));
    run.json_artifact("world.json", gridworld_to_json(world));
    run.json_artifact("result.json", {{"training", trained.to_json()}, {"evaluation", result.to_json()}});
    run.json_artifact("trajectories.json", traj);
    run.json_artifact("ledger.json", ledger_report(agent.ledger()));
    std::cout << to_string(world.mode) << " navigation: success " << result.accuracy << ", mean steps "
              << result.mean_steps << " (optimal " << result.optimal_steps << ")\n";
}

void do_recipe(Run& run, const json& args, const fs::path& base) {
    const auto name = args.at("name").get<std::string>();
    const json rargs = args.value("args", json::object());
    NetworkSpec spec;
    if (args.contains("spec")) spec = spec_from(args, base);
    else if (name == "oscillations") spec = ei_loop_spec(rargs.value("round_trip_ms", 25.0), run.manifest.seed);
    else spec = pattern_network_spec(rargs.value("input_size", 32u), rargs.value("output_size", 32u), run.manifest.seed);
    const auto report = run_recipe(name, spec, rargs);
    run.manifest.spec_hash = spec_hash(spec);
    run.json_artifact("spec.json", spec_to_json(spec));
    run.json_artifact("report.json", report);
    if (report.contains("peak_hz")) std::cout << name << ": peak " << report["peak_hz"].get<double>() << " Hz\n";
    if (report.contains("rows")) std::cout << name << ": " << report["rows"].size() << " rows\n";
}

void do_ising(Run& run, const json& args, const fs::path&) {
    const auto problem = parse_ising(args.at("problem"));
    OscillatorParams params;
    params.seed = run.manifest.seed;
    params.restarts = args.value("restarts", params.restarts);
    params.steps = args.value("steps", params.steps);
    const auto r = solve(problem, params);
    json out{{"spins", r.spins}, {"energy", r.energy}, {"best_restart", r.best_restart}, {"restarts", r.restarts.size()}};
    if (problem.n <= 24) {
        const auto g = brute_force_ground(problem);
        out["ground_energy"] = g.energy;
        out["optimal"] = std::abs(g.energy - r.energy) < 1e-9;
    }
    run.manifest.spec_hash = sha256_hex(ising_to_json(problem).dump());
    run.json_artifact("problem.json", ising_to_json(problem));
    run.json_artifact("result.json", out);
    std::cout << "energy " << r.energy;
    if (out.contains("ground_energy")) std::cout << " (ground " << out["ground_energy"].get<double>() << ")";
    std::cout << "\n";
}

void execute(const std::string& command, const json& args, std::uint64_t seed, const fs::path& out,
             const fs::path& base) {
    fs::create_directories(out);
    Run run{out, {}};
    run.manifest.command = command;
    run.manifest.seed = seed;
    run.manifest.args = args;
    if (command == "build") do_build(run, args, base);
    else if (command == "run") do_run(run, args, base);
    else if (command == "train") do_train(run, args, base);
    else if (command == "episode") do_episode(run, args, base);
    else if (command == "recipe") do_recipe(run, args, base);
    else if (command == "ising") do_ising(run, args, base);
    else fail(ErrorKind::Validation, "manifest: unknown command '" + command + "'");
    write_json(out / "manifest.json", run.manifest.to_json());
    std::cout << "artifacts in " << out.string() << "\n";
}

std::string slurp(const fs::path& p) {
    std::ifstream is(p, std::ios::binary);
    std::ostringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

int do_report(const fs::path& dir, bool verify, const fs::path& replay_dir) {
    const auto m = Manifest::from_json(read_json(dir / "manifest.json"));
    std::cout << "command " << m.command << ", seed " << m.seed << ", version " << m.version << "\nspec "
              << m.spec_hash << "\n";
    for (const auto& a : m.artifacts) std::cout << "  " << a << " (" << fs::file_size(dir / a) << " bytes)\n";
    if (fs::exists(dir / "ledger.json"))
        std::cout << "energy " << read_json(dir / "ledger.json")["total_j"].get<double>() << " J\n";
    if (!verify) return 0;

    // Spec paths resolve against the recorded run, through its canonical echo.
    json args = m.args;
    if (args.contains("spec")) args["spec"] = "spec.json";
    execute(m.command, args, m.seed, replay_dir, dir);
    int bad = 0;
    for (const auto& a : m.artifacts)
        if (slurp(dir / a) != slurp(replay_dir / a)) {
            std::cout << "MISMATCH " << a << "\n";
            ++bad;
        }
    if (bad) fail(ErrorKind::Runtime, std::to_string(bad) + " artifact(s) differ on replay");
    std::cout << "replay identical (" << m.artifacts.size() << " artifacts)\n";
    return 0;
}

int exit_code(ErrorKind k) {
    switch (k) {
    case ErrorKind::Validation:
    case ErrorKind::Config:
    case ErrorKind::Domain:
    case ErrorKind::Version: return 1;
    default: return 2;
    }
}

json file_json(const std::string& path) { return read_json(path); }

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"epicsim: spiking network simulator and experiment harness"};
    app.set_version_flag("--version", std::string(kVersion));
    app.require_subcommand(1);

    std::string spec, out = "out", stimulus, world, mode, problem, recipe_args, manifest_dir, replay;
    std::uint64_t seed = 1;
    double duration = 100.0;
    std::uint32_t vm_every = 10, epochs = 50, pairs = 8, in_size = 32, out_size = 32, episodes = 20, train_epochs = 20,
                  restarts = 50, steps = 10000;
    double sparsity = 0.25;
    bool verify = false;
    std::string host = gateway::ServerConfig::from_env().host;
    int port = gateway::ServerConfig::from_env().port;
    std::string recipe_name;

    const auto common = [&](CLI::App* c, bool needs_spec) {
        auto* o = c->add_option("--spec", spec, "network spec (JSON)");
        if (needs_spec) o->required();
        c->add_option("--seed", seed, "run seed")->capture_default_str();
        c->add_option("--out", out, "artifact directory")->capture_default_str();
    };

    auto* build = app.add_subcommand("build", "validate a spec and instantiate the network");
    common(build, true);
    auto* run = app.add_subcommand("run", "simulate a spec and record raster, vm and energy");
    common(run, true);
    run->add_option("--duration", duration, "simulated time in ms")->capture_default_str();
    run->add_option("--stimulus", stimulus, "stimulus document (JSON)");
    run->add_option("--vm-every", vm_every, "steps between vm samples (0 = none)")->capture_default_str();
    auto* train = app.add_subcommand("train", "pattern association with two-phase learning");
    common(train, false);
    train->add_option("--pairs", pairs)->capture_default_str();
    train->add_option("--input-size", in_size)->capture_default_str();
    train->add_option("--output-size", out_size)->capture_default_str();
    train->add_option("--sparsity", sparsity)->capture_default_str();
    train->add_option("--epochs", epochs)->capture_default_str();
    auto* episode = app.add_subcommand("episode", "train and evaluate a grid-world navigation agent");
    episode->add_option("--seed", seed)->capture_default_str();
    episode->add_option("--out", out)->capture_default_str();
    episode->add_option("--world", world, "grid world document (JSON)");
    episode->add_option("--mode", mode, "beacon, route or map");
    episode->add_option("--episodes", episodes)->capture_default_str();
    episode->add_option("--train-epochs", train_epochs)->capture_default_str();
    auto* recipe = app.add_subcommand("recipe", "run an experiment recipe");
    common(recipe, false);
    recipe->add_option("name", recipe_name, "pruning_trajectory, oscillations or efficiency_sweep")->required();
    recipe->add_option("--args", recipe_args, "recipe arguments (JSON)");
    auto* ising = app.add_subcommand("ising", "solve an Ising problem with coupled oscillators");
    ising->add_option("--problem", problem, "problem document (JSON)")->required();
    ising->add_option("--seed", seed)->capture_default_str();
    ising->add_option("--out", out)->capture_default_str();
    ising->add_option("--restarts", restarts)->capture_default_str();
    ising->add_option("--steps", steps)->capture_default_str();
    auto* report = app.add_subcommand("report", "summarize a run directory, optionally replaying it");
    report->add_option("dir", manifest_dir, "run directory holding manifest.json")->required();
    report->add_flag("--verify", verify, "replay the manifest and compare artifacts byte for byte");
    report->add_option("--replay-dir", replay, "where the replay writes (default <dir>/replay)");
    auto* serve = app.add_subcommand("serve", "start the control and telemetry gateway");
    serve->add_option("--host", host)->capture_default_str();
    serve->add_option("--port", port)->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 1;
    }

    try {
        json args = json::object();
        if (!spec.empty()) args["spec"] = fs::absolute(spec).string();
        const auto* sub = app.get_subcommands().front();
        const std::string cmd = sub->get_name();
        if (cmd == "run") {
            args["duration_ms"] = duration;
            args["vm_every"] = vm_every;
            if (!stimulus.empty()) args["stimulus"] = file_json(stimulus);
        } else if (cmd == "train") {
            args.update({{"pairs", pairs}, {"input_size", in_size}, {"output_size", out_size}, {"sparsity", sparsity},
                         {"epochs", epochs}});
        } else if (cmd == "episode") {
            if (!world.empty()) args["world"] = file_json(world);
            if (!mode.empty()) args["mode"] = mode;
            args["episodes"] = episodes;
            args["train_epochs"] = train_epochs;
        } else if (cmd == "recipe") {
            args["name"] = recipe_name;
            args["args"] = recipe_args.empty() ? json::object() : file_json(recipe_args);
        } else if (cmd == "ising") {
            args = {{"problem", file_json(problem)}, {"restarts", restarts}, {"steps", steps}};
        } else if (cmd == "report") {
            return do_report(manifest_dir, verify, replay.empty() ? fs::path(manifest_dir) / "replay" : fs::path(replay));
        } else if (cmd == "serve") {
            gateway::ServerConfig cfg;
            cfg.host = host;
            cfg.port = port;
            gateway::Server server(cfg);
            std::cout << "gateway listening on " << host << ":" << port << std::endl;
            server.run();
            return 0;
        }
        execute(cmd, args, seed, out, fs::current_path());
        return 0;
    } catch (const Error& e) {
        std::cerr << "error (" << to_string(e.kind()) << "): " << e.what() << "\n";
        return exit_code(e.kind());
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}
