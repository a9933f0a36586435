#include "catch_amalgamated.hpp"

#include <cmath>
#include <deque>
#include <filesystem>
#include <fstream>
#include <set>

#include "epicsim/error.hpp"
#include "epicsim/harness.hpp"

using namespace epicsim;
using Catch::Matchers::ContainsSubstring;

namespace {

int ones(const std::vector<double>& v) {
    int n = 0;
    for (double x : v) n += x == 1.0;
    return n;
}

// Independent shortest path: plain BFS from the start over an explicit adjacency.
int reference_bfs(int w, int h, const std::set<std::pair<int, int>>& walls, std::pair<int, int> s, std::pair<int, int> g) {
    std::vector<int> dist(w * h, -1);
    std::deque<std::pair<int, int>> q{s};
    dist[s.second * w + s.first] = 0;
    const int dx[] = {0, 1, 0, -1}, dy[] = {-1, 0, 1, 0};
    while (!q.empty()) {
        auto [x, y] = q.front();
        q.pop_front();
        for (int k = 0; k < 4; ++k) {
            const int nx = x + dx[k], ny = y + dy[k];
            if (nx < 0 || ny < 0 || nx >= w || ny >= h || walls.count({nx, ny}) || dist[ny * w + nx] >= 0) continue;
            dist[ny * w + nx] = dist[y * w + x] + 1;
            q.push_back({nx, ny});
        }
    }
    return dist[g.second * w + g.first];
}

// Obs -> action wired only from beacon unit d to action d at full weight.
Engine beacon_follower(const GridWorld& w) {
    auto spec = navigation_network_spec(w);
    auto& p = spec.projections[0];
    const std::uint32_t beacon0 = static_cast<std::uint32_t>(w.width * w.height);
    for (std::uint32_t i = 0; i < w.observation_size(); ++i)
        for (std::uint32_t j = 0; j < 4; ++j)
            if (i != beacon0 + j) p.exclude.push_back({i, j});
    p.init = {1.0, 1.0};
    p.plasticity = PlasticityRule::None;
    return Engine(build_network(spec));
}

} // namespace

TEST_CASE("pattern task is deterministic with exact sparsity", "[harness][patterns]") {
    const auto a = gen_pattern_task(10, 32, 32, 0.25, 5);
    const auto b = gen_pattern_task(10, 32, 32, 0.25, 5);
    REQUIRE(a.pairs.size() == 10);
    std::set<std::vector<double>> inputs;
    for (std::size_t i = 0; i < a.pairs.size(); ++i) {
        CHECK(a.pairs[i].input == b.pairs[i].input);
        CHECK(a.pairs[i].target == b.pairs[i].target);
        CHECK(ones(a.pairs[i].input) == 8);
        CHECK(ones(a.pairs[i].target) == 8);
        inputs.insert(a.pairs[i].input);
    }
    CHECK(inputs.size() == 10);
    CHECK(gen_pattern_task(10, 32, 32, 0.25, 6).pairs[0].input != a.pairs[0].input);
}

TEST_CASE("pattern task rejects infeasible requests", "[harness][patterns]") {
    // C(4, 2) = 6 distinct inputs.
    CHECK(gen_pattern_task(6, 4, 4, 0.5, 1).pairs.size() == 6);
    CHECK_THROWS_AS(gen_pattern_task(7, 4, 4, 0.5, 1), Error);
    CHECK_THROWS_AS(gen_pattern_task(1, 4, 4, 0.0, 1), Error);
    CHECK_THROWS_AS(gen_pattern_task(1, 4, 4, 1.0, 1), Error);
}

TEST_CASE("recall scoring with tie credit", "[harness][patterns]") {
    const std::vector<double> target{1, 1, 0, 0};
    CHECK(recall_score({0.9, 0.8, 0.1, 0.0}, target) == 1.0);
    CHECK(recall_score({0.0, 0.1, 0.8, 0.9}, target) == 0.0);
    CHECK(recall_score({0, 0, 0, 0}, target) == Catch::Approx(0.5)); // chance k/n
    // One clear hit, then three units tied for the last slot, one of them a target.
    CHECK(recall_score({0.9, 0.5, 0.5, 0.5}, target) == Catch::Approx((1.0 + 1.0 / 3.0) / 2.0));
}

TEST_CASE("single pair is learned within a few trials", "[harness][patterns]") {
    const auto data = gen_pattern_task(1, 32, 32, 0.25, 3);
    Engine e(build_network(pattern_network_spec(32, 32)));
    TrainOptions o;
    o.max_epochs = 3;
    const auto r = train_patterns(e, data, o);
    REQUIRE(r.epochs_to_criterion);
    CHECK(*r.epochs_to_criterion <= 3);
}

TEST_CASE("32 to 32 association reaches criterion", "[harness][patterns]") {
    const auto data = gen_pattern_task(10, 32, 32, 0.25, 1);
    Engine e(build_network(pattern_network_spec(32, 32)));
    const double before = evaluate_patterns(e, data);
    const auto r = train_patterns(e, data);
    CHECK(before < 0.5);
    REQUIRE(r.epochs_to_criterion);
    CHECK(r.accuracy >= 0.95);
    CHECK(r.energy_per_trial_j > 0.0);
    CHECK(r.to_json()["epochs"].size() == r.epochs.size());
}

TEST_CASE("grid transitions and BFS oracle", "[harness][grid]") {
    GridWorld w;
    CHECK(bfs_distance(w, {0, 0}) == 8u);
    CHECK(w.transition({0, 0}, Action::N) == Cell{0, 0});
    CHECK(w.transition({0, 0}, Action::W) == Cell{0, 0});
    CHECK(w.transition({0, 0}, Action::S) == Cell{0, 1});

    w.walls = {{1, 0}, {1, 1}, {1, 2}, {1, 3}, {3, 4}, {3, 3}, {3, 2}};
    const std::set<std::pair<int, int>> walls{{1, 0}, {1, 1}, {1, 2}, {1, 3}, {3, 4}, {3, 3}, {3, 2}};
    CHECK(w.transition({0, 0}, Action::E) == Cell{0, 0});
    for (int y = 0; y < 5; ++y)
        for (int x = 0; x < 5; ++x) {
            if (w.is_wall({x, y})) continue;
            const int ref = reference_bfs(5, 5, walls, {x, y}, {4, 4});
            const auto got = bfs_distance(w, {x, y});
            REQUIRE(got);
            CHECK(static_cast<int>(*got) == ref);
            CHECK(bfs_route(w, {x, y}).size() == static_cast<std::size_t>(ref));
        }
}

TEST_CASE("grid world validation", "[harness][grid]") {
    CHECK_THROWS_AS(parse_gridworld({{"width", 5}, {"height", 5}, {"start", {9, 0}}}), Error);
    CHECK_THROWS_AS(parse_gridworld({{"walls", {{0, 0}}}}), Error);
    CHECK_THROWS_WITH(parse_gridworld({{"mode", "maze"}}), ContainsSubstring("beacon, route, map"));
    const auto w = parse_gridworld({{"width", 4}, {"height", 3}, {"goal", {3, 2}}, {"mode", "map"}});
    CHECK(parse_gridworld(gridworld_to_json(w)).goal == Cell{3, 2});
}

TEST_CASE("beacon signal and action selection", "[harness][grid]") {
    GridWorld w;
    const auto b = beacon_signal(w, {0, 0}); // goal is south-east
    CHECK(b == std::vector<double>{0.0, 0.5, 0.5, 0.0});
    CHECK(select_action({0.2, 0.7, 0.7, 0.1}) == Action::E);
    CHECK(select_action({0.0, 0.0, 0.0, 0.0}) == Action::N);
    CHECK_THROWS_AS(select_action({1.0, 2.0}), Error);
}

TEST_CASE("beacon follower reaches an adjacent goal in one step", "[harness][episode]") {
    GridWorld w;
    w.start = {3, 4};
    Engine agent = beacon_follower(w);
    const auto r = run_episode(w, agent, 1);
    CHECK(r.success);
    CHECK(r.steps == 1);
    CHECK(r.trajectory.actions == std::vector<Action>{Action::E});
}

TEST_CASE("episodes are deterministic and respect the BFS bound", "[harness][episode]") {
    GridWorld base;
    Engine a = beacon_follower(base);
    Engine b = beacon_follower(base);
    for (std::uint64_t s = 0; s < 10; ++s) {
        const auto w = seeded_world(base, s);
        CHECK(seeded_world(base, s).start == w.start);
        const auto ra = run_episode(w, a, s);
        const auto rb = run_episode(w, b, s);
        CHECK(ra.trajectory.cells == rb.trajectory.cells);
        if (ra.success) CHECK(ra.steps >= ra.optimal_steps);
    }
}

TEST_CASE("episode requires a four-unit action layer", "[harness][episode]") {
    Engine e(build_network(pattern_network_spec(33, 3)));
    CHECK_THROWS_WITH(run_episode(GridWorld{}, e, 1), ContainsSubstring("action layer"));
}

TEST_CASE("trained beacon agent navigates", "[harness][episode]") {
    GridWorld base;
    Engine agent(build_network(navigation_network_spec(base)));
    train_navigation(agent, base);
    const auto r = evaluate_navigation(agent, base, 30, 500);
    CHECK(r.accuracy >= 0.9);
    CHECK(r.mean_steps <= 2.0 * r.optimal_steps);
}

TEST_CASE("unknown recipe lists the valid ones", "[harness][recipes]") {
    const auto spec = pattern_network_spec(8, 8);
    CHECK_THROWS_WITH(run_recipe("growth", spec, nlohmann::json::object()),
                      ContainsSubstring("pruning_trajectory, oscillations, efficiency_sweep"));
}

TEST_CASE("pruning to zero density leaves chance accuracy", "[harness][recipes]") {
    const auto spec = pattern_network_spec(32, 32);
    const auto data = gen_pattern_task(10, 32, 32, 0.25, 2);
    const auto rows = pruning_trajectory(spec, "in_out", data, {{0.0, 2}, {1.0, 2}});
    REQUIRE(rows.size() == 2);
    CHECK(rows[0].density == 0.0);
    CHECK(rows[1].density == 0.0); // pruning never regrows
    CHECK(rows[1].accuracy == Catch::Approx(8.0 / 32.0));
}

TEST_CASE("prune_to_density is monotone", "[harness][recipes]") {
    Engine e(build_network(pattern_network_spec(8, 8)));
    e.prune_to_density("in_out", 0.5);
    CHECK(e.network().projection("in_out").active_count() == 32);
    e.prune_to_density("in_out", 0.75);
    CHECK(e.network().projection("in_out").active_count() == 32);
    e.prune_to_density("in_out", 0.25);
    CHECK(e.network().projection("in_out").active_count() == 16);
}

TEST_CASE("efficiency sweep has one row per topology", "[harness][recipes]") {
    const auto spec = pattern_network_spec(16, 16);
    const nlohmann::json args{{"pairs", 3},
                              {"epochs", 2},
                              {"topologies",
                               {{{"name", "dense"}, {"connectivity", {{"kind", "dense"}}}},
                                {{"name", "sparse"}, {"connectivity", {{"kind", "bernoulli"}, {"p", 0.3}}}}}}};
    const auto rep = run_recipe("efficiency_sweep", spec, args);
    REQUIRE(rep["rows"].size() == 2);
    for (const auto& row : rep["rows"]) {
        CHECK(row.contains("accuracy"));
        CHECK(row["joules_per_trial"].get<double>() > 0.0);
    }
    CHECK(rep["rows"][0]["synapses"].get<int>() > rep["rows"][1]["synapses"].get<int>());
}

TEST_CASE("E/I loop oscillates at the round-trip frequency", "[harness][recipes][oscillation]") {
    const auto r = oscillations(ei_loop_spec(25.0), ei_loop_stimulus(), {});
    // Oracle from the raster alone: volley spacing.
    REQUIRE(r.volley_period_ms > 0.0);
    CHECK(std::abs(r.peak_hz - 1000.0 / r.volley_period_ms) <= 2.0 * r.resolution_hz);
    CHECK(std::abs(r.peak_hz - 40.0) <= 2.0);
    CHECK(r.gamma_peak_hz == r.peak_hz);
    CHECK(r.bands.gamma > r.bands.beta);
    CHECK(r.windows.size() == 3);
    CHECK(std::abs(oscillations(ei_loop_spec(30.0), ei_loop_stimulus(), {}).peak_hz - 1000.0 / 30.0) <= 2.0);
}

TEST_CASE("manifest and raster artifacts", "[harness][artifacts]") {
    const auto dir = std::filesystem::temp_directory_path() / "epicsim_artifacts_test";
    std::filesystem::create_directories(dir);
    Manifest m;
    m.spec_hash = spec_hash(pattern_network_spec(4, 4));
    m.seed = 9;
    m.command = "run";
    m.artifacts = {"raster.jsonl"};
    write_json(dir / "manifest.json", m.to_json());
    const auto back = Manifest::from_json(read_json(dir / "manifest.json"));
    CHECK(back.spec_hash == m.spec_hash);
    CHECK(back.seed == 9);
    CHECK(back.artifacts == m.artifacts);
    CHECK(spec_hash(pattern_network_spec(4, 4)) != spec_hash(pattern_network_spec(4, 5)));

    const Network net = build_network(ei_loop_spec());
    const auto tr = run(net, ei_loop_stimulus(), 100.0, 1);
    write_raster_jsonl(dir / "raster.jsonl", tr.raster, net, tr.dt);
    std::ifstream is(dir / "raster.jsonl");
    std::string line;
    std::size_t n = 0;
    while (std::getline(is, line)) {
        const auto j = nlohmann::json::parse(line);
        CHECK(j.contains("t"));
        ++n;
    }
    CHECK(n == tr.raster.size());
    CHECK(ledger_report(tr.ledger)["total_fj"].get<double>() == tr.ledger.total_fj());
    CHECK_THROWS_AS(Manifest::from_json({{"format", "other"}}), Error);
    std::filesystem::remove_all(dir);
}
