#include <algorithm>
#include <array>
#include <cstdlib>
#include <deque>

#include "epicsim/error.hpp"
#include "epicsim/harness.hpp"
#include "epicsim/rng.hpp"

namespace epicsim {

namespace {

constexpr std::array<Action, kActionCount> kActions{Action::N, Action::E, Action::S, Action::W};
constexpr std::array<const char*, kActionCount> kActionNames{"N", "E", "S", "W"};

Cell cell_from(const nlohmann::json& j, const std::string& path) {
    if (!j.is_array() || j.size() != 2 || !j[0].is_number_integer() || !j[1].is_number_integer())
        fail(ErrorKind::Validation, path + ": expected [x, y]");
    return {j[0].get<int>(), j[1].get<int>()};
}

nlohmann::json cell_json(Cell c) { return nlohmann::json::array({c.x, c.y}); }

// Distance to the goal from every cell; -1 where unreachable.
std::vector<int> distance_field(const GridWorld& w) {
    std::vector<int> dist(static_cast<std::size_t>(w.width * w.height), -1);
    std::deque<Cell> q{w.goal};
    dist[w.cell_index(w.goal)] = 0;
    while (!q.empty()) {
        const Cell c = q.front();
        q.pop_front();
        for (auto a : kActions) {
            const Cell n = w.transition(c, a);
            if (n == c || dist[w.cell_index(n)] >= 0) continue;
            dist[w.cell_index(n)] = dist[w.cell_index(c)] + 1;
            q.push_back(n);
        }
    }
    return dist;
}

std::vector<Cell> free_cells(const GridWorld& w) {
    std::vector<Cell> out;
    for (int y = 0; y < w.height; ++y)
        for (int x = 0; x < w.width; ++x)
            if (!w.is_wall({x, y})) out.push_back({x, y});
    return out;
}

std::vector<double> teacher_vector(Action a, const TeacherLevels& t) {
    std::vector<double> v(kActionCount, t.off);
    v[static_cast<int>(a)] = t.on;
    return v;
}

// Route instructions: one token per straight segment of the shortest route.
// The token switches when the agent reaches the landmark ending a segment.
struct RoutePlan {
    std::vector<std::pair<Action, Cell>> segments; // direction, landmark at the segment's end
    std::size_t next = 0;

    RoutePlan(const GridWorld& w, Cell start) {
        Cell c = start;
        for (auto a : bfs_route(w, start)) {
            c = w.transition(c, a);
            if (!segments.empty() && segments.back().first == a) segments.back().second = c;
            else segments.push_back({a, c});
        }
    }
    std::optional<Action> token(Cell at) {
        while (next < segments.size() && segments[next].second == at) ++next;
        if (next >= segments.size()) return std::nullopt;
        return segments[next].first;
    }
};

} // namespace

std::string to_string(Action a) { return kActionNames[static_cast<int>(a)]; }

std::string to_string(NavMode m) {
    switch (m) {
    case NavMode::Beacon: return "beacon";
    case NavMode::Route: return "route";
    case NavMode::Map: return "map";
    }
    return "beacon";
}

NavMode nav_mode_from(const std::string& s) {
    if (s == "beacon") return NavMode::Beacon;
    if (s == "route") return NavMode::Route;
    if (s == "map") return NavMode::Map;
    fail(ErrorKind::Validation, "mode: unknown value '" + s + "' (expected one of: beacon, route, map)");
}

void GridWorld::validate() const {
    if (width < 1 || height < 1) fail(ErrorKind::Validation, "gridworld: width and height must be positive");
    if (max_steps < 1) fail(ErrorKind::Validation, "gridworld: max_steps must be positive");
    for (std::size_t i = 0; i < walls.size(); ++i)
        if (!in_bounds(walls[i])) fail(ErrorKind::Validation, "walls[" + std::to_string(i) + "]: out of bounds");
    if (!in_bounds(start) || is_wall(start)) fail(ErrorKind::Validation, "start: must be an open cell inside the grid");
    if (!in_bounds(goal) || is_wall(goal)) fail(ErrorKind::Validation, "goal: must be an open cell inside the grid");
}

bool GridWorld::is_wall(Cell c) const { return std::find(walls.begin(), walls.end(), c) != walls.end(); }

Cell GridWorld::transition(Cell c, Action a) const {
    Cell n = c;
    switch (a) {
    case Action::N: --n.y; break;
    case Action::E: ++n.x; break;
    case Action::S: ++n.y; break;
    case Action::W: --n.x; break;
    }
    return in_bounds(n) && !is_wall(n) ? n : c;
}

GridWorld parse_gridworld(const nlohmann::json& doc) {
    if (!doc.is_object()) fail(ErrorKind::Validation, "gridworld: expected an object");
    GridWorld w;
    try {
        if (doc.contains("width")) w.width = doc.at("width").get<int>();
        if (doc.contains("height")) w.height = doc.at("height").get<int>();
        if (doc.contains("walls"))
            for (std::size_t i = 0; i < doc.at("walls").size(); ++i)
                w.walls.push_back(cell_from(doc.at("walls")[i], "walls[" + std::to_string(i) + "]"));
        if (doc.contains("goal")) w.goal = cell_from(doc.at("goal"), "goal");
        if (doc.contains("start")) w.start = cell_from(doc.at("start"), "start");
        if (doc.contains("beacon_visible")) w.beacon_visible = doc.at("beacon_visible").get<bool>();
        if (doc.contains("mode")) w.mode = nav_mode_from(doc.at("mode").get<std::string>());
        if (doc.contains("max_steps")) w.max_steps = doc.at("max_steps").get<std::uint32_t>();
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::Validation, std::string("gridworld: ") + e.what());
    }
    w.validate();
    return w;
}

nlohmann::json gridworld_to_json(const GridWorld& w) {
    auto walls = nlohmann::json::array();
    for (auto c : w.walls) walls.push_back(cell_json(c));
    return {{"width", w.width},       {"height", w.height},
            {"walls", walls},         {"goal", cell_json(w.goal)},
            {"start", cell_json(w.start)}, {"beacon_visible", w.beacon_visible},
            {"mode", to_string(w.mode)}, {"max_steps", w.max_steps}};
}

std::optional<std::uint32_t> bfs_distance(const GridWorld& w, Cell from) {
    if (!w.in_bounds(from) || w.is_wall(from)) return std::nullopt;
    const int d = distance_field(w)[w.cell_index(from)];
    if (d < 0) return std::nullopt;
    return static_cast<std::uint32_t>(d);
}

std::optional<Action> bfs_action(const GridWorld& w, Cell from) {
    const auto dist = distance_field(w);
    const int d = dist[w.cell_index(from)];
    if (d <= 0) return std::nullopt;
    for (auto a : kActions) {
        const Cell n = w.transition(from, a);
        if (n != from && dist[w.cell_index(n)] == d - 1) return a;
    }
    return std::nullopt;
}

std::vector<Action> bfs_route(const GridWorld& w, Cell from) {
    const auto dist = distance_field(w);
    std::vector<Action> route;
    Cell c = from;
    while (dist[w.cell_index(c)] > 0) {
        for (auto a : kActions) {
            const Cell n = w.transition(c, a);
            if (n != c && dist[w.cell_index(n)] == dist[w.cell_index(c)] - 1) {
                route.push_back(a);
                c = n;
                break;
            }
        }
    }
    return route;
}

std::vector<double> beacon_signal(const GridWorld& w, Cell at) {
    std::vector<double> b(kActionCount, 0.0);
    const int dx = w.goal.x - at.x;
    const int dy = w.goal.y - at.y;
    const double manhattan = std::abs(dx) + std::abs(dy);
    if (manhattan == 0) return b;
    b[static_cast<int>(Action::N)] = std::max(0, -dy) / manhattan;
    b[static_cast<int>(Action::E)] = std::max(0, dx) / manhattan;
    b[static_cast<int>(Action::S)] = std::max(0, dy) / manhattan;
    b[static_cast<int>(Action::W)] = std::max(0, -dx) / manhattan;
    return b;
}

std::vector<double> encode_observation(const GridWorld& w, Cell at, std::optional<Action> instruction) {
    std::vector<double> obs(w.observation_size(), 0.0);
    obs[w.cell_index(at)] = 1.0;
    const std::size_t base = static_cast<std::size_t>(w.width * w.height);
    if (w.beacon_visible && w.mode == NavMode::Beacon) {
        const auto b = beacon_signal(w, at);
        std::copy(b.begin(), b.end(), obs.begin() + static_cast<std::ptrdiff_t>(base));
    }
    if (w.mode == NavMode::Route && instruction) obs[base + kActionCount + static_cast<int>(*instruction)] = 1.0;
    return obs;
}

Action teacher_action(const GridWorld& w, Cell at, std::optional<Action> instruction) {
    switch (w.mode) {
    case NavMode::Beacon:
        if (w.beacon_visible) return select_action(beacon_signal(w, at));
        break;
    case NavMode::Route:
        if (instruction) return *instruction;
        break;
    case NavMode::Map: break;
    }
    return bfs_action(w, at).value_or(Action::N);
}

Action select_action(const std::vector<double>& rates) {
    if (rates.size() != kActionCount)
        fail(ErrorKind::Validation, "action layer has " + std::to_string(rates.size()) + " units, expected 4");
    // max_element returns the first maximum, which is the lowest index on ties.
    return kActions[static_cast<std::size_t>(std::max_element(rates.begin(), rates.end()) - rates.begin())];
}

NetworkSpec navigation_network_spec(const GridWorld& world, std::uint64_t seed) {
    world.validate();
    const nlohmann::json lif{{"model", "LIF"}, {"tau_m", 10.0}, {"t_ref", 10.0}, {"theta0", 1.0}};
    nlohmann::json doc{
        {"version", kSpecVersion},
        {"name", "navigation"},
        {"engine", {{"dt", 0.1}, {"seed", seed}, {"max_rate_hz", 100.0}}},
        {"populations",
         {{{"id", "obs"}, {"size", world.observation_size()}, {"soma", lif}},
          {{"id", "action"}, {"size", kActionCount}, {"soma", lif}}}},
        {"projections",
         {{{"id", "obs_action"},
           {"sender", "obs"},
           {"receiver", "action"},
           {"medium", "electronic"},
           {"kernel", {{"kind", "leaky_recurrent"}, {"tau", 10.0}}},
           // Roughly two active observation units instead of eight pattern bits.
           {"gain", 4.0},
           {"init", {{"low", 0.2}, {"high", 0.4}}},
           {"plasticity", "xcal"}}}},
        {"plasticity", {{"xcal", {{"lrate", 0.2}, {"phase_len", 50.0}, {"tau_avg", 10.0}}}}},
        {"layers", {{"input", "obs"}, {"output", "action"}}}};
    return parse_spec(doc);
}

EpisodeResult run_episode(const GridWorld& world, Engine& agent, std::uint64_t seed) {
    world.validate();
    const auto& out = agent.network().population(agent.output_layer());
    if (out.size != kActionCount)
        fail(ErrorKind::Validation, "agent: output layer '" + out.id + "' has " + std::to_string(out.size) +
                                        " units, a 4-unit action layer (N/E/S/W) is required");
    const auto& in = agent.network().population(agent.input_layer());
    if (in.size != world.observation_size())
        fail(ErrorKind::Validation, "agent: input layer '" + in.id + "' has " + std::to_string(in.size) +
                                        " units, the world needs " + std::to_string(world.observation_size()));

    EpisodeResult r;
    r.seed = seed;
    r.optimal_steps = bfs_distance(world, world.start).value_or(0);
    const double before = agent.ledger().total_fj();
    RoutePlan plan(world, world.start);
    Cell at = world.start;
    r.trajectory.cells.push_back(at);
    while (at != world.goal && r.steps < world.max_steps) {
        const auto token = world.mode == NavMode::Route ? plan.token(at) : std::nullopt;
        const Action a = select_action(agent.infer(encode_observation(world, at, token)));
        at = world.transition(at, a);
        r.trajectory.actions.push_back(a);
        r.trajectory.cells.push_back(at);
        ++r.steps;
    }
    r.success = r.trajectory.success = at == world.goal;
    r.energy_fj = agent.ledger().total_fj() - before;
    return r;
}

GridWorld seeded_world(const GridWorld& base, std::uint64_t seed) {
    GridWorld w = base;
    const auto cells = free_cells(base);
    if (cells.size() < 2) fail(ErrorKind::Validation, "gridworld: need at least two open cells");
    RngStream rng(seed, "episode");
    // Map mode keeps the goal fixed so the layout can be learned.
    if (base.mode != NavMode::Map) w.goal = cells[rng.below(cells.size())];
    do {
        w.start = cells[rng.below(cells.size())];
    } while (w.start == w.goal || !bfs_distance(w, w.start));
    return w;
}

TaskResult train_navigation(Engine& agent, const GridWorld& base, const NavTrainOptions& opts) {
    TaskResult res;
    res.seed = opts.seed;
    RngStream rng(opts.seed, "nav-train");
    const double before = agent.ledger().total_fj();
    for (std::uint32_t epoch = 1; epoch <= opts.epochs; ++epoch) {
        for (std::uint32_t s = 0; s < opts.samples_per_epoch; ++s) {
            const GridWorld w = seeded_world(base, rng.next_u64());
            const auto token = w.mode == NavMode::Route ? bfs_action(w, w.start) : std::nullopt;
            agent.train_trial(encode_observation(w, w.start, token),
                              teacher_vector(teacher_action(w, w.start, token), opts.teacher));
            ++res.trials;
        }
    }
    if (res.trials > 0) res.energy_per_trial_j = (agent.ledger().total_fj() - before) * kJoulesPerFemtojoule / res.trials;
    return res;
}

TaskResult evaluate_navigation(Engine& agent, const GridWorld& base, std::uint32_t episodes, std::uint64_t first_seed) {
    TaskResult res;
    res.seed = first_seed;
    std::uint32_t successes = 0;
    double steps = 0.0, optimal = 0.0, energy = 0.0;
    for (std::uint32_t e = 0; e < episodes; ++e) {
        const GridWorld w = seeded_world(base, first_seed + e);
        const auto ep = run_episode(w, agent, first_seed + e);
        energy += ep.energy_fj;
        if (!ep.success) continue;
        ++successes;
        steps += ep.steps;
        optimal += ep.optimal_steps;
    }
    res.trials = episodes;
    if (episodes > 0) {
        res.accuracy = static_cast<double>(successes) / episodes;
        res.energy_per_trial_j = energy * kJoulesPerFemtojoule / episodes;
    }
    if (successes > 0) {
        res.mean_steps = steps / successes;
        res.optimal_steps = optimal / successes;
    }
    return res;
}

} // namespace epicsim
