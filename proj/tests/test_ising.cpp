#include "catch_amalgamated.hpp"

#include <cmath>
#include <numbers>

#include "epicsim/error.hpp"
#include "epicsim/ising.hpp"

using namespace epicsim;
using Catch::Matchers::WithinAbs;

namespace {

constexpr double kPi = std::numbers::pi;

// Signed distance from 0 on the circle.
double centered(double phi) { return std::remainder(phi, 2 * kPi); }

IsingProblem pair(double j) {
    IsingProblem p = IsingProblem::zeros(2);
    p.set_coupling(0, 1, j);
    return p;
}

IsingProblem random_problem(std::uint32_t n, std::uint64_t seed, bool binary) {
    RngStream g(seed, "problem");
    IsingProblem p = IsingProblem::zeros(n);
    for (std::uint32_t a = 0; a < n; ++a)
        for (std::uint32_t b = a + 1; b < n; ++b) p.set_coupling(a, b, binary ? (g.bernoulli(0.5) ? 1.0 : -1.0) : g.uniform(-1, 1));
    return p;
}

} // namespace

TEST_CASE("a lone oscillator relaxes toward zero phase", "[ising][dynamics]") {
    IsingProblem p = IsingProblem::zeros(1);
    RngStream rng(1, "t");
    std::vector<double> phi{0.1};
    for (int k = 0; k < 500; ++k) {
        const auto next = step_oim(phi, p, 2.0, 1.0, 0.0, 0.01, rng);
        REQUIRE(std::abs(centered(next[0])) < std::abs(centered(phi[0])));
        phi = next;
    }
}

TEST_CASE("ferromagnetic partners pull into phase", "[ising][dynamics]") {
    const IsingProblem p = pair(1.0);
    RngStream rng(1, "t");
    std::vector<double> phi{0.3, -0.3};
    double gap = 0.6;
    for (int k = 0; k < 20000 && gap >= 1e-6; ++k) {
        phi = step_oim(phi, p, 0.5, 1.0, 0.0, 0.01, rng);
        const double g = std::abs(centered(phi[0] - phi[1]));
        REQUIRE(g < gap);
        gap = g;
    }
    CHECK(gap < 1e-6);
}

TEST_CASE("all-zero phases are a fixed point", "[ising][dynamics]") {
    const IsingProblem p = random_problem(5, 3, false);
    RngStream rng(1, "t");
    const std::vector<double> phi(5, 0.0);
    CHECK(step_oim(phi, p, 2.0, 1.0, 0.0, 0.01, rng) == phi);
}

TEST_CASE("noise-free flow descends the Lyapunov function", "[ising][dynamics][property]") {
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        IsingProblem p = random_problem(8, seed, false);
        RngStream init(seed, "init");
        for (auto& h : p.h) h = init.uniform(-0.5, 0.5);
        std::vector<double> phi(8);
        for (auto& x : phi) x = init.uniform(0, 2 * kPi);
        RngStream rng(seed, "t");
        double l = lyapunov(phi, p, 1.0, 1.0);
        for (int k = 0; k < 2000; ++k) {
            phi = step_oim(phi, p, 1.0, 1.0, 0.0, 0.01, rng);
            const double next = lyapunov(phi, p, 1.0, 1.0);
            REQUIRE(next <= l + 1e-12);
            l = next;
        }
    }
}

TEST_CASE("strong locking binarizes the phases", "[ising][dynamics][property]") {
    const IsingProblem p = random_problem(6, 4, true);
    OscillatorParams params;
    params.restarts = 4;
    params.k_shil_end = 30.0;
    const SolveResult r = solve(p, params);
    for (const auto& restart : r.restarts) CHECK(restart.binarization_error < 1e-3);
}

TEST_CASE("spin readout", "[ising][readout]") {
    CHECK(readout_spins(std::vector<double>{0.1})[0] == 1);
    CHECK(readout_spins(std::vector<double>{kPi - 0.1})[0] == -1);
    CHECK(readout_spins(std::vector<double>{kPi / 2})[0] == 1);
    CHECK(readout_spins(std::vector<double>{3 * kPi / 2})[0] == 1);
}

TEST_CASE("ising energy convention", "[ising][energy]") {
    CHECK(ising_energy(pair(1.0), std::vector<int>{1, 1}) == -1.0);
    CHECK(ising_energy(pair(1.0), std::vector<int>{1, -1}) == 1.0);

    IsingProblem tri = IsingProblem::zeros(3);
    tri.set_coupling(0, 1, -1);
    tri.set_coupling(1, 2, -1);
    tri.set_coupling(0, 2, -1);
    // Enumerate by hand: an antiferromagnetic triangle is frustrated.
    double best = 1e9;
    for (int m = 0; m < 8; ++m) {
        const std::vector<int> s{m & 1 ? -1 : 1, m & 2 ? -1 : 1, m & 4 ? -1 : 1};
        best = std::min(best, ising_energy(tri, s));
    }
    CHECK(best == -1.0);
    CHECK(brute_force_ground(tri).energy == -1.0);

    const IsingProblem p = random_problem(7, 9, false);
    RngStream g(2, "spins");
    for (int t = 0; t < 50; ++t) {
        std::vector<int> s(7), flipped(7);
        for (int i = 0; i < 7; ++i) {
            s[i] = g.bernoulli(0.5) ? 1 : -1;
            flipped[i] = -s[i];
        }
        CHECK(ising_energy(p, s) == ising_energy(p, flipped));
    }
    CHECK_THROWS_AS(ising_energy(p, std::vector<int>{1, 1}), Error);
    CHECK_THROWS_AS(ising_energy(pair(1.0), std::vector<int>{1, 0}), Error);
}

TEST_CASE("solver examples", "[ising][solve]") {
    OscillatorParams one;
    one.restarts = 1;
    const SolveResult ferro = solve(pair(1.0), one);
    CHECK(ferro.energy == -1.0);
    CHECK(ferro.spins[0] == ferro.spins[1]);

    const std::vector<std::pair<std::uint32_t, std::uint32_t>> edges{{0, 1}, {1, 2}, {0, 2}};
    const IsingProblem tri = maxcut_problem(3, edges);
    OscillatorParams few;
    few.restarts = 5;
    const SolveResult cut = solve(tri, few);
    CHECK(cut_value(tri, cut.spins) == 2.0);
    // Every cut of a triangle has value 0 or 2.
    for (int m = 0; m < 8; ++m) {
        const std::vector<int> s{m & 1 ? -1 : 1, m & 2 ? -1 : 1, m & 4 ? -1 : 1};
        const double c = cut_value(tri, s);
        CHECK((c == 0.0 || c == 2.0));
    }
}

TEST_CASE("solver is deterministic and matches brute force on small instances", "[ising][solve][oracle]") {
    OscillatorParams params;
    params.restarts = 20;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        const IsingProblem p = random_problem(10, seed, true);
        const SolveResult a = solve(p, params);
        const SolveResult b = solve(p, params);
        CHECK(a.spins == b.spins);
        CHECK(a.best_restart == b.best_restart);
        CHECK(a.energy == brute_force_ground(p).energy);
    }
}

TEST_CASE("stability bound and problem validation", "[ising][errors]") {
    const IsingProblem p = random_problem(10, 1, true);
    OscillatorParams params;
    params.dt = 0.2;
    CHECK_THROWS_AS(solve(p, params), Error);
    try {
        check_stability(p, params);
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::Config);
    }

    IsingProblem bad = IsingProblem::zeros(2);
    bad.j[1] = 1.0;
    CHECK_THROWS_AS(bad.validate(), Error);
    CHECK_THROWS_AS(bad.set_coupling(1, 1, 1.0), Error);

    const auto doc = nlohmann::json::parse(R"({"n": 3, "couplings": [[0, 1, -1], [1, 2, 0.5]], "h": [0, 0.1, 0]})");
    const IsingProblem parsed = parse_ising(doc);
    CHECK(parsed.coupling(2, 1) == 0.5);
    CHECK(parse_ising(ising_to_json(parsed)).j == parsed.j);
    CHECK_THROWS_AS(parse_ising(nlohmann::json::parse(R"({"n": 2, "couplings": [[0, 2, 1]]})")), Error);
    CHECK_THROWS_AS(parse_ising(nlohmann::json::parse(R"({"n": 2, "couplings": [[1, 1, 1]]})")), Error);
}

TEST_CASE("normalization keeps ground states and bounds row sums", "[ising][solve]") {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        IsingProblem p = random_problem(7, seed, false);
        p.h[2] = 0.7;
        const IsingProblem q = normalized(p);
        double row_max = 0.0;
        for (std::uint32_t a = 0; a < q.n; ++a) {
            double row = std::abs(q.h[a]);
            for (std::uint32_t b = 0; b < q.n; ++b) row += std::abs(q.coupling(a, b));
            row_max = std::max(row_max, row);
        }
        CHECK_THAT(row_max, WithinAbs(1.0, 1e-12));
        CHECK(brute_force_ground(q).spins == brute_force_ground(p).spins);
    }
    const IsingProblem empty = IsingProblem::zeros(3);
    CHECK(normalized(empty).j == empty.j);
}
