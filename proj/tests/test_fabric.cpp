#include "catch_amalgamated.hpp"

#include <algorithm>
#include <numbers>
#include <set>

#include "epicsim/error.hpp"
#include "epicsim/fabric.hpp"
#include "helpers.hpp"

using namespace epicsim;
using namespace testing_support;
using nlohmann::json;

TEST_CASE("awgr routing examples", "[fabric][awgr]") {
    for (std::uint32_t in = 0; in < 8; ++in) CHECK(awgr_route(8, in, 0) == in);
    CHECK(awgr_route(8, 3, 2) == 5);
    CHECK(awgr_route(8, 7, 3) == 2);
    CHECK_THROWS_AS(awgr_route(8, 8, 0), Error);
    CHECK_THROWS_AS(awgr_route(8, 0, 8), Error);
}

TEST_CASE("awgr routing is a permutation for every wavelength", "[fabric][awgr][property]") {
    for (std::uint32_t n = 1; n <= 64; ++n)
        for (std::uint32_t lambda = 0; lambda < n; ++lambda) {
            std::vector<bool> hit(n, false);
            for (std::uint32_t in = 0; in < n; ++in) hit[awgr_route(n, in, lambda)] = true;
            REQUIRE(std::all_of(hit.begin(), hit.end(), [](bool b) { return b; }));
        }
}

TEST_CASE("loss budget examples", "[fabric][loss]") {
    PhotonicPath empty;
    CHECK(loss_budget(empty).total_db == 0.0);

    PhotonicPath p;
    p.mzi_count = 10;
    p.mzi_phases.assign(10, std::numbers::pi);
    p.tsov_count = 2;
    const auto b = loss_budget(p);
    CHECK(b.total_db == Catch::Approx(2.055).epsilon(1e-12));
    CHECK(b.margin_db == Catch::Approx(27.945).epsilon(1e-12));
    CHECK(b.ok());

    p.laser_dbm = -29.0;
    CHECK_FALSE(loss_budget(p).ok());
}

TEST_CASE("loss budget is additive over concatenated segments", "[fabric][loss][property]") {
    RngStream rng(2, "loss");
    for (int i = 0; i < 200; ++i) {
        PhotonicPath a, b;
        for (int k = 0, n = int(rng.below(12)); k < n; ++k) a.mzi_phases.push_back(rng.uniform(0, std::numbers::pi));
        for (int k = 0, n = int(rng.below(12)); k < n; ++k) b.mzi_phases.push_back(rng.uniform(0, std::numbers::pi));
        a.tsov_count = std::uint32_t(rng.below(4));
        b.tsov_count = std::uint32_t(rng.below(4));
        a.coupler_loss_db = rng.uniform(0, 3);
        b.coupler_loss_db = rng.uniform(0, 3);
        const double joined = loss_budget(concatenate(a, b)).total_db;
        REQUIRE(std::abs(joined - (loss_budget(a).total_db + loss_budget(b).total_db)) <= 1e-12);
    }
}

TEST_CASE("build errors", "[fabric][build]") {
    NetworkSpec empty;
    try {
        build_network(empty);
        FAIL("expected error");
    } catch (const Error& e) {
        CHECK(std::string(e.what()).find("no populations") != std::string::npos);
    }
}

TEST_CASE("dense projection shape", "[fabric][build]") {
    auto spec = spec_of(json::array({pop("a", 4), pop("b", 3)}), json::array({proj("ab", "a", "b")}));
    auto net = build_network(spec);
    const auto& p = net.projection("ab");
    CHECK(p.n_pre == 4);
    CHECK(p.n_post == 3);
    CHECK(p.synapses.size() == 12);
    for (std::uint32_t i = 0; i < 4; ++i) {
        std::uint32_t fan = 0;
        for (std::uint32_t j = 0; j < 3; ++j) fan += p.active(i, j);
        CHECK(fan == 3);
    }
    CHECK(p.latency_ms == 1.0);
    CHECK(net.neuron_count == 7);
}

TEST_CASE("fanout above the cap builds with a warning", "[fabric][build]") {
    auto spec = spec_of(json::array({pop("src", 1), pop("dst", 9000)}), json::array({proj("p", "src", "dst")}));
    auto net = build_network(spec);
    REQUIRE(net.report.warnings.size() == 1);
    CHECK(net.report.warnings[0].find("9000") != std::string::npos);
    CHECK(net.report.warnings[0].find("8000") != std::string::npos);
}

TEST_CASE("photonic projections get conflict-free wavelengths and budgets", "[fabric][build][wdm]") {
    auto spec = spec_of(json::array({pop("a", 3, json{}), pop("b", 3), pop("c", 2)}),
                        json::array({proj("ab", "a", "b", {{"medium", "photonic"}}),
                                     proj("ac", "a", "c", {{"medium", "photonic"}}),
                                     proj("bc", "b", "c", {{"medium", "photonic"}}),
                                     proj("ca", "c", "a", {{"medium", "photonic"}})}),
                        {{"awgr_size", 8}});
    auto net = build_network(spec);
    std::set<std::pair<std::uint32_t, std::uint32_t>> used;
    for (const auto& p : net.projections) {
        REQUIRE(p.route);
        CHECK(awgr_route(8, p.route->input_port, p.route->path.wavelength) == p.route->output_port);
        CHECK(used.emplace(p.route->output_port, p.route->path.wavelength).second);
        CHECK(p.route->budget.ok());
        CHECK(p.latency_ms == spec.engine.dt);
    }
}

TEST_CASE("two photonic projections on one port pair cannot be assigned", "[fabric][build][wdm]") {
    auto spec = spec_of(json::array({pop("a", 2), pop("b", 2)}),
                        json::array({proj("x", "a", "b", {{"medium", "photonic"}}),
                                     proj("y", "a", "b", {{"medium", "photonic"}})}));
    try {
        build_network(spec);
        FAIL("expected conflict");
    } catch (const Error& e) {
        const std::string msg = e.what();
        CHECK(msg.find("'x'") != std::string::npos);
        CHECK(msg.find("'y'") != std::string::npos);
    }
}

TEST_CASE("loss margin failures are reported, not thrown", "[fabric][build][loss]") {
    auto spec = spec_of(json::array({pop("a", 1, json{}), pop("b", 1)}),
                        json::array({proj("ab", "a", "b",
                                          {{"medium", "photonic"},
                                           {"photonic", {{"laser_dbm", -29.5}, {"coupler_db", 1.0}}}})}));
    spec.populations[1].plane = 1;
    auto net = build_network(spec);
    const auto& r = net.projection("ab").route;
    REQUIRE(r);
    CHECK(r->path.tsov_count == 1);
    CHECK(r->budget.total_db == Catch::Approx(0.0055 + 1.0 + 1.0));
    CHECK(net.report.loss_failures.size() == 1);
}

TEST_CASE("build is deterministic in the seed", "[fabric][build][property]") {
    auto spec = spec_of(json::array({pop("a", 20), pop("b", 15)}),
                        json::array({proj("ab", "a", "b", {{"connectivity", {{"kind", "bernoulli"}, {"p", 0.3}}}}),
                                     proj("ba", "b", "a", {{"medium", "photonic"}})}));
    CHECK(network_hash(build_network(spec, 5)) == network_hash(build_network(spec, 5)));
    CHECK(network_hash(build_network(spec, 5)) != network_hash(build_network(spec, 6)));
    auto net = build_network(spec, 5);
    const auto active = net.projection("ab").active_count();
    CHECK(active > 40);
    CHECK(active < 140);
}

TEST_CASE("excluded synapses leave the rest of the build untouched", "[fabric][build]") {
    auto base = spec_of(json::array({pop("a", 5), pop("b", 4)}), json::array({proj("ab", "a", "b")}));
    auto cut = base;
    cut.projections[0].exclude.push_back({2, 3});
    auto n1 = build_network(base);
    auto n2 = build_network(cut);
    const auto& p1 = n1.projection("ab");
    const auto& p2 = n2.projection("ab");
    for (std::size_t k = 0; k < p1.synapses.size(); ++k) {
        CHECK(p1.synapses[k] == p2.synapses[k]);
        CHECK(p2.active(k) == (k != p2.at(2, 3)));
    }
}

namespace {

Network ten_synapse_net() {
    auto spec = spec_of(json::array({pop("a", 2), pop("b", 5)}), json::array({proj("ab", "a", "b")}));
    auto net = build_network(spec);
    auto& p = net.projection("ab");
    const std::uint32_t levels[] = {40, 3, 17, 60, 9, 22, 1, 35, 50, 28};
    for (std::size_t k = 0; k < 10; ++k) p.synapses[k].level = levels[k];
    return net;
}

} // namespace

TEST_CASE("prune removes the smallest weights", "[fabric][prune]") {
    auto net = ten_synapse_net();
    CHECK(network_hash(prune(net, "ab", 0.0)) == network_hash(net));

    auto all = prune(net, "ab", 1.0);
    CHECK(all.projection("ab").active_count() == 0);
    CHECK_FALSE(all.report.warnings.empty());

    // Sort oracle.
    const auto& p = net.projection("ab");
    std::vector<std::size_t> idx(10);
    for (std::size_t k = 0; k < 10; ++k) idx[k] = k;
    std::sort(idx.begin(), idx.end(), [&](auto a, auto b) { return p.synapses[a].level < p.synapses[b].level; });
    std::set<std::size_t> expected(idx.begin(), idx.begin() + 5);
    auto half = prune(net, "ab", 0.5);
    std::set<std::size_t> removed;
    for (std::size_t k = 0; k < 10; ++k)
        if (!half.projection("ab").active(k)) removed.insert(k);
    CHECK(removed == expected);

    CHECK_THROWS_AS(prune(net, "nope", 0.5), Error);
}

TEST_CASE("prune is idempotent and monotone", "[fabric][prune][property]") {
    auto spec = spec_of(json::array({pop("a", 12), pop("b", 9)}), json::array({proj("ab", "a", "b")}));
    auto net = build_network(spec, 3);
    auto& p = net.projection("ab");
    // Force ties so the index tie-break is exercised.
    for (std::size_t k = 0; k < p.synapses.size(); k += 3) p.synapses[k].level = 7;
    std::vector<std::uint8_t> prev(p.synapses.size(), 0);
    for (double f = 0.0; f <= 1.0; f += 0.05) {
        auto once = prune(net, "ab", f);
        auto twice = prune(once, "ab", f);
        REQUIRE(once.projection("ab").pruned == twice.projection("ab").pruned);
        const auto& cur = once.projection("ab").pruned;
        for (std::size_t k = 0; k < cur.size(); ++k) REQUIRE(cur[k] >= prev[k]);
        prev = cur;
    }
}
