#include "catch_amalgamated.hpp"

#include <cmath>
#include <numbers>
#include <vector>

#include "epicsim/error.hpp"
#include "epicsim/synapse.hpp"

using namespace epicsim;
using Catch::Approx;

TEST_CASE("weight normalisation", "[synapse]") {
    auto ecram = default_device(DeviceKind::ECRAM);
    SynapseState s;
    s.level = 0;
    CHECK(weight_of(s, ecram) == 0.0);
    s.level = ecram.levels - 1;
    CHECK(weight_of(s, ecram) == 1.0);

    auto hzo = default_device(DeviceKind::FeFET_HZO);
    CHECK(hzo.levels == 1024);
    s.level = 512;
    CHECK(weight_of(s, hzo) == Approx(512.0 / 1023.0));
    CHECK(weight_of(s, hzo) == Approx(0.5005).margin(5e-5));

    hzo.g_min = 0.1;
    hzo.g_max = 2.1;
    CHECK(conductance_of(s, hzo) == Approx(0.1 + 2.0 * 512.0 / 1023.0));
}

TEST_CASE("zero delta is a skipped write", "[synapse][program]") {
    auto d = default_device(DeviceKind::ECRAM);
    d.write_noise_rel = 0.0;
    RngStream rng(1, "t");
    SynapseState s;
    s.level = 17;
    EnergyLedger ledger;
    auto next = program_weight(s, d, 0.0, rng, &ledger);
    CHECK(next == s);
    CHECK(ledger.total_fj() == 0.0);
}

TEST_CASE("write noise matches the ~100 signal-to-noise figure", "[synapse][program]") {
    auto d = default_device(DeviceKind::ECRAM);
    REQUIRE(d.write_noise_rel == 0.01);
    RngStream rng(7, "snr");
    SynapseState s;
    s.level = 20;
    const double target = weight_of(s, d) + 0.25;
    double sum = 0, sum2 = 0;
    const int n = 10000;
    for (int i = 0; i < n; ++i) {
        const double w = weight_of(program_weight(s, d, 0.25, rng), d);
        sum += w - target;
        sum2 += (w - target) * (w - target);
    }
    const double mean = sum / n;
    const double sd = std::sqrt(sum2 / n - mean * mean);
    // 64 levels add quantisation noise of step/sqrt(12) ~ 0.0046 on top of 0.01.
    CHECK(sd == Approx(std::sqrt(0.01 * 0.01 + std::pow(1.0 / 63, 2) / 12)).epsilon(0.1));
    CHECK(sd == Approx(0.01).epsilon(0.2));

    // With 1024 levels quantisation is negligible.
    auto hzo = default_device(DeviceKind::FeFET_HZO);
    s.level = 300;
    sum = sum2 = 0;
    const double t2 = weight_of(s, hzo) + 0.1;
    for (int i = 0; i < n; ++i) {
        const double w = weight_of(program_weight(s, hzo, 0.1, rng), hzo) - t2;
        sum += w;
        sum2 += w * w;
    }
    CHECK(std::sqrt(sum2 / n - (sum / n) * (sum / n)) == Approx(0.01).epsilon(0.05));
}

TEST_CASE("endurance exhaustion sticks the device", "[synapse][program]") {
    auto d = default_device(DeviceKind::ECRAM);
    d.endurance = 3;
    d.write_noise_rel = 0.0;
    RngStream rng(1, "e");
    SynapseState s;
    s.level = 10;
    s.write_count = 2;
    EnergyLedger ledger;
    s = program_weight(s, d, 0.1, rng, &ledger);
    CHECK(s.write_count == 3);
    CHECK(s.stuck);
    CHECK(ledger.count(EnergyCategory::WeightWrite) == 1);
    CHECK(ledger.tally_fj(EnergyCategory::WeightWrite) == Approx(0.05));
    try {
        program_weight(s, d, 0.1, rng, &ledger);
        FAIL("expected device-stuck");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::DeviceStuck);
    }
}

TEST_CASE("writes that land on the same level are not counted", "[synapse][program]") {
    auto d = default_device(DeviceKind::ECRAM);
    d.write_noise_rel = 0.0;
    RngStream rng(1, "x");
    SynapseState s;
    s.level = 10;
    auto next = program_weight(s, d, 1e-4, rng);
    CHECK(next.level == 10);
    CHECK(next.write_count == 0);
}

TEST_CASE("quantisation error bound", "[synapse][program][property]") {
    RngStream gen(99, "grid");
    for (auto kind : {DeviceKind::ECRAM, DeviceKind::FeFET_HZO, DeviceKind::PCM_MZI}) {
        const auto d = default_device(kind);
        RngStream rng(3, "q");
        for (int i = 0; i < 2000; ++i) {
            SynapseState s;
            s.level = static_cast<std::uint32_t>(gen.below(d.levels));
            const double dw = gen.uniform(-0.6, 0.6);
            const double ideal = std::clamp(weight_of(s, d) + dw, 0.0, 1.0);
            const double got = weight_of(program_weight(s, d, dw, rng), d);
            REQUIRE(std::abs(got - ideal) <= 0.5 / (d.levels - 1) + 5 * d.write_noise_rel);
        }
    }
}

TEST_CASE("stuck devices never move", "[synapse][program][property]") {
    auto d = default_device(DeviceKind::ECRAM);
    RngStream rng(5, "s");
    SynapseState s;
    s.level = 30;
    s.stuck = true;
    for (double dw : {-1.0, -0.1, 0.05, 0.7}) {
        CHECK_THROWS_AS(program_weight(s, d, dw, rng), Error);
        CHECK(s.level == 30);
    }
}

TEST_CASE("xcal examples", "[synapse][xcal]") {
    CHECK(xcal_dw(0.5, 0.5, 0.1) == 0.0);
    CHECK(xcal_dw(0.0, 0.5, 0.1) == 0.0);
    CHECK(xcal_dw(0.04, 0.5, 0.1) == Approx(-0.36).epsilon(1e-12));
    CHECK(xcal_dw(0.05, 0.5, 0.1) == Approx(-0.45).epsilon(1e-12));
    CHECK(xcal_dw(0.5 * 0.1, 0.5, 0.1) == Approx(-0.5 * 0.9).epsilon(1e-12));
}

TEST_CASE("xcal shape over random thresholds", "[synapse][xcal][property]") {
    RngStream rng(11, "xcal");
    for (int trial = 0; trial < 300; ++trial) {
        const double tp = rng.uniform(0.01, 1.0);
        const double td = rng.uniform(0.01, 0.99);
        const double knee = tp * td;
        // Continuity at the knee: both branches agree.
        const double left = -knee * (1 - td) / td;
        const double right = knee - tp;
        REQUIRE(left == Approx(right).margin(1e-12));
        REQUIRE(xcal_dw(knee, tp, td) == Approx(-tp * (1 - td)).margin(1e-12));
        double prev = xcal_dw(0.0, tp, td);
        REQUIRE(prev == 0.0);
        REQUIRE(xcal_dw(tp, tp, td) == Approx(0.0).margin(1e-15));
        for (double xy = 0.001; xy < 2.0; xy += 0.001) {
            const double v = xcal_dw(xy, tp, td);
            REQUIRE(v >= -tp * (1 - td) - 1e-12);
            if (xy < knee) REQUIRE(v < prev + 1e-15);
            if (xy > knee + 0.001) REQUIRE(v > prev - 1e-15);
            if (std::abs(xy - tp) > 1e-9) REQUIRE(v != 0.0);
            prev = v;
        }
    }
}

TEST_CASE("activity trace", "[synapse][trace]") {
    double tr = 0.0;
    for (int k = 0; k < 10000; ++k) tr = update_activity_trace(tr, 0.7, 0.1, 10.0);
    CHECK(tr == Approx(0.7).epsilon(0.01));

    double decay = 0.8;
    for (int k = 0; k < 50; ++k) {
        const double next = update_activity_trace(decay, 0.0, 0.1, 10.0);
        REQUIRE(next == Approx(decay * (1 - 0.01)));
        decay = next;
    }

    // Step response after tau_avg: 1 - e^-1 in the continuous limit.
    const double dt = 0.01;
    double step = 0.0;
    for (int k = 0; k < 1000; ++k) step = update_activity_trace(step, 1.0, dt, 10.0);
    CHECK(step == Approx(1.0 - std::exp(-1.0)).margin(1e-3));
}

TEST_CASE("stdp window", "[synapse][stdp]") {
    StdpParams p;
    CHECK(stdp_dw(20.0, p) == Approx(0.01 * std::exp(-1.0)));
    CHECK(stdp_dw(20.0, p) == Approx(0.0036788).margin(1e-7));
    CHECK(stdp_dw(-20.0, p) == Approx(-0.0044146).margin(1e-7));
    CHECK(std::abs(stdp_dw(30.0 * p.tau_plus + 1.0, p)) < 1e-12);
    CHECK(stdp_dw(0.0, p) > 0.0);
}

TEST_CASE("stdp sign and magnitude monotonicity", "[synapse][stdp][property]") {
    StdpParams p{0.02, 0.015, 12.0, 30.0};
    double prev_pos = stdp_dw(0.0, p), prev_neg = std::abs(stdp_dw(-1e-9, p));
    for (double dt = 0.05; dt < 300.0; dt += 0.05) {
        const double pos = stdp_dw(dt, p);
        const double neg = stdp_dw(-dt, p);
        REQUIRE(pos > 0);
        REQUIRE(neg < 0);
        REQUIRE(pos <= prev_pos);
        REQUIRE(std::abs(neg) <= prev_neg);
        prev_pos = pos;
        prev_neg = std::abs(neg);
    }
}

TEST_CASE("mzi transmission and weight-to-phase", "[synapse][mzi]") {
    auto t0 = mzi_transmission(0.0);
    CHECK(t0.bar == 1.0);
    CHECK(t0.cross == 0.0);
    auto tpi = mzi_transmission(std::numbers::pi);
    CHECK(tpi.bar == Approx(0.0).margin(1e-15));
    CHECK(tpi.cross == Approx(1.0));
    auto th = mzi_transmission(std::numbers::pi / 2);
    CHECK(th.bar == Approx(0.5));
    CHECK(th.cross == Approx(0.5));

    CHECK(weight_to_phase(0.0) == 0.0);
    CHECK(weight_to_phase(1.0) == Approx(std::numbers::pi));
    CHECK(weight_to_phase(0.25) == Approx(std::numbers::pi / 3));
    CHECK_THROWS_AS(weight_to_phase(1.2), Error);
    CHECK_THROWS_AS(weight_to_phase(-0.01), Error);
}

TEST_CASE("phase mapping round-trips through the cross port", "[synapse][mzi][property]") {
    RngStream rng(4, "mzi");
    for (int i = 0; i < 10000; ++i) {
        const double w = i < 2 ? double(i) : rng.uniform();
        const auto t = mzi_transmission(weight_to_phase(w));
        REQUIRE(std::abs(t.cross - w) < 1e-12);
        REQUIRE(t.bar + t.cross == 1.0);
    }
}
