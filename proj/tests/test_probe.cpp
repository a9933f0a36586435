#include "catch_amalgamated.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <sstream>

#include "epicsim/error.hpp"
#include "epicsim/probe.hpp"
#include "helpers.hpp"

using namespace epicsim;
using namespace testing_support;
using nlohmann::json;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

std::vector<double> tone(double hz, double dt_ms, std::size_t n, double amp = 1.0, double phase = 0.0) {
    std::vector<double> x(n);
    for (std::size_t i = 0; i < n; ++i)
        x[i] = amp * std::sin(2 * std::numbers::pi * hz * static_cast<double>(i) * dt_ms * 1e-3 + phase);
    return x;
}

// Direct O(n^2) DFT, one-sided periodogram with the same scaling.
std::vector<double> naive_psd(const std::vector<double>& x, double dt_ms) {
    const std::size_t n = x.size();
    double mean = 0;
    for (double v : x) mean += v;
    mean /= static_cast<double>(n);
    std::vector<double> psd(n / 2 + 1);
    for (std::size_t k = 0; k < psd.size(); ++k) {
        std::complex<double> s = 0;
        for (std::size_t i = 0; i < n; ++i)
            s += (x[i] - mean) * std::polar(1.0, -2 * std::numbers::pi * static_cast<double>(k * i) / static_cast<double>(n));
        const bool edge = k == 0 || (n % 2 == 0 && k == n / 2);
        psd[k] = (edge ? 1.0 : 2.0) * std::norm(s) * dt_ms * 1e-3 / static_cast<double>(n);
    }
    return psd;
}

json fixed_weight(double w) { return {{"low", w}, {"high", w}}; }

Stimulus drive(const std::string& pop, double current) {
    StimulusEntry e;
    e.population = pop;
    e.value = current;
    return {{e}};
}

} // namespace

TEST_CASE("a 40 Hz rate lands in gamma at the right bin", "[probe][spectrum][oracle]") {
    const double dt = 1.0;
    const auto x = tone(40.0, dt, 2000);
    const Spectrum s = spectrum(x, dt);
    CHECK(s.resolution_hz == 0.5);
    CHECK(std::abs(s.dominant_hz - 40.0) <= s.resolution_hz);
    CHECK(s.bands.gamma > 100 * std::max({s.bands.theta, s.bands.alpha, s.bands.beta}));

    const auto ref = naive_psd(x, dt);
    REQUIRE(ref.size() == s.psd.size());
    const double peak = *std::max_element(ref.begin(), ref.end());
    for (std::size_t k = 0; k < ref.size(); ++k) CHECK_THAT(s.psd[k], WithinAbs(ref[k], 1e-9 * peak));
}

TEST_CASE("band power bookkeeping", "[probe][spectrum]") {
    SECTION("a constant signal has no band power") {
        const std::vector<double> c(4000, 7.5);
        const Spectrum s = spectrum(c, 0.5);
        for (double b : {s.bands.theta, s.bands.alpha, s.bands.beta, s.bands.gamma}) CHECK(b <= 1e-9 * s.signal_power);
    }
    SECTION("a 6 + 40 Hz mixture lights theta and gamma") {
        auto x = tone(6.0, 0.5, 8000);
        const auto g = tone(40.0, 0.5, 8000, 0.7);
        for (std::size_t i = 0; i < x.size(); ++i) x[i] += g[i];
        const Spectrum s = spectrum(x, 0.5);
        CHECK(s.bands.theta > s.bands.alpha);
        CHECK(s.bands.theta > s.bands.beta);
        CHECK(s.bands.gamma > s.bands.alpha);
        CHECK(s.bands.gamma > s.bands.beta);
    }
    SECTION("circular shifts leave the band powers alone") {
        auto x = tone(10.0, 1.0, 3000);
        const auto y = tone(23.0, 1.0, 3000, 0.4, 0.3);
        for (std::size_t i = 0; i < x.size(); ++i) x[i] += y[i] + 0.1 * std::cos(0.37 * static_cast<double>(i * i % 17));
        auto shifted = x;
        std::rotate(shifted.begin(), shifted.begin() + 417, shifted.end());
        const Spectrum a = spectrum(x, 1.0), b = spectrum(shifted, 1.0);
        CHECK_THAT(a.bands.alpha, WithinRel(b.bands.alpha, 1e-9));
        CHECK_THAT(a.bands.beta, WithinRel(b.bands.beta, 1e-9));
        CHECK_THAT(a.bands.gamma, WithinRel(b.bands.gamma, 1e-9));
    }
    SECTION("Parseval: the PSD integrates to the variance") {
        const auto x = tone(17.0, 0.25, 9000, 2.0);
        const Spectrum s = spectrum(x, 0.25);
        double total = 0, mean = 0, var = 0;
        for (double p : s.psd) total += p * s.resolution_hz;
        for (double v : x) mean += v / static_cast<double>(x.size());
        for (double v : x) var += (v - mean) * (v - mean) / static_cast<double>(x.size());
        CHECK_THAT(total, WithinRel(var, 1e-9));
    }
}

TEST_CASE("spectrum input checks", "[probe][spectrum][errors]") {
    try {
        spectrum(std::vector<double>(1999, 0.0), 1.0);
        FAIL("expected a length error");
    } catch (const Error& e) {
        CHECK(std::string(e.what()).find("2000") != std::string::npos);
    }
    CHECK_THROWS_AS(spectrum(std::vector<double>(1000, 0.0), 2.0), Error);
}

TEST_CASE("V_m of a neuron clamped at rest is flat", "[probe][record]") {
    const NetworkSpec spec = spec_of(json::array({pop("a", 2, {{"v_rest", 0.2}, {"v_reset", 0.2}, {"theta0", 1.0}})}));
    Engine e(build_network(spec));
    StimulusEntry clamp;
    clamp.kind = StimulusEntry::Kind::Clamp;
    clamp.population = "a";
    clamp.value = 0.0;
    e.set_stimulus({{clamp}});
    Recorder vm(e, {MeasurementKind::VmTrace, {"a:1"}, 5});
    e.add_observer(&vm);
    e.run_for(50.0);
    const Artifact art = vm.artifact(e);
    REQUIRE(art.samples.size() == 100);
    CHECK(art.samples.front().t == 0.5);
    for (const auto& s : art.samples) {
        CHECK(s.target == "a:1");
        CHECK(s.value == 0.2);
    }
}

TEST_CASE("recorded raster is the engine raster", "[probe][record]") {
    const NetworkSpec spec = spec_of(json::array({pop("a", 3), pop("b", 3)}),
                                     json::array({proj("ab", "a", "b", {{"gain", 3.0}})}));
    Engine e(build_network(spec));
    e.set_stimulus(drive("a", 1.6));
    Recorder raster(e, {MeasurementKind::SpikeRaster});
    e.add_observer(&raster);
    e.run_for(100.0);
    const Artifact art = raster.artifact(e);
    REQUIRE(art.samples.size() == e.raster().size());
    for (std::size_t i = 0; i < art.samples.size(); ++i) {
        const auto& r = e.raster()[i];
        CHECK(art.samples[i].t == static_cast<double>(r.step) * e.dt());
        CHECK(art.samples[i].target == e.network().populations[r.pop].id + ":" + std::to_string(r.index));
    }
    std::ostringstream os;
    art.write_jsonl(os);
    const std::string text = os.str();
    CHECK(std::count(text.begin(), text.end(), '\n') == static_cast<long>(art.samples.size()));
}

TEST_CASE("weight matrix samples move by the applied delta", "[probe][record][oracle]") {
    const json quiet{{"kind", "ECRAM"}, {"levels", 1024}, {"write_noise_rel", 0.0}};
    const NetworkSpec spec = spec_of(
        json::array({pop("in", 4), pop("out", 3)}),
        json::array({proj("w", "in", "out", {{"plasticity", "xcal"}, {"gain", 0.5}, {"device", quiet}})}),
        {{"layers", {{"input", "in"}, {"output", "out"}}}});
    Engine e(build_network(spec));
    const auto snapshot_weights = [&] {
        Recorder rec(e, {MeasurementKind::WeightMatrix, {"w"}});
        rec.on_step(e);
        return rec.artifact(e).samples;
    };
    // The recorder only samples on whole multiples; step once so the clock is nonzero.
    e.advance(1);
    const auto before = snapshot_weights();
    const TrialResult r = e.train_trial({1, 0.5, 0, 0.8}, {1, 0, 0.6});
    const auto after = snapshot_weights();
    REQUIRE(before.size() == 12);
    REQUIRE(after.size() == 12);
    const double half_level = 0.5 / 1023.0;
    const auto& raw = r.raw_dw.at("w");
    for (std::size_t k = 0; k < 12; ++k) {
        CHECK(after[k].target == before[k].target);
        const double expect = std::clamp(before[k].value + spec.xcal.lrate * raw[k], 0.0, 1.0);
        CHECK_THAT(after[k].value, WithinAbs(expect, half_level + 1e-12));
    }
}

TEST_CASE("tomography echoes latency and rebuilds a causal chain", "[probe][tomography][oracle]") {
    // A -> B -> C; each brief, strong link makes exactly one spike fire the next neuron.
    const json fast{{"kind", "leaky_recurrent"}, {"tau", 0.5}};
    const NetworkSpec spec = spec_of(
        json::array({pop("A", 1), pop("B", 1), pop("C", 1)}),
        json::array({proj("ab", "A", "B", {{"latency_ms", 2.0}, {"gain", 40.0}, {"kernel", fast}, {"init", fixed_weight(1.0)}}),
                     proj("bc", "B", "C", {{"latency_ms", 3.0}, {"gain", 40.0}, {"kernel", fast}, {"init", fixed_weight(1.0)}})}));
    Engine e(build_network(spec));
    e.enable_tomography(true);
    e.submit(Intervention::inject(1.0, Selector::neuron("A", 0), 150.0, 0.1));
    e.run_for(30.0);

    Recorder tomo(e, {MeasurementKind::Tomography});
    const Artifact art = tomo.artifact(e);
    CHECK(art.samples.size() == e.tomography().size());

    auto entries = e.tomography();
    std::stable_sort(entries.begin(), entries.end(),
                     [](const TomographyEntry& a, const TomographyEntry& b) { return a.arrival_step < b.arrival_step; });
    std::vector<std::string> chain;
    for (const auto& t : entries) {
        if (t.kind == TomographyEntry::Kind::Spike) chain.push_back("spike " + e.network().populations[t.source.pop].id);
        if (t.kind == TomographyEntry::Kind::Delivery) {
            const auto& p = e.network().projections[static_cast<std::size_t>(t.projection)];
            chain.push_back("deliver " + p.id);
            CHECK(t.arrival_step - t.emit_step == (p.id == "ab" ? 20u : 30u));
        }
    }
    const std::vector<std::string> expect{"spike A", "deliver ab", "spike B", "deliver bc", "spike C"};
    CHECK(chain == expect);
}

TEST_CASE("probes never perturb the run", "[probe][determinism]") {
    const NetworkSpec spec = spec_of(
        json::array({pop("a", 5), pop("b", 5)}),
        json::array({proj("ab", "a", "b", {{"plasticity", "stdp"}, {"gain", 2.0}}), proj("ba", "b", "a", {{"gain", 0.5}})}));
    const Network net = build_network(spec);
    const RunTrace bare = run(net, drive("a", 1.3), 300.0, 9);

    Engine e(net, 9);
    e.set_stimulus(drive("a", 1.3));
    std::vector<std::unique_ptr<Recorder>> recs;
    for (auto kind : {MeasurementKind::VmTrace, MeasurementKind::SpikeRaster, MeasurementKind::WeightMatrix,
                      MeasurementKind::EnergyForensics, MeasurementKind::Spectrum}) {
        recs.push_back(std::make_unique<Recorder>(e, MeasurementSpec{kind}));
        e.add_observer(recs.back().get());
    }
    e.enable_tomography(true);
    e.run_for(300.0);
    CHECK(e.raster_hash() == bare.raster_hash);
    CHECK(e.ledger() == bare.ledger);
    CHECK(recs.back()->rate_signal().size() == 3000);
}

TEST_CASE("measurement specs are checked", "[probe][errors]") {
    Engine e(build_network(spec_of(json::array({pop("a", 2)}))));
    CHECK_THROWS_AS(Recorder(e, {MeasurementKind::VmTrace, {"zz"}}), Error);
    CHECK_THROWS_AS(Recorder(e, {MeasurementKind::VmTrace, {"a:7"}}), Error);
    CHECK_THROWS_AS(Recorder(e, {MeasurementKind::WeightMatrix, {"nope"}}), Error);
    CHECK_THROWS_AS(Recorder(e, {MeasurementKind::VmTrace, {}, 0}), Error);
    CHECK(measurement_kind_from("spectrum") == MeasurementKind::Spectrum);
    CHECK_THROWS_AS(measurement_kind_from("eeg"), Error);
}
