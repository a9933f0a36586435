#include "catch_amalgamated.hpp"

#include <cmath>
#include <limits>
#include <vector>

#include "epicsim/error.hpp"
#include "epicsim/soma.hpp"

using namespace epicsim;
using Catch::Approx;

namespace {

SomaParams lif(double tau = 10.0, double theta = 1.0, double t_ref = 0.0) {
    SomaParams p;
    p.tau_m = tau;
    p.theta0 = theta;
    p.t_ref = t_ref;
    return p;
}

// Steps of constant drive between consecutive spikes (second ISI, so the
// start-up transient from rest is excluded).
double simulated_isi(const SomaParams& p, double i_in, double dt) {
    SomaState s = resting_state(p);
    std::vector<double> spikes;
    for (int k = 1; k < 200000 && spikes.size() < 3; ++k) {
        auto r = step_lif(s, p, i_in, dt, k * dt);
        s = r.state;
        if (r.spiked) spikes.push_back(k * dt);
    }
    REQUIRE(spikes.size() >= 3);
    return spikes[2] - spikes[1];
}

// Reference RK4 for the Izhikevich equations at a fine step; independent of step_izhikevich.
double reference_first_spike(const SomaParams& p, double i_in, double h, double horizon) {
    double v = -70.0;
    double u = p.izh.b * v;
    auto fv = [&](double vv, double uu) { return 0.04 * vv * vv + 5.0 * vv + 140.0 - uu + i_in; };
    auto fu = [&](double vv, double uu) { return p.izh.a * (p.izh.b * vv - uu); };
    for (double t = 0; t < horizon; t += h) {
        const double k1v = fv(v, u), k1u = fu(v, u);
        const double k2v = fv(v + h / 2 * k1v, u + h / 2 * k1u), k2u = fu(v + h / 2 * k1v, u + h / 2 * k1u);
        const double k3v = fv(v + h / 2 * k2v, u + h / 2 * k2u), k3u = fu(v + h / 2 * k2v, u + h / 2 * k2u);
        const double k4v = fv(v + h * k3v, u + h * k3u), k4u = fu(v + h * k3v, u + h * k3u);
        v += h / 6 * (k1v + 2 * k2v + 2 * k3v + k4v);
        u += h / 6 * (k1u + 2 * k2u + 2 * k3u + k4u);
        if (v >= 30.0) return t + h;
    }
    return -1;
}

} // namespace

TEST_CASE("lif single step is an exponential decay", "[soma][lif]") {
    SomaParams p = lif();
    SomaState s;
    s.v_m = 0.5;
    auto r = step_lif(s, p, 0.0, 1.0);
    CHECK(r.state.v_m == Approx(0.45).epsilon(1e-12));
    CHECK_FALSE(r.spiked);
}

TEST_CASE("lif refractory clamp holds v at reset", "[soma][lif]") {
    SomaParams p = lif(10, 1, 5);
    SomaState s;
    s.v_m = 0.7;
    s.ref_remaining = 2.0;
    auto r = step_lif(s, p, 100.0, 1.0);
    CHECK(r.state.v_m == p.v_reset);
    CHECK(r.state.ref_remaining == 1.0);
    CHECK_FALSE(r.spiked);
}

TEST_CASE("lif inter-spike interval follows the closed form", "[soma][lif]") {
    // T = tau ln(RI / (RI - theta)) with RI = 2, theta = 1, tau = 10 -> 6.93 ms.
    const double dt = 0.1;
    const double expected = 10.0 * std::log(2.0);
    CHECK(std::abs(simulated_isi(lif(), 2.0, dt) - expected) <= dt);
}

TEST_CASE("lif isi closed form across a parameter grid", "[soma][lif][property]") {
    const double dt = 0.1;
    for (double tau : {5.0, 10.0, 20.0})
        for (double theta : {0.5, 1.0, 1.5})
            for (double ri_over_theta : {1.25, 1.6, 2.5, 4.0}) {
                const double ri = ri_over_theta * theta;
                const double expected = tau * std::log(ri / (ri - theta));
                INFO("tau=" << tau << " theta=" << theta << " RI=" << ri);
                CHECK(std::abs(simulated_isi(lif(tau, theta), ri, dt) - expected) <= dt);
            }
}

TEST_CASE("lif leak is monotone toward rest without input", "[soma][lif][property]") {
    SomaParams p = lif();
    p.v_rest = 0.2;
    for (double v0 : {-1.0, -0.3, 0.0, 0.5, 0.99}) {
        SomaState s;
        s.v_m = v0;
        double prev = std::abs(v0 - p.v_rest);
        for (int k = 0; k < 500; ++k) {
            s = step_lif(s, p, 0.0, 0.1).state;
            const double d = std::abs(s.v_m - p.v_rest);
            REQUIRE(d <= prev);
            prev = d;
        }
    }
}

TEST_CASE("floating threshold rises on spikes and decays geometrically", "[soma][lif][property]") {
    SomaParams p = lif(10, 1, 0);
    p.theta_inc = 0.5;
    p.tau_theta = 20.0;
    SomaState s = resting_state(p);
    s.v_m = 5.0; // forces a spike on the next step
    auto r = step_lif(s, p, 0.0, 0.1);
    REQUIRE(r.spiked);
    CHECK(r.state.theta == Approx(1.5));
    s = r.state;
    const double factor = std::exp(-0.1 / 20.0);
    for (int k = 0; k < 1000; ++k) {
        const double before = s.theta - p.theta0;
        s = step_lif(s, p, 0.0, 0.1).state;
        REQUIRE(s.theta >= p.theta0);
        REQUIRE(s.theta - p.theta0 == Approx(before * factor).margin(1e-15));
    }
}

TEST_CASE("channel knobs: g_k = 0 removes the leak, g_na = 0 blinds the soma", "[soma][knobs]") {
    SomaParams p = lif();
    p.knobs.g_k = 0.0;
    SomaState s;
    s.v_m = 0.4;
    for (int k = 0; k < 100; ++k) s = step_lif(s, p, 0.0, 0.1).state;
    CHECK(s.v_m == 0.4);

    SomaParams blind = lif();
    blind.knobs.g_na = 0.0;
    SomaState a, b;
    a.v_m = b.v_m = 0.3;
    for (int k = 0; k < 200; ++k) {
        a = step_lif(a, blind, 7.5, 0.1).state;
        b = step_lif(b, blind, 0.0, 0.1).state;
        REQUIRE(a == b);
    }
}

TEST_CASE("g_ca scales threshold adaptation", "[soma][knobs]") {
    SomaParams p = lif(10, 1, 0);
    p.theta_inc = 0.4;
    p.knobs.g_ca = 0.5;
    SomaState s = resting_state(p);
    s.v_m = 2.0;
    auto r = step_lif(s, p, 0.0, 0.1);
    REQUIRE(r.spiked);
    CHECK(r.state.theta == Approx(1.2));
}

TEST_CASE("lif rejects non-finite input", "[soma][lif][errors]") {
    SomaParams p = lif();
    SomaState s;
    CHECK_THROWS_AS(step_lif(s, p, std::numeric_limits<double>::quiet_NaN(), 0.1), Error);
    try {
        step_lif(s, p, std::numeric_limits<double>::infinity(), 0.1);
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::NumericInput);
    }
}

TEST_CASE("izhikevich reset rule", "[soma][izhikevich]") {
    SomaParams p;
    p.model = SomaModel::Izhikevich;
    SomaState s = resting_state(p);
    s.v_m = 31.0;
    s.u = 0.0;
    auto r = step_izhikevich(s, p, 0.0, 0.1);
    CHECK(r.spiked);
    CHECK(r.state.v_m == -65.0);
    CHECK(r.state.u == 8.0);
}

TEST_CASE("izhikevich regular-spiking rest is a fixed point", "[soma][izhikevich]") {
    SomaParams p;
    p.model = SomaModel::Izhikevich;
    SomaState s = resting_state(p);
    CHECK(s.v_m == Approx(-70.0));
    CHECK(s.u == Approx(-14.0));
    // Derivatives vanish at rest.
    CHECK(0.04 * s.v_m * s.v_m + 5 * s.v_m + 140 - s.u == Approx(0.0).margin(1e-9));
    const SomaState start = s;
    for (int k = 0; k < 20000; ++k) {
        auto r = step_izhikevich(s, p, 0.0, 0.1);
        REQUIRE_FALSE(r.spiked);
        s = r.state;
    }
    CHECK(s.v_m == Approx(start.v_m).margin(1e-9));
    CHECK(s.u == Approx(start.u).margin(1e-9));
}

TEST_CASE("izhikevich v=-65 is not a rest state but relaxes without spiking", "[soma][izhikevich]") {
    SomaParams p;
    p.model = SomaModel::Izhikevich;
    SomaState s = resting_state(p);
    s.v_m = -65.0;
    s.u = p.izh.b * s.v_m;
    CHECK(0.04 * 65 * 65 - 5 * 65 + 140 + 13 == Approx(-3.0));
    for (int k = 0; k < 20000; ++k) {
        auto r = step_izhikevich(s, p, 0.0, 0.1);
        REQUIRE_FALSE(r.spiked);
        s = r.state;
    }
    CHECK(s.v_m == Approx(-70.0).margin(1e-3));
}

TEST_CASE("izhikevich first spike matches a fine reference integrator", "[soma][izhikevich]") {
    SomaParams p;
    p.model = SomaModel::Izhikevich;
    const double dt = 0.1;
    const double reference = reference_first_spike(p, 10.0, dt / 100, 500.0);
    REQUIRE(reference > 0);
    SomaState s = resting_state(p);
    double first = -1;
    // Spikes are stamped with the start time of the step that detects them.
    for (int k = 0; k < 5000; ++k) {
        auto r = step_izhikevich(s, p, 10.0, dt, k * dt);
        s = r.state;
        if (r.spiked) {
            first = k * dt;
            break;
        }
    }
    CHECK(std::abs(first - reference) <= 2 * dt);
}

TEST_CASE("izhikevich rejects dt above the stability bound", "[soma][izhikevich][errors]") {
    SomaParams p;
    p.model = SomaModel::Izhikevich;
    try {
        step_izhikevich(resting_state(p), p, 0.0, 1.5);
        FAIL("expected a configuration error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::Config);
    }
}

TEST_CASE("photodetector currents", "[soma][photodetector]") {
    SomaParams p;
    CHECK(photodetector_current(5e-6, 5e-6, p) == 0.0);
    CHECK(photodetector_current(10e-6, 0.0, p) == Approx(10e-6));
    CHECK(photodetector_current(0.0, 0.0, p) == 0.0);
    p.knobs.g_na = 2.0;
    p.pd_responsivity = 0.8;
    CHECK(photodetector_current(10e-6, 2e-6, p) == Approx(2.0 * 0.8 * 8e-6));
    CHECK_THROWS_AS(photodetector_current(-1e-6, 0.0, p), Error);
}

TEST_CASE("dendrite kernels", "[soma][dendrite]") {
    DendriteKernel alpha{KernelKind::Alpha, 4.0, 0, 1, 1.0};
    const std::vector<double> none;
    CHECK(dendrite_filter(alpha, none, 12.0) == 0.0);

    const std::vector<double> single{0.0};
    CHECK(dendrite_filter(alpha, single, 4.0) == Approx(1.0));
    // tau is the maximum.
    for (double t = 0.0; t < 40.0; t += 0.01) REQUIRE(dendrite_filter(alpha, single, t) <= 1.0 + 1e-15);

    DendriteKernel lr{KernelKind::LeakyRecurrent, 5.0, 0, 1, 2.0};
    CHECK(dendrite_filter(lr, single, 5.0) == Approx(2.0 * std::exp(-1.0)));
    DendriteKernel g{KernelKind::Gaussian, 1.0, 6.0, 2.0, 1.0};
    CHECK(dendrite_filter(g, single, 6.0) == Approx(1.0));
    CHECK(dendrite_filter(g, single, 8.0) == Approx(std::exp(-0.5)));
}

TEST_CASE("dendrite filters are linear and time invariant", "[soma][dendrite][property]") {
    const std::vector<double> a{0.0, 3.5, 7.25};
    const std::vector<double> b{1.0, 2.0, 9.5};
    std::vector<double> ab = a;
    ab.insert(ab.end(), b.begin(), b.end());
    for (auto kind : {KernelKind::LeakyRecurrent, KernelKind::Alpha, KernelKind::Gaussian}) {
        DendriteKernel k{kind, 3.0, 4.0, 1.5, 0.7};
        for (double t = 0.0; t < 40.0; t += 0.37) {
            REQUIRE(dendrite_filter(k, ab, t) ==
                    Approx(dendrite_filter(k, a, t) + dendrite_filter(k, b, t)).margin(1e-14));
            std::vector<double> shifted = a;
            for (double& x : shifted) x += 2.5;
            REQUIRE(dendrite_filter(k, shifted, t + 2.5) == Approx(dendrite_filter(k, a, t)).margin(1e-14));
        }
    }
}
