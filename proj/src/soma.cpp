#include "epicsim/soma.hpp"

#include <algorithm>
#include <cmath>

#include "epicsim/error.hpp"

namespace epicsim {

void SomaParams::validate() const {
    if (!(tau_m > 0)) fail(ErrorKind::Config, "soma: tau_m must be > 0");
    if (!(tau_theta > 0)) fail(ErrorKind::Config, "soma: tau_theta must be > 0");
    if (!(t_ref >= 0)) fail(ErrorKind::Config, "soma: t_ref must be >= 0");
    if (model == SomaModel::LIF && !(theta0 > v_reset)) fail(ErrorKind::Config, "soma: theta0 must exceed v_reset");
    if (knobs.g_na < 0 || knobs.g_k < 0 || knobs.g_ca < 0) fail(ErrorKind::Config, "soma: knob gains must be >= 0");
}

SomaState resting_state(const SomaParams& params) {
    SomaState s;
    s.theta = params.theta0;
    if (params.model == SomaModel::LIF) {
        s.v_m = params.v_rest;
        return s;
    }
    // Fixed points of 0.04 v^2 + (5 - b) v + 140 = 0; the lower root is stable.
    const double b = params.izh.b;
    const double disc = (5.0 - b) * (5.0 - b) - 4.0 * 0.04 * 140.0;
    s.v_m = disc >= 0 ? (-(5.0 - b) - std::sqrt(disc)) / (2.0 * 0.04) : params.izh.c;
    s.u = b * s.v_m;
    s.theta = kIzhikevichPeak;
    return s;
}

SomaStep step_lif(const SomaState& state, const SomaParams& params, double i_in, double dt, double t) {
    if (!std::isfinite(i_in)) fail(ErrorKind::NumericInput, "step_lif: non-finite input current");
    if (!(dt > 0)) fail(ErrorKind::Config, "step_lif: dt must be > 0");

    SomaStep out{state, false};
    SomaState& s = out.state;
    const auto& k = params.knobs;

    if (s.ref_remaining > 0) {
        s.v_m = params.v_reset;
        s.ref_remaining = std::max(0.0, s.ref_remaining - dt);
    } else {
        const double dv = -k.g_k * (s.v_m - params.v_rest) + params.r_m * k.g_na * i_in;
        s.v_m += dt / params.tau_m * dv;
        if (s.v_m >= s.theta) {
            out.spiked = true;
            s.v_m = params.v_reset;
            s.ref_remaining = params.t_ref;
            s.last_spike = t;
        }
    }

    // Floating threshold: geometric relaxation toward theta0, jump on spike.
    if (std::isfinite(s.theta)) {
        s.theta = params.theta0 + (s.theta - params.theta0) * std::exp(-dt / params.tau_theta);
        if (s.theta < params.theta0) s.theta = params.theta0;
        if (out.spiked) s.theta += k.g_ca * params.theta_inc;
    }
    return out;
}

SomaStep step_izhikevich(const SomaState& state, const SomaParams& params, double i_in, double dt, double t) {
    if (!std::isfinite(i_in)) fail(ErrorKind::NumericInput, "step_izhikevich: non-finite input current");
    if (!(dt > 0)) fail(ErrorKind::Config, "step_izhikevich: dt must be > 0");
    if (dt > kIzhikevichMaxDt) fail(ErrorKind::Config, "step_izhikevich: dt above the 1 ms stability bound");

    SomaStep out{state, false};
    SomaState& s = out.state;
    const auto& p = params.izh;
    // theta doubles as the spike peak (30 from resting_state); a clamped
    // threshold therefore applies to both models.
    const double peak = s.theta;

    auto reset = [&] {
        out.spiked = true;
        s.v_m = p.c;
        s.u += params.knobs.g_ca * p.d;
        s.last_spike = t;
    };

    if (s.v_m >= peak) {
        reset();
        return out;
    }
    const double v = s.v_m;
    const double dv = 0.04 * v * v + 5.0 * v + 140.0 - s.u + params.knobs.g_na * i_in;
    const double du = p.a * (p.b * v - s.u);
    s.v_m = v + dt * dv;
    s.u += dt * du * params.knobs.g_k;
    if (s.v_m >= peak) reset();
    return out;
}

SomaStep step_soma(const SomaState& state, const SomaParams& params, double i_in, double dt, double t) {
    return params.model == SomaModel::LIF ? step_lif(state, params, i_in, dt, t)
                                          : step_izhikevich(state, params, i_in, dt, t);
}

double detector_response(double p_exc, double p_inh, double responsivity) {
    if (p_exc < 0 || p_inh < 0) fail(ErrorKind::Domain, "photodetector: optical power must be >= 0");
    return responsivity * (p_exc - p_inh);
}

double photodetector_current(double p_exc, double p_inh, const SomaParams& params) {
    return params.knobs.g_na * detector_response(p_exc, p_inh, params.pd_responsivity);
}

void DendriteKernel::validate() const {
    if (!(tau > 0)) fail(ErrorKind::Config, "dendrite kernel: tau must be > 0");
    if (kind == KernelKind::Gaussian && !(sigma > 0)) fail(ErrorKind::Config, "dendrite kernel: sigma must be > 0");
}

double DendriteKernel::response(double s) const {
    if (s < 0) return 0.0;
    switch (kind) {
    case KernelKind::LeakyRecurrent: return gain * std::exp(-s / tau);
    case KernelKind::Alpha: return gain * (s / tau) * std::exp(1.0 - s / tau);
    case KernelKind::Gaussian: {
        const double z = (s - mu) / sigma;
        return gain * std::exp(-0.5 * z * z);
    }
    }
    return 0.0;
}

double DendriteKernel::support() const {
    switch (kind) {
    case KernelKind::LeakyRecurrent: return 28.0 * tau;
    case KernelKind::Alpha: return 34.0 * tau;
    case KernelKind::Gaussian: return mu + 7.5 * sigma;
    }
    return 0.0;
}

double dendrite_filter(const DendriteKernel& kernel, std::span<const double> spike_times, double t) {
    double sum = 0.0;
    for (double ts : spike_times) sum += kernel.response(t - ts);
    return sum;
}

} // namespace epicsim
