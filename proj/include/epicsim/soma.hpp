#pragma once

#include <optional>
#include <span>

namespace epicsim {

enum class SomaModel { LIF, Izhikevich };

// Ion-channel gains exposed as manipulation knobs:
// g_na scales input current, g_k scales the leak, g_ca scales threshold adaptation.
struct ChannelKnobs {
    double g_na = 1.0;
    double g_k = 1.0;
    double g_ca = 1.0;
};

struct IzhikevichParams {
    // Regular-spiking defaults.
    double a = 0.02;
    double b = 0.2;
    double c = -65.0;
    double d = 8.0;
};

struct SomaParams {
    SomaModel model = SomaModel::LIF;
    double tau_m = 10.0;   // ms
    double v_rest = 0.0;
    double v_reset = 0.0;
    double r_m = 1.0;
    double theta0 = 1.0;   // base threshold
    double theta_inc = 0.0;
    double tau_theta = 100.0; // ms
    double t_ref = 2.0;    // ms
    IzhikevichParams izh;
    double pd_responsivity = 1.0; // A/W
    ChannelKnobs knobs;

    /// Throws Config on a violated invariant.
    void validate() const;
};

inline constexpr double kIzhikevichPeak = 30.0;
inline constexpr double kIzhikevichMaxDt = 1.0; // ms

struct SomaState {
    double v_m = 0.0;
    double theta = 1.0;
    double u = 0.0;
    double ref_remaining = 0.0;
    std::optional<double> last_spike;

    bool operator==(const SomaState&) const = default;
};

/// Resting state for the given parameters (LIF: v_rest; Izhikevich: the stable
/// fixed point of the regular-spiking equations when one exists, else c).
SomaState resting_state(const SomaParams& params);

struct SomaStep {
    SomaState state;
    bool spiked = false;
};

/// One forward-Euler step of tau_m dV/dt = -g_k (V - v_rest) + r_m g_na i_in.
/// Spike iff V >= theta after integration; the threshold relaxes geometrically
/// toward theta0 and jumps by g_ca * theta_inc on a spike.
/// `t` is the clock at the start of the step; a detected spike is stamped with it.
SomaStep step_lif(const SomaState& state, const SomaParams& params, double i_in, double dt, double t = 0.0);

/// v' = 0.04 v^2 + 5 v + 140 - u + g_na I, u' = g_k a (b v - u); spike at
/// v >= theta (30 from resting_state), then v <- c, u <- u + g_ca d.
/// A state entering the step already at or above the peak is reset without
/// integrating.
SomaStep step_izhikevich(const SomaState& state, const SomaParams& params, double i_in, double dt, double t = 0.0);

/// Dispatches on params.model.
SomaStep step_soma(const SomaState& state, const SomaParams& params, double i_in, double dt, double t = 0.0);

/// Balanced-detector current before the g_na gain: R (p_exc - p_inh).
double detector_response(double p_exc, double p_inh, double responsivity);

/// i = g_na * R * (p_exc - p_inh). Negative powers are a Domain error.
double photodetector_current(double p_exc, double p_inh, const SomaParams& params);

enum class KernelKind { LeakyRecurrent, Alpha, Gaussian };

struct DendriteKernel {
    KernelKind kind = KernelKind::LeakyRecurrent;
    double tau = 5.0;   // ms
    double mu = 5.0;    // ms, Gaussian only
    double sigma = 2.0; // ms, Gaussian only
    double gain = 1.0;

    void validate() const;
    /// Impulse response at lag s (zero for s < 0).
    double response(double s) const;
    /// Lag beyond which the response is negligible (< 1e-12 relative).
    double support() const;
};

/// Sum over spikes of gain * K(t - t_s). Spikes after t contribute nothing.
double dendrite_filter(const DendriteKernel& kernel, std::span<const double> spike_times, double t);

} // namespace epicsim
