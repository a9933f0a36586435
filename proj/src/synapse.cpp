#include "epicsim/synapse.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "epicsim/error.hpp"

namespace epicsim {

void DeviceModel::validate() const {
    if (levels < 2) fail(ErrorKind::Config, "device: levels must be >= 2");
    if (!(g_max > g_min)) fail(ErrorKind::Config, "device: g_max must exceed g_min");
    if (!(write_noise_rel >= 0 && write_noise_rel < 1)) fail(ErrorKind::Config, "device: write_noise_rel must be in [0, 1)");
    if (endurance == 0) fail(ErrorKind::Config, "device: endurance must be > 0");
    if (write_energy_fj < 0) fail(ErrorKind::Config, "device: write_energy must be >= 0");
}

DeviceModel default_device(DeviceKind kind) {
    DeviceModel d;
    d.kind = kind;
    switch (kind) {
    case DeviceKind::ECRAM: break;
    case DeviceKind::FeFET_HZO: d.levels = 1024; break;
    case DeviceKind::PCM_MZI: d.levels = 64; break;
    }
    return d;
}

double weight_of(const SynapseState& state, const DeviceModel& device) {
    return static_cast<double>(state.level) / static_cast<double>(device.levels - 1);
}

double conductance_of(const SynapseState& state, const DeviceModel& device) {
    return device.g_min + weight_of(state, device) * (device.g_max - device.g_min);
}

std::uint32_t level_for(double w, const DeviceModel& device) {
    const double top = static_cast<double>(device.levels - 1);
    return static_cast<std::uint32_t>(std::lround(std::clamp(w, 0.0, 1.0) * top));
}

SynapseState program_weight(const SynapseState& state, const DeviceModel& device, double dw, RngStream& rng,
                            EnergyLedger* ledger) {
    if (state.stuck) fail(ErrorKind::DeviceStuck, "program_weight: device is stuck (endurance exhausted)");
    if (dw == 0.0) return state;

    double target = weight_of(state, device) + dw;
    if (device.write_noise_rel > 0) target += rng.normal(0.0, device.write_noise_rel);

    SynapseState next = state;
    next.level = level_for(target, device);
    if (next.level != state.level) {
        ++next.write_count;
        if (ledger) ledger->charge_write(device.write_energy_fj);
        if (next.write_count >= device.endurance) next.stuck = true;
    }
    return next;
}

void XcalParams::validate() const {
    if (!(theta_d > 0 && theta_d < 1)) fail(ErrorKind::Config, "xcal: theta_d must be in (0, 1)");
    if (!(lrate > 0)) fail(ErrorKind::Config, "xcal: lrate must be > 0");
    if (!(tau_avg > 0)) fail(ErrorKind::Config, "xcal: tau_avg must be > 0");
    if (!(phase_len > 0)) fail(ErrorKind::Config, "xcal: phase_len must be > 0");
}

double xcal_dw(double xy, double theta_p, double theta_d) {
    if (xy > theta_p * theta_d) return xy - theta_p;
    return -xy * (1.0 - theta_d) / theta_d;
}

double update_activity_trace(double trace, double activity, double dt, double tau_avg) {
    return trace + (dt / tau_avg) * (activity - trace);
}

void StdpParams::validate() const {
    if (!(a_plus > 0 && a_minus > 0 && tau_plus > 0 && tau_minus > 0))
        fail(ErrorKind::Config, "stdp: amplitudes and time constants must be > 0");
}

double stdp_dw(double dt, const StdpParams& p) {
    if (dt >= 0) return p.a_plus * std::exp(-dt / p.tau_plus);
    return -p.a_minus * std::exp(dt / p.tau_minus);
}

MziPorts mzi_transmission(double phase) {
    const double c = std::cos(phase / 2.0);
    const double bar = c * c;
    return {bar, 1.0 - bar};
}

double weight_to_phase(double w) {
    if (!(w >= 0.0 && w <= 1.0)) fail(ErrorKind::Domain, "weight_to_phase: weight must be in [0, 1]");
    return 2.0 * std::asin(std::sqrt(w));
}

} // namespace epicsim
