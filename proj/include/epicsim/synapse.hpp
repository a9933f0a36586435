#pragma once

#include <cstdint>
#include <string_view>
#include <utility>

#include "epicsim/ledger.hpp"
#include "epicsim/rng.hpp"

namespace epicsim {

enum class DeviceKind { ECRAM, FeFET_HZO, PCM_MZI };

struct DeviceModel {
    DeviceKind kind = DeviceKind::ECRAM;
    std::uint32_t levels = 64;
    double g_min = 0.0;
    double g_max = 1.0;
    double write_noise_rel = 0.01; // std dev as a fraction of full range (SNR ~100)
    double write_time_ns = 20.0;
    double write_energy_fj = 0.05; // 50 aJ for a 1 um^2 device
    std::uint64_t endurance = 1'000'000'000ULL;
    double voltage = 1.0;

    void validate() const;
};

/// Defaults per device class: ECRAM 64 levels, FeFET-HZO 1024 levels, PCM-MZI 64 levels.
DeviceModel default_device(DeviceKind kind);

struct SynapseState {
    std::uint32_t level = 0;
    std::uint64_t write_count = 0;
    bool stuck = false;

    bool operator==(const SynapseState&) const = default;
};

/// w = level / (levels - 1).
double weight_of(const SynapseState& state, const DeviceModel& device);
/// g = g_min + w (g_max - g_min).
double conductance_of(const SynapseState& state, const DeviceModel& device);
/// Nearest level for a weight in [0, 1].
std::uint32_t level_for(double w, const DeviceModel& device);

/// Programs w + dw. Gaussian write noise is added to the analog target before
/// clamping to [0, 1] and latching the nearest level. A zero dw issues no
/// pulse. write_count advances only when the level changes; reaching the
/// endurance marks the device stuck. Each level-changing write is charged to
/// `ledger` when given. Programming a stuck device throws DeviceStuck.
SynapseState program_weight(const SynapseState& state, const DeviceModel& device, double dw, RngStream& rng,
                            EnergyLedger* ledger = nullptr);

struct XcalParams {
    double theta_d = 0.1;
    double lrate = 0.2;
    double tau_avg = 10.0;  // ms
    double phase_len = 50.0; // ms

    void validate() const;
};

/// The XCAL piecewise-linear function:
///   xy - theta_p                   if xy > theta_p * theta_d
///   -xy (1 - theta_d) / theta_d    otherwise
double xcal_dw(double xy, double theta_p, double theta_d);

/// trace + (dt / tau_avg) (activity - trace).
double update_activity_trace(double trace, double activity, double dt, double tau_avg);

struct StdpParams {
    double a_plus = 0.01;
    double a_minus = 0.012;
    double tau_plus = 20.0;  // ms
    double tau_minus = 20.0; // ms

    void validate() const;
};

/// Pair-based STDP window. dt = t_post - t_pre; dt == 0 potentiates.
double stdp_dw(double dt_post_minus_pre, const StdpParams& params);

struct MziPorts {
    double bar = 1.0;
    double cross = 0.0;
};

/// Ideal lossless 2x2 MZI: cross = sin^2(phi/2), bar = cos^2(phi/2).
MziPorts mzi_transmission(double phase);

/// phi = 2 asin(sqrt(w)) so that the cross port carries w. Domain error outside [0, 1].
double weight_to_phase(double w);

} // namespace epicsim
