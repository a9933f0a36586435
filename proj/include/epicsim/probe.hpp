#pragma once

#include <cstdint>
#include <limits>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "epicsim/engine.hpp"

namespace epicsim {

enum class MeasurementKind { VmTrace, SpikeRaster, WeightMatrix, Tomography, EnergyForensics, Spectrum };

std::string to_string(MeasurementKind k);
MeasurementKind measurement_kind_from(const std::string& name);

struct MeasurementSpec {
    MeasurementKind kind = MeasurementKind::VmTrace;
    // Population ids, "pop:index" neuron ids or projection ids, depending on
    // the kind. Empty means everything the kind can see.
    std::vector<std::string> targets;
    std::uint64_t sample_every = 1; // steps
    double start_ms = 0.0;
    double window_ms = std::numeric_limits<double>::infinity();

    void validate() const;
};

struct Sample {
    double t = 0.0; // ms
    std::string target;
    double value = 0.0;
    bool operator==(const Sample&) const = default;
};

struct Artifact {
    MeasurementKind kind = MeasurementKind::VmTrace;
    std::vector<Sample> samples;

    /// One JSON object per line: {"t":..,"target":..,"value":..}.
    void write_jsonl(std::ostream& os) const;
};

/// Passive observer that samples an engine at step boundaries. Attaching
/// any number of recorders never changes the simulation.
class Recorder : public Observer {
public:
    Recorder(const Engine& engine, MeasurementSpec spec);

    void on_spike(const Engine& e, const SpikeRecord& s) override;
    void on_step(const Engine& e) override;

    const MeasurementSpec& spec() const { return spec_; }
    /// Tomography samples are taken from the engine's attribution log here.
    Artifact artifact(const Engine& e) const;

    /// Per-step population firing rate (spikes per neuron per second) for
    /// Spectrum recorders.
    const std::vector<double>& rate_signal() const { return rate_; }

private:
    bool in_window(double t) const;

    MeasurementSpec spec_;
    std::vector<std::uint32_t> neurons_;
    std::vector<std::string> neuron_names_;
    std::vector<std::uint32_t> projections_;
    std::vector<std::uint8_t> pop_selected_;
    double neuron_total_ = 0.0;
    std::vector<Sample> samples_;
    std::vector<double> rate_;
    std::uint64_t spikes_this_step_ = 0;
};

/// Convenience wrapper around Engine::submit.
inline Ack apply_intervention(Engine& engine, const Intervention& iv) { return engine.submit(iv); }

struct BandPowers {
    double theta = 0.0; // 4-8 Hz
    double alpha = 0.0; // 8-12 Hz
    double beta = 0.0;  // 12-30 Hz
    double gamma = 0.0; // 30-80 Hz
};

struct BandEdges {
    double theta_lo = 4, theta_hi = 8;
    double alpha_lo = 8, alpha_hi = 12;
    double beta_lo = 12, beta_hi = 30;
    double gamma_lo = 30, gamma_hi = 80;
};

struct Spectrum {
    std::vector<double> freqs_hz;
    std::vector<double> psd; // one-sided, signal units^2 per Hz
    BandPowers bands;
    double dominant_hz = 0.0;
    double resolution_hz = 0.0;
    double signal_power = 0.0; // mean square of the raw signal
};

inline constexpr double kMinSpectrumMs = 2000.0;

/// Mean-removed single-window periodogram of a signal sampled every dt ms.
/// Needs at least 2 s of signal at dt <= 1 ms.
Spectrum spectrum(std::span<const double> signal, double dt_ms, const BandEdges& edges = {});

/// Spikes per neuron per second for one population, one value per step.
std::vector<double> population_rate(const std::vector<SpikeRecord>& raster, const Network& net, std::uint32_t pop,
                                    std::uint64_t steps, double dt_ms);

} // namespace epicsim
