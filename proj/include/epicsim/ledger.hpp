#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace epicsim {

// Energies are tallied in femtojoules. The calibration anchors (1 fJ and
// 10 fJ per spike) are then exact in binary floating point.
inline constexpr double kJoulesPerFemtojoule = 1e-15;

enum class EnergyCategory : std::uint8_t { SomaSpike, OpticalFanout, SynapseEvent, WeightWrite, LaserStatic };
inline constexpr std::size_t kEnergyCategoryCount = 5;
inline constexpr std::array<EnergyCategory, kEnergyCategoryCount> kEnergyCategories{
    EnergyCategory::SomaSpike, EnergyCategory::OpticalFanout, EnergyCategory::SynapseEvent,
    EnergyCategory::WeightWrite, EnergyCategory::LaserStatic};

std::string_view to_string(EnergyCategory c);

struct EnergyParams {
    double e_spike_base_fj = 1.0;
    // (10 fJ - 1 fJ) / 80 branches: the two published anchor points.
    double e_per_optical_branch_fj = 0.1125;
    double e_synapse_event_fj = 0.01;
    double laser_static_power_w = 0.0;

    void validate() const;
};

class EnergyLedger {
public:
    void charge(EnergyCategory c, double fj, std::uint64_t count = 1);

    /// Adds e_spike_base to soma_spike and fanout * e_per_optical_branch to optical_fanout.
    void charge_spike(std::uint32_t optical_fanout, const EnergyParams& params);
    void charge_write(double write_energy_fj);

    double tally_fj(EnergyCategory c) const { return tallies_[index(c)]; }
    std::uint64_t count(EnergyCategory c) const { return counts_[index(c)]; }
    /// Sum over categories in canonical order.
    double total_fj() const;
    double total_joules() const { return total_fj() * kJoulesPerFemtojoule; }

    EnergyLedger& operator+=(const EnergyLedger& other);
    bool operator==(const EnergyLedger&) const = default;

    const std::array<double, kEnergyCategoryCount>& tallies() const { return tallies_; }
    const std::array<std::uint64_t, kEnergyCategoryCount>& counts() const { return counts_; }
    void restore(const std::array<double, kEnergyCategoryCount>& tallies,
                 const std::array<std::uint64_t, kEnergyCategoryCount>& counts);

private:
    static std::size_t index(EnergyCategory c) { return static_cast<std::size_t>(c); }
    std::array<double, kEnergyCategoryCount> tallies_{};
    std::array<std::uint64_t, kEnergyCategoryCount> counts_{};
};

struct RunStats {
    std::uint64_t spikes = 0;
    std::uint64_t synaptic_events = 0;
    std::uint64_t trials = 0;
    double duration_ms = 0.0;
};

struct EfficiencyReport {
    std::string label;
    double total_joules = 0.0;
    std::array<double, kEnergyCategoryCount> category_joules{};
    RunStats stats;
    // Absent when the denominator is zero.
    std::optional<double> joules_per_spike;
    std::optional<double> joules_per_synaptic_event;
    std::optional<double> joules_per_trial;
    std::optional<double> accuracy;

    /// Canonical, diff-friendly text rendering.
    std::string to_text() const;
};

EfficiencyReport report(const EnergyLedger& ledger, const RunStats& stats, std::string label = {});

/// Orders reports for topology comparison: higher accuracy first, then lower
/// J/trial, then label. Reports without J/trial sort last within an accuracy.
void rank_reports(std::vector<EfficiencyReport>& reports);

} // namespace epicsim
