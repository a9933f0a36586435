#include "epicsim/ledger.hpp"

#include <algorithm>
#include <tuple>

#include <json.hpp>

#include "epicsim/error.hpp"

namespace epicsim {

std::string_view to_string(EnergyCategory c) {
    switch (c) {
    case EnergyCategory::SomaSpike: return "soma_spike";
    case EnergyCategory::OpticalFanout: return "optical_fanout";
    case EnergyCategory::SynapseEvent: return "synapse_event";
    case EnergyCategory::WeightWrite: return "weight_write";
    case EnergyCategory::LaserStatic: return "laser_static";
    }
    return "unknown";
}

void EnergyParams::validate() const {
    if (e_spike_base_fj < 0 || e_per_optical_branch_fj < 0 || e_synapse_event_fj < 0 || laser_static_power_w < 0)
        fail(ErrorKind::Config, "energy parameters must be >= 0");
}

void EnergyLedger::charge(EnergyCategory c, double fj, std::uint64_t count) {
    if (fj < 0) fail(ErrorKind::Domain, "energy charge must be >= 0");
    tallies_[index(c)] += fj;
    counts_[index(c)] += count;
}

void EnergyLedger::charge_spike(std::uint32_t optical_fanout, const EnergyParams& params) {
    charge(EnergyCategory::SomaSpike, params.e_spike_base_fj);
    if (optical_fanout > 0)
        charge(EnergyCategory::OpticalFanout, optical_fanout * params.e_per_optical_branch_fj, optical_fanout);
}

void EnergyLedger::charge_write(double write_energy_fj) { charge(EnergyCategory::WeightWrite, write_energy_fj); }

double EnergyLedger::total_fj() const {
    double sum = 0.0;
    for (double t : tallies_) sum += t;
    return sum;
}

EnergyLedger& EnergyLedger::operator+=(const EnergyLedger& other) {
    for (std::size_t i = 0; i < kEnergyCategoryCount; ++i) {
        tallies_[i] += other.tallies_[i];
        counts_[i] += other.counts_[i];
    }
    return *this;
}

void EnergyLedger::restore(const std::array<double, kEnergyCategoryCount>& tallies,
                           const std::array<std::uint64_t, kEnergyCategoryCount>& counts) {
    tallies_ = tallies;
    counts_ = counts;
}

EfficiencyReport report(const EnergyLedger& ledger, const RunStats& stats, std::string label) {
    EfficiencyReport r;
    r.label = std::move(label);
    r.stats = stats;
    r.total_joules = ledger.total_joules();
    for (auto c : kEnergyCategories)
        r.category_joules[static_cast<std::size_t>(c)] = ledger.tally_fj(c) * kJoulesPerFemtojoule;
    if (stats.spikes > 0) r.joules_per_spike = r.total_joules / static_cast<double>(stats.spikes);
    if (stats.synaptic_events > 0)
        r.joules_per_synaptic_event = r.total_joules / static_cast<double>(stats.synaptic_events);
    if (stats.trials > 0) r.joules_per_trial = r.total_joules / static_cast<double>(stats.trials);
    return r;
}

std::string EfficiencyReport::to_text() const {
    nlohmann::ordered_json j;
    j["label"] = label;
    j["total_joules"] = total_joules;
    nlohmann::ordered_json cats;
    for (auto c : kEnergyCategories) cats[std::string(to_string(c))] = category_joules[static_cast<std::size_t>(c)];
    j["categories"] = cats;
    j["spikes"] = stats.spikes;
    j["synaptic_events"] = stats.synaptic_events;
    j["trials"] = stats.trials;
    j["duration_ms"] = stats.duration_ms;
    auto opt = [](const std::optional<double>& v) { return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(); };
    j["joules_per_spike"] = opt(joules_per_spike);
    j["joules_per_synaptic_event"] = opt(joules_per_synaptic_event);
    j["joules_per_trial"] = opt(joules_per_trial);
    j["accuracy"] = opt(accuracy);
    return j.dump(2) + "\n";
}

void rank_reports(std::vector<EfficiencyReport>& reports) {
    std::stable_sort(reports.begin(), reports.end(), [](const EfficiencyReport& a, const EfficiencyReport& b) {
        const double acc_a = a.accuracy.value_or(-1.0);
        const double acc_b = b.accuracy.value_or(-1.0);
        if (acc_a != acc_b) return acc_a > acc_b;
        const bool has_a = a.joules_per_trial.has_value();
        const bool has_b = b.joules_per_trial.has_value();
        if (has_a != has_b) return has_a;
        if (has_a && *a.joules_per_trial != *b.joules_per_trial) return *a.joules_per_trial < *b.joules_per_trial;
        return a.label < b.label;
    });
}

} // namespace epicsim
