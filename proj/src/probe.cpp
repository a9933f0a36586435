#include "epicsim/probe.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <iomanip>
#include <mutex>
#include <sstream>

#include <fftw3.h>
#include <json.hpp>

#include "epicsim/error.hpp"

namespace epicsim {

namespace {

constexpr std::pair<MeasurementKind, const char*> kKinds[] = {
    {MeasurementKind::VmTrace, "vm_trace"},         {MeasurementKind::SpikeRaster, "spike_raster"},
    {MeasurementKind::WeightMatrix, "weight_matrix"}, {MeasurementKind::Tomography, "tomography"},
    {MeasurementKind::EnergyForensics, "energy"},    {MeasurementKind::Spectrum, "spectrum"}};

// FFTW's planner is not re-entrant.
std::mutex& planner_mutex() {
    static std::mutex m;
    return m;
}

std::string fmt_ms(double t) {
    std::ostringstream os;
    os << std::setprecision(12) << t;
    return os.str();
}

std::string synapse_name(const Projection& p, std::size_t k) {
    return p.id + "[" + std::to_string(k / p.n_post) + "," + std::to_string(k % p.n_post) + "]";
}

} // namespace

std::string to_string(MeasurementKind k) {
    for (const auto& [kind, name] : kKinds)
        if (kind == k) return name;
    return "unknown";
}

MeasurementKind measurement_kind_from(const std::string& name) {
    std::string valid;
    for (const auto& [kind, n] : kKinds) {
        if (name == n) return kind;
        valid += (valid.empty() ? "" : ", ") + std::string(n);
    }
    fail(ErrorKind::Validation, "measurement kind: unknown value '" + name + "' (valid: " + valid + ")");
}

void MeasurementSpec::validate() const {
    if (sample_every < 1) fail(ErrorKind::Validation, "measurement: sample_every must be >= 1");
    if (!(start_ms >= 0)) fail(ErrorKind::Validation, "measurement: start_ms must be >= 0");
    if (!(window_ms > 0)) fail(ErrorKind::Validation, "measurement: window_ms must be > 0");
}

void Artifact::write_jsonl(std::ostream& os) const {
    for (const auto& s : samples) os << nlohmann::json{{"t", s.t}, {"target", s.target}, {"value", s.value}}.dump() << '\n';
}

Recorder::Recorder(const Engine& engine, MeasurementSpec spec) : spec_(std::move(spec)) {
    spec_.validate();
    const Network& net = engine.network();
    pop_selected_.assign(net.populations.size(), spec_.targets.empty());

    const bool neural = spec_.kind == MeasurementKind::VmTrace || spec_.kind == MeasurementKind::SpikeRaster ||
                        spec_.kind == MeasurementKind::Spectrum;
    if (neural) {
        const auto add_pop = [&](std::uint32_t p) {
            pop_selected_[p] = 1;
            const auto& pop = net.populations[p];
            for (std::uint32_t i = 0; i < pop.size; ++i) {
                neurons_.push_back(pop.offset + i);
                neuron_names_.push_back(pop.id + ":" + std::to_string(i));
            }
        };
        if (spec_.targets.empty()) {
            for (std::uint32_t p = 0; p < net.populations.size(); ++p) add_pop(p);
        }
        for (const auto& t : spec_.targets) {
            const auto colon = t.rfind(':');
            if (colon == std::string::npos) {
                auto p = net.find_population(t);
                if (!p) fail(ErrorKind::Validation, "measurement target: unknown population '" + t + "'");
                add_pop(*p);
                continue;
            }
            if (spec_.kind != MeasurementKind::VmTrace)
                fail(ErrorKind::Validation, "measurement target '" + t + "': " + to_string(spec_.kind) + " takes populations");
            std::uint32_t idx = 0;
            try {
                idx = static_cast<std::uint32_t>(std::stoul(t.substr(colon + 1)));
            } catch (const std::exception&) {
                fail(ErrorKind::Validation, "measurement target '" + t + "': bad neuron index");
            }
            const NeuronRef ref = engine.resolve(t.substr(0, colon), idx);
            neurons_.push_back(engine.global_index(ref));
            neuron_names_.push_back(t);
        }
        for (std::uint32_t p = 0; p < net.populations.size(); ++p)
            if (pop_selected_[p]) neuron_total_ += net.populations[p].size;
    } else if (spec_.kind == MeasurementKind::WeightMatrix) {
        if (spec_.targets.empty())
            for (std::uint32_t p = 0; p < net.projections.size(); ++p) projections_.push_back(p);
        for (const auto& t : spec_.targets) {
            auto p = net.find_projection(t);
            if (!p) fail(ErrorKind::Validation, "measurement target: unknown projection '" + t + "'");
            projections_.push_back(*p);
        }
    }
}

bool Recorder::in_window(double t) const {
    return t >= spec_.start_ms - 1e-9 && t < spec_.start_ms + spec_.window_ms - 1e-9;
}

void Recorder::on_spike(const Engine& e, const SpikeRecord& s) {
    if (!pop_selected_[s.pop]) return;
    if (spec_.kind == MeasurementKind::Spectrum) {
        ++spikes_this_step_;
        return;
    }
    if (spec_.kind != MeasurementKind::SpikeRaster) return;
    const double t = static_cast<double>(s.step) * e.dt();
    if (!in_window(t)) return;
    samples_.push_back({t, e.network().populations[s.pop].id + ":" + std::to_string(s.index), 1.0});
}

void Recorder::on_step(const Engine& e) {
    const double t_step = static_cast<double>(e.step_index() - 1) * e.dt();
    if (spec_.kind == MeasurementKind::Spectrum) {
        if (in_window(t_step)) {
            const double n = std::max(1.0, neuron_total_);
            rate_.push_back(static_cast<double>(spikes_this_step_) / n * 1000.0 / e.dt());
        }
        spikes_this_step_ = 0;
        return;
    }
    if (e.step_index() % spec_.sample_every != 0) return;
    const double t = e.now();
    if (!in_window(t)) return;

    switch (spec_.kind) {
    case MeasurementKind::VmTrace:
        for (std::size_t i = 0; i < neurons_.size(); ++i) samples_.push_back({t, neuron_names_[i], e.soma(neurons_[i]).v_m});
        break;
    case MeasurementKind::WeightMatrix:
        for (auto pi : projections_) {
            const auto& p = e.network().projections[pi];
            for (std::size_t k = 0; k < p.synapses.size(); ++k)
                if (p.active(k)) samples_.push_back({t, synapse_name(p, k), weight_of(p.synapses[k], p.device)});
        }
        break;
    case MeasurementKind::EnergyForensics:
        for (auto c : kEnergyCategories) samples_.push_back({t, std::string(to_string(c)), e.ledger().tally_fj(c)});
        break;
    default: break;
    }
}

Artifact Recorder::artifact(const Engine& e) const {
    Artifact a{spec_.kind, samples_};
    if (spec_.kind == MeasurementKind::Spectrum) {
        for (std::size_t k = 0; k < rate_.size(); ++k)
            a.samples.push_back({spec_.start_ms + static_cast<double>(k) * e.dt(), "rate", rate_[k]});
    } else if (spec_.kind == MeasurementKind::Tomography) {
        const Network& net = e.network();
        for (const auto& entry : e.tomography()) {
            const double t = static_cast<double>(entry.arrival_step) * e.dt();
            if (!in_window(t)) continue;
            std::string where = net.populations[entry.source.pop].id + ":" + std::to_string(entry.source.index);
            if (entry.projection >= 0) {
                const auto& p = net.projections[static_cast<std::size_t>(entry.projection)];
                where = p.id + "[" + std::to_string(entry.source.index) + "," + std::to_string(entry.target) + "]";
            }
            a.samples.push_back({t,
                                 std::string(to_string(entry.category)) + "/" + where + "/emit=" +
                                     fmt_ms(static_cast<double>(entry.emit_step) * e.dt()),
                                 entry.energy_fj});
        }
    }
    return a;
}

Spectrum spectrum(std::span<const double> signal, double dt_ms, const BandEdges& edges) {
    if (!(dt_ms > 0) || dt_ms > 1.0) fail(ErrorKind::Validation, "spectrum: dt must be in (0, 1] ms");
    const std::size_t n = signal.size();
    if (static_cast<double>(n) * dt_ms < kMinSpectrumMs - 1e-9)
        fail(ErrorKind::Validation, "spectrum: signal covers " + std::to_string(static_cast<double>(n) * dt_ms) +
                                        " ms, minimum length is " + std::to_string(kMinSpectrumMs) + " ms");
    for (double x : signal)
        if (!std::isfinite(x)) fail(ErrorKind::NumericInput, "spectrum: non-finite sample");

    Spectrum out;
    double mean = 0.0, power = 0.0;
    for (double x : signal) {
        mean += x;
        power += x * x;
    }
    mean /= static_cast<double>(n);
    out.signal_power = power / static_cast<double>(n);

    std::vector<double> in(n);
    for (std::size_t i = 0; i < n; ++i) in[i] = signal[i] - mean;
    std::vector<std::complex<double>> freq(n / 2 + 1);
    fftw_plan plan;
    {
        std::lock_guard lock(planner_mutex());
        plan = fftw_plan_dft_r2c_1d(static_cast<int>(n), in.data(), reinterpret_cast<fftw_complex*>(freq.data()),
                                    FFTW_ESTIMATE);
    }
    fftw_execute(plan);
    {
        std::lock_guard lock(planner_mutex());
        fftw_destroy_plan(plan);
    }

    const double dt_s = dt_ms * 1e-3;
    const double fs = 1.0 / dt_s;
    out.resolution_hz = fs / static_cast<double>(n);
    out.freqs_hz.resize(freq.size());
    out.psd.resize(freq.size());
    for (std::size_t k = 0; k < freq.size(); ++k) {
        const bool edge = k == 0 || (n % 2 == 0 && k == n / 2);
        out.freqs_hz[k] = static_cast<double>(k) * out.resolution_hz;
        out.psd[k] = (edge ? 1.0 : 2.0) * std::norm(freq[k]) * dt_s / static_cast<double>(n);
    }

    const auto band = [&](double lo, double hi) {
        double s = 0.0;
        for (std::size_t k = 0; k < out.psd.size(); ++k)
            if (out.freqs_hz[k] >= lo && out.freqs_hz[k] < hi) s += out.psd[k] * out.resolution_hz;
        return s;
    };
    out.bands = {band(edges.theta_lo, edges.theta_hi), band(edges.alpha_lo, edges.alpha_hi),
                 band(edges.beta_lo, edges.beta_hi), band(edges.gamma_lo, edges.gamma_hi)};

    std::size_t best = 1;
    for (std::size_t k = 1; k < out.psd.size(); ++k)
        if (out.psd[k] > out.psd[best]) best = k;
    out.dominant_hz = out.psd.size() > 1 ? out.freqs_hz[best] : 0.0;
    return out;
}

std::vector<double> population_rate(const std::vector<SpikeRecord>& raster, const Network& net, std::uint32_t pop,
                                    std::uint64_t steps, double dt_ms) {
    std::vector<double> rate(steps, 0.0);
    const double scale = 1000.0 / dt_ms / std::max<double>(1.0, net.populations.at(pop).size);
    for (const auto& r : raster)
        if (r.pop == pop && r.step < steps) rate[r.step] += scale;
    return rate;
}

} // namespace epicsim
