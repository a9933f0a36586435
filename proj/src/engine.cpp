#include "epicsim/engine.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <sstream>

#include "epicsim/error.hpp"
#include "epicsim/hash.hpp"
#include "json_util.hpp"

namespace epicsim {

using nlohmann::json;

namespace {

constexpr std::uint64_t kForever = std::numeric_limits<std::uint64_t>::max();
constexpr int kQuietWindow = 10;
constexpr double kTimeSlack = 1e-9;

std::uint64_t ms_to_steps(double ms, double dt) {
    if (std::isinf(ms)) return kForever;
    return static_cast<std::uint64_t>(std::llround(ms / dt));
}

} // namespace

// ---- stimulus documents ----------------------------------------------------

Stimulus parse_stimulus(const json& doc) {
    const json* list = &doc;
    std::string base = "stimulus";
    if (doc.is_object()) {
        for (const auto& [key, _] : doc.items())
            if (key != "entries") fail(ErrorKind::Validation, "stimulus." + key + ": unknown field");
        if (!doc.contains("entries")) return {};
        list = &doc.at("entries");
        base = "stimulus.entries";
    } else if (doc.is_null()) {
        return {};
    }
    if (!list->is_array()) fail(ErrorKind::Validation, base + ": expected an array");

    Stimulus s;
    for (std::size_t i = 0; i < list->size(); ++i) {
        const json& e = (*list)[i];
        const std::string path = base + "[" + std::to_string(i) + "]";
        if (!e.is_object()) fail(ErrorKind::Validation, path + ": expected an object");
        StimulusEntry out;
        for (const auto& [key, v] : e.items()) {
            const std::string fp = path + "." + key;
            if (key == "kind") {
                const std::string k = v.is_string() ? v.get<std::string>() : "";
                if (k == "current") out.kind = StimulusEntry::Kind::Current;
                else if (k == "clamp") out.kind = StimulusEntry::Kind::Clamp;
                else fail(ErrorKind::Validation, fp + ": unknown value '" + v.dump() + "' (valid: current, clamp)");
            } else if (key == "population") {
                if (!v.is_string()) fail(ErrorKind::Validation, fp + ": expected a string");
                out.population = v.get<std::string>();
            } else if (key == "index") {
                if (!v.is_number_integer() || v.get<std::int64_t>() < 0)
                    fail(ErrorKind::Validation, fp + ": expected a non-negative integer");
                out.index = v.get<std::uint32_t>();
            } else if (key == "value") {
                out.value = detail::decode_double(v, fp);
            } else if (key == "start_ms") {
                out.start_ms = detail::decode_double(v, fp);
            } else if (key == "end_ms") {
                out.end_ms = v.is_null() ? std::numeric_limits<double>::infinity() : detail::decode_double(v, fp);
            } else {
                fail(ErrorKind::Validation, fp + ": unknown field");
            }
        }
        if (out.population.empty()) fail(ErrorKind::Validation, path + ".population: missing required field");
        if (!e.contains("value")) fail(ErrorKind::Validation, path + ".value: missing required field");
        s.entries.push_back(std::move(out));
    }
    return s;
}

json stimulus_to_json(const Stimulus& s) {
    json entries = json::array();
    for (const auto& e : s.entries) {
        json j{{"kind", e.kind == StimulusEntry::Kind::Clamp ? "clamp" : "current"},
               {"population", e.population},
               {"value", detail::encode_double(e.value)},
               {"start_ms", detail::encode_double(e.start_ms)},
               {"end_ms", detail::encode_double(e.end_ms)}};
        if (e.index) j["index"] = *e.index;
        entries.push_back(std::move(j));
    }
    return json{{"entries", std::move(entries)}};
}

// ---- raster helpers --------------------------------------------------------

std::string raster_text(const std::vector<SpikeRecord>& raster, const Network& net, double dt) {
    std::ostringstream os;
    os << std::setprecision(12);
    for (const auto& r : raster)
        os << static_cast<double>(r.step) * dt << ' ' << net.populations[r.pop].id << ' ' << r.index << '\n';
    return os.str();
}

std::string raster_hash(const std::vector<SpikeRecord>& raster) {
    std::string buf;
    buf.reserve(raster.size() * 16);
    for (const auto& r : raster) {
        buf += std::to_string(r.step);
        buf += ' ';
        buf += std::to_string(r.pop);
        buf += ' ';
        buf += std::to_string(r.index);
        buf += '\n';
    }
    return sha256_hex(buf);
}

// ---- construction ----------------------------------------------------------

Engine::Engine(Network net) : net_(std::move(net)) {
    seed_ = net_.spec.engine.seed;
    init_runtime();
}

Engine::Engine(Network net, std::uint64_t seed) : net_(std::move(net)), seed_(seed) { init_runtime(); }

void Engine::init_runtime() {
    dt_ = net_.spec.engine.dt;
    if (!(dt_ > 0)) fail(ErrorKind::Config, "engine.dt must be > 0");
    tau_avg_ = net_.spec.xcal.tau_avg;
    rmax_step_ = net_.spec.engine.max_rate_hz * 1e-3 * dt_;
    if (!(rmax_step_ > 0)) fail(ErrorKind::Config, "engine.max_rate_hz must be > 0");

    const std::size_t n = net_.neuron_count;
    params_.resize(n);
    somas_.resize(n);
    for (const auto& pop : net_.populations)
        for (std::uint32_t i = 0; i < pop.size; ++i) {
            params_[pop.offset + i] = pop.soma;
            somas_[pop.offset + i] = resting_state(pop.soma);
        }
    traces_.assign(n, 0.0);
    inputs_.assign(n, 0.0);
    last_spike_.assign(n, -1);
    prev_spike_.assign(n, -1);
    neuron_lesioned_.assign(n, 0);
    theta_clamp_.assign(n, std::nullopt);
    settle_clamp_.assign(n, {});
    stim_clamp_.assign(n, {});
    settle_current_.assign(n, 0.0);

    kernels_.clear();
    last_arrival_.clear();
    write_rng_.clear();
    for (const auto& p : net_.projections) {
        KernelBank kb;
        kb.a.assign(p.n_post, 0.0);
        kb.b.assign(p.n_post, 0.0);
        if (p.kernel.kind == KernelKind::Gaussian) kb.history.resize(p.n_post);
        kb.decay = std::exp(-dt_ / p.kernel.tau);
        kernels_.push_back(std::move(kb));
        last_arrival_.emplace_back(p.rule == PlasticityRule::STDP ? p.n_pre : 0, -1);
        write_rng_.emplace_back(seed_, "write:" + p.id);
    }
}

// ---- addressing ------------------------------------------------------------

std::uint32_t Engine::global_index(NeuronRef n) const { return net_.populations.at(n.pop).offset + n.index; }

NeuronRef Engine::ref_of(std::uint32_t g) const {
    for (std::uint32_t p = 0; p < net_.populations.size(); ++p) {
        const auto& pop = net_.populations[p];
        if (g >= pop.offset && g < pop.offset + pop.size) return {p, g - pop.offset};
    }
    fail(ErrorKind::Validation, "neuron index " + std::to_string(g) + " out of range");
}

NeuronRef Engine::resolve(const std::string& pop, std::uint32_t index) const {
    auto p = net_.find_population(pop);
    if (!p) fail(ErrorKind::Validation, "unknown population '" + pop + "'");
    if (index >= net_.populations[*p].size)
        fail(ErrorKind::Validation, "population '" + pop + "': index " + std::to_string(index) + " out of range (size " +
                                        std::to_string(net_.populations[*p].size) + ")");
    return {*p, index};
}

const std::string& Engine::input_layer() const {
    if (!net_.spec.input_layer) fail(ErrorKind::Validation, "spec declares no input layer");
    return *net_.spec.input_layer;
}

const std::string& Engine::output_layer() const {
    if (!net_.spec.output_layer) fail(ErrorKind::Validation, "spec declares no output layer");
    return *net_.spec.output_layer;
}

// ---- stimulus --------------------------------------------------------------

std::vector<Engine::ResolvedEntry> Engine::resolve_stimulus(const Stimulus& s) const {
    std::vector<ResolvedEntry> out;
    for (std::size_t i = 0; i < s.entries.size(); ++i) {
        const auto& e = s.entries[i];
        const std::string path = "stimulus.entries[" + std::to_string(i) + "]";
        auto p = net_.find_population(e.population);
        if (!p) fail(ErrorKind::Validation, path + ".population: unknown id '" + e.population + "'");
        const auto& pop = net_.populations[*p];
        if (e.index && *e.index >= pop.size)
            fail(ErrorKind::Validation, path + ".index: " + std::to_string(*e.index) + " out of range (size " +
                                            std::to_string(pop.size) + ")");
        if (!std::isfinite(e.value)) fail(ErrorKind::Validation, path + ".value: must be finite");
        if (e.kind == StimulusEntry::Kind::Clamp && (e.value < 0 || e.value > 1))
            fail(ErrorKind::Validation, path + ".value: clamp activity must lie in [0, 1]");
        if (!(e.start_ms >= 0) || !(e.end_ms >= e.start_ms))
            fail(ErrorKind::Validation, path + ": need 0 <= start_ms <= end_ms");
        ResolvedEntry r;
        r.kind = e.kind;
        r.first = pop.offset + (e.index ? *e.index : 0);
        r.count = e.index ? 1 : pop.size;
        r.value = e.value;
        r.start = ms_to_steps(e.start_ms, dt_);
        r.end = ms_to_steps(e.end_ms, dt_);
        out.push_back(r);
    }
    return out;
}

void Engine::set_stimulus(Stimulus s) {
    resolved_ = resolve_stimulus(s);
    stimulus_ = std::move(s);
}

// ---- observers -------------------------------------------------------------

void Engine::add_observer(Observer* o) {
    if (o && std::find(observers_.begin(), observers_.end(), o) == observers_.end()) observers_.push_back(o);
}

void Engine::remove_observer(Observer* o) { std::erase(observers_, o); }

// ---- interventions ---------------------------------------------------------

std::vector<std::uint32_t> Engine::neurons_of(const Selector& s) const {
    std::vector<std::uint32_t> out;
    if (s.kind == Selector::Kind::Neuron) {
        out.push_back(global_index(resolve(s.id, s.index)));
    } else if (s.kind == Selector::Kind::Population) {
        const auto& pop = net_.population(s.id);
        for (std::uint32_t i = 0; i < pop.size; ++i) out.push_back(pop.offset + i);
    }
    return out;
}

void Engine::validate(const Intervention& iv) const {
    using K = Selector::Kind;
    if (!std::isfinite(iv.at)) fail(ErrorKind::Validation, "intervention: 'at' must be finite");
    if (iv.at < now() - kTimeSlack)
        fail(ErrorKind::Validation, "intervention: at=" + std::to_string(iv.at) + " ms is in the past (clock " +
                                        std::to_string(now()) + " ms)");

    const Selector& s = iv.target;
    switch (s.kind) {
    case K::Neuron: resolve(s.id, s.index); break;
    case K::Population:
        if (!net_.find_population(s.id)) fail(ErrorKind::Validation, "unknown population '" + s.id + "'");
        break;
    case K::Projection:
    case K::Synapse: {
        auto p = net_.find_projection(s.id);
        if (!p) fail(ErrorKind::Validation, "unknown projection '" + s.id + "'");
        if (s.kind == K::Synapse) {
            const auto& pr = net_.projections[*p];
            if (s.index >= pr.n_pre || s.post >= pr.n_post)
                fail(ErrorKind::Validation, "projection '" + s.id + "': synapse (" + std::to_string(s.index) + ", " +
                                                std::to_string(s.post) + ") out of range");
            if (!pr.built[pr.at(s.index, s.post)])
                fail(ErrorKind::Validation, "projection '" + s.id + "': synapse (" + std::to_string(s.index) + ", " +
                                                std::to_string(s.post) + ") does not exist");
        }
        break;
    }
    }

    const bool neural = s.kind == K::Neuron || s.kind == K::Population;
    const auto need = [&](bool ok, const char* what) {
        if (!ok) fail(ErrorKind::Validation, "intervention " + to_string(iv.kind) + ": " + what);
    };
    switch (iv.kind) {
    case InterventionKind::SetKnob:
        if (iv.knob == Knob::input_gain) need(s.kind == K::Projection, "input_gain targets a projection");
        else need(neural, "channel knobs target a neuron or population");
        need(std::isfinite(iv.value) && iv.value >= 0, "gain must be finite and >= 0");
        break;
    case InterventionKind::ClampThreshold:
        need(neural, "target must be a neuron or population");
        need(!std::isnan(iv.value) && iv.value != -std::numeric_limits<double>::infinity(),
             "threshold must be a number or +inf");
        break;
    case InterventionKind::PlasticityOnOff:
        need(s.kind == K::Projection || s.kind == K::Population, "target must be a projection or population");
        break;
    case InterventionKind::Lesion: break;
    case InterventionKind::SetLatency:
        need(s.kind == K::Projection, "target must be a projection");
        need(std::isfinite(iv.value) && iv.value >= 0, "latency must be finite and >= 0");
        break;
    case InterventionKind::InjectCurrent:
        need(neural, "target must be a neuron or population");
        need(std::isfinite(iv.value), "amplitude must be finite");
        need(std::isfinite(iv.duration) && iv.duration > 0, "duration must be > 0");
        break;
    }
}

Ack Engine::submit(const Intervention& iv) {
    try {
        validate(iv);
    } catch (const Error& e) {
        return {false, 0, e.what()};
    }
    const std::uint64_t id = next_intervention_id_++;
    interventions_.push_back({id, iv});
    std::stable_sort(interventions_.begin(), interventions_.end(),
                     [](const Pending& a, const Pending& b) { return a.iv.at < b.iv.at; });
    return {true, id, "queued for t=" + std::to_string(iv.at) + " ms"};
}

void Engine::apply_due_interventions() {
    if (interventions_.empty()) return;
    const double t = now() + kTimeSlack;
    std::size_t n = 0;
    while (n < interventions_.size() && interventions_[n].iv.at <= t) ++n;
    if (n == 0) return;
    std::vector<Pending> due(interventions_.begin(), interventions_.begin() + static_cast<std::ptrdiff_t>(n));
    interventions_.erase(interventions_.begin(), interventions_.begin() + static_cast<std::ptrdiff_t>(n));
    for (const auto& p : due) apply(p.iv);
}

void Engine::apply(const Intervention& iv) {
    using K = Selector::Kind;
    const Selector& s = iv.target;
    switch (iv.kind) {
    case InterventionKind::SetKnob:
        if (iv.knob == Knob::input_gain) {
            net_.projection(s.id).input_gain = iv.value;
            break;
        }
        for (auto g : neurons_of(s)) {
            auto& k = params_[g].knobs;
            (iv.knob == Knob::g_na ? k.g_na : iv.knob == Knob::g_k ? k.g_k : k.g_ca) = iv.value;
        }
        break;
    case InterventionKind::ClampThreshold:
        for (auto g : neurons_of(s)) theta_clamp_[g] = iv.value;
        break;
    case InterventionKind::PlasticityOnOff: {
        std::vector<std::uint32_t> projs;
        if (s.kind == K::Projection) projs.push_back(*net_.find_projection(s.id));
        else projs = net_.incoming(*net_.find_population(s.id));
        for (auto pi : projs) {
            auto& p = net_.projections[pi];
            p.plastic = iv.enabled && p.rule != PlasticityRule::None;
        }
        break;
    }
    case InterventionKind::Lesion:
        if (s.kind == K::Synapse) {
            auto& p = net_.projection(s.id);
            p.lesioned[p.at(s.index, s.post)] = 1;
        } else if (s.kind == K::Projection) {
            auto& p = net_.projection(s.id);
            std::fill(p.lesioned.begin(), p.lesioned.end(), std::uint8_t{1});
        } else {
            for (auto g : neurons_of(s)) neuron_lesioned_[g] = 1;
        }
        break;
    case InterventionKind::SetLatency: net_.projection(s.id).latency_ms = iv.value; break;
    case InterventionKind::InjectCurrent: {
        Injection inj;
        inj.targets = neurons_of(s);
        inj.amplitude = iv.value;
        inj.start = step_;
        inj.end = step_ + std::max<std::uint64_t>(1, ms_to_steps(iv.duration, dt_));
        injections_.push_back(std::move(inj));
        break;
    }
    }
}

// ---- stepping --------------------------------------------------------------

std::uint64_t Engine::latency_steps(const Projection& p) const {
    return std::max<std::uint64_t>(1, ms_to_steps(p.latency_ms, dt_));
}

std::uint64_t Engine::to_step(double ms) const { return ms_to_steps(ms, dt_); }

void Engine::record(TomographyEntry e) {
    if (tomography_on_) tomography_.push_back(e);
}

void Engine::program(std::uint32_t proj, std::size_t k, double dw, std::uint64_t* writes, std::uint64_t* stuck) {
    if (dw == 0.0) return;
    auto& p = net_.projections[proj];
    SynapseState& syn = p.synapses[k];
    if (syn.stuck) {
        if (stuck) ++*stuck;
        return;
    }
    const std::uint64_t before = syn.write_count;
    syn = program_weight(syn, p.device, dw, write_rng_[proj], &ledger_);
    if (syn.write_count != before) {
        if (writes) ++*writes;
        TomographyEntry e;
        e.kind = TomographyEntry::Kind::Write;
        e.emit_step = e.arrival_step = step_;
        e.projection = static_cast<std::int32_t>(proj);
        e.source = {p.sender, static_cast<std::uint32_t>(k / p.n_post)};
        e.target = static_cast<std::uint32_t>(k % p.n_post);
        e.category = EnergyCategory::WeightWrite;
        e.energy_fj = p.device.write_energy_fj;
        record(e);
    }
}

void Engine::deliver(const Event& ev) {
    if (neuron_lesioned_[ev.source]) return;
    auto& p = net_.projections[ev.projection];
    const std::uint32_t pre = ev.source - net_.populations[p.sender].offset;
    const std::uint32_t recv = net_.populations[p.receiver].offset;
    KernelBank& kb = kernels_[ev.projection];
    const bool exc = p.polarity == Polarity::Excitatory;
    const bool stdp = p.plastic && p.rule == PlasticityRule::STDP;
    const double scale = p.gain * p.input_gain * p.kernel.gain;
    const double e_event = net_.spec.energy.e_synapse_event_fj;

    for (std::uint32_t post = 0; post < p.n_post; ++post) {
        const std::size_t k = p.at(pre, post);
        if (!p.active(k)) continue;
        const std::uint32_t g = recv + post;
        if (neuron_lesioned_[g]) continue;

        double amp;
        if (p.medium == Medium::Photonic) {
            const double power = p.photonic_transmission(k);
            const double r = params_[g].pd_responsivity;
            amp = exc ? detector_response(power, 0.0, r) : detector_response(0.0, power, r);
        } else {
            const double w = weight_of(p.synapses[k], p.device);
            amp = exc ? w : -w;
        }
        amp *= scale;
        if (p.kernel.kind == KernelKind::Gaussian) kb.history[post].emplace_back(step_, amp);
        else kb.a[post] += amp;

        ledger_.charge(EnergyCategory::SynapseEvent, e_event);
        ++stats_.synaptic_events;
        if (tomography_on_) {
            TomographyEntry e;
            e.kind = TomographyEntry::Kind::Delivery;
            e.emit_step = ev.emit;
            e.arrival_step = step_;
            e.projection = static_cast<std::int32_t>(ev.projection);
            e.source = {p.sender, pre};
            e.target = post;
            e.category = EnergyCategory::SynapseEvent;
            e.energy_fj = e_event;
            tomography_.push_back(e);
        }

        // Post fired before this arrival: depression.
        if (stdp && last_spike_[g] >= 0 && static_cast<std::uint64_t>(last_spike_[g]) < step_) {
            const double lag = (static_cast<double>(last_spike_[g]) - static_cast<double>(step_)) * dt_;
            program(ev.projection, k, stdp_dw(lag, net_.spec.stdp), nullptr, nullptr);
        }
    }
    if (stdp) last_arrival_[ev.projection][pre] = static_cast<std::int64_t>(step_);
}

void Engine::emit_spike(std::uint32_t g) {
    const NeuronRef ref = ref_of(g);
    const SpikeRecord rec{step_, ref.pop, ref.index};
    raster_.push_back(rec);
    ++stats_.spikes;
    prev_spike_[g] = last_spike_[g];
    last_spike_[g] = static_cast<std::int64_t>(step_);

    // Optical fanout counts live photonic links to live receivers.
    std::uint32_t fanout = 0;
    for (auto pi : net_.outgoing(ref.pop)) {
        const auto& p = net_.projections[pi];
        if (p.medium != Medium::Photonic) continue;
        const std::uint32_t recv = net_.populations[p.receiver].offset;
        for (std::uint32_t post = 0; post < p.n_post; ++post)
            if (p.active(ref.index, post) && !neuron_lesioned_[recv + post]) ++fanout;
    }
    const auto& ep = net_.spec.energy;
    ledger_.charge_spike(fanout, ep);
    if (tomography_on_) {
        TomographyEntry e;
        e.kind = TomographyEntry::Kind::Spike;
        e.emit_step = e.arrival_step = step_;
        e.source = ref;
        e.category = EnergyCategory::SomaSpike;
        e.energy_fj = ep.e_spike_base_fj;
        tomography_.push_back(e);
        if (fanout > 0) {
            e.category = EnergyCategory::OpticalFanout;
            e.energy_fj = fanout * ep.e_per_optical_branch_fj;
            tomography_.push_back(e);
        }
    }

    for (auto pi : net_.outgoing(ref.pop))
        queue_.push({step_ + latency_steps(net_.projections[pi]), g, pi, step_});

    for (auto* o : observers_) o->on_spike(*this, rec);
}

void Engine::stdp_on_post(std::uint32_t g) {
    const NeuronRef ref = ref_of(g);
    for (auto pi : net_.incoming(ref.pop)) {
        const auto& p = net_.projections[pi];
        if (!p.plastic || p.rule != PlasticityRule::STDP) continue;
        for (std::uint32_t pre = 0; pre < p.n_pre; ++pre) {
            const std::int64_t arrived = last_arrival_[pi][pre];
            if (arrived < 0) continue;
            const std::size_t k = p.at(pre, ref.index);
            if (!p.active(k)) continue;
            const double lag = (static_cast<double>(step_) - static_cast<double>(arrived)) * dt_;
            program(pi, k, stdp_dw(lag, net_.spec.stdp), nullptr, nullptr);
        }
    }
}

double Engine::activity_of(std::uint32_t g) const {
    if (neuron_lesioned_[g]) return 0.0;
    if (settle_clamp_[g].on) return settle_clamp_[g].value;
    if (stim_clamp_[g].on) return stim_clamp_[g].value;
    const std::int64_t origin = static_cast<std::int64_t>(origin_);
    const std::int64_t last = last_spike_[g];
    if (last < origin) return 0.0;
    const std::int64_t prev = std::max(prev_spike_[g], origin);
    const std::int64_t isi = last - prev;
    const std::int64_t since = static_cast<std::int64_t>(step_) - last;
    const double span = static_cast<double>(std::max<std::int64_t>({isi, since, 1}));
    return std::min(1.0, 1.0 / (rmax_step_ * span));
}

void Engine::step() {
    apply_due_interventions();
    const std::uint64_t k = step_;
    const double t = static_cast<double>(k) * dt_;

    // Kernel decay, then arrivals for this step.
    for (std::size_t pi = 0; pi < kernels_.size(); ++pi) {
        KernelBank& kb = kernels_[pi];
        const auto& kern = net_.projections[pi].kernel;
        switch (kern.kind) {
        case KernelKind::LeakyRecurrent:
            for (double& a : kb.a) a *= kb.decay;
            break;
        case KernelKind::Alpha:
            for (std::size_t j = 0; j < kb.a.size(); ++j) {
                kb.b[j] = kb.decay * (kb.b[j] + dt_ * kb.a[j]);
                kb.a[j] *= kb.decay;
            }
            break;
        case KernelKind::Gaussian: {
            const double support = kern.support();
            for (auto& h : kb.history)
                while (!h.empty() && static_cast<double>(k - h.front().first) * dt_ > support) h.pop_front();
            break;
        }
        }
    }
    while (!queue_.empty() && queue_.top().arrival <= k) {
        const Event ev = queue_.top();
        queue_.pop();
        deliver(ev);
    }

    // Total input current.
    std::fill(inputs_.begin(), inputs_.end(), 0.0);
    for (std::size_t pi = 0; pi < kernels_.size(); ++pi) {
        const auto& p = net_.projections[pi];
        const KernelBank& kb = kernels_[pi];
        double* in = inputs_.data() + net_.populations[p.receiver].offset;
        switch (p.kernel.kind) {
        case KernelKind::LeakyRecurrent:
            for (std::uint32_t j = 0; j < p.n_post; ++j) in[j] += kb.a[j];
            break;
        case KernelKind::Alpha: {
            const double c = std::exp(1.0) / p.kernel.tau;
            for (std::uint32_t j = 0; j < p.n_post; ++j) in[j] += c * kb.b[j];
            break;
        }
        case KernelKind::Gaussian:
            for (std::uint32_t j = 0; j < p.n_post; ++j)
                for (const auto& [ks, amp] : kb.history[j]) {
                    const double z = (static_cast<double>(k - ks) * dt_ - p.kernel.mu) / p.kernel.sigma;
                    in[j] += amp * std::exp(-0.5 * z * z);
                }
            break;
        }
    }
    for (auto& c : stim_clamp_) c.on = false;
    for (const auto& r : resolved_) {
        if (k < r.start || k >= r.end) continue;
        for (std::uint32_t g = r.first; g < r.first + r.count; ++g) {
            if (r.kind == StimulusEntry::Kind::Current) inputs_[g] += r.value;
            else stim_clamp_[g] = {true, r.value, r.start};
        }
    }
    for (std::size_t g = 0; g < inputs_.size(); ++g) inputs_[g] += settle_current_[g];
    for (const auto& inj : injections_)
        if (k >= inj.start && k < inj.end)
            for (auto g : inj.targets) inputs_[g] += inj.amplitude;

    // Somas.
    std::vector<std::uint32_t> fired;
    for (std::uint32_t g = 0; g < somas_.size(); ++g) {
        if (neuron_lesioned_[g]) continue;
        const auto& tc = theta_clamp_[g];
        const bool silenced = tc && std::isinf(*tc);
        const ClampState& clamp = settle_clamp_[g].on ? settle_clamp_[g] : stim_clamp_[g];
        if (clamp.on) {
            // Deterministic regular spiking at the clamp rate.
            SomaState rest = resting_state(params_[g]);
            rest.last_spike = somas_[g].last_spike;
            somas_[g] = rest;
            if (clamp.value > 0 && !silenced) {
                const auto period = static_cast<std::uint64_t>(std::ceil(1.0 / (clamp.value * rmax_step_) - 1e-9));
                if ((k - clamp.start) % std::max<std::uint64_t>(1, period) == 0) {
                    somas_[g].last_spike = t;
                    fired.push_back(g);
                }
            }
            continue;
        }
        SomaState st = somas_[g];
        const bool izh = params_[g].model == SomaModel::Izhikevich;
        if (tc) st.theta = silenced && izh ? kIzhikevichPeak : *tc;
        SomaStep r = step_soma(st, params_[g], inputs_[g], dt_, t);
        if (tc) {
            // An Izhikevich neuron under an infinite clamp still resets at the
            // peak so its state stays bounded, but the event is swallowed.
            r.state.theta = silenced && izh ? kIzhikevichPeak : *tc;
            if (silenced && r.spiked) {
                r.spiked = false;
                r.state.last_spike = st.last_spike;
            }
        }
        somas_[g] = r.state;
        if (r.spiked) fired.push_back(g);
    }
    for (auto g : fired) emit_spike(g);
    for (auto g : fired) stdp_on_post(g);

    for (std::uint32_t g = 0; g < traces_.size(); ++g)
        traces_[g] = update_activity_trace(traces_[g], activity_of(g), dt_, tau_avg_);

    const double laser_fj = net_.spec.energy.laser_static_power_w * dt_ * 1e-3 / kJoulesPerFemtojoule;
    if (laser_fj > 0) {
        for (std::uint32_t pi = 0; pi < net_.projections.size(); ++pi) {
            const auto& p = net_.projections[pi];
            if (p.medium != Medium::Photonic || !p.always_on) continue;
            ledger_.charge(EnergyCategory::LaserStatic, laser_fj);
            TomographyEntry e;
            e.kind = TomographyEntry::Kind::Laser;
            e.emit_step = e.arrival_step = k;
            e.projection = static_cast<std::int32_t>(pi);
            e.source = {p.sender, 0};
            e.category = EnergyCategory::LaserStatic;
            e.energy_fj = laser_fj;
            record(e);
        }
    }

    std::erase_if(injections_, [k](const Injection& inj) { return inj.end <= k + 1; });

    ++step_;
    stats_.duration_ms = static_cast<double>(step_) * dt_;
    for (auto* o : observers_) o->on_step(*this);
}

void Engine::advance(std::uint64_t steps) {
    for (std::uint64_t i = 0; i < steps; ++i) step();
}

void Engine::run_for(double ms) {
    const double steps = ms / dt_;
    const double whole = std::round(steps);
    if (!(ms >= 0) || std::abs(steps - whole) > 1e-6)
        fail(ErrorKind::Validation, "duration " + std::to_string(ms) + " ms is not a multiple of dt " + std::to_string(dt_));
    advance(static_cast<std::uint64_t>(whole));
}

std::string Engine::raster_hash() const { return epicsim::raster_hash(raster_); }

// ---- two-phase learning ----------------------------------------------------

void Engine::reset_dynamics() {
    for (std::size_t g = 0; g < somas_.size(); ++g) somas_[g] = resting_state(params_[g]);
    std::fill(traces_.begin(), traces_.end(), 0.0);
    std::fill(inputs_.begin(), inputs_.end(), 0.0);
    std::fill(last_spike_.begin(), last_spike_.end(), -1);
    std::fill(prev_spike_.begin(), prev_spike_.end(), -1);
    for (auto& kb : kernels_) {
        std::fill(kb.a.begin(), kb.a.end(), 0.0);
        std::fill(kb.b.begin(), kb.b.end(), 0.0);
        for (auto& h : kb.history) h.clear();
    }
    for (auto& la : last_arrival_) std::fill(la.begin(), la.end(), -1);
    queue_ = {};
    origin_ = step_;
}

SettleResult Engine::settle(const SettleRequest& req) {
    if (req.phase_len < 10 * dt_ - kTimeSlack)
        fail(ErrorKind::Validation, "settle: phase_len must be >= 10 dt");
    for (const auto& c : req.clamps) {
        if (!(c.activity >= 0 && c.activity <= 1)) fail(ErrorKind::Validation, "settle: clamp activity must lie in [0, 1]");
        const std::uint32_t g = global_index(c.neuron);
        settle_clamp_[g] = {true, c.activity, step_};
    }
    for (const auto& [n, i] : req.currents) settle_current_[global_index(n)] += i;

    SettleResult out;
    const std::uint64_t steps = to_step(req.phase_len);
    const double norm = tau_avg_ / dt_;
    std::vector<double> before;
    std::vector<double> v_before(somas_.size());
    std::vector<double> v_scale(somas_.size());
    for (std::size_t g = 0; g < somas_.size(); ++g) {
        const auto& p = params_[g];
        v_scale[g] = p.model == SomaModel::LIF ? std::max(1e-12, std::abs(p.theta0 - p.v_reset)) : 100.0;
    }
    int quiet = 0;
    for (std::uint64_t s = 0; s < steps; ++s) {
        before = traces_;
        for (std::size_t g = 0; g < somas_.size(); ++g) v_before[g] = somas_[g].v_m;
        const std::uint64_t spikes = stats_.spikes;
        step();
        ++out.steps;
        // Trace change scaled by tau_avg/dt: the distance between the trace
        // and its current target, so eps bounds the settling error itself.
        // Membranes still charging toward threshold, or refractory, also
        // count as motion.
        double change = 0.0;
        for (std::size_t g = 0; g < traces_.size(); ++g) {
            change = std::max(change, std::abs(traces_[g] - before[g]) * norm);
            change = std::max(change, std::abs(somas_[g].v_m - v_before[g]) / v_scale[g]);
            if (somas_[g].ref_remaining > 0) change = std::numeric_limits<double>::infinity();
        }
        const bool still = change < req.eps && queue_.empty() && stats_.spikes == spikes;
        quiet = still ? quiet + 1 : 0;
        if (quiet >= kQuietWindow) {
            out.early_exit = true;
            break;
        }
    }
    for (auto& c : settle_clamp_) c.on = false;
    std::fill(settle_current_.begin(), settle_current_.end(), 0.0);
    out.traces = traces_;
    return out;
}

TrialResult Engine::train_trial(const std::vector<double>& input, const std::vector<double>& target) {
    return train_trial(input, target, net_.spec.xcal);
}

TrialResult Engine::train_trial(const std::vector<double>& input, const std::vector<double>& target,
                                const XcalParams& xcal) {
    xcal.validate();
    const auto in_pop = *net_.find_population(input_layer());
    const auto out_pop = *net_.find_population(output_layer());
    const auto& in = net_.populations[in_pop];
    const auto& out = net_.populations[out_pop];
    if (input.size() != in.size)
        fail(ErrorKind::Validation, "input pattern has " + std::to_string(input.size()) + " entries, layer '" + in.id +
                                        "' has " + std::to_string(in.size));
    if (target.size() != out.size)
        fail(ErrorKind::Validation, "target pattern has " + std::to_string(target.size()) + " entries, layer '" +
                                        out.id + "' has " + std::to_string(out.size));

    const double saved_tau = tau_avg_;
    tau_avg_ = xcal.tau_avg;
    reset_dynamics();

    SettleRequest req;
    req.phase_len = xcal.phase_len;
    req.eps = net_.spec.engine.settle_eps;
    for (std::uint32_t i = 0; i < in.size; ++i) req.clamps.push_back({{in_pop, i}, input[i]});
    TrialResult r;
    r.minus = settle(req).traces;
    // Each phase settles from rest, so the two phases see identical input drive.
    reset_dynamics();
    for (std::uint32_t j = 0; j < out.size; ++j) req.clamps.push_back({{out_pop, j}, target[j]});
    r.plus = settle(req).traces;
    tau_avg_ = saved_tau;
    r.readout.assign(r.minus.begin() + out.offset, r.minus.begin() + out.offset + out.size);

    // All deltas come from the frozen phase traces; writes happen afterwards.
    std::vector<std::uint32_t> plastic;
    for (std::uint32_t pi = 0; pi < net_.projections.size(); ++pi) {
        const auto& p = net_.projections[pi];
        if (!p.plastic || p.rule != PlasticityRule::XCAL) continue;
        const std::uint32_t so = net_.populations[p.sender].offset;
        const std::uint32_t ro = net_.populations[p.receiver].offset;
        std::vector<double> raw(p.synapses.size(), 0.0);
        for (std::uint32_t i = 0; i < p.n_pre; ++i)
            for (std::uint32_t j = 0; j < p.n_post; ++j) {
                const std::size_t k = p.at(i, j);
                if (!p.active(k)) continue;
                const double xy = r.plus[so + i] * r.plus[ro + j];
                const double theta_p = r.minus[so + i] * r.minus[ro + j];
                raw[k] = xcal_dw(xy, theta_p, xcal.theta_d);
            }
        r.raw_dw.emplace(p.id, std::move(raw));
        plastic.push_back(pi);
    }
    for (auto pi : plastic) {
        const auto& raw = r.raw_dw.at(net_.projections[pi].id);
        for (std::size_t k = 0; k < raw.size(); ++k) program(pi, k, xcal.lrate * raw[k], &r.writes, &r.stuck_warnings);
    }
    ++stats_.trials;
    return r;
}

std::vector<double> Engine::infer(const std::vector<double>& input) {
    const auto in_pop = *net_.find_population(input_layer());
    const auto out_pop = *net_.find_population(output_layer());
    const auto& in = net_.populations[in_pop];
    const auto& out = net_.populations[out_pop];
    if (input.size() != in.size)
        fail(ErrorKind::Validation, "input pattern has " + std::to_string(input.size()) + " entries, layer '" + in.id +
                                        "' has " + std::to_string(in.size));
    reset_dynamics();
    SettleRequest req;
    req.phase_len = net_.spec.xcal.phase_len;
    req.eps = net_.spec.engine.settle_eps;
    for (std::uint32_t i = 0; i < in.size; ++i) req.clamps.push_back({{in_pop, i}, input[i]});
    const auto traces = settle(req).traces;
    return {traces.begin() + out.offset, traces.begin() + out.offset + out.size};
}

void Engine::prune(const std::string& projection_id, double fraction) { prune_in_place(net_, projection_id, fraction); }

void Engine::prune_to_density(const std::string& projection_id, double density) {
    epicsim::prune_to_density(net_, projection_id, density);
}

void Engine::set_plasticity(const std::string& projection_id, bool on) {
    auto& p = net_.projection(projection_id);
    p.plastic = on && p.rule != PlasticityRule::None;
}

// ---- snapshots -------------------------------------------------------------

namespace {

std::string mask_text(const std::vector<std::uint8_t>& m) {
    std::string s(m.size(), '0');
    for (std::size_t i = 0; i < m.size(); ++i)
        if (m[i]) s[i] = '1';
    return s;
}

std::vector<std::uint8_t> mask_from(const json& j, std::size_t n, const std::string& what) {
    const auto s = j.get<std::string>();
    if (s.size() != n) fail(ErrorKind::Validation, "snapshot: " + what + " mask has wrong length");
    std::vector<std::uint8_t> m(n);
    for (std::size_t i = 0; i < n; ++i) m[i] = s[i] == '1';
    return m;
}

json doubles(const std::vector<double>& v) {
    json a = json::array();
    for (double x : v) a.push_back(detail::encode_double(x));
    return a;
}

std::vector<double> doubles_from(const json& j, std::size_t n, const std::string& what) {
    if (!j.is_array() || j.size() != n) fail(ErrorKind::Validation, "snapshot: " + what + " has wrong length");
    std::vector<double> v(n);
    for (std::size_t i = 0; i < n; ++i) v[i] = detail::decode_double(j[i], "snapshot." + what);
    return v;
}

json tomography_json(const TomographyEntry& e) {
    return json::array({static_cast<int>(e.kind), e.emit_step, e.arrival_step, e.projection, e.source.pop,
                        e.source.index, e.target, static_cast<int>(e.category), e.energy_fj});
}

TomographyEntry tomography_from(const json& j) {
    TomographyEntry e;
    e.kind = static_cast<TomographyEntry::Kind>(j.at(0).get<int>());
    e.emit_step = j.at(1).get<std::uint64_t>();
    e.arrival_step = j.at(2).get<std::uint64_t>();
    e.projection = j.at(3).get<std::int32_t>();
    e.source = {j.at(4).get<std::uint32_t>(), j.at(5).get<std::uint32_t>()};
    e.target = j.at(6).get<std::uint32_t>();
    e.category = static_cast<EnergyCategory>(j.at(7).get<int>());
    e.energy_fj = j.at(8).get<double>();
    return e;
}

} // namespace

json Engine::snapshot() const {
    const std::size_t n = somas_.size();
    json neurons;
    {
        std::vector<double> v(n), theta(n), u(n), ref(n);
        json last_t = json::array(), clamp = json::array(), knobs = json::array();
        for (std::size_t g = 0; g < n; ++g) {
            v[g] = somas_[g].v_m;
            theta[g] = somas_[g].theta;
            u[g] = somas_[g].u;
            ref[g] = somas_[g].ref_remaining;
            last_t.push_back(somas_[g].last_spike ? json(*somas_[g].last_spike) : json(nullptr));
            clamp.push_back(theta_clamp_[g] ? detail::encode_double(*theta_clamp_[g]) : json(nullptr));
            const auto& k = params_[g].knobs;
            knobs.push_back(json::array({k.g_na, k.g_k, k.g_ca}));
        }
        neurons = json{{"v", doubles(v)},
                       {"theta", doubles(theta)},
                       {"u", doubles(u)},
                       {"ref", doubles(ref)},
                       {"last_spike_t", std::move(last_t)},
                       {"theta_clamp", std::move(clamp)},
                       {"knobs", std::move(knobs)},
                       {"trace", doubles(traces_)},
                       {"input", doubles(inputs_)},
                       {"last_spike", last_spike_},
                       {"prev_spike", prev_spike_},
                       {"lesioned", mask_text(neuron_lesioned_)}};
    }

    json projections = json::array();
    for (std::size_t pi = 0; pi < net_.projections.size(); ++pi) {
        const auto& p = net_.projections[pi];
        const auto& kb = kernels_[pi];
        std::vector<std::uint32_t> levels;
        std::vector<std::uint64_t> writes;
        std::vector<std::uint8_t> stuck;
        for (const auto& s : p.synapses) {
            levels.push_back(s.level);
            writes.push_back(s.write_count);
            stuck.push_back(s.stuck);
        }
        json history = json::array();
        for (const auto& h : kb.history) {
            json row = json::array();
            for (const auto& [ks, amp] : h) row.push_back(json::array({ks, amp}));
            history.push_back(std::move(row));
        }
        projections.push_back(json{{"id", p.id},
                                   {"latency_ms", p.latency_ms},
                                   {"input_gain", p.input_gain},
                                   {"plastic", p.plastic},
                                   {"levels", levels},
                                   {"write_count", writes},
                                   {"stuck", mask_text(stuck)},
                                   {"built", mask_text(p.built)},
                                   {"pruned", mask_text(p.pruned)},
                                   {"lesioned", mask_text(p.lesioned)},
                                   {"kernel_a", doubles(kb.a)},
                                   {"kernel_b", doubles(kb.b)},
                                   {"history", std::move(history)},
                                   {"last_arrival", last_arrival_[pi]},
                                   {"rng", write_rng_[pi].state()}});
    }

    json queue = json::array();
    {
        auto copy = queue_;
        while (!copy.empty()) {
            const auto& e = copy.top();
            queue.push_back(json::array({e.arrival, e.source, e.projection, e.emit}));
            copy.pop();
        }
    }
    json injections = json::array();
    for (const auto& inj : injections_)
        injections.push_back(json{{"targets", inj.targets}, {"amplitude", inj.amplitude}, {"start", inj.start}, {"end", inj.end}});
    json pending = json::array();
    for (const auto& p : interventions_) pending.push_back(json{{"id", p.id}, {"intervention", intervention_to_json(p.iv)}});
    json raster = json::array();
    for (const auto& r : raster_) raster.push_back(json::array({r.step, r.pop, r.index}));
    json tomo = json::array();
    for (const auto& e : tomography_) tomo.push_back(tomography_json(e));

    json state{{"spec", spec_to_json(net_.spec)},
               {"seed", seed_},
               {"step", step_},
               {"origin", origin_},
               {"neurons", std::move(neurons)},
               {"projections", std::move(projections)},
               {"queue", std::move(queue)},
               {"injections", std::move(injections)},
               {"interventions", std::move(pending)},
               {"next_intervention_id", next_intervention_id_},
               {"stimulus", stimulus_to_json(stimulus_)},
               {"ledger", json{{"tallies_fj", ledger_.tallies()}, {"counts", ledger_.counts()}}},
               {"stats", json{{"spikes", stats_.spikes},
                              {"synaptic_events", stats_.synaptic_events},
                              {"trials", stats_.trials},
                              {"duration_ms", stats_.duration_ms}}},
               {"raster", std::move(raster)},
               {"tomography_on", tomography_on_},
               {"tomography", std::move(tomo)}};
    const std::string checksum = sha256_hex(state.dump());
    return json{{"format", kSnapshotFormat}, {"version", kSnapshotVersion}, {"checksum", checksum}, {"state", std::move(state)}};
}

Engine Engine::restore(const json& doc) {
    if (!doc.is_object() || doc.value("format", "") != kSnapshotFormat)
        fail(ErrorKind::Validation, "snapshot: not an epicsim snapshot document");
    if (!doc.contains("version") || !doc.at("version").is_number_integer() ||
        doc.at("version").get<int>() != kSnapshotVersion)
        fail(ErrorKind::Version, "snapshot: unsupported version " + (doc.contains("version") ? doc.at("version").dump() : "(none)") +
                                     ", expected " + std::to_string(kSnapshotVersion));
    const json& state = doc.at("state");
    if (doc.value("checksum", "") != sha256_hex(state.dump()))
        fail(ErrorKind::Validation, "snapshot: checksum mismatch");

    try {
        Network net = build_network(parse_spec(state.at("spec")));
        Engine e(std::move(net), state.at("seed").get<std::uint64_t>());
        e.step_ = state.at("step").get<std::uint64_t>();
        e.origin_ = state.at("origin").get<std::uint64_t>();
        const std::size_t n = e.somas_.size();

        const json& nj = state.at("neurons");
        const auto v = doubles_from(nj.at("v"), n, "neurons.v");
        const auto theta = doubles_from(nj.at("theta"), n, "neurons.theta");
        const auto u = doubles_from(nj.at("u"), n, "neurons.u");
        const auto ref = doubles_from(nj.at("ref"), n, "neurons.ref");
        e.traces_ = doubles_from(nj.at("trace"), n, "neurons.trace");
        e.inputs_ = doubles_from(nj.at("input"), n, "neurons.input");
        e.last_spike_ = nj.at("last_spike").get<std::vector<std::int64_t>>();
        e.prev_spike_ = nj.at("prev_spike").get<std::vector<std::int64_t>>();
        e.neuron_lesioned_ = mask_from(nj.at("lesioned"), n, "neuron lesion");
        if (e.last_spike_.size() != n || e.prev_spike_.size() != n)
            fail(ErrorKind::Validation, "snapshot: spike bookkeeping has wrong length");
        for (std::size_t g = 0; g < n; ++g) {
            auto& s = e.somas_[g];
            s.v_m = v[g];
            s.theta = theta[g];
            s.u = u[g];
            s.ref_remaining = ref[g];
            const json& lt = nj.at("last_spike_t").at(g);
            s.last_spike = lt.is_null() ? std::nullopt : std::optional<double>(lt.get<double>());
            const json& tc = nj.at("theta_clamp").at(g);
            e.theta_clamp_[g] = tc.is_null() ? std::nullopt : std::optional<double>(detail::decode_double(tc, "theta_clamp"));
            const json& k = nj.at("knobs").at(g);
            e.params_[g].knobs = {k.at(0).get<double>(), k.at(1).get<double>(), k.at(2).get<double>()};
        }

        const json& pj = state.at("projections");
        if (pj.size() != e.net_.projections.size()) fail(ErrorKind::Validation, "snapshot: projection count mismatch");
        for (std::size_t pi = 0; pi < pj.size(); ++pi) {
            const json& j = pj[pi];
            auto& p = e.net_.projections[pi];
            if (j.at("id").get<std::string>() != p.id) fail(ErrorKind::Validation, "snapshot: projection order mismatch");
            p.latency_ms = j.at("latency_ms").get<double>();
            p.input_gain = j.at("input_gain").get<double>();
            p.plastic = j.at("plastic").get<bool>();
            const std::size_t m = p.synapses.size();
            const auto levels = j.at("levels").get<std::vector<std::uint32_t>>();
            const auto writes = j.at("write_count").get<std::vector<std::uint64_t>>();
            const auto stuck = mask_from(j.at("stuck"), m, "stuck");
            if (levels.size() != m || writes.size() != m) fail(ErrorKind::Validation, "snapshot: synapse count mismatch");
            for (std::size_t k = 0; k < m; ++k) p.synapses[k] = {levels[k], writes[k], stuck[k] != 0};
            p.built = mask_from(j.at("built"), m, "built");
            p.pruned = mask_from(j.at("pruned"), m, "pruned");
            p.lesioned = mask_from(j.at("lesioned"), m, "lesioned");
            auto& kb = e.kernels_[pi];
            kb.a = doubles_from(j.at("kernel_a"), p.n_post, "kernel_a");
            kb.b = doubles_from(j.at("kernel_b"), p.n_post, "kernel_b");
            const json& hist = j.at("history");
            for (std::size_t r = 0; r < kb.history.size() && r < hist.size(); ++r)
                for (const auto& entry : hist[r])
                    kb.history[r].emplace_back(entry.at(0).get<std::uint64_t>(), entry.at(1).get<double>());
            e.last_arrival_[pi] = j.at("last_arrival").get<std::vector<std::int64_t>>();
            e.write_rng_[pi].set_state(j.at("rng").get<std::string>());
        }

        for (const auto& q : state.at("queue"))
            e.queue_.push({q.at(0).get<std::uint64_t>(), q.at(1).get<std::uint32_t>(), q.at(2).get<std::uint32_t>(),
                           q.at(3).get<std::uint64_t>()});
        for (const auto& ij : state.at("injections"))
            e.injections_.push_back({ij.at("targets").get<std::vector<std::uint32_t>>(), ij.at("amplitude").get<double>(),
                                     ij.at("start").get<std::uint64_t>(), ij.at("end").get<std::uint64_t>()});
        for (const auto& pj2 : state.at("interventions"))
            e.interventions_.push_back({pj2.at("id").get<std::uint64_t>(), intervention_from_json(pj2.at("intervention"))});
        e.next_intervention_id_ = state.at("next_intervention_id").get<std::uint64_t>();
        e.set_stimulus(parse_stimulus(state.at("stimulus")));

        const json& lj = state.at("ledger");
        e.ledger_.restore(lj.at("tallies_fj").get<std::array<double, kEnergyCategoryCount>>(),
                          lj.at("counts").get<std::array<std::uint64_t, kEnergyCategoryCount>>());
        const json& sj = state.at("stats");
        e.stats_ = {sj.at("spikes").get<std::uint64_t>(), sj.at("synaptic_events").get<std::uint64_t>(),
                    sj.at("trials").get<std::uint64_t>(), sj.at("duration_ms").get<double>()};
        for (const auto& r : state.at("raster"))
            e.raster_.push_back({r.at(0).get<std::uint64_t>(), r.at(1).get<std::uint32_t>(), r.at(2).get<std::uint32_t>()});
        e.tomography_on_ = state.at("tomography_on").get<bool>();
        for (const auto& t : state.at("tomography")) e.tomography_.push_back(tomography_from(t));
        return e;
    } catch (const json::exception& ex) {
        fail(ErrorKind::Validation, std::string("snapshot: malformed state: ") + ex.what());
    }
}

// ---- one-shot runs ---------------------------------------------------------

RunTrace run(const Network& net, const Stimulus& stimulus, double duration_ms, std::uint64_t seed,
             const RunOptions& options) {
    Engine engine(net, seed);
    engine.set_stimulus(stimulus);
    for (const auto& iv : options.interventions) {
        const Ack ack = engine.submit(iv);
        if (!ack.accepted) fail(ErrorKind::Validation, ack.message);
    }
    engine.enable_tomography(options.tomography);
    for (auto* o : options.observers) engine.add_observer(o);
    engine.run_for(duration_ms);

    RunTrace trace;
    trace.dt = engine.dt();
    trace.raster = engine.raster();
    trace.raster_hash = engine.raster_hash();
    trace.ledger = engine.ledger();
    trace.stats = engine.stats();
    trace.tomography = engine.tomography();
    return trace;
}

} // namespace epicsim
