#include "epicsim/spec.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "epicsim/error.hpp"

namespace epicsim {

using nlohmann::json;

std::string to_string(Medium m) { return m == Medium::Electronic ? "electronic" : "photonic"; }
std::string to_string(Polarity p) { return p == Polarity::Excitatory ? "excitatory" : "inhibitory"; }
std::string to_string(PlasticityRule r) {
    switch (r) {
    case PlasticityRule::None: return "none";
    case PlasticityRule::XCAL: return "xcal";
    case PlasticityRule::STDP: return "stdp";
    }
    return "none";
}
std::string to_string(SomaModel m) { return m == SomaModel::LIF ? "LIF" : "Izhikevich"; }
std::string to_string(KernelKind k) {
    switch (k) {
    case KernelKind::LeakyRecurrent: return "leaky_recurrent";
    case KernelKind::Alpha: return "alpha";
    case KernelKind::Gaussian: return "gaussian";
    }
    return "leaky_recurrent";
}
std::string to_string(DeviceKind k) {
    switch (k) {
    case DeviceKind::ECRAM: return "ECRAM";
    case DeviceKind::FeFET_HZO: return "FeFET_HZO";
    case DeviceKind::PCM_MZI: return "PCM_MZI";
    }
    return "ECRAM";
}

namespace {

// Walks a JSON object while tracking its document path for error messages.
class Node {
public:
    Node(const json& j, std::string path) : j_(j), path_(std::move(path)) {}

    const std::string& path() const { return path_; }
    const json& raw() const { return j_; }

    [[noreturn]] void error(const std::string& msg) const {
        fail(ErrorKind::Validation, (path_.empty() ? std::string("<root>") : path_) + ": " + msg);
    }

    std::string child_path(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

    bool has(const std::string& key) const { return j_.is_object() && j_.contains(key) && !j_.at(key).is_null(); }

    Node at(const std::string& key) const {
        if (!j_.is_object()) error("expected an object");
        if (!has(key)) fail(ErrorKind::Validation, child_path(key) + ": missing required field");
        return Node(j_.at(key), child_path(key));
    }

    std::vector<Node> items() const {
        if (!j_.is_array()) error("expected an array");
        std::vector<Node> out;
        for (std::size_t i = 0; i < j_.size(); ++i) out.emplace_back(j_[i], path_ + "[" + std::to_string(i) + "]");
        return out;
    }

    double number() const {
        if (!j_.is_number()) error("expected a number");
        return j_.get<double>();
    }
    std::uint64_t count() const {
        if (!j_.is_number_integer() || j_.get<std::int64_t>() < 0) error("expected a non-negative integer");
        return j_.get<std::uint64_t>();
    }
    std::string text() const {
        if (!j_.is_string()) error("expected a string");
        return j_.get<std::string>();
    }
    bool flag() const {
        if (!j_.is_boolean()) error("expected a boolean");
        return j_.get<bool>();
    }

    void opt(const std::string& key, double& out) const {
        if (has(key)) out = at(key).number();
    }
    void opt(const std::string& key, std::uint32_t& out) const {
        if (has(key)) out = static_cast<std::uint32_t>(at(key).count());
    }
    void opt(const std::string& key, std::uint64_t& out) const {
        if (has(key)) out = at(key).count();
    }
    void opt(const std::string& key, int& out) const {
        if (!has(key)) return;
        const Node n = at(key);
        if (!n.raw().is_number_integer()) n.error("expected an integer");
        out = n.raw().get<int>();
    }
    void opt(const std::string& key, std::string& out) const {
        if (has(key)) out = at(key).text();
    }
    void opt(const std::string& key, bool& out) const {
        if (has(key)) out = at(key).flag();
    }

    template <typename E>
    E choice(const std::vector<std::pair<std::string, E>>& options) const {
        const std::string v = text();
        for (const auto& [name, e] : options)
            if (name == v) return e;
        std::string valid;
        for (const auto& [name, e] : options) valid += (valid.empty() ? "" : ", ") + name;
        error("unknown value '" + v + "' (valid: " + valid + ")");
    }

private:
    const json& j_;
    std::string path_;
};

const std::vector<std::pair<std::string, SomaModel>> kSomaModels{{"LIF", SomaModel::LIF},
                                                                {"Izhikevich", SomaModel::Izhikevich}};
const std::vector<std::pair<std::string, KernelKind>> kKernels{{"leaky_recurrent", KernelKind::LeakyRecurrent},
                                                               {"alpha", KernelKind::Alpha},
                                                               {"gaussian", KernelKind::Gaussian}};
const std::vector<std::pair<std::string, DeviceKind>> kDeviceKinds{
    {"ECRAM", DeviceKind::ECRAM}, {"FeFET_HZO", DeviceKind::FeFET_HZO}, {"PCM_MZI", DeviceKind::PCM_MZI}};
const std::vector<std::pair<std::string, Medium>> kMedia{{"electronic", Medium::Electronic},
                                                         {"photonic", Medium::Photonic}};
const std::vector<std::pair<std::string, Polarity>> kPolarities{{"excitatory", Polarity::Excitatory},
                                                                {"inhibitory", Polarity::Inhibitory}};
const std::vector<std::pair<std::string, PlasticityRule>> kRules{
    {"none", PlasticityRule::None}, {"xcal", PlasticityRule::XCAL}, {"stdp", PlasticityRule::STDP}};

std::map<std::string, DeviceModel> builtin_devices() {
    return {{"ecram", default_device(DeviceKind::ECRAM)},
            {"fefet_hzo", default_device(DeviceKind::FeFET_HZO)},
            {"pcm_mzi", default_device(DeviceKind::PCM_MZI)}};
}

void check(const Node& n, bool ok, const std::string& msg) {
    if (!ok) n.error(msg);
}

SomaParams parse_soma(const Node& n) {
    SomaParams s;
    if (n.has("model")) s.model = n.at("model").choice(kSomaModels);
    if (s.model == SomaModel::Izhikevich) {
        s.v_rest = -70.0;
        s.v_reset = -65.0;
        s.theta0 = kIzhikevichPeak;
    }
    n.opt("tau_m", s.tau_m);
    n.opt("v_rest", s.v_rest);
    n.opt("v_reset", s.v_reset);
    n.opt("r_m", s.r_m);
    n.opt("theta0", s.theta0);
    n.opt("theta_inc", s.theta_inc);
    n.opt("tau_theta", s.tau_theta);
    n.opt("t_ref", s.t_ref);
    n.opt("pd_responsivity", s.pd_responsivity);
    if (n.has("izh")) {
        const Node z = n.at("izh");
        z.opt("a", s.izh.a);
        z.opt("b", s.izh.b);
        z.opt("c", s.izh.c);
        z.opt("d", s.izh.d);
    }
    if (n.has("knobs")) {
        const Node k = n.at("knobs");
        k.opt("g_na", s.knobs.g_na);
        k.opt("g_k", s.knobs.g_k);
        k.opt("g_ca", s.knobs.g_ca);
    }
    try {
        s.validate();
    } catch (const Error& e) {
        n.error(e.what());
    }
    return s;
}

DeviceModel parse_device(const Node& n, DeviceModel d) {
    if (n.has("kind")) {
        d.kind = n.at("kind").choice(kDeviceKinds);
        if (!n.has("levels")) d.levels = default_device(d.kind).levels;
    }
    n.opt("levels", d.levels);
    n.opt("g_min", d.g_min);
    n.opt("g_max", d.g_max);
    n.opt("write_noise_rel", d.write_noise_rel);
    n.opt("write_time_ns", d.write_time_ns);
    n.opt("write_energy_fj", d.write_energy_fj);
    n.opt("endurance", d.endurance);
    n.opt("voltage", d.voltage);
    try {
        d.validate();
    } catch (const Error& e) {
        n.error(e.what());
    }
    return d;
}

DendriteKernel parse_kernel(const Node& n) {
    DendriteKernel k;
    if (n.has("kind")) k.kind = n.at("kind").choice(kKernels);
    n.opt("tau", k.tau);
    n.opt("mu", k.mu);
    n.opt("sigma", k.sigma);
    n.opt("gain", k.gain);
    try {
        k.validate();
    } catch (const Error& e) {
        n.error(e.what());
    }
    return k;
}

ProjectionSpec parse_projection(const Node& n, const std::map<std::string, DeviceModel>& devices) {
    ProjectionSpec p;
    p.id = n.at("id").text();
    p.sender = n.at("sender").text();
    p.receiver = n.at("receiver").text();
    if (n.has("branch")) p.branch = static_cast<std::uint32_t>(n.at("branch").count());
    if (n.has("medium")) p.medium = n.at("medium").choice(kMedia);
    if (n.has("polarity")) p.polarity = n.at("polarity").choice(kPolarities);
    if (n.has("connectivity")) {
        const Node c = n.at("connectivity");
        if (c.raw().is_string()) {
            if (c.text() != "dense") c.error("unknown value '" + c.text() + "' (valid: dense, bernoulli)");
        } else {
            const std::string kind = c.at("kind").text();
            if (kind == "dense") {
                p.connectivity.kind = Connectivity::Kind::Dense;
            } else if (kind == "bernoulli") {
                p.connectivity.kind = Connectivity::Kind::Bernoulli;
                p.connectivity.p = c.at("p").number();
                check(c.at("p"), p.connectivity.p >= 0 && p.connectivity.p <= 1, "p must be in [0, 1]");
            } else {
                c.at("kind").error("unknown value '" + kind + "' (valid: dense, bernoulli)");
            }
        }
    }
    if (n.has("device")) {
        const Node d = n.at("device");
        if (d.raw().is_string()) {
            p.device_name = d.text();
            auto it = devices.find(p.device_name);
            if (it == devices.end()) d.error("unknown device '" + p.device_name + "'");
            p.device = it->second;
        } else {
            p.device_name = "inline";
            p.device = parse_device(d, default_device(DeviceKind::ECRAM));
        }
    } else {
        p.device = devices.at(p.medium == Medium::Photonic ? "pcm_mzi" : "ecram");
        p.device_name = p.medium == Medium::Photonic ? "pcm_mzi" : "ecram";
    }
    if (n.has("kernel")) p.kernel = parse_kernel(n.at("kernel"));
    if (n.has("latency_ms")) {
        p.latency_ms = n.at("latency_ms").number();
        check(n.at("latency_ms"), *p.latency_ms >= 0, "latency must be >= 0");
    }
    n.opt("gain", p.gain);
    if (n.has("init")) {
        const Node i = n.at("init");
        i.opt("low", p.init.low);
        i.opt("high", p.init.high);
        check(i, 0 <= p.init.low && p.init.low <= p.init.high && p.init.high <= 1, "need 0 <= low <= high <= 1");
    }
    if (n.has("plasticity")) p.plasticity = n.at("plasticity").choice(kRules);
    if (n.has("photonic")) {
        const Node ph = n.at("photonic");
        ph.opt("laser_dbm", p.photonic.laser_dbm);
        ph.opt("mzi_count", p.photonic.mzi_count);
        ph.opt("coupler_db", p.photonic.coupler_db);
        ph.opt("detector_dbm", p.photonic.detector_dbm);
        ph.opt("always_on", p.photonic.always_on);
        if (ph.has("input_port")) p.photonic.input_port = static_cast<std::uint32_t>(ph.at("input_port").count());
        if (ph.has("output_port")) p.photonic.output_port = static_cast<std::uint32_t>(ph.at("output_port").count());
    }
    if (n.has("exclude")) {
        for (const Node& e : n.at("exclude").items()) {
            const auto& r = e.raw();
            if (!r.is_array() || r.size() != 2 || !r[0].is_number_integer() || !r[1].is_number_integer() ||
                r[0].get<std::int64_t>() < 0 || r[1].get<std::int64_t>() < 0)
                e.error("expected [sender_index, receiver_index]");
            p.exclude.emplace_back(r[0].get<std::uint32_t>(), r[1].get<std::uint32_t>());
        }
    }
    return p;
}

json kernel_json(const DendriteKernel& k) {
    return {{"kind", to_string(k.kind)}, {"tau", k.tau}, {"mu", k.mu}, {"sigma", k.sigma}, {"gain", k.gain}};
}

json device_json(const DeviceModel& d) {
    return {{"kind", to_string(d.kind)},
            {"levels", d.levels},
            {"g_min", d.g_min},
            {"g_max", d.g_max},
            {"write_noise_rel", d.write_noise_rel},
            {"write_time_ns", d.write_time_ns},
            {"write_energy_fj", d.write_energy_fj},
            {"endurance", d.endurance},
            {"voltage", d.voltage}};
}

} // namespace

void validate_spec(const NetworkSpec& spec) {
    if (spec.populations.empty()) fail(ErrorKind::Validation, "populations: no populations");
    if (!(spec.engine.dt > 0)) fail(ErrorKind::Validation, "engine.dt: must be > 0");
    if (!(spec.engine.max_rate_hz > 0)) fail(ErrorKind::Validation, "engine.max_rate_hz: must be > 0");
    if (spec.awgr_size == 0) fail(ErrorKind::Validation, "awgr_size: must be > 0");

    std::map<std::string, const PopulationSpec*> pops;
    for (std::size_t i = 0; i < spec.populations.size(); ++i) {
        const auto& p = spec.populations[i];
        const std::string at = "populations[" + std::to_string(i) + "]";
        if (p.id.empty()) fail(ErrorKind::Validation, at + ".id: must not be empty");
        if (p.size < 1) fail(ErrorKind::Validation, at + ".size: must be >= 1");
        if (!pops.emplace(p.id, &p).second) fail(ErrorKind::Validation, at + ".id: duplicate id '" + p.id + "'");
    }
    std::set<std::string> proj_ids;
    std::set<std::pair<std::string, std::uint32_t>> branches;
    for (std::size_t i = 0; i < spec.projections.size(); ++i) {
        const auto& p = spec.projections[i];
        const std::string at = "projections[" + std::to_string(i) + "]";
        if (p.id.empty()) fail(ErrorKind::Validation, at + ".id: must not be empty");
        if (!proj_ids.insert(p.id).second) fail(ErrorKind::Validation, at + ".id: duplicate id '" + p.id + "'");
        if (!pops.count(p.sender)) fail(ErrorKind::Validation, at + ".sender: unknown id '" + p.sender + "'");
        if (!pops.count(p.receiver)) fail(ErrorKind::Validation, at + ".receiver: unknown id '" + p.receiver + "'");
        if (p.branch && !branches.emplace(p.receiver, *p.branch).second)
            fail(ErrorKind::Validation, at + ".branch: branch " + std::to_string(*p.branch) + " already used on '" +
                                            p.receiver + "'");
        const auto n_pre = pops.at(p.sender)->size;
        const auto n_post = pops.at(p.receiver)->size;
        for (const auto& [a, b] : p.exclude)
            if (a >= n_pre || b >= n_post) fail(ErrorKind::Validation, at + ".exclude: synapse out of range");
        if (p.medium == Medium::Photonic) {
            if (p.photonic.input_port && *p.photonic.input_port >= spec.awgr_size)
                fail(ErrorKind::Validation, at + ".photonic.input_port: must be < awgr_size");
            if (p.photonic.output_port && *p.photonic.output_port >= spec.awgr_size)
                fail(ErrorKind::Validation, at + ".photonic.output_port: must be < awgr_size");
        }
    }
    for (const auto* layer : {&spec.input_layer, &spec.output_layer})
        if (*layer && !pops.count(**layer))
            fail(ErrorKind::Validation, std::string(layer == &spec.input_layer ? "layers.input" : "layers.output") +
                                            ": unknown id '" + **layer + "'");
}

NetworkSpec parse_spec(const json& doc) {
    const Node root(doc, "");
    if (!doc.is_object()) root.error("expected an object");
    NetworkSpec spec;
    root.opt("version", spec.version);
    if (spec.version != kSpecVersion)
        fail(ErrorKind::Validation, "version: unsupported spec version " + std::to_string(spec.version));
    root.opt("name", spec.name);
    root.opt("awgr_size", spec.awgr_size);
    root.opt("max_fanout", spec.max_fanout);
    if (root.has("engine")) {
        const Node e = root.at("engine");
        e.opt("dt", spec.engine.dt);
        e.opt("seed", spec.engine.seed);
        e.opt("max_rate_hz", spec.engine.max_rate_hz);
        e.opt("settle_eps", spec.engine.settle_eps);
    }
    if (root.has("energy")) {
        const Node e = root.at("energy");
        e.opt("e_spike_base_fj", spec.energy.e_spike_base_fj);
        e.opt("e_per_optical_branch_fj", spec.energy.e_per_optical_branch_fj);
        e.opt("e_synapse_event_fj", spec.energy.e_synapse_event_fj);
        e.opt("laser_static_power_w", spec.energy.laser_static_power_w);
        try {
            spec.energy.validate();
        } catch (const Error& err) {
            e.error(err.what());
        }
    }
    if (root.has("plasticity")) {
        const Node pl = root.at("plasticity");
        if (pl.has("xcal")) {
            const Node x = pl.at("xcal");
            x.opt("theta_d", spec.xcal.theta_d);
            x.opt("lrate", spec.xcal.lrate);
            x.opt("tau_avg", spec.xcal.tau_avg);
            x.opt("phase_len", spec.xcal.phase_len);
            try {
                spec.xcal.validate();
            } catch (const Error& err) {
                x.error(err.what());
            }
        }
        if (pl.has("stdp")) {
            const Node s = pl.at("stdp");
            s.opt("a_plus", spec.stdp.a_plus);
            s.opt("a_minus", spec.stdp.a_minus);
            s.opt("tau_plus", spec.stdp.tau_plus);
            s.opt("tau_minus", spec.stdp.tau_minus);
            try {
                spec.stdp.validate();
            } catch (const Error& err) {
                s.error(err.what());
            }
        }
    }
    auto devices = builtin_devices();
    if (root.has("devices")) {
        const Node d = root.at("devices");
        if (!d.raw().is_object()) d.error("expected an object");
        for (const auto& [name, value] : d.raw().items()) {
            const Node dn(value, d.child_path(name));
            auto base = devices.count(name) ? devices.at(name) : default_device(DeviceKind::ECRAM);
            devices[name] = parse_device(dn, base);
            spec.devices[name] = devices[name];
        }
    }
    for (const Node& p : root.at("populations").items()) {
        PopulationSpec ps;
        ps.id = p.at("id").text();
        ps.size = static_cast<std::uint32_t>(p.at("size").count());
        if (p.has("soma")) ps.soma = parse_soma(p.at("soma"));
        p.opt("region", ps.region);
        p.opt("plane", ps.plane);
        spec.populations.push_back(std::move(ps));
    }
    if (root.has("projections"))
        for (const Node& p : root.at("projections").items()) spec.projections.push_back(parse_projection(p, devices));
    if (root.has("layers")) {
        const Node l = root.at("layers");
        if (l.has("input")) spec.input_layer = l.at("input").text();
        if (l.has("output")) spec.output_layer = l.at("output").text();
    }
    validate_spec(spec);
    return spec;
}

NetworkSpec load_spec(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorKind::Validation, path.string() + ": cannot open spec file");
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        fail(ErrorKind::Validation, path.string() + ": parse error: " + e.what());
    }
    return parse_spec(doc);
}

json spec_to_json(const NetworkSpec& spec) {
    json j;
    j["version"] = spec.version;
    j["name"] = spec.name;
    j["awgr_size"] = spec.awgr_size;
    j["max_fanout"] = spec.max_fanout;
    j["engine"] = {{"dt", spec.engine.dt},
                   {"seed", spec.engine.seed},
                   {"max_rate_hz", spec.engine.max_rate_hz},
                   {"settle_eps", spec.engine.settle_eps}};
    j["energy"] = {{"e_spike_base_fj", spec.energy.e_spike_base_fj},
                   {"e_per_optical_branch_fj", spec.energy.e_per_optical_branch_fj},
                   {"e_synapse_event_fj", spec.energy.e_synapse_event_fj},
                   {"laser_static_power_w", spec.energy.laser_static_power_w}};
    j["plasticity"] = {{"xcal",
                        {{"theta_d", spec.xcal.theta_d},
                         {"lrate", spec.xcal.lrate},
                         {"tau_avg", spec.xcal.tau_avg},
                         {"phase_len", spec.xcal.phase_len}}},
                       {"stdp",
                        {{"a_plus", spec.stdp.a_plus},
                         {"a_minus", spec.stdp.a_minus},
                         {"tau_plus", spec.stdp.tau_plus},
                         {"tau_minus", spec.stdp.tau_minus}}}};
    json devs = json::object();
    for (const auto& [name, d] : spec.devices) devs[name] = device_json(d);
    j["devices"] = devs;
    json pops = json::array();
    for (const auto& p : spec.populations) {
        const auto& s = p.soma;
        pops.push_back({{"id", p.id},
                        {"size", p.size},
                        {"region", p.region},
                        {"plane", p.plane},
                        {"soma",
                         {{"model", to_string(s.model)},
                          {"tau_m", s.tau_m},
                          {"v_rest", s.v_rest},
                          {"v_reset", s.v_reset},
                          {"r_m", s.r_m},
                          {"theta0", s.theta0},
                          {"theta_inc", s.theta_inc},
                          {"tau_theta", s.tau_theta},
                          {"t_ref", s.t_ref},
                          {"pd_responsivity", s.pd_responsivity},
                          {"izh", {{"a", s.izh.a}, {"b", s.izh.b}, {"c", s.izh.c}, {"d", s.izh.d}}},
                          {"knobs", {{"g_na", s.knobs.g_na}, {"g_k", s.knobs.g_k}, {"g_ca", s.knobs.g_ca}}}}}});
    }
    j["populations"] = pops;
    json projs = json::array();
    for (const auto& p : spec.projections) {
        json pj{{"id", p.id},
                {"sender", p.sender},
                {"receiver", p.receiver},
                {"medium", to_string(p.medium)},
                {"polarity", to_string(p.polarity)},
                {"device", device_json(p.device)},
                {"kernel", kernel_json(p.kernel)},
                {"gain", p.gain},
                {"init", {{"low", p.init.low}, {"high", p.init.high}}},
                {"plasticity", to_string(p.plasticity)}};
        if (p.branch) pj["branch"] = *p.branch;
        if (p.latency_ms) pj["latency_ms"] = *p.latency_ms;
        pj["connectivity"] = p.connectivity.kind == Connectivity::Kind::Dense
                                 ? json{{"kind", "dense"}}
                                 : json{{"kind", "bernoulli"}, {"p", p.connectivity.p}};
        if (p.medium == Medium::Photonic) {
            json ph{{"laser_dbm", p.photonic.laser_dbm},
                    {"mzi_count", p.photonic.mzi_count},
                    {"coupler_db", p.photonic.coupler_db},
                    {"detector_dbm", p.photonic.detector_dbm},
                    {"always_on", p.photonic.always_on}};
            if (p.photonic.input_port) ph["input_port"] = *p.photonic.input_port;
            if (p.photonic.output_port) ph["output_port"] = *p.photonic.output_port;
            pj["photonic"] = ph;
        }
        if (!p.exclude.empty()) {
            json ex = json::array();
            for (const auto& [a, b] : p.exclude) ex.push_back({a, b});
            pj["exclude"] = ex;
        }
        projs.push_back(pj);
    }
    j["projections"] = projs;
    if (spec.input_layer || spec.output_layer) {
        json l = json::object();
        if (spec.input_layer) l["input"] = *spec.input_layer;
        if (spec.output_layer) l["output"] = *spec.output_layer;
        j["layers"] = l;
    }
    return j;
}

} // namespace epicsim
