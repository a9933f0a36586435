#include "epicsim/fabric.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <numeric>
#include <sstream>

#include "epicsim/error.hpp"
#include "epicsim/hash.hpp"

namespace epicsim {

LossBudget loss_budget(const PhotonicPath& path) {
    double total = 0.0;
    for (double phi : path.mzi_phases) total += kMziLossDbPerPi * std::abs(phi) / std::numbers::pi;
    total += path.tsov_count * kTsovLossDb;
    total += path.coupler_loss_db;
    return {total, path.laser_dbm - total - path.detector_sensitivity_dbm};
}

PhotonicPath concatenate(const PhotonicPath& a, const PhotonicPath& b) {
    PhotonicPath out = a;
    out.mzi_count = a.mzi_count + b.mzi_count;
    out.mzi_phases.insert(out.mzi_phases.end(), b.mzi_phases.begin(), b.mzi_phases.end());
    out.tsov_count = a.tsov_count + b.tsov_count;
    out.coupler_loss_db = a.coupler_loss_db + b.coupler_loss_db;
    return out;
}

std::uint32_t awgr_route(std::uint32_t n_ports, std::uint32_t input_port, std::uint32_t wavelength) {
    if (n_ports == 0) fail(ErrorKind::Domain, "awgr_route: n_ports must be > 0");
    if (input_port >= n_ports) fail(ErrorKind::Domain, "awgr_route: input port out of range");
    if (wavelength >= n_ports) fail(ErrorKind::Domain, "awgr_route: wavelength out of range");
    return static_cast<std::uint32_t>((std::uint64_t{input_port} + wavelength) % n_ports);
}

std::size_t Projection::built_count() const {
    return static_cast<std::size_t>(std::count(built.begin(), built.end(), std::uint8_t{1}));
}

std::size_t Projection::active_count() const {
    std::size_t n = 0;
    for (std::size_t k = 0; k < synapses.size(); ++k) n += active(k) ? 1 : 0;
    return n;
}

double Projection::photonic_transmission(std::size_t k) const {
    const double w = weight_of(synapses[k], device);
    if (!route) return w;
    const double loss_db = route->base_loss_db + kMziLossDbPerPi * weight_to_phase(w) / std::numbers::pi;
    return w * std::pow(10.0, -loss_db / 10.0);
}

std::optional<std::uint32_t> Network::find_population(const std::string& id) const {
    for (std::uint32_t i = 0; i < populations.size(); ++i)
        if (populations[i].id == id) return i;
    return std::nullopt;
}

std::optional<std::uint32_t> Network::find_projection(const std::string& id) const {
    for (std::uint32_t i = 0; i < projections.size(); ++i)
        if (projections[i].id == id) return i;
    return std::nullopt;
}

const Population& Network::population(const std::string& id) const {
    auto i = find_population(id);
    if (!i) fail(ErrorKind::Validation, "unknown population '" + id + "'");
    return populations[*i];
}

Projection& Network::projection(const std::string& id) {
    auto i = find_projection(id);
    if (!i) fail(ErrorKind::Validation, "unknown projection '" + id + "'");
    return projections[*i];
}

const Projection& Network::projection(const std::string& id) const {
    return const_cast<Network*>(this)->projection(id);
}

std::uint32_t Network::optical_fanout(std::uint32_t population, std::uint32_t index) const {
    std::uint32_t n = 0;
    for (auto pi : outgoing_[population]) {
        const auto& p = projections[pi];
        if (p.medium != Medium::Photonic) continue;
        for (std::uint32_t j = 0; j < p.n_post; ++j) n += p.active(index, j) ? 1 : 0;
    }
    return n;
}

void Network::index_topology() {
    outgoing_.assign(populations.size(), {});
    incoming_.assign(populations.size(), {});
    for (std::uint32_t i = 0; i < projections.size(); ++i) {
        outgoing_[projections[i].sender].push_back(i);
        incoming_[projections[i].receiver].push_back(i);
    }
}

namespace {

void assign_wavelengths(Network& net) {
    // (output port, wavelength) -> projection id; a second claimant is a conflict.
    std::map<std::pair<std::uint32_t, std::uint32_t>, std::string> claimed;
    const std::uint32_t n = net.awgr_size;
    for (std::size_t i = 0; i < net.projections.size(); ++i) {
        auto& proj = net.projections[i];
        if (proj.medium != Medium::Photonic) continue;
        const auto& ps = net.spec.projections[i].photonic;
        PhotonicRoute route;
        route.input_port = ps.input_port.value_or(proj.sender % n);
        route.output_port = ps.output_port.value_or(proj.receiver % n);
        const std::uint32_t lambda = (route.output_port + n - route.input_port) % n;
        if (awgr_route(n, route.input_port, lambda) != route.output_port)
            fail(ErrorKind::Runtime, "wavelength assignment inconsistent with router");
        auto [it, inserted] = claimed.emplace(std::make_pair(route.output_port, lambda), proj.id);
        if (!inserted)
            fail(ErrorKind::Validation, "wavelength assignment infeasible: projections '" + it->second + "' and '" +
                                            proj.id + "' both need output port " +
                                            std::to_string(route.output_port) + " on wavelength " +
                                            std::to_string(lambda));

        auto& path = route.path;
        path.laser_dbm = ps.laser_dbm;
        path.mzi_count = ps.mzi_count;
        path.mzi_phases.assign(ps.mzi_count, std::numbers::pi);
        path.tsov_count = static_cast<std::uint32_t>(
            std::abs(net.populations[proj.sender].plane - net.populations[proj.receiver].plane));
        path.coupler_loss_db = ps.coupler_db;
        path.detector_sensitivity_dbm = ps.detector_dbm;
        path.wavelength = lambda;
        route.budget = loss_budget(path);
        route.base_loss_db = path.tsov_count * kTsovLossDb + path.coupler_loss_db;
        if (!route.budget.ok()) {
            std::ostringstream os;
            os << "projection '" << proj.id << "': loss budget margin " << route.budget.margin_db << " dB < 0";
            net.report.loss_failures.push_back(os.str());
        }
        proj.route = std::move(route);
    }
}

void check_fanout(Network& net) {
    for (std::uint32_t pi = 0; pi < net.populations.size(); ++pi) {
        const auto& pop = net.populations[pi];
        std::vector<std::uint64_t> fanout(pop.size, 0);
        for (auto proj_index : net.outgoing(pi)) {
            const auto& proj = net.projections[proj_index];
            for (std::uint32_t i = 0; i < proj.n_pre; ++i)
                for (std::uint32_t j = 0; j < proj.n_post; ++j) fanout[i] += proj.active(i, j) ? 1 : 0;
        }
        const auto worst = std::max_element(fanout.begin(), fanout.end());
        if (worst != fanout.end() && *worst > net.max_fanout)
            net.report.warnings.push_back("population '" + pop.id + "' neuron " +
                                          std::to_string(worst - fanout.begin()) + ": fanout " +
                                          std::to_string(*worst) + " exceeds max_fanout " +
                                          std::to_string(net.max_fanout));
    }
}

} // namespace

Network build_network(const NetworkSpec& spec) { return build_network(spec, spec.engine.seed); }

Network build_network(const NetworkSpec& spec, std::uint64_t seed) {
    validate_spec(spec);
    Network net;
    net.spec = spec;
    net.spec.engine.seed = seed;
    net.awgr_size = spec.awgr_size;
    net.max_fanout = spec.max_fanout;

    std::uint32_t offset = 0;
    for (const auto& ps : spec.populations) {
        Population p;
        p.id = ps.id;
        p.size = ps.size;
        p.soma = ps.soma;
        p.region = ps.region;
        p.plane = ps.plane;
        p.offset = offset;
        offset += ps.size;
        net.populations.push_back(std::move(p));
    }
    net.neuron_count = offset;

    std::map<std::uint32_t, std::uint32_t> next_branch;
    for (const auto& ps : spec.projections) {
        if (ps.branch) next_branch[*net.find_population(ps.receiver)] =
                           std::max(next_branch[*net.find_population(ps.receiver)], *ps.branch + 1);
    }
    for (const auto& ps : spec.projections) {
        Projection p;
        p.id = ps.id;
        p.sender = *net.find_population(ps.sender);
        p.receiver = *net.find_population(ps.receiver);
        p.branch = ps.branch ? *ps.branch : next_branch[p.receiver]++;
        p.medium = ps.medium;
        p.polarity = ps.polarity;
        p.device = ps.device;
        p.kernel = ps.kernel;
        p.latency_ms = ps.latency_ms.value_or(ps.medium == Medium::Photonic ? spec.engine.dt : 1.0);
        p.gain = ps.gain;
        p.rule = ps.plasticity;
        p.plastic = ps.plasticity != PlasticityRule::None;
        p.always_on = ps.medium == Medium::Photonic && ps.photonic.always_on;
        p.n_pre = net.populations[p.sender].size;
        p.n_post = net.populations[p.receiver].size;

        const std::size_t n_syn = std::size_t{p.n_pre} * p.n_post;
        p.synapses.resize(n_syn);
        p.built.assign(n_syn, 1);
        p.pruned.assign(n_syn, 0);
        p.lesioned.assign(n_syn, 0);

        RngStream rng(seed, "build:" + ps.id);
        const bool sparse = ps.connectivity.kind == Connectivity::Kind::Bernoulli;
        for (std::size_t k = 0; k < n_syn; ++k) {
            // Both draws are taken for every pair so masks and weights stay aligned across p.
            const double u = rng.uniform();
            const double w = rng.uniform(ps.init.low, ps.init.high);
            if (sparse && !(u < ps.connectivity.p)) p.built[k] = 0;
            p.synapses[k].level = level_for(w, p.device);
        }
        for (const auto& [a, b] : ps.exclude) p.built[p.at(a, b)] = 0;
        net.projections.push_back(std::move(p));
    }
    net.index_topology();
    assign_wavelengths(net);
    check_fanout(net);
    return net;
}

void prune_in_place(Network& net, const std::string& projection_id, double fraction) {
    if (!(fraction >= 0.0 && fraction <= 1.0)) fail(ErrorKind::Domain, "prune: fraction must be in [0, 1]");
    auto& proj = net.projection(projection_id);

    std::vector<std::size_t> order;
    for (std::size_t k = 0; k < proj.synapses.size(); ++k)
        if (proj.built[k]) order.push_back(k);
    // Row-major index order is (sender, receiver) order, so a stable sort breaks ties correctly.
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return proj.synapses[a].level < proj.synapses[b].level;
    });
    const auto n_remove = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(order.size())));
    std::fill(proj.pruned.begin(), proj.pruned.end(), std::uint8_t{0});
    for (std::size_t r = 0; r < n_remove; ++r) proj.pruned[order[r]] = 1;
    if (proj.active_count() == 0)
        net.report.warnings.push_back("projection '" + projection_id + "': mask is empty after pruning");
}

void prune_to_density(Network& net, const std::string& projection_id, double density) {
    if (!(density >= 0.0 && density <= 1.0)) fail(ErrorKind::Domain, "prune: density must be in [0, 1]");
    auto& proj = net.projection(projection_id);
    const auto keep = static_cast<std::size_t>(std::floor(density * static_cast<double>(proj.built_count())));
    std::vector<std::size_t> order;
    for (std::size_t k = 0; k < proj.synapses.size(); ++k)
        if (proj.built[k] && !proj.pruned[k]) order.push_back(k);
    if (order.size() <= keep) return;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return proj.synapses[a].level < proj.synapses[b].level;
    });
    for (std::size_t r = 0; r < order.size() - keep; ++r) proj.pruned[order[r]] = 1;
    if (proj.active_count() == 0)
        net.report.warnings.push_back("projection '" + projection_id + "': mask is empty after pruning");
}

Network prune(Network net, const std::string& projection_id, double fraction) {
    prune_in_place(net, projection_id, fraction);
    return net;
}

std::string network_hash(const Network& net) {
    std::ostringstream os;
    os.precision(17);
    for (const auto& pop : net.populations) os << "P " << pop.id << ' ' << pop.size << ' ' << pop.offset << '\n';
    for (const auto& p : net.projections) {
        os << "J " << p.id << ' ' << p.sender << ' ' << p.receiver << ' ' << p.branch << ' ' << p.latency_ms << '\n';
        for (std::size_t k = 0; k < p.synapses.size(); ++k)
            os << int(p.built[k]) << int(p.pruned[k]) << int(p.lesioned[k]) << ':' << p.synapses[k].level << ' ';
        os << '\n';
        if (p.route)
            os << "R " << p.route->input_port << ' ' << p.route->output_port << ' ' << p.route->path.wavelength << ' '
               << p.route->budget.total_db << ' ' << p.route->budget.margin_db << '\n';
    }
    return sha256_hex(os.str());
}

} // namespace epicsim
