#include "epicsim/ising.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <thread>

#include "epicsim/error.hpp"

namespace epicsim {

using nlohmann::json;

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

double wrap(double phi) {
    double w = std::fmod(phi, kTwoPi);
    if (w < 0) w += kTwoPi;
    return w;
}

} // namespace

IsingProblem IsingProblem::zeros(std::uint32_t n) {
    IsingProblem p;
    p.n = n;
    p.j.assign(std::size_t{n} * n, 0.0);
    p.h.assign(n, 0.0);
    return p;
}

void IsingProblem::set_coupling(std::uint32_t a, std::uint32_t b, double value) {
    if (a >= n || b >= n) fail(ErrorKind::Validation, "ising: spin index out of range");
    if (a == b) fail(ErrorKind::Validation, "ising: self-coupling J_ii must be 0");
    j[std::size_t{a} * n + b] = value;
    j[std::size_t{b} * n + a] = value;
}

void IsingProblem::validate() const {
    if (j.size() != std::size_t{n} * n) fail(ErrorKind::Validation, "ising: coupling matrix must be n x n");
    if (h.size() != n) fail(ErrorKind::Validation, "ising: field vector must have n entries");
    for (std::uint32_t a = 0; a < n; ++a) {
        if (coupling(a, a) != 0.0) fail(ErrorKind::Validation, "ising: J_ii must be 0");
        if (!std::isfinite(h[a])) fail(ErrorKind::Validation, "ising: non-finite field");
        for (std::uint32_t b = a + 1; b < n; ++b) {
            if (!std::isfinite(coupling(a, b))) fail(ErrorKind::Validation, "ising: non-finite coupling");
            if (coupling(a, b) != coupling(b, a)) fail(ErrorKind::Validation, "ising: J must be symmetric");
        }
    }
}

IsingProblem parse_ising(const json& doc) {
    if (!doc.is_object() || !doc.contains("n") || !doc.at("n").is_number_integer() || doc.at("n").get<std::int64_t>() < 1)
        fail(ErrorKind::Validation, "ising.n: expected a positive integer");
    IsingProblem p = IsingProblem::zeros(doc.at("n").get<std::uint32_t>());
    if (doc.contains("couplings")) {
        const json& cs = doc.at("couplings");
        if (!cs.is_array()) fail(ErrorKind::Validation, "ising.couplings: expected an array");
        for (std::size_t k = 0; k < cs.size(); ++k) {
            const json& c = cs[k];
            const std::string path = "ising.couplings[" + std::to_string(k) + "]";
            if (!c.is_array() || c.size() != 3 || !c[0].is_number_integer() || !c[1].is_number_integer() ||
                !c[2].is_number())
                fail(ErrorKind::Validation, path + ": expected [i, j, J]");
            const auto a = c[0].get<std::int64_t>(), b = c[1].get<std::int64_t>();
            if (a < 0 || b < 0 || a >= p.n || b >= p.n) fail(ErrorKind::Validation, path + ": spin index out of range");
            if (a == b) fail(ErrorKind::Validation, path + ": self-coupling");
            p.set_coupling(static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(b), c[2].get<double>());
        }
    }
    if (doc.contains("h")) {
        const json& h = doc.at("h");
        if (!h.is_array() || h.size() != p.n) fail(ErrorKind::Validation, "ising.h: expected n numbers");
        for (std::uint32_t i = 0; i < p.n; ++i) {
            if (!h[i].is_number()) fail(ErrorKind::Validation, "ising.h[" + std::to_string(i) + "]: expected a number");
            p.h[i] = h[i].get<double>();
        }
    }
    p.validate();
    return p;
}

IsingProblem load_ising(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorKind::Validation, "cannot open ising problem '" + path.string() + "'");
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        fail(ErrorKind::Validation, path.string() + ": " + e.what());
    }
    return parse_ising(doc);
}

json ising_to_json(const IsingProblem& p) {
    json cs = json::array();
    for (std::uint32_t a = 0; a < p.n; ++a)
        for (std::uint32_t b = a + 1; b < p.n; ++b)
            if (p.coupling(a, b) != 0.0) cs.push_back(json::array({a, b, p.coupling(a, b)}));
    return json{{"n", p.n}, {"couplings", std::move(cs)}, {"h", p.h}};
}

IsingProblem maxcut_problem(std::uint32_t n, std::span<const std::pair<std::uint32_t, std::uint32_t>> edges) {
    IsingProblem p = IsingProblem::zeros(n);
    for (const auto& [a, b] : edges) p.set_coupling(a, b, -1.0);
    return p;
}

double cut_value(const IsingProblem& maxcut, std::span<const int> spins) {
    if (spins.size() != maxcut.n) fail(ErrorKind::Validation, "cut_value: spin vector has wrong length");
    double cut = 0.0;
    for (std::uint32_t a = 0; a < maxcut.n; ++a)
        for (std::uint32_t b = a + 1; b < maxcut.n; ++b)
            if (maxcut.coupling(a, b) != 0.0) cut += (1.0 - spins[a] * spins[b]) / 2.0;
    return cut;
}

IsingProblem normalized(const IsingProblem& p) {
    double row_max = 0.0;
    for (std::uint32_t a = 0; a < p.n; ++a) {
        double row = std::abs(p.h[a]);
        for (std::uint32_t b = 0; b < p.n; ++b) row += std::abs(p.coupling(a, b));
        row_max = std::max(row_max, row);
    }
    if (row_max == 0.0) return p;
    IsingProblem q = p;
    for (auto& x : q.j) x /= row_max;
    for (auto& x : q.h) x /= row_max;
    return q;
}

double stability_number(const IsingProblem& p, const OscillatorParams& params) {
    double row_max = 0.0;
    for (std::uint32_t a = 0; a < p.n; ++a) {
        double row = std::abs(p.h[a]);
        for (std::uint32_t b = 0; b < p.n; ++b) row += std::abs(p.coupling(a, b));
        row_max = std::max(row_max, row);
    }
    return params.dt * (params.k_shil_max() + params.k_couple * row_max);
}

void check_stability(const IsingProblem& p, const OscillatorParams& params) {
    if (!(params.dt > 0)) fail(ErrorKind::Config, "oscillator: dt must be > 0");
    if (params.k_shil < 0 || params.k_shil_start < 0 || params.k_shil_end < 0 || params.k_couple < 0 || params.noise_amp < 0)
        fail(ErrorKind::Config, "oscillator: gains and noise must be >= 0");
    const double s = stability_number(p, params);
    if (!(s < 0.5))
        fail(ErrorKind::Config, "oscillator: stability bound violated: dt*(k_shil + k_couple*max row sum) = " +
                                    std::to_string(s) + " >= 0.5; reduce dt");
}

std::vector<double> step_oim(std::span<const double> phases, const IsingProblem& p, double k_shil, double k_couple,
                             double noise_amp, double dt, RngStream& rng) {
    if (phases.size() != p.n) fail(ErrorKind::Validation, "step_oim: phase vector has wrong length");
    std::vector<double> next(p.n), sn(p.n), cs(p.n);
    for (std::uint32_t a = 0; a < p.n; ++a) {
        sn[a] = std::sin(phases[a]);
        cs[a] = std::cos(phases[a]);
    }
    const double kick = noise_amp * std::sqrt(dt);
    for (std::uint32_t a = 0; a < p.n; ++a) {
        // sum_b J_ab sin(phi_a - phi_b) = sin phi_a sum J_ab cos phi_b - cos phi_a sum J_ab sin phi_b
        double jc = 0.0, js = 0.0;
        const double* row = p.j.data() + std::size_t{a} * p.n;
        for (std::uint32_t b = 0; b < p.n; ++b) {
            jc += row[b] * cs[b];
            js += row[b] * sn[b];
        }
        const double coupling = sn[a] * jc - cs[a] * js + p.h[a] * sn[a];
        const double drift = -k_shil * 2.0 * sn[a] * cs[a] - k_couple * coupling;
        next[a] = phases[a] + drift * dt;
    }
    // Noise draws happen in spin order after the drift so the stream use
    // does not depend on the coupling pattern.
    if (kick > 0)
        for (std::uint32_t a = 0; a < p.n; ++a) next[a] += kick * rng.normal();
    for (double& x : next) x = wrap(x);
    return next;
}

std::vector<double> step_oim(std::span<const double> phases, const IsingProblem& p, const OscillatorParams& params,
                             RngStream& rng) {
    return step_oim(phases, p, params.k_shil, params.k_couple, params.noise_amp, params.dt, rng);
}

double lyapunov(std::span<const double> phases, const IsingProblem& p, double k_shil, double k_couple) {
    double l = 0.0;
    for (std::uint32_t a = 0; a < p.n; ++a) {
        l -= 0.5 * k_shil * std::cos(2.0 * phases[a]);
        l -= k_couple * p.h[a] * std::cos(phases[a]);
        for (std::uint32_t b = 0; b < p.n; ++b) l -= 0.5 * k_couple * p.coupling(a, b) * std::cos(phases[a] - phases[b]);
    }
    return l;
}

std::vector<int> readout_spins(std::span<const double> phases) {
    std::vector<int> s(phases.size());
    // cos within rounding of zero counts as a tie and reads +1
    for (std::size_t i = 0; i < phases.size(); ++i) s[i] = std::cos(phases[i]) >= -1e-12 ? 1 : -1;
    return s;
}

double ising_energy(const IsingProblem& p, std::span<const int> spins) {
    if (spins.size() != p.n)
        fail(ErrorKind::Validation, "ising_energy: spin vector has " + std::to_string(spins.size()) + " entries, problem has " +
                                        std::to_string(p.n));
    double e = 0.0;
    for (std::uint32_t a = 0; a < p.n; ++a) {
        if (spins[a] != 1 && spins[a] != -1) fail(ErrorKind::Validation, "ising_energy: spins must be +1 or -1");
        e -= p.h[a] * spins[a];
        for (std::uint32_t b = a + 1; b < p.n; ++b) e -= p.coupling(a, b) * spins[a] * spins[b];
    }
    return e;
}

GroundState brute_force_ground(const IsingProblem& p) {
    if (p.n < 1 || p.n > 24) fail(ErrorKind::Validation, "brute_force_ground: n must be in [1, 24]");
    GroundState best;
    best.energy = std::numeric_limits<double>::infinity();
    std::vector<int> s(p.n);
    for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << p.n); ++mask) {
        for (std::uint32_t i = 0; i < p.n; ++i) s[i] = (mask >> i) & 1 ? -1 : 1;
        const double e = ising_energy(p, s);
        if (e < best.energy) {
            best.energy = e;
            best.spins = s;
        }
    }
    return best;
}

namespace {

RestartResult run_restart(const IsingProblem& p, const OscillatorParams& params, std::uint32_t r) {
    RngStream rng(params.seed, "restart:" + std::to_string(r));
    std::vector<double> phi(p.n);
    for (double& x : phi) x = rng.uniform(0.0, kTwoPi);
    const double span = params.steps > 1 ? static_cast<double>(params.steps - 1) : 1.0;
    for (std::uint32_t k = 0; k < params.steps; ++k) {
        const double ks = params.anneal
                              ? params.k_shil_start + (params.k_shil_end - params.k_shil_start) * static_cast<double>(k) / span
                              : params.k_shil;
        const double noise = params.anneal_noise ? params.noise_amp * (1.0 - static_cast<double>(k) / span) : params.noise_amp;
        phi = step_oim(phi, p, ks, params.k_couple, noise, params.dt, rng);
    }
    const double k_final = params.anneal ? params.k_shil_end : params.k_shil;
    for (std::uint32_t k = 0; k < params.polish_steps; ++k) phi = step_oim(phi, p, k_final, params.k_couple, 0.0, params.dt, rng);

    RestartResult out;
    out.spins = readout_spins(phi);
    out.energy = ising_energy(p, out.spins);
    for (double x : phi) {
        const double d = std::min({std::abs(x), std::abs(x - std::numbers::pi), std::abs(x - kTwoPi)});
        out.binarization_error = std::max(out.binarization_error, d);
    }
    return out;
}

} // namespace

SolveResult solve(const IsingProblem& p, const OscillatorParams& params) {
    p.validate();
    if (p.n < 1) fail(ErrorKind::Validation, "solve: need at least one spin");
    if (params.restarts < 1) fail(ErrorKind::Config, "solve: restarts must be >= 1");
    // Integrate on the problem scaled to unit largest row sum, so one schedule
    // fits every coupling scale; the ground states are unchanged.
    const IsingProblem q = normalized(p);
    check_stability(q, params);

    SolveResult out;
    out.restarts.resize(params.restarts);
    const unsigned workers = std::max(1u, std::min<unsigned>(std::thread::hardware_concurrency(), params.restarts));
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w)
        pool.emplace_back([&, w] {
            for (std::uint32_t r = w; r < params.restarts; r += workers) out.restarts[r] = run_restart(q, params, r);
        });
    for (auto& t : pool) t.join();
    for (auto& r : out.restarts) r.energy = ising_energy(p, r.spins);

    for (std::uint32_t r = 1; r < params.restarts; ++r)
        if (out.restarts[r].energy < out.restarts[out.best_restart].energy) out.best_restart = r;
    out.spins = out.restarts[out.best_restart].spins;
    out.energy = out.restarts[out.best_restart].energy;
    return out;
}

} // namespace epicsim
