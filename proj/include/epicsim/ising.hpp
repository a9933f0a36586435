#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include <json.hpp>

#include "epicsim/rng.hpp"

namespace epicsim {

/// E(s) = -sum_{i<j} J_ij s_i s_j - sum_i h_i s_i. The same convention is
/// used by the oscillator dynamics, the brute-force oracle and MAX-CUT.
struct IsingProblem {
    std::uint32_t n = 0;
    std::vector<double> j; // n*n, symmetric, zero diagonal
    std::vector<double> h; // n

    static IsingProblem zeros(std::uint32_t n);
    double coupling(std::uint32_t a, std::uint32_t b) const { return j[std::size_t{a} * n + b]; }
    void set_coupling(std::uint32_t a, std::uint32_t b, double value);
    /// Throws Validation on asymmetry, a nonzero diagonal or bad sizes.
    void validate() const;
};

/// {"n": 3, "couplings": [[0, 1, -1.0], ...], "h": [...]}; h optional.
IsingProblem parse_ising(const nlohmann::json& doc);
IsingProblem load_ising(const std::filesystem::path& path);
nlohmann::json ising_to_json(const IsingProblem& p);

/// MAX-CUT on an unweighted graph as an Ising problem: J = -adjacency.
IsingProblem maxcut_problem(std::uint32_t n, std::span<const std::pair<std::uint32_t, std::uint32_t>> edges);
/// Number of edges whose endpoints carry opposite spins.
double cut_value(const IsingProblem& maxcut, std::span<const int> spins);

struct OscillatorParams {
    double k_shil = 2.0;      // locking strength when anneal is off
    double k_couple = 12.0;  // applies to the normalized problem inside solve
    double noise_amp = 0.75;
    double dt = 0.01;
    std::uint32_t steps = 10000;
    bool anneal = true;       // linear ramp of k_shil over `steps`
    double k_shil_start = 0.1;
    double k_shil_end = 2.0;
    bool anneal_noise = true; // noise ramps from noise_amp down to 0 with the anneal
    std::uint32_t polish_steps = 500; // noise-free steps at the final k_shil
    std::uint32_t restarts = 50;
    std::uint64_t seed = 1;

    double k_shil_max() const { return anneal ? std::max(k_shil_start, k_shil_end) : k_shil; }
};

/// J and h divided by max_i (sum_j |J_ij| + |h_i|); a problem with no couplings is returned as is.
IsingProblem normalized(const IsingProblem& p);

/// dt (k_shil_max + k_couple * max_i (sum_j |J_ij| + |h_i|)); must stay below 0.5.
double stability_number(const IsingProblem& p, const OscillatorParams& params);
/// Throws Config when the bound is violated.
void check_stability(const IsingProblem& p, const OscillatorParams& params);

/// One Euler-Maruyama step of
///   dphi_i = [-k_shil sin 2phi_i - k_couple (sum_j J_ij sin(phi_i - phi_j) + h_i sin phi_i)] dt
///            + noise sqrt(dt) xi.
/// Phases are returned wrapped to [0, 2pi).
std::vector<double> step_oim(std::span<const double> phases, const IsingProblem& p, double k_shil, double k_couple,
                             double noise_amp, double dt, RngStream& rng);
/// Same with params.k_shil and params.noise_amp.
std::vector<double> step_oim(std::span<const double> phases, const IsingProblem& p, const OscillatorParams& params,
                             RngStream& rng);

/// L = -(k_shil/2) sum cos 2phi_i - (k_couple/2) sum_{i,j} J_ij cos(phi_i - phi_j) - k_couple sum h_i cos phi_i.
/// The noise-free flow is its gradient descent.
double lyapunov(std::span<const double> phases, const IsingProblem& p, double k_shil, double k_couple);

/// s_i = +1 when cos phi_i >= 0, else -1.
std::vector<int> readout_spins(std::span<const double> phases);

double ising_energy(const IsingProblem& p, std::span<const int> spins);

struct GroundState {
    std::vector<int> spins;
    double energy = 0.0;
};

/// Exhaustive minimum for n <= 24. Ties keep the lexicographically first
/// configuration with spin 0 = +1.
GroundState brute_force_ground(const IsingProblem& p);

struct RestartResult {
    std::vector<int> spins;
    double energy = 0.0;
    double binarization_error = 0.0; // max distance of a final phase from {0, pi}
};

struct SolveResult {
    std::vector<int> spins;
    double energy = 0.0;
    std::uint32_t best_restart = 0;
    std::vector<RestartResult> restarts;
};

/// Integrates the normalized problem and scores spins on the original.
/// Restarts are independent (stream "restart:<r>") and may run in parallel;
/// the best is chosen by (energy, restart index).
SolveResult solve(const IsingProblem& p, const OscillatorParams& params);

} // namespace epicsim
