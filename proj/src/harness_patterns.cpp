#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "epicsim/error.hpp"
#include "epicsim/harness.hpp"
#include "epicsim/rng.hpp"

namespace epicsim {

namespace {

// log C(n, k) via lgamma; exact enough to compare against small pair counts.
double log_choose(std::uint32_t n, std::uint32_t k) {
    return std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0);
}

std::vector<double> random_pattern(std::uint32_t size, std::uint32_t k, RngStream& rng) {
    std::vector<std::uint32_t> idx(size);
    std::iota(idx.begin(), idx.end(), 0u);
    // Partial Fisher-Yates: the first k slots are a uniform k-subset.
    for (std::uint32_t i = 0; i < k; ++i) std::swap(idx[i], idx[i + rng.below(size - i)]);
    std::vector<double> p(size, 0.0);
    for (std::uint32_t i = 0; i < k; ++i) p[idx[i]] = 1.0;
    return p;
}

std::vector<double> teacher_pattern(const std::vector<double>& target, const TeacherLevels& t) {
    std::vector<double> out(target.size());
    for (std::size_t j = 0; j < target.size(); ++j) out[j] = target[j] > 0.5 ? t.on : t.off;
    return out;
}

} // namespace

std::uint32_t active_bits(std::uint32_t size, double sparsity) {
    return std::max<std::uint32_t>(1, static_cast<std::uint32_t>(std::lround(sparsity * size)));
}

PatternDataset gen_pattern_task(std::uint32_t n_pairs, std::uint32_t input_size, std::uint32_t output_size,
                                double sparsity, std::uint64_t seed) {
    if (!(sparsity > 0.0 && sparsity < 1.0)) fail(ErrorKind::Domain, "gen_pattern_task: sparsity must be in (0, 1)");
    if (input_size == 0 || output_size == 0) fail(ErrorKind::Domain, "gen_pattern_task: sizes must be positive");
    const std::uint32_t k_in = std::min(active_bits(input_size, sparsity), input_size);
    const std::uint32_t k_out = std::min(active_bits(output_size, sparsity), output_size);
    if (std::log(static_cast<double>(n_pairs)) > log_choose(input_size, k_in) + 1e-9)
        fail(ErrorKind::Domain, "gen_pattern_task: " + std::to_string(n_pairs) + " distinct inputs requested, only C(" +
                                    std::to_string(input_size) + "," + std::to_string(k_in) + ") exist");

    PatternDataset d{input_size, output_size, sparsity, seed, {}};
    RngStream rng(seed, "patterns");
    std::set<std::vector<double>> seen;
    while (d.pairs.size() < n_pairs) {
        auto in = random_pattern(input_size, k_in, rng);
        auto out = random_pattern(output_size, k_out, rng);
        if (!seen.insert(in).second) continue; // resample on collision
        d.pairs.push_back({std::move(in), std::move(out)});
    }
    return d;
}

double recall_score(const std::vector<double>& output, const std::vector<double>& target) {
    if (output.size() != target.size() || output.empty())
        fail(ErrorKind::Validation, "recall_score: output and target sizes differ");
    const auto k = static_cast<std::size_t>(std::count_if(target.begin(), target.end(), [](double t) { return t > 0.5; }));
    if (k == 0) return 1.0;
    std::vector<double> sorted(output);
    std::sort(sorted.begin(), sorted.end(), std::greater<>());
    const double kth = sorted[k - 1];
    std::size_t above = 0, tied = 0;
    double hit_above = 0.0, hit_tied = 0.0;
    for (std::size_t j = 0; j < output.size(); ++j) {
        const bool t = target[j] > 0.5;
        if (output[j] > kth) {
            ++above;
            hit_above += t;
        } else if (output[j] == kth) {
            ++tied;
            hit_tied += t;
        }
    }
    const double slots = static_cast<double>(k - above);
    return (hit_above + hit_tied * slots / static_cast<double>(tied)) / static_cast<double>(k);
}

NetworkSpec pattern_network_spec(std::uint32_t input_size, std::uint32_t output_size, std::uint64_t seed) {
    // Output cells refract for 10 ms so their rate tops out at max_rate_hz;
    // activity then stays graded across the whole drive range.
    const nlohmann::json lif{{"model", "LIF"}, {"tau_m", 10.0}, {"t_ref", 10.0}, {"theta0", 1.0}};
    nlohmann::json doc{
        {"version", kSpecVersion},
        {"name", "pattern_association"},
        {"engine", {{"dt", 0.1}, {"seed", seed}, {"max_rate_hz", 100.0}}},
        {"populations",
         {{{"id", "in"}, {"size", input_size}, {"soma", lif}}, {{"id", "out"}, {"size", output_size}, {"soma", lif}}}},
        {"projections",
         {{{"id", "in_out"},
           {"sender", "in"},
           {"receiver", "out"},
           {"medium", "electronic"},
           {"kernel", {{"kind", "leaky_recurrent"}, {"tau", 10.0}}},
           {"gain", 1.0},
           {"init", {{"low", 0.2}, {"high", 0.4}}},
           {"plasticity", "xcal"}}}},
        {"plasticity", {{"xcal", {{"lrate", 0.2}, {"phase_len", 50.0}, {"tau_avg", 10.0}}}}},
        {"layers", {{"input", "in"}, {"output", "out"}}}};
    return parse_spec(doc);
}

double evaluate_patterns(Engine& engine, const PatternDataset& data) {
    if (data.pairs.empty()) return 0.0;
    double sum = 0.0;
    for (const auto& p : data.pairs) sum += recall_score(engine.infer(p.input), p.target);
    return sum / static_cast<double>(data.pairs.size());
}

TaskResult train_patterns(Engine& engine, const PatternDataset& data, const TrainOptions& opts) {
    TaskResult res;
    res.seed = data.seed;
    RngStream order_rng(opts.shuffle_seed, "presentation");
    std::vector<std::size_t> order(data.pairs.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    double energy_total = 0.0;
    for (std::uint32_t epoch = 1; epoch <= opts.max_epochs; ++epoch) {
        for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[order_rng.below(i)]);
        const double before = engine.ledger().total_fj();
        for (auto idx : order) engine.train_trial(data.pairs[idx].input, teacher_pattern(data.pairs[idx].target, opts.teacher));
        const double spent = engine.ledger().total_fj() - before;
        energy_total += spent;
        res.trials += static_cast<std::uint32_t>(order.size());
        const double recall = evaluate_patterns(engine, data);
        res.epochs.push_back({epoch, recall, spent, static_cast<std::uint32_t>(order.size())});
        res.accuracy = recall;
        if (recall >= opts.criterion && !res.epochs_to_criterion) res.epochs_to_criterion = epoch;
        if (opts.stop_at_criterion && res.epochs_to_criterion) break;
    }
    if (res.trials > 0) res.energy_per_trial_j = energy_total * kJoulesPerFemtojoule / res.trials;
    return res;
}

nlohmann::json TaskResult::to_json() const {
    nlohmann::json j{{"accuracy", accuracy},           {"mean_steps", mean_steps}, {"optimal_steps", optimal_steps},
                     {"energy_per_trial_j", energy_per_trial_j}, {"trials", trials},  {"seed", seed}};
    j["epochs_to_criterion"] = epochs_to_criterion ? nlohmann::json(*epochs_to_criterion) : nlohmann::json(nullptr);
    auto& ep = j["epochs"] = nlohmann::json::array();
    for (const auto& e : epochs)
        ep.push_back({{"epoch", e.epoch}, {"recall", e.recall}, {"energy_fj", e.energy_fj}, {"trials", e.trials}});
    return j;
}

} // namespace epicsim
