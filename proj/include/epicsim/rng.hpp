#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <string_view>

namespace epicsim {

/// Reproducible random stream. The full generator state round-trips through
/// `state()` / `set_state()` so snapshots resume bit-identically.
///
/// Normal deviates use Box-Muller without caching the second value, so the
/// stream carries no hidden distribution state.
class RngStream {
public:
    RngStream() : RngStream(0, "") {}
    RngStream(std::uint64_t seed, std::string_view purpose);

    std::uint64_t next_u64() { return engine_(); }
    /// Uniform in [0, 1).
    double uniform();
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    double normal(double mean = 0.0, double stddev = 1.0);
    bool bernoulli(double p) { return uniform() < p; }
    /// Uniform integer in [0, n).
    std::uint64_t below(std::uint64_t n);

    std::string state() const;
    void set_state(const std::string& text);

    bool operator==(const RngStream& other) const { return engine_ == other.engine_; }

private:
    std::mt19937_64 engine_;
};

} // namespace epicsim
