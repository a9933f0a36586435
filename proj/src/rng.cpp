#include "epicsim/rng.hpp"

#include <cmath>
#include <numbers>
#include <sstream>
#include <vector>

#include "epicsim/error.hpp"

namespace epicsim {

RngStream::RngStream(std::uint64_t seed, std::string_view purpose) {
    // Purpose strings give independent streams from one user seed.
    std::vector<std::uint32_t> words{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)};
    for (unsigned char c : purpose) words.push_back(c);
    std::seed_seq stable(words.begin(), words.end());
    engine_.seed(stable);
}

double RngStream::uniform() {
    // 53 random bits -> [0, 1).
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

double RngStream::normal(double mean, double stddev) {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double z = std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    return mean + stddev * z;
}

std::uint64_t RngStream::below(std::uint64_t n) {
    if (n == 0) fail(ErrorKind::Domain, "RngStream::below: n must be positive");
    // Rejection sampling keeps the draw unbiased.
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t x = engine_();
    while (x >= limit) x = engine_();
    return x % n;
}

std::string RngStream::state() const {
    std::ostringstream os;
    os << engine_;
    return os.str();
}

void RngStream::set_state(const std::string& text) {
    std::istringstream is(text);
    is >> engine_;
    if (!is) fail(ErrorKind::Version, "corrupt rng stream state");
}

} // namespace epicsim
