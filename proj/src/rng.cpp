#include "agamp/rng.hpp"

#include <cmath>

#include "agamp/errors.hpp"

namespace agamp {

namespace {

constexpr std::uint32_t kPhiloxM0 = 0xD2511F53u;
constexpr std::uint32_t kPhiloxM1 = 0xCD9E8D57u;
constexpr std::uint32_t kPhiloxW0 = 0x9E3779B9u;  // golden ratio
constexpr std::uint32_t kPhiloxW1 = 0xBB67AE85u;  // sqrt(3) - 1

inline void philox_round(std::array<std::uint32_t, 4>& c, std::uint32_t k0,
                         std::uint32_t k1) {
    const std::uint64_t p0 = static_cast<std::uint64_t>(kPhiloxM0) * c[0];
    const std::uint64_t p1 = static_cast<std::uint64_t>(kPhiloxM1) * c[2];
    const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
    const auto lo0 = static_cast<std::uint32_t>(p0);
    const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
    const auto lo1 = static_cast<std::uint32_t>(p1);
    c = {hi1 ^ c[1] ^ k0, lo1, hi0 ^ c[3] ^ k1, lo0};
}

inline double u64_to_unit_double(std::uint64_t x) {
    // 53-bit mantissa convention: [0,1) on a 2^-53 grid.
    return static_cast<double>(x >> 11) * 0x1.0p-53;
}

}  // namespace

std::array<std::uint32_t, 4> philox4x32(const std::array<std::uint32_t, 4>& counter,
                                        const std::array<std::uint32_t, 2>& key) {
    std::array<std::uint32_t, 4> c = counter;
    std::uint32_t k0 = key[0];
    std::uint32_t k1 = key[1];
    for (int round = 0; round < 10; ++round) {
        if (round > 0) {
            k0 += kPhiloxW0;
            k1 += kPhiloxW1;
        }
        philox_round(c, k0, k1);
    }
    return c;
}

CounterRng::CounterRng(std::uint64_t seed, std::uint32_t stream, std::uint64_t element)
    : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)},
      ctr_{0u, stream, static_cast<std::uint32_t>(element),
           static_cast<std::uint32_t>(element >> 32)} {}

void CounterRng::refill() {
    out_ = philox4x32(ctr_, key_);
    ++ctr_[0];
    avail_ = 2;
}

std::uint64_t CounterRng::next_u64() {
    if (avail_ == 0) refill();
    --avail_;
    const int base = 2 * (1 - avail_);  // words (0,1) then (2,3)
    return (static_cast<std::uint64_t>(out_[base]) << 32) | out_[base + 1];
}

double CounterRng::next_double() { return u64_to_unit_double(next_u64()); }

double CounterRng::next_open_double() { return 1.0 - next_double(); }

double CounterRng::next_normal() {
    if (has_cached_normal_) {
        has_cached_normal_ = false;
        return cached_normal_;
    }
    const double u1 = next_open_double();
    const double u2 = next_double();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * M_PI * u2;
    cached_normal_ = radius * std::sin(angle);
    has_cached_normal_ = true;
    return radius * std::cos(angle);
}

long poisson_inverse_cdf(double rate, double u) {
    if (!(rate >= 0.0) || !std::isfinite(rate)) {
        throw DomainError("poisson_inverse_cdf: rate must be finite and >= 0");
    }
    if (rate == 0.0) return 0;
    double p = std::exp(-rate);
    double cdf = p;
    long k = 0;
    // Cap well beyond any mass reachable for rate < ~700.
    const long cap = static_cast<long>(rate + 40.0 * std::sqrt(rate) + 50.0);
    while (u > cdf && k < cap) {
        ++k;
        p *= rate / static_cast<double>(k);
        cdf += p;
    }
    return k;
}

long poisson_ptrs(double rate, CounterRng& rng, double first_u) {
    // Hoermann (1993), transformed rejection with squeeze.
    const double b = 0.931 + 2.53 * std::sqrt(rate);
    const double a = -0.059 + 0.02483 * b;
    const double inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
    const double v_r = 0.9277 - 3.6224 / (b - 2.0);
    const double log_rate = std::log(rate);
    bool use_first = true;
    for (;;) {
        const double u = (use_first ? first_u : rng.next_double()) - 0.5;
        use_first = false;
        const double v = rng.next_double();
        const double us = 0.5 - std::fabs(u);
        const double kf = std::floor((2.0 * a / us + b) * u + rate + 0.43);
        if (us >= 0.07 && v <= v_r) return static_cast<long>(kf);
        if (kf < 0.0 || (us < 0.013 && v > us)) continue;
        const double k = kf;
        if (std::log(v * inv_alpha / (a / (us * us) + b)) <=
            k * log_rate - rate - std::lgamma(k + 1.0)) {
            return static_cast<long>(kf);
        }
    }
}

long CounterRng::next_poisson(double rate) {
    const double u = next_double();
    if (rate < kPoissonPtrsThreshold) return poisson_inverse_cdf(rate, u);
    return poisson_ptrs(rate, *this, u);
}

}  // namespace agamp
