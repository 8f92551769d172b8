#pragma once

#include <array>
#include <cstdint>

namespace agamp {

// Philox4x32-10 counter-based generator (Salmon et al., SC'11), fixed at 10
// rounds. Pure 32/64-bit integer arithmetic, so the uniform bit stream is
// identical on every conforming platform. Each (seed, stream, element) triple
// names an independent substream, which is what makes row-/component-parallel
// generation deterministic regardless of thread count.
std::array<std::uint32_t, 4> philox4x32(const std::array<std::uint32_t, 4>& counter,
                                        const std::array<std::uint32_t, 2>& key);

// Sequential view over one Philox substream.
//
// Layout: key = seed (lo32, hi32); counter words = (block, stream,
// element lo32, element hi32). One block yields four 32-bit words, consumed
// as two 64-bit draws.
class CounterRng {
  public:
    CounterRng(std::uint64_t seed, std::uint32_t stream, std::uint64_t element = 0);

    std::uint64_t next_u64();

    // Uniform on [0,1), 53 random mantissa bits.
    double next_double();

    // Uniform on (0,1]; safe under log().
    double next_open_double();

    // Standard normal via Box-Muller (two uniforms per pair, second value
    // cached).
    double next_normal();

    // Poisson draw; CDF inversion below kPoissonPtrsThreshold, Hoermann's
    // PTRS transformed rejection above it.
    long next_poisson(double rate);

    static constexpr double kPoissonPtrsThreshold = 10.0;

  private:
    void refill();

    std::array<std::uint32_t, 2> key_;
    std::array<std::uint32_t, 4> ctr_;
    std::array<std::uint32_t, 4> out_{};
    int avail_ = 0;
    double cached_normal_ = 0.0;
    bool has_cached_normal_ = false;
};

// Poisson(rate) by summing pmf terms until the CDF passes u; exactly one
// uniform consumed. Intended for rate < kPoissonPtrsThreshold but valid for
// any moderate rate.
long poisson_inverse_cdf(double rate, double u);

// PTRS rejection sampler for rate >= 10. `first_u` is a uniform the caller
// already drew (it seeds the first acceptance attempt); further uniforms come
// from `rng`.
long poisson_ptrs(double rate, CounterRng& rng, double first_u);

// Stream ids. Anything generating from a ProblemInstance seed must use one of
// these so the draws never collide.
enum StreamId : std::uint32_t {
    kStreamMatrix = 1,
    kStreamSignal = 2,
    kStreamChannel = 3,
    kStreamSeOutput = 100,   // + iteration
    kStreamSeInput = 101,    // + iteration (offset by kSeStreamStride)
    kStreamDiagnostics = 7,
};

constexpr std::uint32_t kSeStreamStride = 2;

}  // namespace agamp
