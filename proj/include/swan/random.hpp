#pragma once

#include <cstdint>
#include <limits>

namespace swan {

/// Counter-based generator: output i is a bijective mix of (key, i).
///
/// The key is derived from (seed, stream), so independent streams can be
/// handed to parallel workers without any shared state and the values drawn
/// for a given (seed, stream, index) never depend on scheduling. Satisfies
/// UniformRandomBitGenerator, but use uniform() rather than the <random>
/// distributions when bit-exact output across standard libraries matters.
class CounterRng
{
public:
    using result_type = std::uint64_t;

    explicit CounterRng(std::uint64_t seed, std::uint64_t stream = 0)
        : key_(mix(seed ^ mix(stream + 0x632be59bd9b4e019ULL)))
    {
    }

    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

    result_type operator()() { return at(counter_++); }

    /// Value at an absolute position of the stream (does not advance).
    result_type at(std::uint64_t index) const
    {
        return mix(key_ + (index + 1) * 0x9e3779b97f4a7c15ULL);
    }

    /// Uniform double in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    std::uint64_t position() const { return counter_; }

private:
    static constexpr std::uint64_t mix(std::uint64_t z)
    {
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    std::uint64_t key_;
    std::uint64_t counter_ = 0;
};

}  // namespace swan
