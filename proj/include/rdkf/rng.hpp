#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <vector>

namespace rdkf {

// Random source with fully pinned output sequences. std::mt19937_64 itself is
// specified bit-for-bit by the standard, but the library distributions
// (normal, uniform_int, shuffle) are not, so all transforms are implemented
// here. Reports produced from the same seed must be byte-identical across
// builds and across serial/parallel execution; that property rests on this
// class.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    // Independent substream, e.g. one per Monte Carlo run. SplitMix64 over
    // (seed, stream) decorrelates the seeds handed to the engines.
    static Rng substream(std::uint64_t seed, std::uint64_t stream) {
        std::uint64_t x = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
        x = splitmix(x);
        x ^= splitmix(stream + 0x632be59bd9b4e019ULL);
        return Rng(splitmix(x));
    }

    std::uint64_t next_u64() { return engine_(); }

    // Uniform on [0,1) with 53 random bits.
    double uniform01() {
        return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    }

    // Uniform integer in [0, bound). Rejection keeps the result unbiased.
    std::uint64_t uniform_int(std::uint64_t bound) {
        if (bound == 0) throw std::invalid_argument("Rng::uniform_int: bound must be positive");
        std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
        std::uint64_t v;
        do {
            v = engine_();
        } while (v >= limit);
        return v % bound;
    }

    // Standard normal via Box-Muller; the pair is generated together and the
    // second value cached, so draws are consumed in a fixed order.
    double normal() {
        if (has_cached_) {
            has_cached_ = false;
            return cached_;
        }
        double u1, u2;
        do {
            u1 = uniform01();
        } while (u1 <= 0.0);
        u2 = uniform01();
        double r = std::sqrt(-2.0 * std::log(u1));
        double a = 6.283185307179586476925287 * u2;
        cached_ = r * std::sin(a);
        has_cached_ = true;
        return r * std::cos(a);
    }

    // Fisher-Yates permutation of {0..n-1}.
    template <typename Int>
    std::vector<Int> permutation(Int n) {
        std::vector<Int> p(static_cast<std::size_t>(n));
        for (Int i = 0; i < n; ++i) p[static_cast<std::size_t>(i)] = i;
        for (Int i = n; i > 1; --i) {
            std::uint64_t j = uniform_int(static_cast<std::uint64_t>(i));
            std::swap(p[static_cast<std::size_t>(i - 1)], p[static_cast<std::size_t>(j)]);
        }
        return p;
    }

  private:
    static std::uint64_t splitmix(std::uint64_t x) {
        x += 0x9e3779b97f4a7c15ULL;
        x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
        x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
        return x ^ (x >> 31);
    }

    std::mt19937_64 engine_;
    double cached_ = 0.0;
    bool has_cached_ = false;
};

}  // namespace rdkf
