#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace sadvi {

// Deterministic random stream. The mt19937_64 engine is fully specified by
// the standard, but the <random> distributions are not, so every transform
// below is hand-rolled on top of the raw 64-bit output. Identical seeds give
// identical sequences on any platform.
class RngStream {
public:
    explicit RngStream(std::uint64_t seed) : seed_(seed), engine_(seed) {}

    std::uint64_t seed() const { return seed_; }

    std::uint64_t next_u64() { return engine_(); }

    // Uniform on [0, 1) with 53-bit resolution.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // Uniform on (0, 1], safe to pass to log().
    double uniform_pos() { return 1.0 - uniform(); }

    // Unbiased integer in [0, n) by rejection.
    std::uint64_t uniform_below(std::uint64_t n) {
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        std::uint64_t x;
        do {
            x = next_u64();
        } while (x >= limit);
        return x % n;
    }

    double exponential(double rate) { return -std::log(uniform_pos()) / rate; }

    double gumbel() { return -std::log(-std::log(uniform_pos())); }

    // Box-Muller; one draw per call (the spare is discarded to keep the
    // stream state a pure function of the number of calls made).
    double normal() {
        const double u1 = uniform_pos();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925287 * u2);
    }

    // Gamma with integer shape: sum of iid exponentials.
    double gamma_int_shape(int shape, double rate) {
        double acc = 0.0;
        for (int i = 0; i < shape; ++i) acc += -std::log(uniform_pos());
        return acc / rate;
    }

    double beta_int(int a, int b) {
        const double ga = gamma_int_shape(a, 1.0);
        const double gb = gamma_int_shape(b, 1.0);
        return ga / (ga + gb);
    }

    // Knuth's product method; adequate for the small means used here.
    int poisson(double mean) {
        const double limit = std::exp(-mean);
        double prod = 1.0;
        int k = -1;
        do {
            prod *= uniform();
            ++k;
        } while (prod > limit);
        return k;
    }

    int bernoulli(double p) { return uniform() < p ? 1 : 0; }

    int binomial(int n, double p) {
        int s = 0;
        for (int i = 0; i < n; ++i) s += bernoulli(p);
        return s;
    }

    template <class T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            const std::size_t j = static_cast<std::size_t>(uniform_below(i));
            std::swap(v[i - 1], v[j]);
        }
    }

    // Child stream whose seed mixes this stream's seed with a tag; used to
    // give replicates, data generation and evaluation independent substreams.
    RngStream fork(std::uint64_t tag) const {
        return RngStream(mix(seed_ + 0x9e3779b97f4a7c15ULL * (tag + 1)));
    }

private:
    static std::uint64_t mix(std::uint64_t x) {
        x += 0x9e3779b97f4a7c15ULL;
        x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
        x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
        return x ^ (x >> 31);
    }

    std::uint64_t seed_;
    std::mt19937_64 engine_;
};

// Substream tags used across the library.
namespace rng_tag {
inline constexpr std::uint64_t data = 1;
inline constexpr std::uint64_t init = 2;
inline constexpr std::uint64_t train = 3;
inline constexpr std::uint64_t eval = 4;
}  // namespace rng_tag

}  // namespace sadvi
