#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <vector>

namespace tsrisk {

// Seeded generator with distribution code of our own, so sequences are the
// same on every standard library (std:: distributions are
// implementation-defined).
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next() { return engine_(); }
    // [0, 1)
    double uniform();
    double uniform(double lo, double hi);
    // [0, n)
    std::size_t below(std::size_t n);
    double normal();
    bool bernoulli(double p) { return uniform() < p; }

    std::vector<std::size_t> permutation(std::size_t n);
    // k distinct indices from [0, n), in draw order.
    std::vector<std::size_t> sample(std::size_t n, std::size_t k);

    // Index drawn proportionally to `weights`.
    std::size_t pick(const std::vector<double>& weights);

private:
    std::mt19937_64 engine_;
};

// Stable child seed for a named sub-stream.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

} // namespace tsrisk
