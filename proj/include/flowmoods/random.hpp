#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <utility>
#include <vector>

namespace flowmoods {

/// SplitMix64 finalizer. Used to derive independent child seeds, e.g. the
/// per-tree seed of a forest is derive_seed(forest_seed, tree_index).
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) noexcept;

// Deterministic generator. mt19937_64 output is fixed by the standard, but the
// std distributions are not, so every draw below is implemented here to keep
// artifacts reproducible across standard libraries.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next() { return engine_(); }
    /// Uniform integer in [0, n). n must be > 0.
    std::size_t uniform_index(std::size_t n);
    /// Uniform real in [0, 1) with 53 random bits.
    double uniform();
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    /// Standard normal via Box-Muller.
    double normal();
    bool bernoulli(double p) { return uniform() < p; }
    /// Index drawn proportionally to non-negative weights (sum must be > 0).
    std::size_t categorical(std::span<const double> weights);

    template <class T>
    void shuffle(std::vector<T>& items) {
        for (std::size_t i = items.size(); i > 1; --i) {
            std::swap(items[i - 1], items[uniform_index(i)]);
        }
    }

private:
    std::mt19937_64 engine_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace flowmoods
