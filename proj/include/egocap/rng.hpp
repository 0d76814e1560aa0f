#pragma once

#include <algorithm>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace egocap {

// Seedable, splittable generator threaded through every stochastic step.
// Child streams come from split(), so a consumer that draws a variable
// number of values does not shift the parent's later draws beyond the
// single seed it consumes.
class Rng {
public:
    explicit Rng(std::uint64_t seed = 0);

    Rng split();

    std::uint64_t next_u64() { return engine_(); }
    // [0, 1)
    double uniform();
    double uniform(double lo, double hi);
    // (0, 1), never exactly 0 or 1.
    double uniform_open();
    double normal(double mean = 0.0, double stddev = 1.0);
    // Uniform integer in [0, n).
    std::size_t index(std::size_t n);
    bool bernoulli(double p);
    // Standard Gumbel draw -log(-log u).
    double gumbel();

    template <typename T>
    void shuffle(std::vector<T>& items) {
        for (std::size_t i = items.size(); i > 1; --i) std::swap(items[i - 1], items[index(i)]);
    }

    std::string state() const;
    void restore(const std::string& state);

    bool operator==(const Rng& other) const { return engine_ == other.engine_; }

private:
    std::mt19937_64 engine_;
};

}  // namespace egocap
