#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

namespace ocfl {

// Deterministic random source. All distributions are implemented on top of a
// fixed 64-bit generator so that results are bit-identical across platforms
// and standard-library versions (std::normal_distribution and friends make no
// such guarantee).
//
// Seeding is splittable: derive_seed(master, label) yields an independent
// stream seed for a named subsystem. The experiment pipeline uses the labels
//   "datagen", "model-init", "client/<id>/round/<t>", "clustering", "xai"
// so that, e.g., a change in how clustering consumes randomness can never
// perturb the generated datasets.
std::uint64_t splitmix64(std::uint64_t& state);
std::uint64_t derive_seed(std::uint64_t master, std::string_view label);

class Rng {
public:
    explicit Rng(std::uint64_t seed);

    std::uint64_t next_u64();

    // Uniform on [0, 1).
    double uniform();
    // Uniform on [lo, hi).
    double uniform(double lo, double hi);
    // Uniform integer in [0, n). Requires n > 0.
    std::uint64_t uniform_int(std::uint64_t n);
    // Standard normal via Box-Muller (one value cached per pair).
    double normal();
    double normal(double mean, double stddev);
    // Gamma(shape, 1) via Marsaglia-Tsang; shape > 0.
    double gamma(double shape);
    // Symmetric-capable Dirichlet draw; alphas all > 0.
    std::vector<double> dirichlet(const std::vector<double>& alphas);
    // Index draw from a probability vector (assumed to sum to ~1).
    std::size_t categorical(const std::vector<double>& probs);

    template <typename T>
    void shuffle(std::vector<T>& v) {
        if (v.size() < 2) return;
        for (std::size_t i = v.size() - 1; i > 0; --i) {
            std::size_t j = static_cast<std::size_t>(uniform_int(i + 1));
            std::swap(v[i], v[j]);
        }
    }

private:
    std::uint64_t s_[4];  // xoshiro256++ state
    bool have_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace ocfl
