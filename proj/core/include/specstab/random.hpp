#pragma once

#include <cstdint>
#include <random>

#include "specstab/matrix.hpp"

namespace specstab {

/// Independent stream seed for unit `index` of a run seeded with `master`
/// (splitmix64 finalizer), so parallel units do not depend on scheduling.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) noexcept;

class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    double normal() { return normal_(engine_); }
    double uniform() { return uniform_(engine_); }
    std::uint64_t next() { return engine_(); }
    std::size_t below(std::size_t n) { return static_cast<std::size_t>(engine_() % n); }

    Vector gaussian_vector(std::size_t n, double stddev = 1.0);
    Matrix gaussian_matrix(std::size_t rows, std::size_t cols, double stddev = 1.0);
    /// Haar-distributed orthogonal matrix (QR of a Gaussian matrix with sign fix).
    Matrix orthogonal(std::size_t n);
    Vector unit_vector(std::size_t n);

    std::mt19937_64& engine() noexcept { return engine_; }

private:
    std::mt19937_64 engine_;
    std::normal_distribution<double> normal_{0.0, 1.0};
    std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

}  // namespace specstab
