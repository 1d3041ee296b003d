#include "specstab/random.hpp"

#include <cmath>

namespace specstab {

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) noexcept {
    std::uint64_t z = master + 0x9e3779b97f4a7c15ULL * (index + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

Vector Rng::gaussian_vector(std::size_t n, double stddev) {
    Vector v(n);
    for (double& x : v)
        x = stddev * normal();
    return v;
}

Matrix Rng::gaussian_matrix(std::size_t rows, std::size_t cols, double stddev) {
    Matrix m(rows, cols);
    for (double& x : m.data())
        x = stddev * normal();
    return m;
}

Matrix Rng::orthogonal(std::size_t n) {
    // Modified Gram-Schmidt on the columns of a Gaussian matrix, twice for stability.
    Matrix g = gaussian_matrix(n, n);
    std::vector<Vector> cols(n);
    for (std::size_t j = 0; j < n; ++j)
        cols[j] = g.col(j);
    for (std::size_t j = 0; j < n; ++j) {
        for (int pass = 0; pass < 2; ++pass)
            for (std::size_t k = 0; k < j; ++k) {
                const double p = dot(cols[k], cols[j]);
                for (std::size_t i = 0; i < n; ++i)
                    cols[j][i] -= p * cols[k][i];
            }
        const double nrm = norm2(cols[j]);
        for (double& x : cols[j])
            x /= nrm;
    }
    Matrix q(n, n);
    for (std::size_t j = 0; j < n; ++j)
        for (std::size_t i = 0; i < n; ++i)
            q(i, j) = cols[j][i];
    return q;
}

Vector Rng::unit_vector(std::size_t n) {
    Vector v = gaussian_vector(n);
    const double nrm = norm2(v);
    for (double& x : v)
        x /= nrm;
    return v;
}

}  // namespace specstab
