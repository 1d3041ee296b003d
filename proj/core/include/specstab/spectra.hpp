#pragma once

#include <optional>

#include "specstab/linalg.hpp"

namespace specstab {

/// Nonincreasing, nonnegative singular values of one operator.
class Spectrum {
public:
    Spectrum() = default;
    /// Sorts into nonincreasing order; rejects negative or non-finite entries.
    explicit Spectrum(Vector sigma, double rank_tol = kRankTol);

    /// Singular values of `a`, with values below rank_tol·σ₁ set to exactly zero.
    static Spectrum of(const Matrix& a, double rank_tol = kRankTol);

    const Vector& values() const noexcept { return sigma_; }
    std::size_t size() const noexcept { return sigma_.size(); }
    double operator[](std::size_t k) const noexcept { return sigma_[k]; }
    double top() const noexcept { return sigma_.empty() ? 0.0 : sigma_.front(); }
    double sum() const noexcept;
    double rank_tol() const noexcept { return rank_tol_; }
    std::size_t rank() const noexcept;

    Spectrum scaled(double c) const;

private:
    Vector sigma_;
    double rank_tol_ = kRankTol;
};

/// −Σ p_k ln p_k with p_k = σ_k/Σσ_j, in nats; 0 for the zero spectrum.
double spectral_entropy(const Spectrum& s);

/// Σ p_k², the order-2 collision mass; always ≥ exp(−H_S).
double collision_mass(const Spectrum& s);

/// Fraction of mass in the top ⌈α·r⌉ values, r = len(σ). α ∈ (0, 1].
double spectral_concentration(const Spectrum& s, double alpha);

/// Mean of the two middle order statistics for even length.
double median(const Spectrum& s);

/// σ₁ / median(σ); nullopt when the median is zero.
std::optional<double> attribution_condition_number(const Spectrum& s);

/// True iff every sorted partial sum of `a` dominates that of `b`. Requires
/// equal lengths and sums equal to 1e-9 relative.
bool majorizes(const Spectrum& a, const Spectrum& b);

struct SpectralSummary {
    Spectrum sigma;
    double entropy_nats = 0.0;
    double sc_quarter = 0.0;  // NaN for the zero spectrum
    double sc_half = 0.0;     // NaN for the zero spectrum
    double acn = 0.0;         // +inf when the median is zero
    double top = 0.0;
    double trace_sum = 0.0;
};

SpectralSummary summarize(const Spectrum& s);

}  // namespace specstab
