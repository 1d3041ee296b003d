#include "specstab/spectra.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>

namespace specstab {

Spectrum::Spectrum(Vector sigma, double rank_tol) : sigma_(std::move(sigma)), rank_tol_(rank_tol) {
    for (double s : sigma_)
        if (!std::isfinite(s) || s < 0.0)
            throw std::invalid_argument("Spectrum: singular values must be finite and nonnegative");
    std::sort(sigma_.begin(), sigma_.end(), std::greater<>());
}

Spectrum Spectrum::of(const Matrix& a, double rank_tol) {
    Vector sigma = singular_values(a);
    const double cutoff = sigma.empty() ? 0.0 : rank_tol * sigma.front();
    for (double& s : sigma)
        if (s <= cutoff)
            s = 0.0;
    return Spectrum(std::move(sigma), rank_tol);
}

double Spectrum::sum() const noexcept {
    double s = 0.0;
    for (double v : sigma_)
        s += v;
    return s;
}

std::size_t Spectrum::rank() const noexcept {
    const double cutoff = rank_tol_ * top();
    return static_cast<std::size_t>(
        std::count_if(sigma_.begin(), sigma_.end(), [&](double s) { return s > cutoff && s > 0.0; }));
}

Spectrum Spectrum::scaled(double c) const {
    Vector v = sigma_;
    for (double& x : v)
        x *= c;
    return Spectrum(std::move(v), rank_tol_);
}

double spectral_entropy(const Spectrum& s) {
    const double total = s.sum();
    if (total <= 0.0)
        return 0.0;
    double h = 0.0;
    for (double v : s.values()) {
        if (v <= 0.0)
            continue;
        const double p = v / total;
        h -= p * std::log(p);
    }
    // clamp roundoff outside [0, ln r]
    return std::clamp(h, 0.0, std::log(static_cast<double>(s.size())));
}

double collision_mass(const Spectrum& s) {
    const double total = s.sum();
    if (total <= 0.0)
        return 1.0;
    double m = 0.0;
    for (double v : s.values())
        m += (v / total) * (v / total);
    return m;
}

double spectral_concentration(const Spectrum& s, double alpha) {
    if (!(alpha > 0.0 && alpha <= 1.0))
        throw std::invalid_argument("spectral_concentration: alpha must lie in (0, 1]");
    const double total = s.sum();
    if (!(total > 0.0))
        throw std::invalid_argument("spectral_concentration: zero spectrum");
    const auto r = static_cast<double>(s.size());
    const auto k = static_cast<std::size_t>(std::ceil(alpha * r - 1e-12));
    double head = 0.0;
    for (std::size_t i = 0; i < std::max<std::size_t>(k, 1); ++i)
        head += s[i];
    return std::min(head / total, 1.0);
}

double median(const Spectrum& s) {
    const std::size_t n = s.size();
    if (n == 0)
        throw std::invalid_argument("median: empty spectrum");
    // values are sorted descending; the median is symmetric in order
    if (n % 2 == 1)
        return s[n / 2];
    return 0.5 * (s[n / 2 - 1] + s[n / 2]);
}

std::optional<double> attribution_condition_number(const Spectrum& s) {
    if (s.size() == 0)
        return std::nullopt;
    const double m = median(s);
    if (!(m > 0.0))
        return std::nullopt;
    return s.top() / m;
}

bool majorizes(const Spectrum& a, const Spectrum& b) {
    if (a.size() != b.size())
        throw std::invalid_argument("majorizes: length mismatch");
    const double sa = a.sum();
    const double sb = b.sum();
    const double scale = std::max({std::abs(sa), std::abs(sb), std::numeric_limits<double>::min()});
    if (std::abs(sa - sb) > 1e-9 * scale)
        throw std::invalid_argument("majorizes: sums differ");
    const double slack = 1e-12 * scale;
    double pa = 0.0, pb = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) {
        pa += a[k];
        pb += b[k];
        if (pa + slack < pb)
            return false;
    }
    return true;
}

SpectralSummary summarize(const Spectrum& s) {
    SpectralSummary out;
    out.sigma = s;
    out.entropy_nats = spectral_entropy(s);
    out.top = s.top();
    out.trace_sum = s.sum();
    if (out.trace_sum > 0.0) {
        out.sc_quarter = spectral_concentration(s, 0.25);
        out.sc_half = spectral_concentration(s, 0.5);
    } else {
        out.sc_quarter = std::numeric_limits<double>::quiet_NaN();
        out.sc_half = std::numeric_limits<double>::quiet_NaN();
    }
    out.acn = attribution_condition_number(s).value_or(std::numeric_limits<double>::infinity());
    return out;
}

}  // namespace specstab
