#include "specstab/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "specstab/parallel.hpp"

namespace specstab {

namespace {

constexpr std::size_t kHessianSpectrumLimit = 200;

// Running mean / standard error (Welford).
struct Moments {
    std::size_t n = 0;
    double mean = 0.0;
    double m2 = 0.0;

    void add(double v) {
        ++n;
        const double d = v - mean;
        mean += d / static_cast<double>(n);
        m2 += d * (v - mean);
    }
    double std_error() const {
        if (n < 2)
            return 0.0;
        return std::sqrt(m2 / static_cast<double>(n - 1) / static_cast<double>(n));
    }
};

Vector lerp(std::span<const double> a, std::span<const double> b, double s) {
    Vector z(a.size());
    for (std::size_t i = 0; i < a.size(); ++i)
        z[i] = a[i] + s * (b[i] - a[i]);
    return z;
}

void check_pair(const Mlp& net, const InputPair& p) {
    if (p.first.size() != net.input_dim() || p.second.size() != net.input_dim())
        throw std::invalid_argument("stability check: pair dimension does not match the network input");
}

}  // namespace

double GmsiBreakdown::max() const noexcept {
    return std::max({input_jacobian, param_jacobian, ntk, hessian});
}

OperatorFamily build_operator_family(const Mlp& net, std::span<const Vector> xs, std::span<const Vector> ys,
                                     Loss loss, const ProfileOptions& opts) {
    if (xs.empty())
        throw std::invalid_argument("build_profile: empty dataset");
    if (xs.size() != ys.size())
        throw std::invalid_argument("build_profile: inputs and labels differ in length");
    const bool with_hessian = opts.include_hessian && net.parameter_count() <= opts.hessian.parameter_cap;
    OperatorFamily fam;
    fam.samples.resize(xs.size());
    parallel_for(xs.size(), opts.threads, [&](std::size_t i) {
        SampleOperators& s = fam.samples[i];
        const ForwardTrace t = forward(net, xs[i]);
        s.product_operator = input_jacobian_product(net, t);
        s.input_jacobian = input_jacobian(net, xs[i]);
        s.param_jacobian = parameter_jacobian(net, xs[i]);
        if (with_hessian) {
            const Matrix h = loss_hessian(net, xs[i], ys[i], loss, opts.hessian);
            if (h.rows() <= kHessianSpectrumLimit) {
                const SymEig e = sym_eig(h);
                s.hessian_top = e.eigenvalues.front();
                Vector mags(e.eigenvalues.size());
                for (std::size_t k = 0; k < mags.size(); ++k)
                    mags[k] = std::abs(e.eigenvalues[k]);
                s.hessian_abs_spectrum = std::move(mags);
            } else {
                s.hessian_top = top_eigenvalue(h);
            }
        }
    });
    const std::size_t n = xs.size();
    Matrix k(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j <= i; ++j) {
            const double v = dot(fam.samples[i].param_jacobian.data(), fam.samples[j].param_jacobian.data());
            k(i, j) = v;
            k(j, i) = v;
        }
    fam.gram = GramMatrix(std::move(k), {});
    return fam;
}

StabilityProfile profile_from_family(const OperatorFamily& family) {
    StabilityProfile p;
    for (const SampleOperators& s : family.samples) {
        SampleProfile sp;
        sp.jacobian = summarize(Spectrum::of(s.input_jacobian));
        sp.product = summarize(Spectrum::of(s.product_operator));
        sp.jacobian_norm = sp.jacobian.top;
        sp.param_jacobian_norm = spectral_norm(s.param_jacobian);
        sp.hessian_top = s.hessian_top;
        if (s.hessian_abs_spectrum)
            sp.hessian = summarize(Spectrum(*s.hessian_abs_spectrum));
        if (!s.hessian_top)
            p.hessian_skipped = true;

        p.breakdown.input_jacobian = std::max(p.breakdown.input_jacobian, sp.jacobian_norm);
        p.breakdown.param_jacobian = std::max(p.breakdown.param_jacobian, sp.param_jacobian_norm);
        if (s.hessian_top)
            p.breakdown.hessian = std::max(p.breakdown.hessian, std::sqrt(std::max(*s.hessian_top, 0.0)));
        p.samples.push_back(std::move(sp));
    }
    const SymEig ke = family.gram.eig();
    p.gram = summarize(Spectrum(ke.eigenvalues));
    p.gram_conditioning = conditioning(family.gram);
    p.breakdown.ntk = std::sqrt(std::max(ke.eigenvalues.front(), 0.0));
    p.gmsi = p.breakdown.max();
    return p;
}

StabilityProfile build_profile(const Mlp& net, std::span<const Vector> xs, std::span<const Vector> ys, Loss loss,
                               const ProfileOptions& opts) {
    return profile_from_family(build_operator_family(net, xs, ys, loss, opts));
}

ForwardStabilityReport verify_forward_stability(const Mlp& net, const StabilityProfile& profile,
                                                std::span<const InputPair> pairs, std::size_t grid_points) {
    if (grid_points < 2)
        throw std::invalid_argument("verify_forward_stability: need at least two grid points");
    ForwardStabilityReport r;
    for (const InputPair& p : pairs) {
        check_pair(net, p);
        ++r.pairs_checked;
        const double dist = norm2(sub(p.first, p.second));
        const double lhs = norm2(sub(predict(net, p.first), predict(net, p.second)));
        if (dist == 0.0) {
            if (lhs > 0.0)
                ++r.violations;
            continue;
        }
        double s_grid = 0.0;
        for (std::size_t k = 0; k < grid_points; ++k) {
            const double s = static_cast<double>(k) / static_cast<double>(grid_points - 1);
            s_grid = std::max(s_grid, spectral_norm(input_jacobian(net, lerp(p.first, p.second, s))));
        }
        const double rhs = s_grid * dist;
        if (rhs > 0.0)
            r.max_ratio = std::max(r.max_ratio, lhs / rhs);
        if (profile.gmsi > 0.0)
            r.empirical_c1 = std::max(r.empirical_c1, lhs / (profile.gmsi * dist));
        // relative slack for roundoff in lhs when the bound is tight (linear maps)
        if (lhs > rhs * (1.0 + 1e-12) + 1e-300) {
            ++r.violations;
            if (!r.witness)
                r.witness = StabilityWitness{p.first, p.second, lhs, rhs};
        }
    }
    return r;
}

std::size_t predicted_class(const Mlp& net, std::span<const double> x) {
    const Vector y = predict(net, x);
    return static_cast<std::size_t>(std::max_element(y.begin(), y.end()) - y.begin());
}

Vector class_gradient(const Mlp& net, std::span<const double> x, std::size_t c) {
    if (c >= net.output_dim())
        throw std::invalid_argument("class_gradient: class index out of range");
    const ForwardTrace t = forward(net, x);
    Vector e(net.output_dim(), 0.0);
    e[c] = 1.0;
    return backprop(net, t, e).input;
}

AttributionStabilityReport attribution_stability_check(const Mlp& net, double psi_lipschitz,
                                                       std::span<const InputPair> pairs, std::size_t grid_points) {
    if (grid_points < 2)
        throw std::invalid_argument("attribution_stability_check: need at least two grid points");
    if (!(psi_lipschitz > 0.0))
        throw std::invalid_argument("attribution_stability_check: psi Lipschitz constant must be positive");
    AttributionStabilityReport r;
    // Lipschitz constant of x ↦ J_f(x) from consecutive grid points on every segment.
    for (const InputPair& p : pairs) {
        check_pair(net, p);
        const double dist = norm2(sub(p.first, p.second));
        if (dist == 0.0)
            continue;
        const double step = dist / static_cast<double>(grid_points - 1);
        Matrix prev = input_jacobian(net, p.first);
        for (std::size_t k = 1; k < grid_points; ++k) {
            const double s = static_cast<double>(k) / static_cast<double>(grid_points - 1);
            Matrix cur = input_jacobian(net, lerp(p.first, p.second, s));
            r.jacobian_lipschitz = std::max(r.jacobian_lipschitz, spectral_norm(cur - prev) / step);
            prev = std::move(cur);
        }
    }
    for (const InputPair& p : pairs) {
        ++r.pairs_checked;
        const std::size_t c = predicted_class(net, p.first);
        const double lhs = norm2(sub(class_gradient(net, p.first, c), class_gradient(net, p.second, c)));
        const double dist = norm2(sub(p.first, p.second));
        const double rhs = psi_lipschitz * r.jacobian_lipschitz * dist;
        if (rhs > 0.0)
            r.max_ratio = std::max(r.max_ratio, lhs / rhs);
        if (lhs > r.margin * rhs + 1e-300) {
            ++r.violations;
            if (!r.witness)
                r.witness = StabilityWitness{p.first, p.second, lhs, r.margin * rhs};
        }
    }
    return r;
}

Vector draw_perturbation(Rng& rng, std::size_t d, double epsilon, PerturbationLaw law) {
    if (law == PerturbationLaw::sphere) {
        Vector u = rng.unit_vector(d);
        for (double& v : u)
            v *= epsilon;
        return u;
    }
    return rng.gaussian_vector(d, epsilon / std::sqrt(static_cast<double>(d)));
}

SensitivityReport monte_carlo_sensitivity(const Mlp& net, std::span<const double> x, double epsilon,
                                          std::size_t n_mc, std::uint64_t seed, PerturbationLaw law) {
    if (n_mc == 0)
        throw std::invalid_argument("monte_carlo_sensitivity: n_mc must be positive");
    if (!(epsilon >= 0.0))
        throw std::invalid_argument("monte_carlo_sensitivity: epsilon must be nonnegative");
    const std::size_t d = x.size();
    const ForwardTrace t = forward(net, x);
    const Spectrum sigma = Spectrum::of(input_jacobian_product(net, t));

    SensitivityReport r;
    r.epsilon = epsilon;
    r.n_mc = n_mc;
    double sum_sq = 0.0;
    for (double s : sigma.values())
        sum_sq += s * s;
    const double dd = static_cast<double>(d);
    r.analytic_mean_sq = epsilon * epsilon * sum_sq / dd;
    r.constant_k = sigma.sum() * sigma.sum() / dd;
    r.entropy = spectral_entropy(sigma);
    r.bound_rhs = r.constant_k * epsilon * epsilon * std::exp(r.entropy);

    Rng rng(seed);
    Moments m;
    Vector xp(x.begin(), x.end());
    for (std::size_t i = 0; i < n_mc; ++i) {
        const Vector delta = draw_perturbation(rng, d, epsilon, law);
        for (std::size_t k = 0; k < d; ++k)
            xp[k] = x[k] + delta[k];
        const Vector fp = predict(net, xp);
        double sq = 0.0;
        for (std::size_t c = 0; c < fp.size(); ++c)
            sq += (fp[c] - t.output[c]) * (fp[c] - t.output[c]);
        m.add(sq);
    }
    r.empirical_mean_sq = m.mean;
    r.empirical_stderr = m.std_error();
    r.mc_tolerance = m.mean > 0.0 ? 3.0 * r.empirical_stderr / m.mean : 0.0;
    r.holds = r.empirical_mean_sq <= r.bound_rhs * (1.0 + r.mc_tolerance);
    return r;
}

SerrResult serr(const Architecture& arch, double gain, std::size_t n_inits, std::span<const double> x,
                std::uint64_t seed, InitScheme scheme, std::size_t threads) {
    if (n_inits == 0)
        throw std::invalid_argument("serr: n_inits must be at least 1");
    SerrResult r;
    r.gain = gain;
    r.n_inits = n_inits;
    r.entropies.assign(n_inits, 0.0);
    parallel_for(n_inits, threads, [&](std::size_t i) {
        Rng rng(derive_seed(seed, i));
        const Mlp net = init_mlp(arch, gain, rng, scheme);
        r.entropies[i] = spectral_entropy(Spectrum::of(input_jacobian_product(net, forward(net, x))));
    });
    Moments m;
    for (double h : r.entropies)
        m.add(h);
    r.mean = m.mean;
    r.std_error = m.std_error();
    return r;
}

InstabilityEstimate attribution_instability(const Mlp& net, std::span<const double> x, double epsilon,
                                            std::size_t n_mc, std::uint64_t seed, PerturbationLaw law) {
    if (n_mc == 0)
        throw std::invalid_argument("attribution_instability: n_mc must be positive");
    InstabilityEstimate r;
    r.predicted_class = predicted_class(net, x);
    const Vector g0 = class_gradient(net, x, r.predicted_class);
    if (epsilon == 0.0)
        return r;
    Rng rng(seed);
    Moments m;
    Vector xp(x.begin(), x.end());
    for (std::size_t i = 0; i < n_mc; ++i) {
        const Vector delta = draw_perturbation(rng, x.size(), epsilon, law);
        for (std::size_t k = 0; k < x.size(); ++k)
            xp[k] = x[k] + delta[k];
        m.add(norm1(sub(class_gradient(net, xp, r.predicted_class), g0)));
    }
    r.mean = m.mean;
    r.std_error = m.std_error();
    return r;
}

namespace {

struct CenteredSample {
    Vector mean;
    Matrix centered;  // n × d
};

CenteredSample center(std::span<const Vector> s, std::size_t d) {
    CenteredSample out;
    out.mean.assign(d, 0.0);
    for (const Vector& v : s) {
        if (v.size() != d)
            throw std::invalid_argument("frechet_attr_distance: attribution dimension mismatch");
        for (std::size_t k = 0; k < d; ++k)
            out.mean[k] += v[k];
    }
    for (double& m : out.mean)
        m /= static_cast<double>(s.size());
    out.centered = Matrix(s.size(), d);
    for (std::size_t i = 0; i < s.size(); ++i)
        for (std::size_t k = 0; k < d; ++k)
            out.centered(i, k) = s[i][k] - out.mean[k];
    return out;
}

Matrix covariance(const Matrix& centered) {
    const double inv = 1.0 / static_cast<double>(centered.rows() - 1);
    Matrix xt = centered.transpose();
    Matrix c = gram_rows(xt);
    c *= inv;
    return c;
}

}  // namespace

double frechet_attr_distance(std::span<const Vector> a, std::span<const Vector> b, FrechetRoute route) {
    if (a.size() < 2 || b.size() < 2)
        throw std::invalid_argument("frechet_attr_distance: need at least two samples per side");
    const std::size_t d = a.front().size();
    if (d == 0)
        throw std::invalid_argument("frechet_attr_distance: empty attribution vectors");
    const CenteredSample ca = center(a, d);
    const CenteredSample cb = center(b, d);

    const double mean_term = dot(sub(ca.mean, cb.mean), sub(ca.mean, cb.mean));
    const double na1 = static_cast<double>(a.size() - 1);
    const double nb1 = static_cast<double>(b.size() - 1);
    const double tr_a = dot(ca.centered.data(), ca.centered.data()) / na1;
    const double tr_b = dot(cb.centered.data(), cb.centered.data()) / nb1;

    if (route == FrechetRoute::automatic)
        route = d > std::max(a.size(), b.size()) ? FrechetRoute::sample_space : FrechetRoute::covariance;

    double cross = 0.0;  // tr (Σ_A^{1/2} Σ_B Σ_A^{1/2})^{1/2}
    if (route == FrechetRoute::covariance) {
        const Matrix sa_half = psd_sqrt(covariance(ca.centered));
        const Matrix m = sa_half * covariance(cb.centered) * sa_half;
        Matrix sym = m;
        for (std::size_t i = 0; i < sym.rows(); ++i)
            for (std::size_t j = 0; j < i; ++j) {
                const double s = 0.5 * (m(i, j) + m(j, i));
                sym(i, j) = s;
                sym(j, i) = s;
            }
        for (double l : sym_eig(sym).eigenvalues)
            cross += std::sqrt(std::max(l, 0.0));
    } else {
        // nonzero eig(Σ_A Σ_B) = σ(X_A X_Bᵀ)² / ((n_A−1)(n_B−1))
        const Matrix m = ca.centered * cb.centered.transpose();
        double nuclear = 0.0;
        for (double s : singular_values(m))
            nuclear += s;
        cross = nuclear / std::sqrt(na1 * nb1);
    }
    return std::max(0.0, mean_term + tr_a + tr_b - 2.0 * cross);
}

AttributionDiagnostics attribution_diagnostics(const Mlp& net, std::span<const Vector> xs, double epsilon,
                                               std::uint64_t seed) {
    if (xs.size() < 2)
        throw std::invalid_argument("attribution_diagnostics: need at least two samples");
    AttributionDiagnostics out;
    std::vector<Vector> clean, perturbed;
    Moments se, acn, dg;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const ForwardTrace t = forward(net, xs[i]);
        const Spectrum s = Spectrum::of(input_jacobian_product(net, t));
        se.add(spectral_entropy(s));
        if (auto k = attribution_condition_number(s))
            acn.add(*k);
        const auto c = static_cast<std::size_t>(std::max_element(t.output.begin(), t.output.end()) -
                                                t.output.begin());
        Rng rng(derive_seed(seed, i));
        const Vector delta = draw_perturbation(rng, xs[i].size(), epsilon, PerturbationLaw::gaussian);
        Vector g0 = class_gradient(net, xs[i], c);
        Vector g1 = class_gradient(net, axpy(1.0, delta, xs[i]), c);
        dg.add(norm1(sub(g1, g0)));
        clean.push_back(std::move(g0));
        perturbed.push_back(std::move(g1));
    }
    out.spectral_entropy = se.mean;
    out.acn = acn.n ? acn.mean : std::numeric_limits<double>::infinity();
    out.delta_grad = dg.mean;
    out.fd = frechet_attr_distance(clean, perturbed);
    return out;
}

NtkConditioningReport ntk_conditioning_report(const Mlp& net, std::span<const Vector> xs, std::optional<double> gmsi) {
    const GramMatrix g = gram(net, xs);
    NtkConditioningReport r;
    r.conditioning = conditioning(g);
    for (std::size_t i = 0; i < g.size(); ++i)
        r.max_grad_norm_sq = std::max(r.max_grad_norm_sq, g.k()(i, i));
    r.lambda_max_bound = static_cast<double>(g.size()) * r.max_grad_norm_sq;
    r.kappa_bound = r.conditioning.lambda_min_nonzero > 0.0
                        ? r.lambda_max_bound / r.conditioning.lambda_min_nonzero
                        : std::numeric_limits<double>::infinity();
    r.upper_bound_holds = r.conditioning.lambda_max <= r.lambda_max_bound * (1.0 + 1e-12);
    if (gmsi && *gmsi > 0.0)
        r.empirical_c2 = r.conditioning.kappa / (*gmsi * *gmsi);
    return r;
}

}  // namespace specstab
