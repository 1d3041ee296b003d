#include "doctest.h"

#include <cmath>

#include "specstab/diagnostics.hpp"
#include "specstab/linalg.hpp"
#include "support/oracles.hpp"

using namespace specstab;

namespace {

Mlp linear_net(const Matrix& w) {
    Layer l;
    l.weights = w;
    l.has_bias = false;
    return Mlp({l});
}

Mlp tanh_net(std::uint64_t seed, std::vector<std::size_t> widths, double gain = 1.3) {
    Rng rng(seed);
    return init_mlp({widths}, gain, rng);
}

std::vector<Vector> samples(std::uint64_t seed, std::size_t n, std::size_t d, double scale = 1.0) {
    Rng rng(seed);
    std::vector<Vector> xs;
    for (std::size_t i = 0; i < n; ++i)
        xs.push_back(rng.gaussian_vector(d, scale));
    return xs;
}

std::vector<InputPair> random_pairs(Rng& rng, std::size_t n, std::size_t d) {
    std::vector<InputPair> p;
    for (std::size_t i = 0; i < n; ++i)
        p.emplace_back(rng.gaussian_vector(d), rng.gaussian_vector(d));
    return p;
}

}  // namespace

TEST_CASE("gmsi of a linear scalar model is max(|w|, |x|)") {
    const Vector x{0.6, -0.8, 1.2};
    for (double scale : {0.1, 10.0}) {
        const Vector w{0.5 * scale, 0.2 * scale, -0.1 * scale};
        const Mlp net = linear_net(Matrix(1, 3, w));
        const StabilityProfile p = build_profile(net, std::vector<Vector>{x}, std::vector<Vector>{{0.0}},
                                                 Loss::squared_error);
        CHECK(p.breakdown.input_jacobian == doctest::Approx(norm2(w)).epsilon(1e-12));
        CHECK(p.breakdown.param_jacobian == doctest::Approx(norm2(x)).epsilon(1e-12));
        CHECK(p.breakdown.ntk == doctest::Approx(norm2(x)).epsilon(1e-12));
        CHECK(p.breakdown.hessian == doctest::Approx(norm2(x)).epsilon(1e-6));
        CHECK(p.gmsi == doctest::Approx(std::max(norm2(w), norm2(x))).epsilon(1e-6));
    }
}

TEST_CASE("gmsi of a zero network on zero data is zero") {
    Mlp net = tanh_net(1, {3, 4, 2});
    net.set_parameters(Vector(net.parameter_count(), 0.0));
    const StabilityProfile p = build_profile(net, std::vector<Vector>{Vector(3, 0.0)},
                                             std::vector<Vector>{Vector(2, 0.0)}, Loss::squared_error);
    CHECK(p.breakdown.input_jacobian == 0.0);
    CHECK(p.breakdown.ntk == doctest::Approx(std::sqrt(2.0)));  // tr of the 2x2 output-bias identity
    Mlp nobias({[] {
        Layer l;
        l.weights = Matrix(2, 3);
        l.has_bias = false;
        return l;
    }()});
    const StabilityProfile q = build_profile(nobias, std::vector<Vector>{Vector(3, 0.0)},
                                             std::vector<Vector>{Vector(2, 0.0)}, Loss::squared_error);
    CHECK(q.gmsi == 0.0);
    CHECK_THROWS(build_profile(net, std::vector<Vector>{}, std::vector<Vector>{}, Loss::squared_error));
}

TEST_CASE("gmsi dominates every per-sample component") {
    const Mlp net = tanh_net(2, {4, 8, 3});
    const auto xs = samples(3, 10, 4);
    std::vector<Vector> ys(10, Vector{1, 0, 0});
    const OperatorFamily fam = build_operator_family(net, xs, ys, Loss::cross_entropy);
    const StabilityProfile p = profile_from_family(fam);
    REQUIRE_FALSE(p.hessian_skipped);
    for (const SampleOperators& s : fam.samples) {
        CHECK(spectral_norm(s.input_jacobian) <= p.gmsi);
        CHECK(spectral_norm(s.param_jacobian) <= p.gmsi);
        CHECK(std::sqrt(std::max(*s.hessian_top, 0.0)) <= p.gmsi);
        CHECK(oracle::max_abs_diff(s.input_jacobian, s.product_operator) <= 1e-13);
    }
    CHECK(std::sqrt(oracle::eigenvalues(fam.gram.k())[0]) <= p.gmsi * (1 + 1e-12));
    CHECK(p.gmsi == p.breakdown.max());
}

TEST_CASE("hessian is skipped and flagged above the parameter cap") {
    const Mlp net = tanh_net(4, {4, 8, 3});
    ProfileOptions o;
    o.hessian.parameter_cap = 10;
    const StabilityProfile p = build_profile(net, samples(5, 3, 4), std::vector<Vector>(3, Vector{0, 1, 0}),
                                             Loss::cross_entropy, o);
    CHECK(p.hessian_skipped);
    CHECK(p.breakdown.hessian == 0.0);
}

TEST_CASE("forward stability examples") {
    const Matrix w{{2, 1}, {0, 1}};
    const Mlp lin = linear_net(w);
    const StabilityProfile p = build_profile(lin, std::vector<Vector>{{0, 0}}, std::vector<Vector>{{0, 0}},
                                             Loss::squared_error);
    const Vector x{0.3, 0.4};
    const ForwardStabilityReport same = verify_forward_stability(lin, p, std::vector<InputPair>{{x, x}});
    CHECK(same.violations == 0);
    CHECK(same.max_ratio == 0.0);

    const Svd s = svd(w);
    const Vector v{s.vt(0, 0), s.vt(0, 1)};
    const ForwardStabilityReport tight =
        verify_forward_stability(lin, p, std::vector<InputPair>{{x, axpy(1.0, v, x)}});
    CHECK(tight.violations == 0);
    CHECK(tight.max_ratio == doctest::Approx(1.0).epsilon(1e-12));

    const Mlp net = tanh_net(6, {5, 12, 12, 3}, 1.5);
    const auto xs = samples(7, 8, 5);
    const StabilityProfile pn = build_profile(net, xs, std::vector<Vector>(8, Vector{1, 0, 0}), Loss::cross_entropy);
    Rng rng(8);
    const ForwardStabilityReport r = verify_forward_stability(net, pn, random_pairs(rng, 1000, 5));
    CHECK(r.pairs_checked == 1000);
    CHECK(r.violations == 0);
    CHECK(r.max_ratio <= 1.0);
}

TEST_CASE("monte-carlo sensitivity examples") {
    const Mlp d34 = linear_net(Matrix::diagonal(Vector{3, 4}));
    const double eps = 1e-3;
    const SensitivityReport r = monte_carlo_sensitivity(d34, Vector{0.5, -0.5}, eps, 100000, 11);
    CHECK(r.analytic_mean_sq == doctest::Approx(12.5 * eps * eps).epsilon(1e-14));
    CHECK(std::abs(r.empirical_mean_sq - r.analytic_mean_sq) <= 3.0 * r.empirical_stderr);
    CHECK(r.holds);

    const Mlp zero = linear_net(Matrix(2, 3));
    const SensitivityReport z = monte_carlo_sensitivity(zero, Vector{1, 2, 3}, eps, 1000, 12);
    CHECK(z.empirical_mean_sq == 0.0);
    CHECK(z.holds);

    const Mlp r1 = linear_net(Matrix{{1, 2}, {2, 4}});
    const SensitivityReport rr = monte_carlo_sensitivity(r1, Vector{0.1, 0.2}, eps, 1000, 13);
    CHECK(rr.entropy == 0.0);
    CHECK(rr.bound_rhs == doctest::Approx(rr.analytic_mean_sq).epsilon(1e-12));
}

TEST_CASE("sensitivity chain identity and bound ordering on tanh nets") {
    for (std::uint64_t s = 0; s < 8; ++s) {
        const Mlp net = tanh_net(20 + s, {6, 16, 16, 3});
        Rng rng(30 + s);
        const Vector x = rng.gaussian_vector(6);
        const double eps = 1e-3 * norm2(x);
        const SensitivityReport r = monte_carlo_sensitivity(net, x, eps, 20000, 40 + s);
        const Vector sigma = oracle::singular_values(input_jacobian(net, x));
        double sum = 0.0, sq = 0.0;
        for (double v : sigma) {
            sum += v;
            sq += v * v;
        }
        double p2 = 0.0;
        for (double v : sigma)
            p2 += (v / sum) * (v / sum);
        const double d = 6.0;
        CHECK(std::abs(r.analytic_mean_sq - eps * eps * sq / d) <= 1e-12 * r.analytic_mean_sq);
        CHECK(std::abs(sum * sum * p2 * eps * eps / d - r.analytic_mean_sq) <= 1e-10 * r.analytic_mean_sq);
        CHECK(r.bound_rhs >= r.analytic_mean_sq);
        CHECK(std::abs(r.entropy - oracle::entropy(sigma)) <= 1e-10);
    }
}

TEST_CASE("perturbation laws have the requested second moment") {
    Rng rng(50);
    double g = 0.0, s = 0.0;
    const int n = 20000;
    for (int i = 0; i < n; ++i) {
        const Vector a = draw_perturbation(rng, 5, 0.3, PerturbationLaw::gaussian);
        const Vector b = draw_perturbation(rng, 5, 0.3, PerturbationLaw::sphere);
        g += dot(a, a);
        s += dot(b, b);
        CHECK(norm2(b) == doctest::Approx(0.3).epsilon(1e-12));
    }
    CHECK(g / n == doctest::Approx(0.09).epsilon(0.03));
    CHECK(s / n == doctest::Approx(0.09).epsilon(1e-12));
}

TEST_CASE("SERR examples") {
    const Vector x{0.7};
    const SerrResult one = serr({{1, 1}, Activation::identity}, 1.0, 16, x, 1);
    CHECK(one.mean == 0.0);
    for (double h : one.entropies)
        CHECK(h == 0.0);

    const std::size_t w = 8;
    const SerrResult orth = serr({{w, w, w, w}, Activation::identity, false}, 1.0, 10, Vector(w, 0.1), 2,
                                 InitScheme::orthogonal);
    for (double h : orth.entropies)
        CHECK(std::abs(h - std::log(double(w))) <= 1e-12);
    CHECK(orth.std_error <= 1e-12);
}

TEST_CASE("SERR is reproducible and thread-count independent") {
    const Architecture a{{6, 12, 12, 6}};
    const Vector x(6, 0.2);
    const SerrResult s1 = serr(a, 1.0, 12, x, 9, InitScheme::gaussian, 1);
    const SerrResult s3 = serr(a, 1.0, 12, x, 9, InitScheme::gaussian, 3);
    CHECK(s1.entropies == s3.entropies);
    CHECK(s1.mean == s3.mean);
}

TEST_CASE("attribution instability examples") {
    const Mlp lin = linear_net(Matrix{{1, 2}, {3, -1}});
    CHECK(attribution_instability(lin, Vector{0.1, 0.2}, 0.5, 200, 1).mean == 0.0);

    const Mlp net = tanh_net(60, {4, 10, 3});
    const Vector x{0.2, -0.5, 0.3, 0.9};
    CHECK(attribution_instability(net, x, 0.0, 50, 2).mean == 0.0);

    // independent recomputation with finite-difference Jacobians and the same draws
    const InstabilityEstimate est = attribution_instability(net, x, 0.05, 400, 3);
    const std::size_t c = predicted_class(net, x);
    CHECK(c == est.predicted_class);
    const Matrix j0 = oracle::input_jacobian_fd(net, x);
    Rng rng(3);
    double acc = 0.0;
    for (int i = 0; i < 400; ++i) {
        const Vector xp = axpy(1.0, draw_perturbation(rng, 4, 0.05, PerturbationLaw::gaussian), x);
        const Matrix j1 = oracle::input_jacobian_fd(net, xp);
        for (std::size_t k = 0; k < 4; ++k)
            acc += std::abs(j1(c, k) - j0(c, k));
    }
    CHECK(std::abs(acc / 400 - est.mean) <= 3.0 * est.std_error + 1e-6);
}

TEST_CASE("class gradient is the Jacobian row") {
    const Mlp net = tanh_net(61, {3, 7, 4});
    const Vector x{0.4, 0.1, -0.3};
    const Matrix j = input_jacobian(net, x);
    for (std::size_t c = 0; c < 4; ++c) {
        const Vector g = class_gradient(net, x, c);
        for (std::size_t k = 0; k < 3; ++k)
            CHECK(g[k] == doctest::Approx(j(c, k)).epsilon(1e-14));
    }
}

TEST_CASE("frechet distance examples") {
    const auto a = samples(70, 50, 3);
    CHECK(frechet_attr_distance(a, a) == doctest::Approx(0.0).scale(1.0).epsilon(1e-9));

    const Vector v{1.0, -2.0, 0.5};
    std::vector<Vector> b;
    for (const Vector& x : a)
        b.push_back(axpy(1.0, v, x));
    CHECK(frechet_attr_distance(a, b) == doctest::Approx(dot(v, v)).epsilon(1e-9));

    // sample stats (0, 1) and (1, 4)
    const std::vector<Vector> s1{{-1}, {1}, {0}, {0}};
    std::vector<Vector> s2;
    for (const Vector& x : s1)
        s2.push_back({1.0 + 2.0 * x[0]});
    const double var = 2.0 / 3.0;
    CHECK(frechet_attr_distance(s1, s2) ==
          doctest::Approx(1.0 + var + 4 * var - 2 * 2 * var).epsilon(1e-12));
    const std::vector<Vector> u1{{-std::sqrt(1.5)}, {std::sqrt(1.5)}, {0}, {0}};
    std::vector<Vector> u2;
    for (const Vector& x : u1)
        u2.push_back({1.0 + 2.0 * x[0]});
    CHECK(frechet_attr_distance(u1, u2) == doctest::Approx(2.0).epsilon(1e-12));

    CHECK_THROWS(frechet_attr_distance(a, std::vector<Vector>{{1, 2, 3}}));
    CHECK_THROWS(frechet_attr_distance(a, samples(71, 5, 2)));
}

TEST_CASE("frechet distance is symmetric and both routes agree") {
    for (std::size_t d : {3u, 12u}) {
        const auto a = samples(80 + d, 8, d);
        const auto b = samples(90 + d, 6, d, 2.0);
        const double ab = frechet_attr_distance(a, b, FrechetRoute::covariance);
        const double ba = frechet_attr_distance(b, a, FrechetRoute::covariance);
        const double ss = frechet_attr_distance(a, b, FrechetRoute::sample_space);
        CHECK(std::abs(ab - ba) <= 1e-9 * (1 + ab));
        CHECK(std::abs(ab - ss) <= 1e-8 * (1 + ab));
        CHECK(frechet_attr_distance(a, b) == doctest::Approx(ab).epsilon(1e-8));
    }
}

TEST_CASE("attribution stability examples") {
    const Mlp lin = linear_net(Matrix{{1, 2}, {3, -1}});
    Rng rng(100);
    const AttributionStabilityReport l = attribution_stability_check(lin, 1.0, random_pairs(rng, 50, 2));
    CHECK(l.violations == 0);
    CHECK(l.max_ratio == 0.0);

    const Mlp net = tanh_net(101, {4, 10, 10, 3}, 1.5);
    const Vector x{0.3, 0.1, -0.2, 0.5};
    const AttributionStabilityReport same = attribution_stability_check(net, 1.0, std::vector<InputPair>{{x, x}});
    CHECK(same.max_ratio == 0.0);

    std::vector<InputPair> pairs;
    for (int i = 0; i < 1000; ++i) {
        const Vector a = rng.gaussian_vector(4);
        pairs.emplace_back(a, axpy(1.0, rng.gaussian_vector(4, 0.3), a));
    }
    const AttributionStabilityReport r = attribution_stability_check(net, 1.0, pairs);
    CHECK(r.pairs_checked == 1000);
    CHECK(r.violations == 0);
}

TEST_CASE("attribution diagnostics are finite and seed-deterministic") {
    const Mlp net = tanh_net(110, {5, 12, 3});
    const auto xs = samples(111, 40, 5);
    const AttributionDiagnostics a = attribution_diagnostics(net, xs, 0.2, 7);
    const AttributionDiagnostics b = attribution_diagnostics(net, xs, 0.2, 7);
    CHECK(a.fd == b.fd);
    CHECK(a.delta_grad == b.delta_grad);
    CHECK(std::isfinite(a.acn));
    CHECK(a.fd >= 0.0);
    CHECK(a.spectral_entropy > 0.0);
}

TEST_CASE("ntk conditioning report bounds") {
    const Mlp net = tanh_net(120, {3, 8, 1});
    const auto xs = samples(121, 6, 3);
    const NtkConditioningReport r = ntk_conditioning_report(net, xs, 2.0);
    CHECK(r.upper_bound_holds);
    CHECK(r.conditioning.lambda_max <= r.lambda_max_bound);
    CHECK(r.conditioning.kappa <= r.kappa_bound);
    CHECK(r.empirical_c2 == doctest::Approx(r.conditioning.kappa / 4.0));
}
