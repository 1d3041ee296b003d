#include "specstab/verify.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <sstream>

#include "specstab/data.hpp"
#include "specstab/diagnostics.hpp"
#include "specstab/linalg.hpp"
#include "specstab/net.hpp"
#include "specstab/ntk.hpp"
#include "specstab/spectra.hpp"
#include "specstab/train.hpp"

namespace specstab {

namespace {

std::size_t between(Rng& rng, std::size_t lo, std::size_t hi) {
    return lo + rng.below(hi - lo + 1);
}

Architecture random_tanh_arch(Rng& rng, std::size_t max_depth, std::size_t max_width, std::size_t outputs = 0) {
    Architecture a;
    const std::size_t depth = between(rng, 1, max_depth);
    a.widths.push_back(between(rng, 1, max_width));
    for (std::size_t l = 1; l < depth; ++l)
        a.widths.push_back(between(rng, 1, max_width));
    a.widths.push_back(outputs ? outputs : between(rng, 1, max_width));
    return a;
}

template <class Fn>
CheckResult timed(std::string name, Fn&& body) {
    const auto start = std::chrono::steady_clock::now();
    CheckResult r;
    r.name = std::move(name);
    try {
        body(r);
    } catch (const std::exception& e) {
        r.passed = false;
        r.detail = std::string("exception: ") + e.what();
    }
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return r;
}

std::string fmt(double v) {
    std::ostringstream ss;
    ss.precision(3);
    ss << v;
    return ss.str();
}

}  // namespace

std::pair<Vector, Vector> robin_hood_pair(Rng& rng) {
    const std::size_t r = between(rng, 2, 16);
    Vector a(r);
    double s = 0.0;
    for (double& x : a) {
        x = -std::log(1.0 - rng.uniform());
        s += x;
    }
    for (double& x : a)
        x /= s;
    std::size_t i = rng.below(r);
    std::size_t j = rng.below(r - 1);
    if (j >= i)
        ++j;
    if (a[i] < a[j])
        std::swap(i, j);
    Vector b = a;
    const double amount = rng.uniform() * (a[i] - a[j]);
    b[i] -= amount;
    b[j] += amount;
    return {std::move(a), std::move(b)};
}

CheckResult check_jacobian_identification(const SelftestOptions& o) {
    return timed("jacobian product form vs central differences", [&](CheckResult& r) {
        double worst = 0.0;
        for (std::size_t k = 0; k < 100; ++k) {
            Rng rng(derive_seed(o.seed, k));
            const Mlp net = init_mlp(random_tanh_arch(rng, 5, 32), 1.0, rng);
            const Vector x = rng.gaussian_vector(net.input_dim());
            const Matrix p = input_jacobian_product(net, forward(net, x));
            const Matrix fd = finite_difference_jacobian(net, x, 1e-5);
            worst = std::max(worst, max_abs_diff(p, fd) / (1.0 + p.max_abs()));
        }
        r.passed = worst <= 1e-6;
        r.detail = "max gap/(1+|J|max) = " + fmt(worst) + " over 100 nets (tol 1e-6)";
    });
}

CheckResult check_ntk_spectrum(const SelftestOptions& o) {
    return timed("ntk eigenvalues vs squared singular values", [&](CheckResult& r) {
        double worst = 0.0;
        for (std::size_t k = 0; k < 20; ++k) {
            Rng rng(derive_seed(o.seed ^ 0x2, k));
            const Mlp net = init_mlp(random_tanh_arch(rng, 3, 8, 1 + rng.below(2)), 1.0, rng);
            const std::size_t n = between(rng, 2, 64);
            std::vector<Vector> xs;
            for (std::size_t i = 0; i < n; ++i)
                xs.push_back(rng.gaussian_vector(net.input_dim()));
            const Matrix g = stacked_parameter_jacobian(net, xs);
            const Vector lam = sym_eig(gram_rows(g)).eigenvalues;
            const Vector sig = singular_values(g);
            const double scale = std::max(lam.front(), 1e-300);
            for (std::size_t i = 0; i < lam.size(); ++i) {
                const double s2 = i < sig.size() ? sig[i] * sig[i] : 0.0;
                worst = std::max(worst, std::abs(lam[i] - s2) / scale);
            }
        }
        r.passed = worst <= 1e-8;
        r.detail = "max |lambda - sigma^2|/lambda_max = " + fmt(worst) + " over 20 instances (tol 1e-8)";
    });
}

CheckResult check_flow_closed_form(const SelftestOptions& o) {
    return timed("ntk flow closed form vs Euler", [&](CheckResult& r) {
        Rng rng(derive_seed(o.seed ^ 0x3, 0));
        const Mlp net = init_mlp({{4, 16, 1}}, 1.0, rng);
        std::vector<Vector> xs;
        for (std::size_t i = 0; i < 8; ++i)
            xs.push_back(rng.gaussian_vector(4));
        const GramMatrix raw = gram(net, xs);
        // unit λ_max so the step sizes below are in the first-order regime
        Matrix k = raw.k();
        k *= 1.0 / raw.eig().eigenvalues.front();
        const GramMatrix g(std::move(k), {});
        const Vector y = rng.gaussian_vector(8);
        const Vector dy = rng.gaussian_vector(8, 0.1);
        const Vector f0(8, 0.0);
        const Vector times{0.5, 1.0, 2.0, 5.0};
        const FlowReport exact = flow_difference(g, dy, times);
        const Vector y2 = axpy(1.0, dy, y);

        auto gap_for = [&](double eta) {
            double gap = 0.0;
            const std::size_t steps = static_cast<std::size_t>(std::llround(times.back() / eta));
            const auto a = simulate_discrete_flow(g, y, f0, eta, steps);
            const auto b = simulate_discrete_flow(g, y2, f0, eta, steps);
            for (std::size_t ti = 0; ti < times.size(); ++ti) {
                const auto s = static_cast<std::size_t>(std::llround(times[ti] / eta));
                const Vector d = sub(a[s], b[s]);
                gap = std::max(gap, std::abs(dot(d, d) - exact.diff_norm_sq[ti]));
            }
            return gap;
        };
        const double g1 = gap_for(1e-2);
        const double g2 = gap_for(5e-3);
        const double ratio = g1 / g2;
        r.passed = std::abs(ratio - 2.0) <= 0.2 * 2.0;
        r.detail = "gap(1e-2) = " + fmt(g1) + ", gap(5e-3) = " + fmt(g2) + ", ratio " + fmt(ratio) +
                   " (expect 2 +/- 20%)";
    });
}

CheckResult check_sensitivity_bound(const SelftestOptions& o) {
    return timed("expected sensitivity vs spectral bound", [&](CheckResult& r) {
        std::size_t mc_fail = 0, bound_fail = 0;
        double worst_z = 0.0;
        for (std::size_t k = 0; k < 20; ++k) {
            Rng rng(derive_seed(o.seed ^ 0x4, k));
            const std::size_t d = between(rng, 2, 12);
            const Mlp net = init_mlp({{d, 16, 16, between(rng, 1, 6)}}, 1.0, rng);
            const Vector x = rng.gaussian_vector(d);
            const double eps = 1e-3 * norm2(x);
            const SensitivityReport s = monte_carlo_sensitivity(net, x, eps, 100000, derive_seed(o.seed, 100 + k));
            const double z = std::abs(s.empirical_mean_sq - s.analytic_mean_sq) / s.empirical_stderr;
            worst_z = std::max(worst_z, z);
            if (z > 3.0)
                ++mc_fail;
            if (!s.holds)
                ++bound_fail;
        }
        r.passed = mc_fail == 0 && bound_fail == 0;
        r.detail = "MC outside 3 SE: " + std::to_string(mc_fail) + "/20 (max z " + fmt(worst_z) +
                   "), bound violations: " + std::to_string(bound_fail) + "/20";
    });
}

CheckResult check_flow_majorization(const SelftestOptions& o) {
    return timed("flow amplification ordering under majorization", [&](CheckResult& r) {
        Rng rng(derive_seed(o.seed ^ 0x5, 0));
        std::vector<std::pair<Vector, Vector>> pairs;
        for (std::size_t k = 0; k < 10000; ++k)
            pairs.push_back(robin_hood_pair(rng));
        std::ostringstream ss;
        bool ok = true;
        for (double t : {0.1, 1.0, 10.0}) {
            std::size_t sum_bad = 0, worst_bad = 0;
            for (const auto& [a, b] : pairs) {
                if (amplification_sum(a, t) < amplification_sum(b, t) * (1.0 - 1e-12))
                    ++sum_bad;
                if (worst_case_amplification(a, t) < worst_case_amplification(b, t) * (1.0 - 1e-12))
                    ++worst_bad;
            }
            ok = ok && sum_bad == 0 && worst_bad == 0;
            ss << "t=" << t << ": sum " << sum_bad << ", worst " << worst_bad << "; ";
        }
        r.passed = ok;
        r.detail = ss.str() + "violations over 10000 pairs";
    });
}

CheckResult check_entropy_majorization(const SelftestOptions& o) {
    return timed("entropy ordering under majorization", [&](CheckResult& r) {
        Rng rng(derive_seed(o.seed ^ 0x6, 0));
        std::size_t bad = 0, not_majorized = 0;
        for (std::size_t k = 0; k < 10000; ++k) {
            const auto [a, b] = robin_hood_pair(rng);
            const Spectrum sa(a), sb(b);
            if (!majorizes(sa, sb))
                ++not_majorized;
            if (spectral_entropy(sa) > spectral_entropy(sb) + 1e-12)
                ++bad;
        }
        double boundary = 0.0;
        for (std::size_t n = 1; n <= 64; ++n) {
            Vector rank1(n, 0.0);
            rank1[0] = 3.0;
            boundary = std::max(boundary, std::abs(spectral_entropy(Spectrum(rank1))));
            boundary = std::max(boundary, std::abs(spectral_entropy(Spectrum(Vector(n, 0.7))) -
                                                   std::log(static_cast<double>(n))));
        }
        r.passed = bad == 0 && not_majorized == 0 && boundary <= 1e-12;
        r.detail = "violations " + std::to_string(bad) + "/10000, non-majorized pairs " +
                   std::to_string(not_majorized) + ", boundary error " + fmt(boundary);
    });
}

CheckResult check_forward_stability(const SelftestOptions& o) {
    return timed("forward stability and GMSI dominance", [&](CheckResult& r) {
        std::size_t violations = 0, pairs_checked = 0, dominance_fail = 0;
        double max_ratio = 0.0;
        for (std::size_t k = 0; k < 3; ++k) {
            Rng rng(derive_seed(o.seed ^ 0x7, k));
            const std::size_t d = between(rng, 2, 6);
            const Mlp net = init_mlp({{d, 12, 12, 3}}, 1.5, rng);
            std::vector<Vector> xs, ys;
            for (std::size_t i = 0; i < 16; ++i) {
                xs.push_back(rng.gaussian_vector(d));
                ys.push_back(rng.gaussian_vector(3));
            }
            ProfileOptions po;
            po.threads = o.threads;
            const StabilityProfile prof = build_profile(net, xs, ys, Loss::squared_error, po);
            for (const SampleProfile& s : prof.samples) {
                if (s.jacobian_norm > prof.gmsi || s.param_jacobian_norm > prof.gmsi)
                    ++dominance_fail;
                if (s.hessian_top && *s.hessian_top > prof.gmsi * prof.gmsi)
                    ++dominance_fail;
            }
            if (prof.breakdown.ntk > prof.gmsi)
                ++dominance_fail;

            // pairs from the convex hull of the profiled inputs
            std::vector<InputPair> pairs;
            auto hull_point = [&] {
                Vector w(xs.size());
                double s = 0.0;
                for (double& v : w) {
                    v = -std::log(1.0 - rng.uniform());
                    s += v;
                }
                Vector z(d, 0.0);
                for (std::size_t i = 0; i < xs.size(); ++i)
                    z = axpy(w[i] / s, xs[i], z);
                return z;
            };
            for (std::size_t i = 0; i < 1000; ++i) {
                Vector a = hull_point();
                pairs.emplace_back(std::move(a), hull_point());
            }
            const ForwardStabilityReport f = verify_forward_stability(net, prof, pairs);
            violations += f.violations;
            pairs_checked += f.pairs_checked;
            max_ratio = std::max(max_ratio, f.max_ratio);
        }
        r.passed = violations == 0 && dominance_fail == 0;
        r.detail = std::to_string(violations) + " violations over " + std::to_string(pairs_checked) +
                   " pairs (max ratio " + fmt(max_ratio) + "), dominance failures " + std::to_string(dominance_fail);
    });
}

CheckResult check_step_size_guard(const SelftestOptions& o) {
    return timed("step-size guard", [&](CheckResult& r) {
        std::ostringstream ss;
        bool ok = true;
        for (std::size_t k = 0; k < 5; ++k) {
            const std::uint64_t seed = derive_seed(o.seed ^ 0x8, k);
            GenSpec gs;
            gs.n = 48;
            gs.d = 4;
            gs.seed = seed;
            const Dataset ds = gen_data(gs);
            Rng rng(derive_seed(seed, 1));
            const Mlp net = init_mlp({{4, 16, 3}}, 1.0, rng);
            const double lmax = top_eigenvalue(batch_loss_hessian(net, ds.inputs, ds.targets, Loss::cross_entropy));
            TrainConfig cfg;
            cfg.epochs = 30;
            cfg.batch_size = ds.size();
            cfg.probe_size = ds.size();
            cfg.learning_rate = 1.0 / lmax;
            cfg.seed = seed;
            cfg.curvature_guard = true;
            const TrainResult tr = train(net, ds.inputs, ds.targets, Loss::cross_entropy, cfg);
            std::size_t down = 0;
            for (const EpochRecord& e : tr.log.epochs)
                if (e.probe_loss_after <= e.probe_loss_before)
                    ++down;
            const double frac = static_cast<double>(down) / static_cast<double>(tr.log.epochs.size());
            ok = ok && frac >= 0.9;
            ss << "run " << k << ": " << down << "/" << tr.log.epochs.size() << "; ";
        }

        // quadratic: linear model + squared loss, Hessian = mean of [x;1][x;1]ᵀ
        GenSpec gs;
        gs.kind = DataKind::linear_teacher;
        gs.n = 16;
        gs.d = 3;
        gs.seed = o.seed;
        const Dataset ds = gen_data(gs);
        Rng rng(derive_seed(o.seed, 1));
        const Mlp lin = init_mlp({{3, 1}}, 1.0, rng);
        const double lmax = top_eigenvalue(batch_loss_hessian(lin, ds.inputs, ds.targets, Loss::squared_error));
        TrainConfig cfg;
        cfg.epochs = 400;
        cfg.batch_size = ds.size();
        cfg.probe_size = ds.size();
        cfg.learning_rate = 2.5 / lmax;
        cfg.seed = o.seed;
        cfg.curvature_guard = true;
        bool rejected = false, diverged = false;
        try {
            train(lin, ds.inputs, ds.targets, Loss::squared_error, cfg);
        } catch (const StepSizeRejected&) {
            rejected = true;
        }
        cfg.curvature_guard = false;
        try {
            train(lin, ds.inputs, ds.targets, Loss::squared_error, cfg);
        } catch (const TrainingDiverged&) {
            diverged = true;
        }
        const bool unstable_factor = std::abs(1.0 - cfg.learning_rate * lmax) > 1.0;
        ok = ok && rejected && diverged && unstable_factor;
        ss << "above-bound quadratic: rejected=" << rejected << " diverged=" << diverged;
        r.passed = ok;
        r.detail = ss.str();
    });
}

std::vector<CheckResult> run_selftest(const SelftestOptions& o,
                                      const std::function<void(const CheckResult&)>& on_result) {
    using Check = CheckResult (*)(const SelftestOptions&);
    const Check checks[] = {check_jacobian_identification, check_ntk_spectrum,      check_flow_closed_form,
                            check_sensitivity_bound,       check_flow_majorization, check_entropy_majorization,
                            check_forward_stability,       check_step_size_guard};
    std::vector<CheckResult> out;
    for (Check c : checks) {
        out.push_back(c(o));
        if (on_result)
            on_result(out.back());
    }
    return out;
}

}  // namespace specstab
