#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "specstab/net.hpp"
#include "specstab/ntk.hpp"
#include "specstab/spectra.hpp"

namespace specstab {

// ---------------------------------------------------------------------------
// Operator family and stability profile
// ---------------------------------------------------------------------------

struct SampleOperators {
    Matrix input_jacobian;    // reverse accumulation
    Matrix product_operator;  // W_L·D_{L−1}·…·D_1·W_1
    Matrix param_jacobian;
    std::optional<double> hessian_top;         // absent when p exceeds the cap
    std::optional<Vector> hessian_abs_spectrum;  // |λ_k(H)|, only for small p
};

/// All components evaluated at one frozen parameter vector.
struct OperatorFamily {
    std::vector<SampleOperators> samples;
    GramMatrix gram;
};

struct ProfileOptions {
    HessianOptions hessian{};
    bool include_hessian = true;
    std::size_t threads = 1;
};

OperatorFamily build_operator_family(const Mlp& net, std::span<const Vector> xs, std::span<const Vector> ys,
                                     Loss loss, const ProfileOptions& opts = {});

/// The four maxima whose largest entry is the (empirical) GMSI.
struct GmsiBreakdown {
    double input_jacobian = 0.0;  // max_i ‖J_f(x_i)‖₂
    double param_jacobian = 0.0;  // max_i ‖∇θ f(x_i)‖₂
    double ntk = 0.0;             // λ_max(K)^{1/2}
    double hessian = 0.0;         // max_i max(λ_max(H_i), 0)^{1/2}
    double max() const noexcept;
};

struct SampleProfile {
    SpectralSummary jacobian;
    SpectralSummary product;
    double jacobian_norm = 0.0;
    double param_jacobian_norm = 0.0;
    std::optional<double> hessian_top;
    std::optional<SpectralSummary> hessian;  // spectrum of |λ_k(H)|, small p only
};

struct StabilityProfile {
    std::vector<SampleProfile> samples;
    SpectralSummary gram;
    Conditioning gram_conditioning;
    GmsiBreakdown breakdown;
    double gmsi = 0.0;  // sup over the provided sample ("empirical GMSI")
    bool hessian_skipped = false;
};

StabilityProfile build_profile(const Mlp& net, std::span<const Vector> xs, std::span<const Vector> ys, Loss loss,
                               const ProfileOptions& opts = {});
StabilityProfile profile_from_family(const OperatorFamily& family);

// ---------------------------------------------------------------------------
// Forward and attribution stability (mean-value checks on segments)
// ---------------------------------------------------------------------------

using InputPair = std::pair<Vector, Vector>;

struct StabilityWitness {
    Vector x;
    Vector x_prime;
    double lhs = 0.0;
    double rhs = 0.0;
};

struct ForwardStabilityReport {
    std::size_t pairs_checked = 0;
    std::size_t violations = 0;
    double max_ratio = 0.0;     // max ‖f(x)−f(x′)‖ / (S_grid·‖x−x′‖)
    double empirical_c1 = 0.0;  // max ‖f(x)−f(x′)‖ / (gmsi·‖x−x′‖)
    std::optional<StabilityWitness> witness;
};

/// Checks ‖f(x)−f(x′)‖ ≤ S_grid·‖x−x′‖ with S_grid the largest ‖J_f‖₂ over
/// `grid_points` equispaced points of the segment.
ForwardStabilityReport verify_forward_stability(const Mlp& net, const StabilityProfile& profile,
                                                std::span<const InputPair> pairs, std::size_t grid_points = 33);

struct AttributionStabilityReport {
    std::size_t pairs_checked = 0;
    std::size_t violations = 0;
    double jacobian_lipschitz = 0.0;  // grid estimate of the Lipschitz constant of x ↦ J_f(x)
    double margin = 1.05;
    double max_ratio = 0.0;  // max ‖A(x)−A(x′)‖ / (ψ·L_J·‖x−x′‖)
    std::optional<StabilityWitness> witness;
};

/// Attribution A(x) = J_f(x)ᵀ e_c with c the predicted class at the first
/// point of each pair. Bound: ψ·L_J·margin·‖x−x′‖.
AttributionStabilityReport attribution_stability_check(const Mlp& net, double psi_lipschitz,
                                                       std::span<const InputPair> pairs,
                                                       std::size_t grid_points = 17);

// ---------------------------------------------------------------------------
// Expected sensitivity, SERR, attribution instability
// ---------------------------------------------------------------------------

enum class PerturbationLaw { gaussian, sphere };

/// δ with E‖δ‖² = ε²: Gaussian N(0, ε²/d·I), or ε times a uniform unit vector.
Vector draw_perturbation(Rng& rng, std::size_t d, double epsilon, PerturbationLaw law);

struct SensitivityReport {
    double epsilon = 0.0;
    std::size_t n_mc = 0;
    double empirical_mean_sq = 0.0;
    double empirical_stderr = 0.0;
    double analytic_mean_sq = 0.0;  // ε²·Σσ_k²/d
    double constant_k = 0.0;        // (Σσ_j)²/d
    double entropy = 0.0;           // H_S(J_f(x))
    double bound_rhs = 0.0;         // K·ε²·exp(H_S)
    double mc_tolerance = 0.0;      // 3·stderr / empirical mean
    bool holds = false;
};

SensitivityReport monte_carlo_sensitivity(const Mlp& net, std::span<const double> x, double epsilon,
                                          std::size_t n_mc, std::uint64_t seed,
                                          PerturbationLaw law = PerturbationLaw::gaussian);

struct SerrResult {
    double gain = 0.0;
    std::size_t n_inits = 0;
    double mean = 0.0;
    double std_error = 0.0;
    Vector entropies;
};

/// Mean H_S(J_f(x)) over fresh initializations of `arch` at the given gain.
/// Initialization i draws from derive_seed(seed, i).
SerrResult serr(const Architecture& arch, double gain, std::size_t n_inits, std::span<const double> x,
                std::uint64_t seed, InitScheme scheme = InitScheme::gaussian, std::size_t threads = 1);

struct InstabilityEstimate {
    std::size_t predicted_class = 0;
    double mean = 0.0;  // Δ_grad(x)
    double std_error = 0.0;
};

/// Δ_grad(x) = E_δ ‖∇x s_c(x+δ) − ∇x s_c(x)‖₁, class c fixed at the argmax of f(x).
InstabilityEstimate attribution_instability(const Mlp& net, std::span<const double> x, double epsilon,
                                            std::size_t n_mc, std::uint64_t seed,
                                            PerturbationLaw law = PerturbationLaw::gaussian);

std::size_t predicted_class(const Mlp& net, std::span<const double> x);
/// ∇x s_c at x.
Vector class_gradient(const Mlp& net, std::span<const double> x, std::size_t c);

// ---------------------------------------------------------------------------
// Fréchet distance between attribution distributions
// ---------------------------------------------------------------------------

enum class FrechetRoute {
    automatic,     // sample_space when d exceeds both sample counts
    covariance,    // d×d covariances, square roots via sym_eig
    sample_space,  // nuclear norm of X_A·X_Bᵀ, exact for sample covariances
};

/// ‖μ_A−μ_B‖² + tr(Σ_A + Σ_B − 2(Σ_A^{1/2} Σ_B Σ_A^{1/2})^{1/2}) with unbiased
/// sample moments. Requires ≥ 2 samples per side and equal dimensions.
double frechet_attr_distance(std::span<const Vector> a, std::span<const Vector> b,
                             FrechetRoute route = FrechetRoute::automatic);

/// Model-level numbers in the layout of the unstable/stable comparison table.
struct AttributionDiagnostics {
    double spectral_entropy = 0.0;  // mean H_S(J_f(x_i))
    double acn = 0.0;               // mean finite κ_attr(x_i)
    double fd = 0.0;                // FD(attributions at x_i, at x_i + δ_i)
    double delta_grad = 0.0;        // mean Δ_grad(x_i), one draw per sample
};

AttributionDiagnostics attribution_diagnostics(const Mlp& net, std::span<const Vector> xs, double epsilon,
                                               std::uint64_t seed);

// ---------------------------------------------------------------------------
// NTK conditioning clause
// ---------------------------------------------------------------------------

struct NtkConditioningReport {
    Conditioning conditioning;
    double max_grad_norm_sq = 0.0;  // max_i ‖∇θ f(x_i)‖_F²
    double lambda_max_bound = 0.0;  // N·max_i ‖∇θ f(x_i)‖_F²
    double kappa_bound = 0.0;       // lambda_max_bound / λ_min_nonzero
    bool upper_bound_holds = false;
    double empirical_c2 = 0.0;      // κ / gmsi² (when a gmsi is supplied)
};

NtkConditioningReport ntk_conditioning_report(const Mlp& net, std::span<const Vector> xs,
                                              std::optional<double> gmsi = std::nullopt);

}  // namespace specstab
