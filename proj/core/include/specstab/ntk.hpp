#pragma once

#include <span>
#include <string>
#include <vector>

#include "specstab/linalg.hpp"
#include "specstab/net.hpp"

namespace specstab {

/// Empirical NTK Gram over a sample: symmetric PSD, symmetrized on construction.
class GramMatrix {
public:
    GramMatrix() = default;
    /// Rejects non-square input or asymmetry above 1e-10·max(1, ‖k‖_max).
    GramMatrix(Matrix k, std::vector<std::size_t> sample_ids);

    const Matrix& k() const noexcept { return k_; }
    const std::vector<std::size_t>& sample_ids() const noexcept { return ids_; }
    std::size_t size() const noexcept { return k_.rows(); }
    /// Eigendecomposition with eigenvalues above −1e-9·λ_max clamped to 0.
    SymEig eig() const;

private:
    Matrix k_;
    std::vector<std::size_t> ids_;
};

/// K_ij = tr(∇θf(x_i)·∇θf(x_j)ᵀ). Parameter Jacobians are computed on up to
/// `threads` workers.
GramMatrix gram(const Mlp& net, std::span<const Vector> xs, std::size_t threads = 1);

/// Parameter Jacobians of all samples stacked row-wise: (N·C) × p.
Matrix stacked_parameter_jacobian(const Mlp& net, std::span<const Vector> xs);

struct FlowReport {
    SymEig eig;
    Vector delta_y;
    Vector times;
    Vector diff_norm_sq;  // ‖f_t − f̃_t‖²
    Vector worst_case;    // max_k (1 − e^{−λ_k t})² · ‖δy‖²
};

/// Label-perturbation response of kernel gradient flow, evaluated in the eigenbasis.
FlowReport flow_difference(const GramMatrix& g, std::span<const double> delta_y, std::span<const double> times);
FlowReport flow_difference(const SymEig& eig, std::span<const double> delta_y, std::span<const double> times);

/// f_t = y + e^{−tK}(f₀ − y).
Vector closed_form_flow(const GramMatrix& g, std::span<const double> y, std::span<const double> f0, double t);

/// Euler iterates f ← f − η·K·(f − y); returns steps+1 states. Rejects η ≥ 2/λ_max.
std::vector<Vector> simulate_discrete_flow(const GramMatrix& g, std::span<const double> y,
                                           std::span<const double> f0, double eta, std::size_t steps);

struct Conditioning {
    double lambda_max = 0.0;
    double lambda_min_nonzero = 0.0;
    double kappa = 0.0;  // +inf and degenerate = true for the zero Gram
    bool degenerate = false;
};

/// λ_max/λ_min over eigenvalues above 1e-12·λ_max.
Conditioning conditioning(const GramMatrix& g);

/// 32 log-spaced times over [1e-3/λ_max, 10/λ_min_nonzero].
Vector default_time_grid(const SymEig& eig, std::size_t points = 32);

/// Σ_k (1 − e^{−λ_k t})² for a PSD spectrum.
double amplification_sum(std::span<const double> lambda, double t);
/// max_k (1 − e^{−λ_k t})².
double worst_case_amplification(std::span<const double> lambda, double t);

/// CSV columns t, diff_norm_sq, worst_case.
std::string flow_csv(const FlowReport& r);
/// JSON sidecar with schema tag, eigenvalues, and δy.
std::string flow_json(const FlowReport& r);

}  // namespace specstab
