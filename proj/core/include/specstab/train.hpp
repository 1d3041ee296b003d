#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "specstab/net.hpp"

namespace specstab {

enum class Penalty {
    none,
    top_sv,   // λ·Σ_i σ_max(W_i)²
    entropy,  // λ·Σ_i H_S(W_i), pushes each layer towards a concentrated spectrum
};

std::string_view to_string(Penalty p) noexcept;
Penalty parse_penalty(std::string_view name);

struct TrainConfig {
    std::size_t epochs = 20;
    std::size_t batch_size = 32;
    double learning_rate = 0.05;
    std::uint64_t seed = 0;
    double penalty_weight = 0.0;
    Penalty penalty = Penalty::none;
    // Measure λ_max of the probe-batch Hessian at every epoch start and reject
    // learning rates at or above 2/λ_max.
    bool curvature_guard = false;
    std::size_t probe_size = 32;
    double divergence_threshold = 1e6;

    /// Throws std::invalid_argument on nonpositive rates, zero batch, negative weight.
    void validate() const;
};

struct EpochRecord {
    std::size_t epoch = 0;
    double loss = 0.0;      // mean data loss over the full set after the epoch
    double accuracy = 0.0;  // argmax agreement; NaN for single-output nets
    double penalty = 0.0;
    double probe_loss_before = 0.0;
    double probe_loss_after = 0.0;
    double probe_lambda_max = 0.0;  // NaN unless the curvature guard is on
    std::vector<double> sigma_max;  // per layer
    std::vector<double> entropy;    // per layer, H_S(W_i)
};

struct TrainLog {
    std::vector<EpochRecord> epochs;
    bool diverged = false;
    std::size_t skipped_penalty_steps = 0;  // degenerate top singular pairs
};

class TrainingDiverged : public std::runtime_error {
public:
    TrainingDiverged(const std::string& what, TrainLog log) : std::runtime_error(what), log_(std::move(log)) {}
    const TrainLog& log() const noexcept { return log_; }

private:
    TrainLog log_;
};

class StepSizeRejected : public std::invalid_argument {
public:
    StepSizeRejected(const std::string& what, double eta, double lambda_max)
        : std::invalid_argument(what), eta_(eta), lambda_max_(lambda_max) {}
    double eta() const noexcept { return eta_; }
    double lambda_max() const noexcept { return lambda_max_; }

private:
    double eta_;
    double lambda_max_;
};

struct TrainResult {
    Mlp net;
    TrainLog log;
};

/// Minibatch SGD. Shuffles with a Fisher-Yates pass driven by the config seed,
/// so results are bit-identical for identical (seed, config, data).
TrainResult train(Mlp net, std::span<const Vector> xs, std::span<const Vector> ys, Loss loss,
                  const TrainConfig& cfg);

/// Two runs from one initialization (drawn from cfg.seed); the configs must
/// agree in every field except penalty and penalty_weight.
std::pair<TrainResult, TrainResult> make_pair(const Architecture& arch, double gain, std::span<const Vector> xs,
                                              std::span<const Vector> ys, Loss loss, const TrainConfig& unstable,
                                              const TrainConfig& stable);

struct TopSingular {
    double sigma = 0.0;
    Vector u;
    Vector v;
    double second = 0.0;  // σ₂ estimate from the deflated matrix
    bool degenerate = false;
};

/// Power iteration on WᵀW from a warm start v (replaced by the converged vector).
TopSingular power_iteration(const Matrix& w, Vector& v, std::size_t iterations = 20, double tol = 1e-8);

/// ∂/∂W of σ_max(W)² = 2σ·u·vᵀ. Zero, with degenerate set, when the relative
/// gap between σ₁ and σ₂ is below 1e-8.
Matrix top_sv_penalty_gradient(const Matrix& w, Vector& warm, bool& degenerate);

/// ∂H_S(W)/∂W via central differences of H over σ, chained through u_k·v_kᵀ.
Matrix entropy_penalty_gradient(const Matrix& w);

std::string train_log_csv(const TrainLog& log);

}  // namespace specstab
