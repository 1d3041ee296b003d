#pragma once

#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "specstab/matrix.hpp"
#include "specstab/random.hpp"

namespace specstab {

enum class Activation { identity, relu, tanh };

std::string_view to_string(Activation a) noexcept;
Activation parse_activation(std::string_view name);

double activate(Activation a, double z) noexcept;
/// φ′(z); relu′(0) is fixed to 0.
double activation_derivative(Activation a, double z) noexcept;

struct Layer {
    Matrix weights;  // fan_out × fan_in
    Vector bias;     // fan_out, empty when has_bias is false
    Activation activation = Activation::identity;
    bool has_bias = true;

    std::size_t fan_in() const noexcept { return weights.cols(); }
    std::size_t fan_out() const noexcept { return weights.rows(); }
    std::size_t parameter_count() const noexcept { return weights.size() + (has_bias ? fan_out() : 0); }

    friend bool operator==(const Layer&, const Layer&) = default;
};

/// Feedforward network. Parameters flatten layer by layer as W (row-major)
/// followed by b; every parameter-indexed quantity uses that order.
class Mlp {
public:
    Mlp() = default;
    explicit Mlp(std::vector<Layer> layers);

    const std::vector<Layer>& layers() const noexcept { return layers_; }
    std::size_t depth() const noexcept { return layers_.size(); }
    std::size_t input_dim() const noexcept { return layers_.front().fan_in(); }
    std::size_t output_dim() const noexcept { return layers_.back().fan_out(); }
    std::size_t parameter_count() const noexcept { return offsets_.back(); }
    /// Offset of layer i's first weight in the flattened parameter vector.
    std::size_t parameter_offset(std::size_t layer) const noexcept { return offsets_[layer]; }

    Vector parameters() const;
    void set_parameters(std::span<const double> theta);
    Mlp with_parameters(std::span<const double> theta) const;
    double& parameter(std::size_t index);

    /// Mutable weights for in-place updates; dimensions must not change.
    Matrix& weights(std::size_t layer) noexcept { return layers_[layer].weights; }

    friend bool operator==(const Mlp&, const Mlp&) = default;

private:
    std::vector<Layer> layers_;
    std::vector<std::size_t> offsets_{0};
};

/// Layer widths n_0..n_L; hidden layers share one activation, the output is identity.
struct Architecture {
    std::vector<std::size_t> widths;
    Activation hidden = Activation::tanh;
    bool bias = true;
};

enum class InitScheme { gaussian, orthogonal };

/// Gaussian entries with std gain/√fan_in, zero biases. The orthogonal scheme
/// draws Haar orthogonal blocks scaled by gain and needs square layers.
Mlp init_mlp(const Architecture& arch, double gain, Rng& rng, InitScheme scheme = InitScheme::gaussian);

struct ForwardTrace {
    Vector input;
    std::vector<Vector> pre_activations;  // per layer, arguments of φ_i
    std::vector<Vector> activations;      // per layer, φ_i(pre_activations[i])
    Vector output;
};

ForwardTrace forward(const Mlp& net, std::span<const double> x);
Vector predict(const Mlp& net, std::span<const double> x);

/// W_L·D_{L−1}·…·D_1·W_1 assembled from the recorded pre-activations.
Matrix input_jacobian_product(const Mlp& net, const ForwardTrace& trace);
/// Input Jacobian by reverse accumulation, one output row at a time.
Matrix input_jacobian(const Mlp& net, std::span<const double> x);
Matrix finite_difference_jacobian(const Mlp& net, std::span<const double> x, double h = 1e-5);

struct Backprop {
    Vector params;  // ∂(upstreamᵀ f)/∂θ
    Vector input;   // ∂(upstreamᵀ f)/∂x
};
Backprop backprop(const Mlp& net, const ForwardTrace& trace, std::span<const double> upstream);

/// Row c is ∂f_c/∂θ in the flattened parameter order.
Matrix parameter_jacobian(const Mlp& net, std::span<const double> x);

enum class Loss { squared_error, cross_entropy };

std::string_view to_string(Loss l) noexcept;
Loss parse_loss(std::string_view name);

/// ½‖ŷ−y‖², or −Σ y_c log softmax(ŷ)_c.
double loss_value(Loss loss, std::span<const double> yhat, std::span<const double> y);
Vector loss_output_gradient(Loss loss, std::span<const double> yhat, std::span<const double> y);

Vector loss_gradient(const Mlp& net, std::span<const double> x, std::span<const double> y, Loss loss);

/// Mean loss and its parameter gradient over a batch.
struct BatchGradient {
    double loss = 0.0;
    Vector grad;
};
BatchGradient batch_loss_gradient(const Mlp& net, std::span<const Vector> xs, std::span<const Vector> ys, Loss loss);

struct HessianOptions {
    double h = 1e-5;
    std::size_t parameter_cap = 5000;
};

/// Central differences of the analytic gradient, symmetrized.
Matrix loss_hessian(const Mlp& net, std::span<const double> x, std::span<const double> y, Loss loss,
                    const HessianOptions& opts = {});
/// Hessian of the batch-mean loss.
Matrix batch_loss_hessian(const Mlp& net, std::span<const Vector> xs, std::span<const Vector> ys, Loss loss,
                          const HessianOptions& opts = {});

// Text format:
//   mlp v1 L=<layers>
//   <fan_out> <fan_in> <activation> <bias|nobias>
//   <row-major weights>
//   <biases>               (omitted for nobias)
std::string to_text(const Mlp& net);
Mlp mlp_from_text(std::string_view text);
void save_mlp(const Mlp& net, const std::string& path);
Mlp load_mlp(const std::string& path);

}  // namespace specstab
