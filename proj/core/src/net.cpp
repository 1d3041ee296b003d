#include "specstab/net.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "specstab/io.hpp"

namespace specstab {

std::string_view to_string(Activation a) noexcept {
    switch (a) {
    case Activation::identity: return "identity";
    case Activation::relu: return "relu";
    case Activation::tanh: return "tanh";
    }
    return "identity";
}

Activation parse_activation(std::string_view name) {
    if (name == "identity" || name == "linear")
        return Activation::identity;
    if (name == "relu")
        return Activation::relu;
    if (name == "tanh")
        return Activation::tanh;
    throw std::invalid_argument("unknown activation '" + std::string(name) + "'");
}

double activate(Activation a, double z) noexcept {
    switch (a) {
    case Activation::identity: return z;
    case Activation::relu: return z > 0.0 ? z : 0.0;
    case Activation::tanh: return std::tanh(z);
    }
    return z;
}

double activation_derivative(Activation a, double z) noexcept {
    switch (a) {
    case Activation::identity: return 1.0;
    case Activation::relu: return z > 0.0 ? 1.0 : 0.0;
    case Activation::tanh: {
        const double t = std::tanh(z);
        return 1.0 - t * t;
    }
    }
    return 1.0;
}

Mlp::Mlp(std::vector<Layer> layers) : layers_(std::move(layers)) {
    if (layers_.empty())
        throw std::invalid_argument("Mlp: no layers");
    for (std::size_t i = 0; i < layers_.size(); ++i) {
        const Layer& l = layers_[i];
        if (l.weights.empty())
            throw std::invalid_argument("Mlp: layer " + std::to_string(i) + " has empty weights");
        if (i > 0 && l.fan_in() != layers_[i - 1].fan_out())
            throw std::invalid_argument("Mlp: layer " + std::to_string(i) + " expects " + std::to_string(l.fan_in()) +
                                        " inputs but previous layer has " +
                                        std::to_string(layers_[i - 1].fan_out()) + " outputs");
        if (l.has_bias ? l.bias.size() != l.fan_out() : !l.bias.empty())
            throw std::invalid_argument("Mlp: layer " + std::to_string(i) + " bias length mismatch");
        if (!all_finite(l.bias))
            throw std::invalid_argument("Mlp: non-finite bias");
        offsets_.push_back(offsets_.back() + l.parameter_count());
    }
    if (layers_.back().activation != Activation::identity)
        throw std::invalid_argument("Mlp: output layer activation must be identity");
}

Vector Mlp::parameters() const {
    Vector theta;
    theta.reserve(parameter_count());
    for (const Layer& l : layers_) {
        auto w = l.weights.data();
        theta.insert(theta.end(), w.begin(), w.end());
        theta.insert(theta.end(), l.bias.begin(), l.bias.end());
    }
    return theta;
}

void Mlp::set_parameters(std::span<const double> theta) {
    if (theta.size() != parameter_count())
        throw std::invalid_argument("set_parameters: expected " + std::to_string(parameter_count()) +
                                    " values, got " + std::to_string(theta.size()));
    std::size_t k = 0;
    for (Layer& l : layers_) {
        for (double& w : l.weights.data())
            w = theta[k++];
        for (double& b : l.bias)
            b = theta[k++];
    }
}

Mlp Mlp::with_parameters(std::span<const double> theta) const {
    Mlp copy = *this;
    copy.set_parameters(theta);
    return copy;
}

double& Mlp::parameter(std::size_t index) {
    if (index >= parameter_count())
        throw std::out_of_range("parameter index out of range");
    const auto it = std::upper_bound(offsets_.begin(), offsets_.end(), index);
    const std::size_t li = static_cast<std::size_t>(it - offsets_.begin()) - 1;
    Layer& l = layers_[li];
    const std::size_t local = index - offsets_[li];
    if (local < l.weights.size())
        return l.weights.data()[local];
    return l.bias[local - l.weights.size()];
}

Mlp init_mlp(const Architecture& arch, double gain, Rng& rng, InitScheme scheme) {
    if (arch.widths.size() < 2)
        throw std::invalid_argument("init_mlp: need at least input and output widths");
    std::vector<Layer> layers;
    const std::size_t depth = arch.widths.size() - 1;
    for (std::size_t i = 0; i < depth; ++i) {
        const std::size_t fan_in = arch.widths[i];
        const std::size_t fan_out = arch.widths[i + 1];
        Layer l;
        if (scheme == InitScheme::orthogonal) {
            if (fan_in != fan_out)
                throw std::invalid_argument("init_mlp: orthogonal init needs square layers");
            l.weights = rng.orthogonal(fan_in) * gain;
        } else {
            l.weights = rng.gaussian_matrix(fan_out, fan_in, gain / std::sqrt(static_cast<double>(fan_in)));
        }
        l.has_bias = arch.bias;
        if (arch.bias)
            l.bias.assign(fan_out, 0.0);
        l.activation = i + 1 == depth ? Activation::identity : arch.hidden;
        layers.push_back(std::move(l));
    }
    return Mlp(std::move(layers));
}

ForwardTrace forward(const Mlp& net, std::span<const double> x) {
    if (x.size() != net.input_dim())
        throw std::invalid_argument("forward: input has " + std::to_string(x.size()) + " entries, network expects " +
                                    std::to_string(net.input_dim()));
    ForwardTrace t;
    t.input.assign(x.begin(), x.end());
    const Vector* a = &t.input;
    for (const Layer& l : net.layers()) {
        Vector z = l.weights * *a;
        if (l.has_bias)
            for (std::size_t i = 0; i < z.size(); ++i)
                z[i] += l.bias[i];
        Vector act(z.size());
        for (std::size_t i = 0; i < z.size(); ++i)
            act[i] = activate(l.activation, z[i]);
        t.pre_activations.push_back(std::move(z));
        t.activations.push_back(std::move(act));
        a = &t.activations.back();
    }
    t.output = t.activations.back();
    return t;
}

Vector predict(const Mlp& net, std::span<const double> x) { return forward(net, x).output; }

namespace {

void check_trace(const Mlp& net, const ForwardTrace& trace) {
    if (trace.pre_activations.size() != net.depth() || trace.input.size() != net.input_dim())
        throw std::invalid_argument("trace does not belong to this network");
    for (std::size_t i = 0; i < net.depth(); ++i)
        if (trace.pre_activations[i].size() != net.layers()[i].fan_out())
            throw std::invalid_argument("trace does not belong to this network");
}

}  // namespace

Matrix input_jacobian_product(const Mlp& net, const ForwardTrace& trace) {
    check_trace(net, trace);
    const auto& layers = net.layers();
    const std::size_t L = layers.size();
    // Accumulate from the output side: M ← M·D_i·W_i.
    Matrix m = layers[L - 1].weights;
    for (std::size_t i = L - 1; i-- > 0;) {
        const Vector& z = trace.pre_activations[i];
        for (std::size_t r = 0; r < m.rows(); ++r)
            for (std::size_t c = 0; c < m.cols(); ++c)
                m(r, c) *= activation_derivative(layers[i].activation, z[c]);
        m = m * layers[i].weights;
    }
    return m;
}

Backprop backprop(const Mlp& net, const ForwardTrace& trace, std::span<const double> upstream) {
    check_trace(net, trace);
    if (upstream.size() != net.output_dim())
        throw std::invalid_argument("backprop: upstream length mismatch");
    const auto& layers = net.layers();
    Backprop out;
    out.params.assign(net.parameter_count(), 0.0);
    Vector delta(upstream.begin(), upstream.end());
    for (std::size_t i = layers.size(); i-- > 0;) {
        const Layer& l = layers[i];
        const Vector& z = trace.pre_activations[i];
        for (std::size_t r = 0; r < delta.size(); ++r)
            delta[r] *= activation_derivative(l.activation, z[r]);
        const Vector& a_prev = i == 0 ? trace.input : trace.activations[i - 1];
        double* g = out.params.data() + net.parameter_offset(i);
        for (std::size_t r = 0; r < l.fan_out(); ++r) {
            const double d = delta[r];
            for (std::size_t c = 0; c < l.fan_in(); ++c)
                g[r * l.fan_in() + c] = d * a_prev[c];
        }
        if (l.has_bias)
            std::copy(delta.begin(), delta.end(), g + l.weights.size());
        delta = transpose_times(l.weights, delta);
    }
    out.input = std::move(delta);
    return out;
}

Matrix input_jacobian(const Mlp& net, std::span<const double> x) {
    const ForwardTrace t = forward(net, x);
    const std::size_t c_out = net.output_dim();
    Matrix j(c_out, net.input_dim());
    Vector e(c_out, 0.0);
    for (std::size_t c = 0; c < c_out; ++c) {
        e[c] = 1.0;
        const Backprop b = backprop(net, t, e);
        std::copy(b.input.begin(), b.input.end(), j.row(c).begin());
        e[c] = 0.0;
    }
    return j;
}

Matrix finite_difference_jacobian(const Mlp& net, std::span<const double> x, double h) {
    if (!(h > 0.0))
        throw std::invalid_argument("finite_difference_jacobian: h must be positive");
    const std::size_t n = x.size();
    Matrix j(net.output_dim(), n);
    Vector xp(x.begin(), x.end());
    for (std::size_t k = 0; k < n; ++k) {
        const double orig = xp[k];
        xp[k] = orig + h;
        const Vector fp = predict(net, xp);
        xp[k] = orig - h;
        const Vector fm = predict(net, xp);
        xp[k] = orig;
        for (std::size_t c = 0; c < fp.size(); ++c)
            j(c, k) = (fp[c] - fm[c]) / (2.0 * h);
    }
    return j;
}

Matrix parameter_jacobian(const Mlp& net, std::span<const double> x) {
    const ForwardTrace t = forward(net, x);
    const std::size_t c_out = net.output_dim();
    Matrix j(c_out, net.parameter_count());
    Vector e(c_out, 0.0);
    for (std::size_t c = 0; c < c_out; ++c) {
        e[c] = 1.0;
        const Backprop b = backprop(net, t, e);
        std::copy(b.params.begin(), b.params.end(), j.row(c).begin());
        e[c] = 0.0;
    }
    return j;
}

std::string_view to_string(Loss l) noexcept {
    return l == Loss::squared_error ? "squared_error" : "cross_entropy";
}

Loss parse_loss(std::string_view name) {
    if (name == "squared_error" || name == "mse")
        return Loss::squared_error;
    if (name == "cross_entropy" || name == "cross_entropy_with_softmax")
        return Loss::cross_entropy;
    throw std::invalid_argument("unknown loss '" + std::string(name) + "'");
}

namespace {

void check_target(std::span<const double> yhat, std::span<const double> y) {
    if (yhat.size() != y.size())
        throw std::invalid_argument("loss: target has " + std::to_string(y.size()) + " entries, output has " +
                                    std::to_string(yhat.size()));
}

Vector softmax(std::span<const double> z) {
    const double mx = *std::max_element(z.begin(), z.end());
    Vector p(z.size());
    double s = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i) {
        p[i] = std::exp(z[i] - mx);
        s += p[i];
    }
    for (double& v : p)
        v /= s;
    return p;
}

}  // namespace

double loss_value(Loss loss, std::span<const double> yhat, std::span<const double> y) {
    check_target(yhat, y);
    if (loss == Loss::squared_error) {
        double s = 0.0;
        for (std::size_t i = 0; i < y.size(); ++i)
            s += (yhat[i] - y[i]) * (yhat[i] - y[i]);
        return 0.5 * s;
    }
    const double mx = *std::max_element(yhat.begin(), yhat.end());
    double s = 0.0;
    for (double z : yhat)
        s += std::exp(z - mx);
    const double lse = mx + std::log(s);
    double l = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i)
        l -= y[i] * (yhat[i] - lse);
    return l;
}

Vector loss_output_gradient(Loss loss, std::span<const double> yhat, std::span<const double> y) {
    check_target(yhat, y);
    if (loss == Loss::squared_error)
        return sub(yhat, y);
    const Vector p = softmax(yhat);
    double mass = 0.0;
    for (double v : y)
        mass += v;
    Vector g(y.size());
    for (std::size_t i = 0; i < y.size(); ++i)
        g[i] = p[i] * mass - y[i];
    return g;
}

Vector loss_gradient(const Mlp& net, std::span<const double> x, std::span<const double> y, Loss loss) {
    const ForwardTrace t = forward(net, x);
    return backprop(net, t, loss_output_gradient(loss, t.output, y)).params;
}

BatchGradient batch_loss_gradient(const Mlp& net, std::span<const Vector> xs, std::span<const Vector> ys, Loss loss) {
    if (xs.size() != ys.size() || xs.empty())
        throw std::invalid_argument("batch_loss_gradient: empty or mismatched batch");
    BatchGradient out;
    out.grad.assign(net.parameter_count(), 0.0);
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const ForwardTrace t = forward(net, xs[i]);
        out.loss += loss_value(loss, t.output, ys[i]);
        const Backprop b = backprop(net, t, loss_output_gradient(loss, t.output, ys[i]));
        for (std::size_t k = 0; k < b.params.size(); ++k)
            out.grad[k] += b.params[k];
    }
    const double inv = 1.0 / static_cast<double>(xs.size());
    out.loss *= inv;
    for (double& g : out.grad)
        g *= inv;
    return out;
}

Matrix batch_loss_hessian(const Mlp& net, std::span<const Vector> xs, std::span<const Vector> ys, Loss loss,
                          const HessianOptions& opts) {
    const std::size_t p = net.parameter_count();
    if (p > opts.parameter_cap)
        throw std::invalid_argument("loss_hessian: " + std::to_string(p) + " parameters exceed the cap of " +
                                    std::to_string(opts.parameter_cap));
    if (!(opts.h > 0.0))
        throw std::invalid_argument("loss_hessian: h must be positive");
    Mlp work = net;
    Matrix h(p, p);
    for (std::size_t j = 0; j < p; ++j) {
        double& theta_j = work.parameter(j);
        const double orig = theta_j;
        theta_j = orig + opts.h;
        const Vector gp = batch_loss_gradient(work, xs, ys, loss).grad;
        theta_j = orig - opts.h;
        const Vector gm = batch_loss_gradient(work, xs, ys, loss).grad;
        theta_j = orig;
        for (std::size_t i = 0; i < p; ++i)
            h(i, j) = (gp[i] - gm[i]) / (2.0 * opts.h);
    }
    for (std::size_t i = 0; i < p; ++i)
        for (std::size_t j = 0; j < i; ++j) {
            const double s = 0.5 * (h(i, j) + h(j, i));
            h(i, j) = s;
            h(j, i) = s;
        }
    return h;
}

Matrix loss_hessian(const Mlp& net, std::span<const double> x, std::span<const double> y, Loss loss,
                    const HessianOptions& opts) {
    const Vector xs[1] = {Vector(x.begin(), x.end())};
    const Vector ys[1] = {Vector(y.begin(), y.end())};
    return batch_loss_hessian(net, xs, ys, loss, opts);
}

std::string to_text(const Mlp& net) {
    std::ostringstream os;
    os << "mlp v1 L=" << net.depth() << '\n';
    for (const Layer& l : net.layers()) {
        os << l.fan_out() << ' ' << l.fan_in() << ' ' << to_string(l.activation) << ' '
           << (l.has_bias ? "bias" : "nobias") << '\n';
        auto w = l.weights.data();
        for (std::size_t i = 0; i < w.size(); ++i)
            os << (i ? " " : "") << format_double(w[i]);
        os << '\n';
        if (l.has_bias) {
            for (std::size_t i = 0; i < l.bias.size(); ++i)
                os << (i ? " " : "") << format_double(l.bias[i]);
            os << '\n';
        }
    }
    return os.str();
}

Mlp mlp_from_text(std::string_view text) {
    std::istringstream is{std::string(text)};
    std::string magic, version, depth_tok;
    if (!(is >> magic >> version >> depth_tok) || magic != "mlp")
        throw std::invalid_argument("mlp text: missing 'mlp v1 L=<n>' header");
    if (version != "v1")
        throw std::invalid_argument("mlp text: unsupported version '" + version + "'");
    if (depth_tok.rfind("L=", 0) != 0)
        throw std::invalid_argument("mlp text: malformed layer count '" + depth_tok + "'");
    const std::size_t depth = static_cast<std::size_t>(parse_double(depth_tok.substr(2)));
    auto read_number = [&](const char* what) {
        std::string tok;
        if (!(is >> tok))
            throw std::invalid_argument(std::string("mlp text: truncated while reading ") + what);
        return parse_double(tok);
    };
    std::vector<Layer> layers;
    for (std::size_t i = 0; i < depth; ++i) {
        std::size_t out = 0, in = 0;
        std::string act, bias;
        if (!(is >> out >> in >> act >> bias))
            throw std::invalid_argument("mlp text: truncated layer header " + std::to_string(i));
        if (bias != "bias" && bias != "nobias")
            throw std::invalid_argument("mlp text: expected bias|nobias, got '" + bias + "'");
        Layer l;
        l.activation = parse_activation(act);
        l.has_bias = bias == "bias";
        Vector w(out * in);
        for (double& v : w)
            v = read_number("weights");
        l.weights = Matrix(out, in, std::move(w));
        if (l.has_bias) {
            l.bias.resize(out);
            for (double& v : l.bias)
                v = read_number("biases");
        }
        layers.push_back(std::move(l));
    }
    std::string extra;
    if (is >> extra)
        throw std::invalid_argument("mlp text: trailing content '" + extra + "'");
    return Mlp(std::move(layers));
}

void save_mlp(const Mlp& net, const std::string& path) {
    std::ofstream f(path);
    if (!f)
        throw IoError("cannot open '" + path + "' for writing");
    f << to_text(net);
    if (!f)
        throw IoError("write failed for '" + path + "'");
}

Mlp load_mlp(const std::string& path) { return mlp_from_text(read_file(path)); }

}  // namespace specstab
