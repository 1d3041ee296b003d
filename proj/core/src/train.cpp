#include "specstab/train.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "specstab/io.hpp"
#include "specstab/linalg.hpp"
#include "specstab/spectra.hpp"

namespace specstab {

std::string_view to_string(Penalty p) noexcept {
    switch (p) {
    case Penalty::none: return "none";
    case Penalty::top_sv: return "top_sv";
    case Penalty::entropy: return "entropy";
    }
    return "none";
}

Penalty parse_penalty(std::string_view name) {
    if (name == "none")
        return Penalty::none;
    if (name == "top_sv")
        return Penalty::top_sv;
    if (name == "entropy")
        return Penalty::entropy;
    throw std::invalid_argument("unknown penalty '" + std::string(name) + "' (none, top_sv, entropy)");
}

void TrainConfig::validate() const {
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate))
        throw std::invalid_argument("train: learning_rate must be positive, got " + format_double(learning_rate));
    if (!(penalty_weight >= 0.0) || !std::isfinite(penalty_weight))
        throw std::invalid_argument("train: penalty weight must be nonnegative");
    if (batch_size == 0)
        throw std::invalid_argument("train: batch_size must be positive");
    if (curvature_guard && probe_size == 0)
        throw std::invalid_argument("train: probe_size must be positive when the curvature guard is on");
}

namespace {

double norm_into(Vector& v) {
    const double n = norm2(v);
    if (n > 0.0)
        for (double& x : v)
            x /= n;
    return n;
}

// Deterministic start vector for layers without a warm start.
Vector initial_direction(std::size_t n) {
    Vector v(n);
    for (std::size_t i = 0; i < n; ++i)
        v[i] = 1.0 + 0.5 * std::sin(static_cast<double>(i) + 1.0);
    norm_into(v);
    return v;
}

double run_power(const Matrix& w, Vector& v, Vector& u, std::size_t iterations, double tol) {
    double sigma = 0.0;
    for (std::size_t it = 0; it < iterations; ++it) {
        u = w * v;
        if (norm_into(u) == 0.0)
            return 0.0;
        v = transpose_times(w, u);
        const double s = norm_into(v);
        const bool done = std::abs(s - sigma) <= tol * s;
        sigma = s;
        if (done)
            break;
    }
    return sigma;
}

std::size_t argmax(std::span<const double> v) {
    return static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin());
}

struct Evaluation {
    double loss = 0.0;
    double accuracy = 0.0;
};

Evaluation evaluate(const Mlp& net, std::span<const Vector> xs, std::span<const Vector> ys, Loss loss) {
    Evaluation e;
    std::size_t hits = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const Vector y = predict(net, xs[i]);
        e.loss += loss_value(loss, y, ys[i]);
        if (y.size() > 1 && argmax(y) == argmax(ys[i]))
            ++hits;
    }
    e.loss /= static_cast<double>(xs.size());
    e.accuracy = net.output_dim() > 1 ? static_cast<double>(hits) / static_cast<double>(xs.size())
                                      : std::numeric_limits<double>::quiet_NaN();
    return e;
}

void shuffle(std::vector<std::size_t>& idx, Rng& rng) {
    for (std::size_t i = idx.size(); i > 1; --i)
        std::swap(idx[i - 1], idx[rng.below(i)]);
}

double penalty_value(const Mlp& net, Penalty p) {
    double s = 0.0;
    for (const Layer& l : net.layers()) {
        const Spectrum sp = Spectrum::of(l.weights);
        if (p == Penalty::top_sv)
            s += sp.top() * sp.top();
        else if (p == Penalty::entropy)
            s += spectral_entropy(sp);
    }
    return s;
}

}  // namespace

TopSingular power_iteration(const Matrix& w, Vector& v, std::size_t iterations, double tol) {
    if (v.size() != w.cols() || norm2(v) == 0.0)
        v = initial_direction(w.cols());
    else
        norm_into(v);
    TopSingular r;
    r.sigma = run_power(w, v, r.u, iterations, tol);
    r.v = v;
    if (r.sigma == 0.0) {
        r.degenerate = true;
        return r;
    }
    if (std::min(w.rows(), w.cols()) > 1) {
        Matrix deflated = w;
        for (std::size_t i = 0; i < w.rows(); ++i)
            for (std::size_t j = 0; j < w.cols(); ++j)
                deflated(i, j) -= r.sigma * r.u[i] * r.v[j];
        Vector v2 = initial_direction(w.cols());
        axpy(-dot(v2, r.v), r.v, v2).swap(v2);
        norm_into(v2);
        Vector u2;
        r.second = run_power(deflated, v2, u2, iterations, tol);
    }
    r.degenerate = (r.sigma - r.second) < 1e-8 * r.sigma;
    return r;
}

Matrix top_sv_penalty_gradient(const Matrix& w, Vector& warm, bool& degenerate) {
    const TopSingular t = power_iteration(w, warm);
    degenerate = t.degenerate;
    Matrix g(w.rows(), w.cols());
    if (degenerate)
        return g;
    for (std::size_t i = 0; i < w.rows(); ++i)
        for (std::size_t j = 0; j < w.cols(); ++j)
            g(i, j) = 2.0 * t.sigma * t.u[i] * t.v[j];
    return g;
}

Matrix entropy_penalty_gradient(const Matrix& w) {
    const Svd s = svd(w);
    const std::size_t k = s.sigma.size();
    double total = 0.0;
    for (double x : s.sigma)
        total += x;
    Matrix g(w.rows(), w.cols());
    if (total == 0.0)
        return g;
    auto entropy_of = [](const Vector& sig) {
        double sum = 0.0;
        for (double x : sig)
            sum += x;
        double h = 0.0;
        for (double x : sig)
            if (x > 0.0) {
                const double p = x / sum;
                h -= p * std::log(p);
            }
        return h;
    };
    const double h = 1e-6 * total;
    Vector dh(k);
    Vector sig = s.sigma;
    for (std::size_t i = 0; i < k; ++i) {
        const double x = sig[i];
        // forward difference at the boundary keeps σ nonnegative
        const double lo = std::max(0.0, x - h);
        sig[i] = x + h;
        const double fp = entropy_of(sig);
        sig[i] = lo;
        const double fm = entropy_of(sig);
        sig[i] = x;
        dh[i] = (fp - fm) / (x + h - lo);
    }
    for (std::size_t r = 0; r < w.rows(); ++r)
        for (std::size_t c = 0; c < w.cols(); ++c) {
            double acc = 0.0;
            for (std::size_t i = 0; i < k; ++i)
                acc += dh[i] * s.u(r, i) * s.vt(i, c);
            g(r, c) = acc;
        }
    return g;
}

TrainResult train(Mlp net, std::span<const Vector> xs, std::span<const Vector> ys, Loss loss,
                  const TrainConfig& cfg) {
    cfg.validate();
    if (xs.empty())
        throw std::invalid_argument("train: empty dataset");
    if (xs.size() != ys.size())
        throw std::invalid_argument("train: inputs and labels differ in length");

    TrainLog log;
    if (cfg.epochs == 0)
        return {std::move(net), std::move(log)};

    const std::size_t n = xs.size();
    Rng order_rng(derive_seed(cfg.seed, 1));
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});

    std::vector<Vector> probe_x, probe_y;
    {
        std::vector<std::size_t> p = idx;
        Rng probe_rng(derive_seed(cfg.seed, 2));
        shuffle(p, probe_rng);
        for (std::size_t i = 0; i < std::min(cfg.probe_size, n); ++i) {
            probe_x.push_back(xs[p[i]]);
            probe_y.push_back(ys[p[i]]);
        }
    }
    auto probe_loss = [&](const Mlp& m) {
        double s = 0.0;
        for (std::size_t i = 0; i < probe_x.size(); ++i)
            s += loss_value(loss, predict(m, probe_x[i]), probe_y[i]);
        return s / static_cast<double>(probe_x.size());
    };

    std::vector<Vector> warm(net.depth());
    std::vector<Vector> bx, by;
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        EpochRecord rec;
        rec.epoch = epoch;
        rec.probe_loss_before = probe_loss(net);
        rec.probe_lambda_max = std::numeric_limits<double>::quiet_NaN();
        if (cfg.curvature_guard) {
            const double lmax = top_eigenvalue(batch_loss_hessian(net, probe_x, probe_y, loss));
            rec.probe_lambda_max = lmax;
            if (lmax > 0.0 && cfg.learning_rate >= 2.0 / lmax)
                throw StepSizeRejected("train: learning rate " + format_double(cfg.learning_rate) +
                                           " is not below 2/lambda_max = " + format_double(2.0 / lmax) +
                                           " of the probe-batch Hessian (epoch " + std::to_string(epoch) + ")",
                                       cfg.learning_rate, lmax);
        }

        shuffle(idx, order_rng);
        for (std::size_t start = 0; start < n; start += cfg.batch_size) {
            const std::size_t stop = std::min(n, start + cfg.batch_size);
            bx.clear();
            by.clear();
            for (std::size_t i = start; i < stop; ++i) {
                bx.push_back(xs[idx[i]]);
                by.push_back(ys[idx[i]]);
            }
            BatchGradient g = batch_loss_gradient(net, bx, by, loss);
            if (!std::isfinite(g.loss) || g.loss > cfg.divergence_threshold || !all_finite(g.grad)) {
                log.diverged = true;
                throw TrainingDiverged("train: loss " + format_double(g.loss) + " exceeded " +
                                           format_double(cfg.divergence_threshold) + " in epoch " +
                                           std::to_string(epoch),
                                       std::move(log));
            }
            if (cfg.penalty != Penalty::none && cfg.penalty_weight > 0.0) {
                for (std::size_t li = 0; li < net.depth(); ++li) {
                    const Matrix& w = net.layers()[li].weights;
                    Matrix pg;
                    if (cfg.penalty == Penalty::top_sv) {
                        bool degenerate = false;
                        pg = top_sv_penalty_gradient(w, warm[li], degenerate);
                        if (degenerate)
                            ++log.skipped_penalty_steps;
                    } else {
                        pg = entropy_penalty_gradient(w);
                    }
                    const std::size_t off = net.parameter_offset(li);
                    auto d = pg.data();
                    for (std::size_t k = 0; k < d.size(); ++k)
                        g.grad[off + k] += cfg.penalty_weight * d[k];
                }
            }
            Vector theta = net.parameters();
            for (std::size_t k = 0; k < theta.size(); ++k)
                theta[k] -= cfg.learning_rate * g.grad[k];
            if (!all_finite(theta)) {
                log.diverged = true;
                throw TrainingDiverged("train: parameters overflowed in epoch " + std::to_string(epoch),
                                       std::move(log));
            }
            net.set_parameters(theta);
        }

        const Evaluation ev = evaluate(net, xs, ys, loss);
        rec.loss = ev.loss;
        rec.accuracy = ev.accuracy;
        rec.probe_loss_after = probe_loss(net);
        rec.penalty = cfg.penalty == Penalty::none ? 0.0 : cfg.penalty_weight * penalty_value(net, cfg.penalty);
        for (const Layer& l : net.layers()) {
            const Spectrum sp = Spectrum::of(l.weights);
            rec.sigma_max.push_back(sp.top());
            rec.entropy.push_back(spectral_entropy(sp));
        }
        log.epochs.push_back(std::move(rec));
        if (!std::isfinite(ev.loss) || ev.loss > cfg.divergence_threshold) {
            log.diverged = true;
            throw TrainingDiverged("train: loss " + format_double(ev.loss) + " exceeded " +
                                       format_double(cfg.divergence_threshold) + " after epoch " +
                                       std::to_string(epoch),
                                   std::move(log));
        }
    }
    return {std::move(net), std::move(log)};
}

std::pair<TrainResult, TrainResult> make_pair(const Architecture& arch, double gain, std::span<const Vector> xs,
                                              std::span<const Vector> ys, Loss loss, const TrainConfig& unstable,
                                              const TrainConfig& stable) {
    const bool same = unstable.epochs == stable.epochs && unstable.batch_size == stable.batch_size &&
                      unstable.learning_rate == stable.learning_rate && unstable.seed == stable.seed &&
                      unstable.curvature_guard == stable.curvature_guard &&
                      unstable.probe_size == stable.probe_size &&
                      unstable.divergence_threshold == stable.divergence_threshold;
    if (!same)
        throw std::invalid_argument("make_pair: configurations may differ only in the penalty");
    Rng init_rng(derive_seed(unstable.seed, 0));
    const Mlp init = init_mlp(arch, gain, init_rng);
    TrainResult a = train(init, xs, ys, loss, unstable);
    TrainResult b = train(init, xs, ys, loss, stable);
    return {std::move(a), std::move(b)};
}

std::string train_log_csv(const TrainLog& log) {
    CsvTable t;
    t.header = {"epoch", "loss", "accuracy", "penalty", "probe_loss_before", "probe_loss_after", "probe_lambda_max"};
    const std::size_t layers = log.epochs.empty() ? 0 : log.epochs.front().sigma_max.size();
    for (std::size_t i = 0; i < layers; ++i)
        t.header.push_back("sigma_max_" + std::to_string(i));
    for (std::size_t i = 0; i < layers; ++i)
        t.header.push_back("entropy_" + std::to_string(i));
    for (const EpochRecord& r : log.epochs) {
        std::vector<double> row{static_cast<double>(r.epoch), r.loss, r.accuracy, r.penalty,
                                r.probe_loss_before, r.probe_loss_after, r.probe_lambda_max};
        row.insert(row.end(), r.sigma_max.begin(), r.sigma_max.end());
        row.insert(row.end(), r.entropy.begin(), r.entropy.end());
        t.add_numeric_row(row);
    }
    return to_csv(t);
}

}  // namespace specstab
