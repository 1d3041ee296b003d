#include "specstab/ntk.hpp"

#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "specstab/io.hpp"
#include "specstab/parallel.hpp"

namespace specstab {

GramMatrix::GramMatrix(Matrix k, std::vector<std::size_t> sample_ids) : k_(std::move(k)), ids_(std::move(sample_ids)) {
    if (!k_.is_square())
        throw std::invalid_argument("GramMatrix: non-square " + shape_string(k_));
    if (k_.rows() == 0)
        throw std::invalid_argument("GramMatrix: empty sample");
    if (ids_.empty()) {
        ids_.resize(k_.rows());
        std::iota(ids_.begin(), ids_.end(), std::size_t{0});
    }
    if (ids_.size() != k_.rows())
        throw std::invalid_argument("GramMatrix: sample id count mismatch");
    const double scale = std::max(1.0, k_.max_abs());
    for (std::size_t i = 0; i < k_.rows(); ++i)
        for (std::size_t j = 0; j < i; ++j) {
            if (std::abs(k_(i, j) - k_(j, i)) > 1e-10 * scale)
                throw std::invalid_argument("GramMatrix: not symmetric");
            const double s = 0.5 * (k_(i, j) + k_(j, i));
            k_(i, j) = s;
            k_(j, i) = s;
        }
}

SymEig GramMatrix::eig() const {
    SymEig e = sym_eig(k_);
    const double lmax = std::max(0.0, e.eigenvalues.front());
    for (double& l : e.eigenvalues) {
        if (l < -1e-9 * std::max(lmax, std::numeric_limits<double>::min()) && l < -1e-300)
            throw std::runtime_error("GramMatrix: materially negative eigenvalue " + format_double(l));
        l = std::max(l, 0.0);
    }
    return e;
}

GramMatrix gram(const Mlp& net, std::span<const Vector> xs, std::size_t threads) {
    if (xs.empty())
        throw std::invalid_argument("gram: empty sample");
    const std::size_t n = xs.size();
    std::vector<Matrix> jac(n);
    parallel_for(n, threads, [&](std::size_t i) { jac[i] = parameter_jacobian(net, xs[i]); });
    Matrix k(n, n);
    parallel_for(n, threads, [&](std::size_t i) {
        for (std::size_t j = 0; j <= i; ++j)
            k(i, j) = dot(jac[i].data(), jac[j].data());
    });
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < i; ++j)
            k(j, i) = k(i, j);
    return GramMatrix(std::move(k), {});
}

Matrix stacked_parameter_jacobian(const Mlp& net, std::span<const Vector> xs) {
    const std::size_t c = net.output_dim();
    Matrix g(xs.size() * c, net.parameter_count());
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const Matrix j = parameter_jacobian(net, xs[i]);
        for (std::size_t r = 0; r < c; ++r)
            std::copy(j.row(r).begin(), j.row(r).end(), g.row(i * c + r).begin());
    }
    return g;
}

FlowReport flow_difference(const SymEig& eig, std::span<const double> delta_y, std::span<const double> times) {
    const std::size_t n = eig.eigenvalues.size();
    if (delta_y.size() != n)
        throw std::invalid_argument("flow_difference: delta_y has " + std::to_string(delta_y.size()) +
                                    " entries, Gram is " + std::to_string(n) + "x" + std::to_string(n));
    FlowReport r;
    r.eig = eig;
    r.delta_y.assign(delta_y.begin(), delta_y.end());
    r.times.assign(times.begin(), times.end());
    Vector proj(n);
    for (std::size_t k = 0; k < n; ++k) {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            s += eig.eigenvectors(i, k) * delta_y[i];
        proj[k] = s;
    }
    const double dy2 = dot(delta_y, delta_y);
    for (double t : times) {
        if (!(t >= 0.0))
            throw std::invalid_argument("flow_difference: negative time");
        double sum = 0.0;
        double worst = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
            const double lam = std::max(eig.eigenvalues[k], 0.0);
            const double f = -std::expm1(-lam * t);
            sum += f * f * proj[k] * proj[k];
            worst = std::max(worst, f * f);
        }
        r.diff_norm_sq.push_back(sum);
        r.worst_case.push_back(worst * dy2);
    }
    return r;
}

FlowReport flow_difference(const GramMatrix& g, std::span<const double> delta_y, std::span<const double> times) {
    return flow_difference(g.eig(), delta_y, times);
}

Vector closed_form_flow(const GramMatrix& g, std::span<const double> y, std::span<const double> f0, double t) {
    if (y.size() != g.size() || f0.size() != g.size())
        throw std::invalid_argument("closed_form_flow: length mismatch");
    const Matrix e = psd_exp(g.eig(), t);
    const Vector r0 = sub(f0, y);
    return axpy(1.0, e * r0, y);
}

std::vector<Vector> simulate_discrete_flow(const GramMatrix& g, std::span<const double> y,
                                           std::span<const double> f0, double eta, std::size_t steps) {
    if (y.size() != g.size() || f0.size() != g.size())
        throw std::invalid_argument("simulate_discrete_flow: length mismatch");
    const double lmax = g.eig().eigenvalues.front();
    if (!(eta > 0.0))
        throw std::invalid_argument("simulate_discrete_flow: step size must be positive");
    if (lmax > 0.0 && eta >= 2.0 / lmax)
        throw std::invalid_argument("simulate_discrete_flow: step size " + format_double(eta) +
                                    " violates the curvature stability bound eta < 2/lambda_max = " +
                                    format_double(2.0 / lmax));
    std::vector<Vector> traj;
    traj.reserve(steps + 1);
    traj.emplace_back(f0.begin(), f0.end());
    for (std::size_t s = 0; s < steps; ++s) {
        const Vector& f = traj.back();
        const Vector kr = g.k() * sub(f, y);
        traj.push_back(axpy(-eta, kr, f));
    }
    return traj;
}

Conditioning conditioning(const GramMatrix& g) {
    const SymEig e = g.eig();
    Conditioning c;
    c.lambda_max = e.eigenvalues.front();
    if (!(c.lambda_max > 0.0)) {
        c.degenerate = true;
        c.kappa = std::numeric_limits<double>::infinity();
        return c;
    }
    const double cutoff = 1e-12 * c.lambda_max;
    c.lambda_min_nonzero = c.lambda_max;
    for (double l : e.eigenvalues)
        if (l > cutoff)
            c.lambda_min_nonzero = std::min(c.lambda_min_nonzero, l);
    c.kappa = c.lambda_max / c.lambda_min_nonzero;
    return c;
}

Vector default_time_grid(const SymEig& eig, std::size_t points) {
    if (points < 2)
        throw std::invalid_argument("default_time_grid: need at least two points");
    const double lmax = eig.eigenvalues.empty() ? 0.0 : eig.eigenvalues.front();
    if (!(lmax > 0.0))
        throw std::invalid_argument("default_time_grid: zero Gram has no time scale");
    double lmin = lmax;
    for (double l : eig.eigenvalues)
        if (l > 1e-12 * lmax)
            lmin = std::min(lmin, l);
    const double lo = std::log(1e-3 / lmax);
    const double hi = std::log(10.0 / lmin);
    Vector t(points);
    for (std::size_t i = 0; i < points; ++i)
        t[i] = std::exp(lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(points - 1));
    return t;
}

double amplification_sum(std::span<const double> lambda, double t) {
    double s = 0.0;
    for (double l : lambda) {
        const double f = -std::expm1(-std::max(l, 0.0) * t);
        s += f * f;
    }
    return s;
}

double worst_case_amplification(std::span<const double> lambda, double t) {
    double w = 0.0;
    for (double l : lambda) {
        const double f = -std::expm1(-std::max(l, 0.0) * t);
        w = std::max(w, f * f);
    }
    return w;
}

std::string flow_csv(const FlowReport& r) {
    CsvTable t;
    t.header = {"t", "diff_norm_sq", "worst_case"};
    for (std::size_t i = 0; i < r.times.size(); ++i)
        t.add_numeric_row({r.times[i], r.diff_norm_sq[i], r.worst_case[i]});
    return to_csv(t);
}

std::string flow_json(const FlowReport& r) {
    nlohmann::json j;
    j["schema"] = "v1";
    j["kind"] = "ntk_flow";
    j["eigenvalues"] = r.eig.eigenvalues;
    j["delta_y"] = r.delta_y;
    j["times"] = r.times;
    return j.dump(2);
}

}  // namespace specstab
