#include "specstab/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace specstab {

namespace {

constexpr int kMaxSweeps = 80;
constexpr double kEps = std::numeric_limits<double>::epsilon();

using Columns = std::vector<Vector>;

Columns to_columns(const Matrix& a) {
    Columns cols(a.cols(), Vector(a.rows()));
    for (std::size_t r = 0; r < a.rows(); ++r)
        for (std::size_t c = 0; c < a.cols(); ++c)
            cols[c][r] = a(r, c);
    return cols;
}

void rotate(Vector& x, Vector& y, double c, double s) {
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double xi = x[i];
        const double yi = y[i];
        x[i] = c * xi - s * yi;
        y[i] = s * xi + c * yi;
    }
}

// Orthogonalizes columns of `a` in place; optionally accumulates the right
// rotations into `v`. Requires rows >= cols.
void hestenes(Columns& a, Columns* v) {
    const std::size_t n = a.size();
    if (n < 2)
        return;
    const std::size_t m = a.front().size();
    // relative off-diagonal test |a_p·a_q| <= tol·‖a_p‖‖a_q‖; implies the trace test.
    const double tol = std::max(16.0, static_cast<double>(m)) * kEps;
    for (int sweep = 0; sweep < kMaxSweeps; ++sweep) {
        bool rotated = false;
        for (std::size_t p = 0; p + 1 < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                const double alpha = dot(a[p], a[p]);
                const double beta = dot(a[q], a[q]);
                const double gamma = dot(a[p], a[q]);
                if (alpha == 0.0 || beta == 0.0)
                    continue;
                if (std::abs(gamma) <= tol * std::sqrt(alpha) * std::sqrt(beta))
                    continue;
                const double zeta = (beta - alpha) / (2.0 * gamma);
                const double t = std::copysign(1.0, zeta) / (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
                const double c = 1.0 / std::sqrt(1.0 + t * t);
                const double s = c * t;
                rotate(a[p], a[q], c, s);
                if (v)
                    rotate((*v)[p], (*v)[q], c, s);
                rotated = true;
            }
        }
        if (!rotated)
            return;
    }
    throw std::runtime_error("svd: Jacobi sweeps did not converge");
}

// Fills u-columns flagged in `missing` with an orthonormal completion.
void complete_basis(Columns& u, const std::vector<bool>& missing) {
    const std::size_t m = u.empty() ? 0 : u.front().size();
    std::size_t candidate = 0;
    for (std::size_t j = 0; j < u.size(); ++j) {
        if (!missing[j])
            continue;
        for (; candidate < m; ++candidate) {
            Vector e(m, 0.0);
            e[candidate] = 1.0;
            for (int pass = 0; pass < 2; ++pass)
                for (std::size_t k = 0; k < u.size(); ++k) {
                    if (k == j || (missing[k] && k > j))
                        continue;
                    const double proj = dot(u[k], e);
                    for (std::size_t i = 0; i < m; ++i)
                        e[i] -= proj * u[k][i];
                }
            const double nrm = norm2(e);
            if (nrm > 0.5) {
                for (double& x : e)
                    x /= nrm;
                u[j] = std::move(e);
                ++candidate;
                break;
            }
        }
    }
}

Svd svd_tall(const Matrix& a, bool vectors) {
    const std::size_t m = a.rows();
    const std::size_t n = a.cols();
    Columns cols = to_columns(a);
    Columns v;
    if (vectors) {
        v.assign(n, Vector(n, 0.0));
        for (std::size_t i = 0; i < n; ++i)
            v[i][i] = 1.0;
    }
    hestenes(cols, vectors ? &v : nullptr);

    Vector norms(n);
    for (std::size_t j = 0; j < n; ++j)
        norms[j] = norm2(cols[j]);
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](auto i, auto j) { return norms[i] > norms[j]; });

    Svd out;
    out.sigma.resize(n);
    for (std::size_t k = 0; k < n; ++k)
        out.sigma[k] = norms[order[k]];
    if (!vectors)
        return out;

    const double cutoff = kRankTol * (n ? out.sigma.front() : 0.0);
    Columns u(n);
    std::vector<bool> missing(n, false);
    for (std::size_t k = 0; k < n; ++k) {
        const double s = out.sigma[k];
        if (s > cutoff && s > 0.0) {
            u[k] = cols[order[k]];
            for (double& x : u[k])
                x /= s;
        } else {
            u[k] = Vector(m, 0.0);
            missing[k] = true;
        }
    }
    complete_basis(u, missing);

    out.u = Matrix(m, n);
    out.vt = Matrix(n, n);
    for (std::size_t k = 0; k < n; ++k) {
        for (std::size_t i = 0; i < m; ++i)
            out.u(i, k) = u[k][i];
        const Vector& vk = v[order[k]];
        for (std::size_t i = 0; i < n; ++i)
            out.vt(k, i) = vk[i];
    }
    return out;
}

Svd svd_impl(const Matrix& a, bool vectors) {
    if (!all_finite(a.data()))
        throw std::invalid_argument("svd: non-finite input");
    if (a.rows() >= a.cols())
        return svd_tall(a, vectors);
    Svd t = svd_tall(a.transpose(), vectors);
    Svd out;
    out.sigma = std::move(t.sigma);
    if (vectors) {
        out.u = t.vt.transpose();
        out.vt = t.u.transpose();
    }
    return out;
}

void require_symmetric(const Matrix& a, const char* who) {
    if (!a.is_square())
        throw std::invalid_argument(std::string(who) + ": non-square input " + shape_string(a));
    if (!all_finite(a.data()))
        throw std::invalid_argument(std::string(who) + ": non-finite input");
    const double scale = std::max(1.0, a.max_abs());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < i; ++j)
            if (std::abs(a(i, j) - a(j, i)) > 1e-9 * scale)
                throw std::invalid_argument(std::string(who) + ": input is not symmetric");
}

}  // namespace

Svd svd(const Matrix& a) { return svd_impl(a, true); }

Vector singular_values(const Matrix& a) { return svd_impl(a, false).sigma; }

SymEig sym_eig(const Matrix& a_in) {
    require_symmetric(a_in, "sym_eig");
    const std::size_t n = a_in.rows();
    Matrix a(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            a(i, j) = 0.5 * (a_in(i, j) + a_in(j, i));
    Matrix v = Matrix::identity(n);

    const double tol = std::max(16.0, static_cast<double>(n)) * kEps;
    const double floor = std::numeric_limits<double>::min() / kEps;
    bool converged = n < 2;
    for (int sweep = 0; sweep < kMaxSweeps && !converged; ++sweep) {
        bool rotated = false;
        for (std::size_t p = 0; p + 1 < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                const double apq = a(p, q);
                if (std::abs(apq) <= floor)
                    continue;
                if (std::abs(apq) <= tol * std::sqrt(std::abs(a(p, p) * a(q, q))))
                    continue;
                const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
                const double t = std::copysign(1.0, theta) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                for (std::size_t k = 0; k < n; ++k) {
                    const double akp = a(k, p);
                    const double akq = a(k, q);
                    a(k, p) = c * akp - s * akq;
                    a(k, q) = s * akp + c * akq;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double apk = a(p, k);
                    const double aqk = a(q, k);
                    a(p, k) = c * apk - s * aqk;
                    a(q, k) = s * apk + c * aqk;
                }
                a(p, q) = 0.0;
                a(q, p) = 0.0;
                for (std::size_t k = 0; k < n; ++k) {
                    const double vkp = v(k, p);
                    const double vkq = v(k, q);
                    v(k, p) = c * vkp - s * vkq;
                    v(k, q) = s * vkp + c * vkq;
                }
                rotated = true;
            }
        }
        converged = !rotated;
    }
    if (!converged)
        throw std::runtime_error("sym_eig: Jacobi sweeps did not converge");

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](auto i, auto j) { return a(i, i) > a(j, j); });
    SymEig out;
    out.eigenvalues.resize(n);
    out.eigenvectors = Matrix(n, n);
    for (std::size_t k = 0; k < n; ++k) {
        out.eigenvalues[k] = a(order[k], order[k]);
        for (std::size_t i = 0; i < n; ++i)
            out.eigenvectors(i, k) = v(i, order[k]);
    }
    return out;
}

double top_eigenvalue(const Matrix& a) {
    require_symmetric(a, "top_eigenvalue");
    const std::size_t n = a.rows();
    if (n == 0)
        throw std::invalid_argument("top_eigenvalue: empty matrix");
    if (n <= 200)
        return sym_eig(a).eigenvalues.front();

    // Restarted Lanczos, full reorthogonalization, restart from the top Ritz vector.
    const std::size_t steps = std::min<std::size_t>(n, 60);
    Vector start(n);
    for (std::size_t i = 0; i < n; ++i)
        start[i] = 1.0 + 0.01 * static_cast<double>(i % 7);
    double previous = -std::numeric_limits<double>::infinity();
    double theta = previous;
    for (int restart = 0; restart < 50; ++restart) {
        Columns q;
        const double s0 = norm2(start);
        q.push_back(start);
        for (double& x : q.back())
            x /= s0;
        Vector alpha, beta;
        for (std::size_t j = 0; j < steps; ++j) {
            Vector w = a * q[j];
            alpha.push_back(dot(w, q[j]));
            for (int pass = 0; pass < 2; ++pass)
                for (const auto& qi : q) {
                    const double h = dot(w, qi);
                    for (std::size_t i = 0; i < n; ++i)
                        w[i] -= h * qi[i];
                }
            const double b = norm2(w);
            if (j + 1 == steps || b <= 1e-13 * std::max(1.0, std::abs(alpha.back())))
                break;
            beta.push_back(b);
            for (double& x : w)
                x /= b;
            q.push_back(std::move(w));
        }
        const std::size_t k = alpha.size();
        Matrix t(k, k);
        for (std::size_t i = 0; i < k; ++i) {
            t(i, i) = alpha[i];
            if (i + 1 < k) {
                t(i, i + 1) = beta[i];
                t(i + 1, i) = beta[i];
            }
        }
        SymEig te = sym_eig(t);
        theta = te.eigenvalues.front();
        start.assign(n, 0.0);
        for (std::size_t i = 0; i < k; ++i)
            for (std::size_t r = 0; r < n; ++r)
                start[r] += te.eigenvectors(i, 0) * q[i][r];
        Vector resid = a * start;
        for (std::size_t r = 0; r < n; ++r)
            resid[r] -= theta * start[r];
        const double scale = std::max(std::abs(theta), a.max_abs());
        if (norm2(resid) <= 1e-10 * std::max(scale, 1e-300) || std::abs(theta - previous) <= 1e-14 * scale)
            return theta;
        previous = theta;
    }
    return theta;
}

Matrix psd_exp(const SymEig& eig, double t) {
    const std::size_t n = eig.eigenvalues.size();
    const double lmax = n ? std::max(0.0, eig.eigenvalues.front()) : 0.0;
    const double neg_tol = 1e-10 * std::max(1.0, lmax);
    Vector f(n);
    for (std::size_t k = 0; k < n; ++k) {
        double lam = eig.eigenvalues[k];
        if (lam < -neg_tol)
            throw std::invalid_argument("psd_exp: eigenvalue " + std::to_string(lam) + " is materially negative");
        lam = std::max(lam, 0.0);
        f[k] = std::exp(-t * lam);
    }
    const Matrix& q = eig.eigenvectors;
    Matrix out(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j <= i; ++j) {
            double s = 0.0;
            for (std::size_t k = 0; k < n; ++k)
                s += q(i, k) * f[k] * q(j, k);
            out(i, j) = s;
            out(j, i) = s;
        }
    return out;
}

Matrix psd_exp(const Matrix& a, double t) { return psd_exp(sym_eig(a), t); }

Matrix psd_sqrt(const Matrix& a) {
    SymEig e = sym_eig(a);
    const std::size_t n = e.eigenvalues.size();
    Vector f(n);
    for (std::size_t k = 0; k < n; ++k)
        f[k] = std::sqrt(std::max(e.eigenvalues[k], 0.0));
    Matrix out(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j <= i; ++j) {
            double s = 0.0;
            for (std::size_t k = 0; k < n; ++k)
                s += e.eigenvectors(i, k) * f[k] * e.eigenvectors(j, k);
            out(i, j) = s;
            out(j, i) = s;
        }
    return out;
}

double spectral_norm(const Matrix& a) {
    if (a.empty())
        return 0.0;
    return singular_values(a).front();
}

double orthonormality_error(const Matrix& q) {
    double err = 0.0;
    for (std::size_t i = 0; i < q.cols(); ++i)
        for (std::size_t j = 0; j <= i; ++j) {
            double s = 0.0;
            for (std::size_t r = 0; r < q.rows(); ++r)
                s += q(r, i) * q(r, j);
            err = std::max(err, std::abs(s - (i == j ? 1.0 : 0.0)));
        }
    return err;
}

Matrix reconstruct(const Svd& s) {
    Matrix us = s.u;
    for (std::size_t r = 0; r < us.rows(); ++r)
        for (std::size_t k = 0; k < us.cols(); ++k)
            us(r, k) *= s.sigma[k];
    return us * s.vt;
}

Matrix reconstruct(const SymEig& e) {
    Matrix ql = e.eigenvectors;
    for (std::size_t r = 0; r < ql.rows(); ++r)
        for (std::size_t k = 0; k < ql.cols(); ++k)
            ql(r, k) *= e.eigenvalues[k];
    return ql * e.eigenvectors.transpose();
}

}  // namespace specstab
