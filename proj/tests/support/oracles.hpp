#pragma once

// Independent reference implementations used only by tests. None of these
// call into the library's numerical kernels: dense factorizations go through
// Eigen, and the network oracle re-implements the forward pass on raw weights.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "specstab/matrix.hpp"
#include "specstab/net.hpp"

namespace oracle {

using specstab::Matrix;
using specstab::Vector;

inline Eigen::MatrixXd to_eigen(const Matrix& m) {
    Eigen::MatrixXd e(m.rows(), m.cols());
    for (std::size_t i = 0; i < m.rows(); ++i)
        for (std::size_t j = 0; j < m.cols(); ++j)
            e(i, j) = m(i, j);
    return e;
}

inline Matrix from_eigen(const Eigen::MatrixXd& e) {
    Matrix m(e.rows(), e.cols());
    for (Eigen::Index i = 0; i < e.rows(); ++i)
        for (Eigen::Index j = 0; j < e.cols(); ++j)
            m(i, j) = e(i, j);
    return m;
}

inline Vector singular_values(const Matrix& m) {
    Eigen::JacobiSVD<Eigen::MatrixXd> s(to_eigen(m));
    const Eigen::VectorXd v = s.singularValues();
    return Vector(v.data(), v.data() + v.size());
}

/// Eigenvalues of a symmetric matrix, nonincreasing.
inline Vector eigenvalues(const Matrix& m) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> s(to_eigen(m));
    Vector v(s.eigenvalues().data(), s.eigenvalues().data() + s.eigenvalues().size());
    std::sort(v.rbegin(), v.rend());
    return v;
}

inline Matrix matmul(const Matrix& a, const Matrix& b) {
    return from_eigen(to_eigen(a) * to_eigen(b));
}

/// Straightforward forward pass from raw layer data.
inline Vector forward(const specstab::Mlp& net, const Vector& x) {
    Vector a = x;
    for (const auto& l : net.layers()) {
        Vector z(l.fan_out(), 0.0);
        for (std::size_t i = 0; i < l.fan_out(); ++i) {
            double s = l.has_bias ? l.bias[i] : 0.0;
            for (std::size_t j = 0; j < l.fan_in(); ++j)
                s += l.weights(i, j) * a[j];
            switch (l.activation) {
            case specstab::Activation::identity: z[i] = s; break;
            case specstab::Activation::tanh: z[i] = std::tanh(s); break;
            case specstab::Activation::relu: z[i] = s > 0.0 ? s : 0.0; break;
            }
        }
        a = std::move(z);
    }
    return a;
}

/// Central differences of a vector-valued map, column j = ∂f/∂x_j.
inline Matrix central_jacobian(const std::function<Vector(const Vector&)>& f, const Vector& x, double h) {
    const Vector f0 = f(x);
    Matrix j(f0.size(), x.size());
    Vector xp = x;
    for (std::size_t c = 0; c < x.size(); ++c) {
        xp[c] = x[c] + h;
        const Vector fp = f(xp);
        xp[c] = x[c] - h;
        const Vector fm = f(xp);
        xp[c] = x[c];
        for (std::size_t r = 0; r < f0.size(); ++r)
            j(r, c) = (fp[r] - fm[r]) / (2.0 * h);
    }
    return j;
}

inline Matrix input_jacobian_fd(const specstab::Mlp& net, const Vector& x, double h = 1e-5) {
    return central_jacobian([&](const Vector& z) { return forward(net, z); }, x, h);
}

inline Matrix parameter_jacobian_fd(const specstab::Mlp& net, const Vector& x, double h = 1e-6) {
    const Vector theta = net.parameters();
    return central_jacobian([&](const Vector& t) { return forward(net.with_parameters(t), x); }, theta, h);
}

inline double entropy(const Vector& sigma) {
    double s = 0.0;
    for (double v : sigma)
        s += v;
    if (s == 0.0)
        return 0.0;
    double h = 0.0;
    for (double v : sigma)
        if (v > 0.0)
            h -= v / s * std::log(v / s);
    return h;
}

inline double max_abs_diff(const Matrix& a, const Matrix& b) {
    return (to_eigen(a) - to_eigen(b)).cwiseAbs().maxCoeff();
}

}  // namespace oracle
