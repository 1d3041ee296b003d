#pragma once

#include "specstab/matrix.hpp"

namespace specstab {

/// Thin SVD: A = U·diag(sigma)·Vᵀ with k = min(rows, cols) singular triplets.
struct Svd {
    Matrix u;      // rows × k, orthonormal columns
    Vector sigma;  // k, nonincreasing, >= 0
    Matrix vt;     // k × cols
};

struct SymEig {
    Vector eigenvalues;   // nonincreasing
    Matrix eigenvectors;  // orthonormal columns, column k pairs with eigenvalues[k]
};

/// Relative cutoff below which a singular value counts as zero for rank decisions.
inline constexpr double kRankTol = 1e-12;

/// One-sided (Hestenes) Jacobi SVD with cyclic sweeps. Throws on non-finite input.
Svd svd(const Matrix& a);

/// Singular values only; skips accumulating V and completing U.
Vector singular_values(const Matrix& a);

/// Cyclic Jacobi on the symmetrized input. Rejects non-square or materially
/// asymmetric matrices (‖a − aᵀ‖_max > 1e-9·max(1, ‖a‖_max)).
SymEig sym_eig(const Matrix& a);

/// Largest algebraic eigenvalue of a symmetric matrix. Dense Jacobi for small
/// n, restarted Lanczos with full reorthogonalization otherwise.
double top_eigenvalue(const Matrix& a);

/// e^{−t·a} for symmetric PSD a. Eigenvalues down to −1e-10·max(1, λ_max) are
/// clamped to zero; anything more negative is rejected.
Matrix psd_exp(const Matrix& a, double t);
Matrix psd_exp(const SymEig& eig, double t);

/// Principal square root of a symmetric matrix with negative eigenvalues clamped at 0.
Matrix psd_sqrt(const Matrix& a);

double spectral_norm(const Matrix& a);

/// ‖UᵀU − I‖_max for a matrix with (supposedly) orthonormal columns.
double orthonormality_error(const Matrix& q);

Matrix reconstruct(const Svd& s);
Matrix reconstruct(const SymEig& e);

}  // namespace specstab
