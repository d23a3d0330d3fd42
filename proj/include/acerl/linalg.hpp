#pragma once

#include <acerl/core.hpp>

#include <algorithm>
#include <numeric>

namespace acerl::linalg {

struct SymEigen {
    Vector values;   // descending
    Matrix vectors;  // columns match `values`
};

/// Flip each column so that its largest-magnitude entry is positive.
inline void fix_signs(Matrix& vectors) {
    for (Index j = 0; j < vectors.cols(); ++j) {
        Index arg = 0;
        vectors.col(j).cwiseAbs().maxCoeff(&arg);
        if (vectors(arg, j) < 0.0) vectors.col(j) *= -1.0;
    }
}

/// Dense symmetric eigendecomposition, eigenvalues in descending order.
inline SymEigen sym_eigen(const Matrix& a) {
    detail::require(a.rows() == a.cols(), "sym_eigen: matrix must be square");
    if (!a.allFinite()) throw NumericalError("sym_eigen: non-finite input");
    Eigen::SelfAdjointEigenSolver<Matrix> solver(a);
    if (solver.info() != Eigen::Success) throw NumericalError("sym_eigen: eigendecomposition failed");
    SymEigen out;
    out.values = solver.eigenvalues().reverse();
    out.vectors = solver.eigenvectors().rowwise().reverse();
    fix_signs(out.vectors);
    return out;
}

/// Leading `k` eigenpairs, by value.
inline SymEigen top_eigen(const Matrix& a, Index k) {
    auto full = sym_eigen(a);
    detail::require(k >= 0 && k <= full.values.size(), "top_eigen: k out of range");
    return {full.values.head(k), full.vectors.leftCols(k)};
}

/// Thin QR orthonormalization, columns sign-fixed.
inline Matrix orthonormalize(const Matrix& v) {
    Eigen::HouseholderQR<Matrix> qr(v);
    Matrix q = qr.householderQ() * Matrix::Identity(v.rows(), v.cols());
    fix_signs(q);
    return q;
}

/// Indices of the `k` largest values, descending; ties go to the smaller index.
inline std::vector<Index> top_k_indices(const Vector& values, Index k) {
    std::vector<Index> idx(std::size_t(values.size()));
    std::iota(idx.begin(), idx.end(), Index{0});
    k = std::clamp<Index>(k, 0, values.size());
    auto cmp = [&](Index a, Index b) {
        if (values[a] != values[b]) return values[a] > values[b];
        return a < b;
    };
    std::partial_sort(idx.begin(), idx.begin() + k, idx.end(), cmp);
    idx.resize(std::size_t(k));
    return idx;
}

inline Matrix soft_threshold(const Matrix& a, double level) {
    return a.unaryExpr([level](double x) {
        if (x > level) return x - level;
        if (x < -level) return x + level;
        return 0.0;
    });
}

/// Off-diagonal part of a square matrix.
inline Matrix off_diagonal(const Matrix& a) {
    Matrix out = a;
    out.diagonal().setZero();
    return out;
}

} // namespace acerl::linalg
