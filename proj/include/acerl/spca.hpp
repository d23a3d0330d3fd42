#pragma once

#include <acerl/core.hpp>
#include <acerl/init.hpp>
#include <acerl/linalg.hpp>

#include <cmath>
#include <vector>

namespace acerl {

/// Row-sparse principal subspace of the sample covariance.
struct SpcaResult {
    Matrix U;                 // d x r, orthonormal columns
    Vector lambda;            // diag(U^T Sigma U)
    std::vector<Index> support;
    int iterations = 0;
    bool converged = false;
    std::vector<double> objective_trace;  // tr(U^T Sigma U) per iteration

    /// U diag(lambda)^{1/2}, comparable to an edge embedding matrix.
    EmbeddingMatrix embedding() const {
        return EmbeddingMatrix(U * lambda.cwiseMax(0.0).cwiseSqrt().asDiagonal());
    }
};

struct SpcaOptions {
    int max_iter = 500;
    double tol = 1e-8;
};

/// Squared-Frobenius distance between the projectors of two orthonormal bases.
inline double projector_distance(const Matrix& a, const Matrix& b) {
    const double r = double(a.cols());
    return std::sqrt(std::max(0.0, 2.0 * r - 2.0 * (a.transpose() * b).squaredNorm()));
}

/// Row-truncated power iteration started from the leading eigenvectors of the sample covariance.
inline SpcaResult fit_spca(const Matrix& sigma, Index r, Index s, const SpcaOptions& opt = {}) {
    const Index d = sigma.rows();
    detail::require(sigma.cols() == d, "fit_spca: covariance must be square");
    detail::require(r >= 1 && r <= d, "fit_spca: r out of range");
    detail::require(s >= r && s <= d, "fit_spca: s must satisfy r <= s <= d");

    SpcaResult out;
    Matrix u = linalg::top_eigen(sigma, r).vectors;
    for (int it = 1; it <= opt.max_iter; ++it) {
        Matrix v = sigma * u;
        v = hard_threshold(EmbeddingMatrix(std::move(v)), s).Q;
        Matrix next = linalg::orthonormalize(v);
        const double change = projector_distance(u, next);
        u = std::move(next);
        out.iterations = it;
        out.objective_trace.push_back((u.transpose() * sigma * u).trace());
        if (change <= opt.tol) {
            out.converged = true;
            break;
        }
    }
    // Truncation leaves exact zeros in V; QR keeps them, but clear round-off anyway.
    const Vector norms = u.rowwise().norm();
    for (Index e = 0; e < d; ++e)
        if (norms[e] < 1e-14) u.row(e).setZero();
    out.U = u;
    out.lambda = (u.transpose() * sigma * u).diagonal();
    out.support = EmbeddingMatrix(u).row_support();
    return out;
}

inline SpcaResult fit_spca(const NetworkDataset& data, Index r, Index s, const SpcaOptions& opt = {}) {
    detail::require(r <= std::min(data.edges(), data.subjects()), "fit_spca: r must be at most min(d, n)");
    return fit_spca(centered_gram(data).M, r, s, opt);
}

/// z = Lambda^{-1/2} U^T x.
inline Matrix spca_embed(const SpcaResult& res, const Matrix& x) {
    detail::require(x.rows() == res.U.rows(), "spca_embed: edge count mismatch");
    for (Index j = 0; j < res.lambda.size(); ++j)
        if (!(res.lambda[j] > 0.0)) throw NumericalError("spca_embed: non-positive eigenvalue, degenerate model");
    return res.lambda.cwiseSqrt().cwiseInverse().asDiagonal() * (res.U.transpose() * x);
}

inline Vector spca_embed(const SpcaResult& res, const Vector& x) {
    return spca_embed(res, Matrix(x)).col(0);
}

} // namespace acerl
