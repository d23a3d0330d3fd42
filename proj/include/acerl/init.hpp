#pragma once

#include <acerl/core.hpp>
#include <acerl/linalg.hpp>

#include <cmath>
#include <string>

namespace acerl {

/// Rows with the s largest l2 norms kept verbatim, the rest zeroed; ties go to the smaller index.
inline EmbeddingMatrix hard_threshold(const EmbeddingMatrix& q, Index s) {
    detail::require(s >= 0, "hard_threshold: s must be non-negative");
    if (s >= q.edges()) return q;
    Matrix out = Matrix::Zero(q.edges(), q.rank());
    for (Index e : linalg::top_k_indices(q.row_norms(), s)) out.row(e) = q.Q.row(e);
    return EmbeddingMatrix(std::move(out));
}

/// Biased sample covariance of the subjects, M = (1/n) sum_i (x_i - xbar)(x_i - xbar)^T.
struct CenteredGram {
    Matrix M;

    Matrix off_diagonal() const { return linalg::off_diagonal(M); }
    Vector diagonal() const { return M.diagonal(); }
    Index edges() const noexcept { return M.rows(); }
};

inline CenteredGram centered_gram(const NetworkDataset& data) {
    detail::require(data.subjects() >= 2, "centered_gram: at least two subjects are required");
    const double n = double(data.subjects());
    const Vector mean = data.X.rowwise().mean();
    const Matrix centered = data.X.colwise() - mean;
    Matrix m = Matrix::Zero(data.edges(), data.edges());
    m.selfadjointView<Eigen::Lower>().rankUpdate(centered, 1.0 / n);
    m.triangularView<Eigen::StrictlyUpper>() = m.transpose();
    return {std::move(m)};
}

/// Euclidean projection onto the Fantope {0 <= H <= I, tr H = r}.
///
/// Eigenvalues g_i of the input are mapped to clamp(g_i - theta, 0, 1), with
/// theta found by bisection so that the clamped values sum to r.
inline Matrix fantope_project(const Matrix& a, Index r, double trace_tol = 1e-10, int max_iter = 200) {
    detail::require(a.rows() == a.cols(), "fantope_project: matrix must be square");
    detail::require(r >= 1 && r <= a.rows(), "fantope_project: rank out of range");
    const auto eig = linalg::sym_eigen(0.5 * (a + a.transpose()));
    const Vector& g = eig.values;

    auto clamped_sum = [&](double theta) { return (g.array() - theta).cwiseMax(0.0).cwiseMin(1.0).sum(); };

    // clamped_sum is non-increasing in theta; it equals d at lo and 0 at hi.
    double lo = g.minCoeff() - 1.0;
    double hi = g.maxCoeff();
    double theta = lo;
    bool converged = std::abs(clamped_sum(lo) - double(r)) <= trace_tol;
    for (int it = 0; it < max_iter && !converged; ++it) {
        theta = 0.5 * (lo + hi);
        const double s = clamped_sum(theta);
        if (std::abs(s - double(r)) <= trace_tol) {
            converged = true;
        } else if (s > double(r)) {
            lo = theta;
        } else {
            hi = theta;
        }
    }
    if (!converged)
        throw NumericalError("fantope_project: bisection did not converge in " + std::to_string(max_iter) +
                             " iterations");
    const Vector gamma = (g.array() - theta).cwiseMax(0.0).cwiseMin(1.0).matrix();
    Matrix h = eig.vectors * gamma.asDiagonal() * eig.vectors.transpose();
    return 0.5 * (h + h.transpose());
}

enum class InitMethod { fantope, gram_pca };

/// Alternating-direction scheme for the sparse Fantope relaxation
///   max <S, H> - lambda ||H||_1  subject to H in the Fantope.
struct FantopeAdmmOptions {
    double rho = 1.0;
    double lambda = -1.0;  // negative: sqrt(log d / n)
    int max_iter = 50;
    double tol = 1e-4;
};

struct FantopeAdmmResult {
    Matrix H;
    int iterations = 0;
    bool converged = false;
};

inline FantopeAdmmResult fantope_admm(const Matrix& s, Index r, double lambda, const FantopeAdmmOptions& opt) {
    const Index d = s.rows();
    Matrix y = Matrix::Zero(d, d);
    Matrix w = Matrix::Zero(d, d);
    FantopeAdmmResult out;
    for (int it = 1; it <= opt.max_iter; ++it) {
        out.H = fantope_project(y - w + s / opt.rho, r);
        const Matrix y_prev = y;
        y = linalg::soft_threshold(out.H + w, lambda / opt.rho);
        w += out.H - y;
        out.iterations = it;
        const double primal = (out.H - y).norm();
        const double dual = opt.rho * (y - y_prev).norm();
        if (primal <= opt.tol && dual <= opt.tol) {
            out.converged = true;
            break;
        }
    }
    return out;
}

/// Q = U diag(max(lambda, 0))^{1/2} from the leading r eigenpairs of a symmetric matrix.
inline Matrix scaled_top_eigvecs(const Matrix& a, Index r) {
    const auto eig = linalg::top_eigen(a, r);
    return eig.vectors * eig.values.cwiseMax(0.0).cwiseSqrt().asDiagonal();
}

/// Initial estimate of the edge embedding matrix from the off-diagonal centered Gram matrix.
inline EmbeddingMatrix initial_embedding(const CenteredGram& gram, Index n, Index r, Index s, InitMethod method,
                                         FantopeAdmmOptions admm = {}) {
    const Index d = gram.edges();
    detail::require(r >= 1 && r <= d, "initial_embedding: r out of range");
    detail::require(s >= 0, "initial_embedding: s must be non-negative");
    const Matrix delta = gram.off_diagonal();
    if (!delta.allFinite()) throw NumericalError("initial_embedding: non-finite Gram matrix");

    Matrix q;
    if (method == InitMethod::gram_pca) {
        q = scaled_top_eigvecs(delta, r);
    } else {
        const double lambda =
            admm.lambda >= 0.0 ? admm.lambda : std::sqrt(std::log(double(d)) / double(std::max<Index>(n, 1)));
        const auto sol = fantope_admm(delta, r, lambda, admm);
        const Matrix u = linalg::top_eigen(sol.H, r).vectors;
        // PCA of delta restricted to span(u).
        const Matrix inner = u.transpose() * delta * u;
        q = u * scaled_top_eigvecs(0.5 * (inner + inner.transpose()), r);
    }
    return hard_threshold(EmbeddingMatrix(std::move(q)), s);
}

inline EmbeddingMatrix initial_embedding(const NetworkDataset& data, Index r, Index s, InitMethod method,
                                         FantopeAdmmOptions admm = {}) {
    return initial_embedding(centered_gram(data), data.subjects(), r, s, method, admm);
}

} // namespace acerl
