#pragma once

#include <acerl/core.hpp>
#include <acerl/linalg.hpp>
#include <acerl/masking.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <random>
#include <vector>

namespace acerl {

// ---------------------------------------------------------------------------
// Subject embeddings and classification

/// z_i = (Q^T Q)^{-1} Q^T x_i for every subject. A small ridge is added when
/// Q^T Q is close to singular.
inline SubjectEmbedding subject_embeddings(const EmbeddingMatrix& q_hat, const Matrix& x) {
    detail::require(q_hat.edges() == x.rows(), "subject_embeddings: edge count mismatch");
    const Matrix& q = q_hat.Q;
    const Index r = q.cols();
    Matrix gram = q.transpose() * q;
    const double tr = gram.trace();
    if (!(tr > 0.0)) throw NumericalError("subject_embeddings: embedding matrix is zero");
    const Vector ev = Eigen::SelfAdjointEigenSolver<Matrix>(gram, Eigen::EigenvaluesOnly).eigenvalues();
    const double max_ev = ev.maxCoeff();
    const double min_ev = ev.minCoeff();
    if (!(min_ev > 0.0) || max_ev / min_ev > 1e12) gram.diagonal().array() += 1e-10 * tr / double(r);
    const Eigen::LDLT<Matrix> solver(gram);
    return {solver.solve(q.transpose() * x)};
}

inline SubjectEmbedding subject_embeddings(const EmbeddingMatrix& q_hat, const NetworkDataset& data) {
    return subject_embeddings(q_hat, data.X);
}

inline double logistic(double u) {
    if (u >= 0.0) return 1.0 / (1.0 + std::exp(-u));
    const double e = std::exp(u);
    return e / (1.0 + e);
}

struct LinearClassifier {
    Vector w;
    double intercept = 0.0;

    double probability(const Eigen::Ref<const Vector>& z) const { return logistic(w.dot(z) + intercept); }

    /// 1 iff F(w^T z + b) >= 1/2.
    int predict(const Eigen::Ref<const Vector>& z) const { return probability(z) >= 0.5 ? 1 : 0; }

    std::vector<int> predict(const SubjectEmbedding& emb) const {
        std::vector<int> out(std::size_t(emb.Z.cols()));
        for (Index i = 0; i < emb.Z.cols(); ++i) out[std::size_t(i)] = predict(emb.Z.col(i));
        return out;
    }
};

struct LogisticOptions {
    int max_iter = 100;
    double grad_tol = 1e-8;
    double ridge = 1e-6;
};

/// Logistic regression by damped Newton iterations on the ridge-penalized
/// mean negative log-likelihood. The penalty applies to the slope only.
inline LinearClassifier fit_classifier(const SubjectEmbedding& emb, const std::vector<int>& labels,
                                       const LogisticOptions& opt = {}) {
    const Matrix& z = emb.Z;
    const Index r = z.rows();
    const Index n = z.cols();
    detail::require(Index(labels.size()) == n, "fit_classifier: label count mismatch");
    const auto ones = std::count(labels.begin(), labels.end(), 1);
    const auto zeros = std::count(labels.begin(), labels.end(), 0);
    detail::require(ones + zeros == n, "fit_classifier: labels must be 0 or 1");
    detail::require(ones > 0 && zeros > 0, "fit_classifier: both classes must be present");

    Matrix design(n, r + 1);
    design.leftCols(r) = z.transpose();
    design.col(r).setOnes();
    Vector y(n);
    for (Index i = 0; i < n; ++i) y[i] = labels[std::size_t(i)];

    auto objective = [&](const Vector& beta) {
        const Vector eta = design * beta;
        double nll = 0.0;
        for (Index i = 0; i < n; ++i) {
            // log(1 + e^u) - y u, computed stably
            const double u = eta[i];
            nll += (u > 0 ? u + std::log1p(std::exp(-u)) : std::log1p(std::exp(u))) - y[i] * u;
        }
        return nll / double(n) + 0.5 * opt.ridge * beta.head(r).squaredNorm();
    };

    Vector beta = Vector::Zero(r + 1);
    double current = objective(beta);
    for (int it = 0; it < opt.max_iter; ++it) {
        const Vector eta = design * beta;
        Vector mu(n), weight(n);
        for (Index i = 0; i < n; ++i) {
            mu[i] = logistic(eta[i]);
            weight[i] = mu[i] * (1.0 - mu[i]);
        }
        Vector grad = design.transpose() * (mu - y) / double(n);
        grad.head(r) += opt.ridge * beta.head(r);
        if (grad.norm() <= opt.grad_tol) break;
        Matrix hess = design.transpose() * weight.asDiagonal() * design / double(n);
        hess.diagonal().array() += opt.ridge;
        const Vector dir = hess.ldlt().solve(grad);
        double step = 1.0;
        bool improved = false;
        for (int half = 0; half < 50; ++half, step *= 0.5) {
            const Vector trial = beta - step * dir;
            const double value = objective(trial);
            if (value <= current) {
                beta = trial;
                improved = value < current;
                current = value;
                break;
            }
        }
        if (!improved) break;
    }
    LinearClassifier clf;
    clf.w = beta.head(r);
    clf.intercept = beta[r];
    return clf;
}

inline int classify(const LinearClassifier& clf, const EmbeddingMatrix& q_hat, const Vector& x0) {
    const Matrix col = x0;
    return clf.predict(subject_embeddings(q_hat, col).Z.col(0));
}

// ---------------------------------------------------------------------------
// Edge selection and community detection

/// Top-s edges by embedding norm, descending; ties go to the smaller index.
inline std::vector<Index> select_edges(const EmbeddingMatrix& q_hat, Index s) {
    detail::require(s >= 1 && s <= q_hat.edges(), "select_edges: s must be in [1, d]");
    return linalg::top_k_indices(q_hat.row_norms(), s);
}

/// S[u, w] = ||q_e|| for e = (u, w); zero diagonal.
inline Matrix build_similarity(const EmbeddingMatrix& q_hat, const EdgeIndexMap& map) {
    detail::require(q_hat.edges() == map.edge_count(), "build_similarity: edge count does not match the edge map");
    return devectorize_edges(q_hat.row_norms(), map);
}

inline Matrix build_similarity(const EmbeddingMatrix& q_hat, const std::optional<EdgeIndexMap>& map) {
    if (!map) throw InvalidArgument("build_similarity: dataset has no edge map");
    return build_similarity(q_hat, *map);
}

struct CommunityAssignment {
    Matrix theta;  // v x G one-hot
    Index G = 0;

    static CommunityAssignment from_labels(const std::vector<int>& labels, Index G) {
        CommunityAssignment out;
        out.G = G;
        out.theta = Matrix::Zero(Index(labels.size()), G);
        for (std::size_t u = 0; u < labels.size(); ++u) {
            detail::require(labels[u] >= 0 && labels[u] < G, "CommunityAssignment: label out of range");
            out.theta(Index(u), labels[u]) = 1.0;
        }
        return out;
    }

    std::vector<int> labels() const {
        std::vector<int> out(std::size_t(theta.rows()));
        for (Index u = 0; u < theta.rows(); ++u) {
            Index g = 0;
            theta.row(u).maxCoeff(&g);
            out[std::size_t(u)] = int(g);
        }
        return out;
    }

    Index nodes() const noexcept { return theta.rows(); }
};

struct KMeansOptions {
    int restarts = 20;
    int max_iter = 100;
    std::uint64_t seed = 0;
};

struct KMeansRun {
    std::vector<int> labels;
    double objective = std::numeric_limits<double>::infinity();
    bool has_empty = false;
};

/// Lloyd's algorithm with k-means++ seeding on the rows of `points`.
inline KMeansRun kmeans_once(const Matrix& points, Index k, int max_iter, Rng& rng) {
    const Index m = points.rows();
    detail::require(k >= 1 && k <= m, "kmeans: k must be in [1, rows]");
    Matrix centers(k, points.cols());
    std::uniform_int_distribution<Index> pick(0, m - 1);
    centers.row(0) = points.row(pick(rng));
    Vector dist2 = (points.rowwise() - centers.row(0)).rowwise().squaredNorm();
    for (Index c = 1; c < k; ++c) {
        const double total = dist2.sum();
        Index chosen = 0;
        if (total > 0.0) {
            std::uniform_real_distribution<double> unif(0.0, total);
            double target = unif(rng);
            chosen = m - 1;
            for (Index i = 0; i < m; ++i) {
                target -= dist2[i];
                if (target < 0.0) {
                    chosen = i;
                    break;
                }
            }
        } else {
            chosen = pick(rng);
        }
        centers.row(c) = points.row(chosen);
        dist2 = dist2.cwiseMin((points.rowwise() - centers.row(c)).rowwise().squaredNorm());
    }

    KMeansRun run;
    run.labels.assign(std::size_t(m), -1);
    for (int it = 0; it < max_iter; ++it) {
        bool changed = false;
        for (Index i = 0; i < m; ++i) {
            Index best = 0;
            (centers.rowwise() - points.row(i)).rowwise().squaredNorm().minCoeff(&best);
            if (run.labels[std::size_t(i)] != int(best)) {
                run.labels[std::size_t(i)] = int(best);
                changed = true;
            }
        }
        if (!changed) break;
        Matrix sums = Matrix::Zero(k, points.cols());
        std::vector<Index> counts(std::size_t(k), 0);
        for (Index i = 0; i < m; ++i) {
            sums.row(run.labels[std::size_t(i)]) += points.row(i);
            ++counts[std::size_t(run.labels[std::size_t(i)])];
        }
        // An empty cluster keeps its previous center.
        for (Index c = 0; c < k; ++c)
            if (counts[std::size_t(c)] > 0) centers.row(c) = sums.row(c) / double(counts[std::size_t(c)]);
    }
    std::vector<Index> counts(std::size_t(k), 0);
    run.objective = 0.0;
    for (Index i = 0; i < m; ++i) {
        const int c = run.labels[std::size_t(i)];
        ++counts[std::size_t(c)];
        run.objective += (points.row(i) - centers.row(c)).squaredNorm();
    }
    run.has_empty = std::any_of(counts.begin(), counts.end(), [](Index c) { return c == 0; });
    return run;
}

/// Best of `restarts` k-means++ runs; restart j uses seed + j. Lowest objective
/// wins, ties go to the earlier restart.
inline KMeansRun kmeans(const Matrix& points, Index k, const KMeansOptions& opt,
                        std::vector<double>* objectives = nullptr) {
    detail::require(opt.restarts >= 1, "kmeans: at least one restart");
    KMeansRun best;
    for (int j = 0; j < opt.restarts; ++j) {
        Rng rng(opt.seed + std::uint64_t(j));
        KMeansRun run = kmeans_once(points, k, opt.max_iter, rng);
        if (objectives) objectives->push_back(run.objective);
        if (run.objective < best.objective) best = std::move(run);
    }
    return best;
}

struct SpectralEmbedding {
    Matrix laplacian;  // D^{-1/2} S D^{-1/2}
    Vector values;     // leading G by |value|
    Matrix vectors;    // v x G
};

inline constexpr double kDegreeFloor = 1e-12;

/// Normalized similarity D^{-1/2} S D^{-1/2} and its G leading eigenvectors by absolute eigenvalue.
inline SpectralEmbedding spectral_embedding(const Matrix& s, Index G) {
    detail::require(s.rows() == s.cols(), "spectral_communities: similarity must be square");
    detail::require(G >= 1 && G <= s.rows(), "spectral_communities: G must be in [1, v]");
    const Vector degree = s.rowwise().sum();
    for (Index u = 0; u < degree.size(); ++u)
        if (!(degree[u] > kDegreeFloor))
            throw NumericalError("spectral_communities: node " + std::to_string(u) + " is isolated");
    const Vector inv_sqrt = degree.cwiseSqrt().cwiseInverse();
    SpectralEmbedding out;
    out.laplacian = inv_sqrt.asDiagonal() * s * inv_sqrt.asDiagonal();
    out.laplacian = 0.5 * (out.laplacian + out.laplacian.transpose()).eval();
    const auto eig = linalg::sym_eigen(out.laplacian);
    std::vector<Index> order(std::size_t(eig.values.size()));
    std::iota(order.begin(), order.end(), Index{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](Index a, Index b) { return std::abs(eig.values[a]) > std::abs(eig.values[b]); });
    out.values.resize(G);
    out.vectors.resize(s.rows(), G);
    for (Index j = 0; j < G; ++j) {
        out.values[j] = eig.values[order[std::size_t(j)]];
        out.vectors.col(j) = eig.vectors.col(order[std::size_t(j)]);
    }
    return out;
}

inline CommunityAssignment spectral_communities(const Matrix& s, Index G, const KMeansOptions& opt = {}) {
    const SpectralEmbedding emb = spectral_embedding(s, G);
    const KMeansRun best = kmeans(emb.vectors, G, opt);
    if (best.has_empty) throw NumericalError("spectral_communities: empty cluster in the best k-means run");
    return CommunityAssignment::from_labels(best.labels, G);
}

} // namespace acerl
