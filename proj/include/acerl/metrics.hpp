#pragma once

#include <acerl/core.hpp>
#include <acerl/downstream.hpp>
#include <acerl/init.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <set>
#include <string>
#include <vector>

namespace acerl::metrics {

/// min over orthogonal O of ||A O - B||_F, with O = P Q^T from the SVD A^T B = P S Q^T.
inline double procrustes_dist(const Matrix& a, const Matrix& b) {
    detail::require(a.rows() == b.rows() && a.cols() == b.cols(), "procrustes_dist: shape mismatch");
    Eigen::JacobiSVD<Matrix> svd(a.transpose() * b, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const Matrix o = svd.matrixU() * svd.matrixV().transpose();
    return (a * o - b).norm();
}

/// ||Q_hat Q_hat^T - Q* Q*^T||_F without forming d x d products.
inline double gram_error(const Matrix& q_hat, const Matrix& q_star) {
    detail::require(q_hat.rows() == q_star.rows(), "gram_error: edge count mismatch");
    const double a = (q_hat.transpose() * q_hat).squaredNorm();
    const double b = (q_star.transpose() * q_star).squaredNorm();
    const double c = (q_hat.transpose() * q_star).squaredNorm();
    return std::sqrt(std::max(0.0, a + b - 2.0 * c));
}

inline double classification_accuracy(const std::vector<int>& pred, const std::vector<int>& truth) {
    detail::require(pred.size() == truth.size(), "classification_accuracy: length mismatch");
    detail::require(!truth.empty(), "classification_accuracy: empty input");
    std::size_t hits = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) hits += pred[i] == truth[i];
    return double(hits) / double(truth.size());
}

/// |selected ∩ truth| / |truth|.
inline double selection_recall(const std::vector<Index>& selected, const std::vector<Index>& truth) {
    detail::require(!truth.empty(), "selection_recall: empty true support");
    const std::set<Index> sel(selected.begin(), selected.end());
    const std::set<Index> tru(truth.begin(), truth.end());
    std::size_t hits = 0;
    for (Index e : tru) hits += sel.count(e);
    return double(hits) / double(tru.size());
}

/// Fraction of node pairs on which two partitions agree (together in both, or apart in both).
inline double rand_index(const std::vector<int>& a, const std::vector<int>& b) {
    detail::require(a.size() == b.size(), "rand_index: length mismatch");
    detail::require(a.size() >= 2, "rand_index: at least two nodes are required");
    std::size_t agree = 0;
    std::size_t total = 0;
    for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t j = i + 1; j < a.size(); ++j, ++total) agree += (a[i] == a[j]) == (b[i] == b[j]);
    return double(agree) / double(total);
}

/// Minimum-cost perfect assignment (Hungarian algorithm); returns col_of_row.
inline std::vector<int> hungarian(const Matrix& cost) {
    const int n = int(cost.rows());
    detail::require(cost.cols() == n, "hungarian: cost must be square");
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> u(std::size_t(n + 1), 0.0), v(std::size_t(n + 1), 0.0);
    std::vector<int> p(std::size_t(n + 1), 0), way(std::size_t(n + 1), 0);
    for (int i = 1; i <= n; ++i) {
        p[0] = i;
        int j0 = 0;
        std::vector<double> minv(std::size_t(n + 1), inf);
        std::vector<bool> used(std::size_t(n + 1), false);
        do {
            used[std::size_t(j0)] = true;
            const int i0 = p[std::size_t(j0)];
            double delta = inf;
            int j1 = 0;
            for (int j = 1; j <= n; ++j) {
                if (used[std::size_t(j)]) continue;
                const double cur = cost(i0 - 1, j - 1) - u[std::size_t(i0)] - v[std::size_t(j)];
                if (cur < minv[std::size_t(j)]) {
                    minv[std::size_t(j)] = cur;
                    way[std::size_t(j)] = j0;
                }
                if (minv[std::size_t(j)] < delta) {
                    delta = minv[std::size_t(j)];
                    j1 = j;
                }
            }
            for (int j = 0; j <= n; ++j) {
                if (used[std::size_t(j)]) {
                    u[std::size_t(p[std::size_t(j)])] += delta;
                    v[std::size_t(j)] -= delta;
                } else {
                    minv[std::size_t(j)] -= delta;
                }
            }
            j0 = j1;
        } while (p[std::size_t(j0)] != 0);
        do {
            const int j1 = way[std::size_t(j0)];
            p[std::size_t(j0)] = p[std::size_t(j1)];
            j0 = j1;
        } while (j0 != 0);
    }
    std::vector<int> col_of_row(std::size_t(n), -1);
    for (int j = 1; j <= n; ++j)
        if (p[std::size_t(j)] > 0) col_of_row[std::size_t(p[std::size_t(j)] - 1)] = j - 1;
    return col_of_row;
}

struct MisclusteringLosses {
    double overall = 0.0;     // L
    double worst_case = 0.0;  // L tilde
    bool exhaustive = true;
};

enum class PermutationSearch { automatic, exhaustive, hungarian };

/// Overall and worst-community misclustering losses, minimized over relabelings
/// of the estimated communities. A misassigned node counts 2 (two differing
/// entries of its one-hot row).
inline MisclusteringLosses misclustering_losses(const CommunityAssignment& theta_hat,
                                                const CommunityAssignment& theta,
                                                PermutationSearch search = PermutationSearch::automatic) {
    detail::require(theta_hat.G == theta.G && theta_hat.nodes() == theta.nodes(),
                    "misclustering_losses: shape mismatch");
    const Index G = theta.G;
    detail::require(G >= 1 && G <= 12, "misclustering_losses: G must be in [1, 12]");
    const auto est = theta_hat.labels();
    const auto tru = theta.labels();
    const double v = double(tru.size());

    // confusion(a, b): nodes with estimated label a and true label b
    Matrix confusion = Matrix::Zero(G, G);
    std::vector<double> sizes(std::size_t(G), 0.0);
    for (std::size_t u = 0; u < tru.size(); ++u) {
        confusion(est[u], tru[u]) += 1.0;
        sizes[std::size_t(tru[u])] += 1.0;
    }
    // perm[a] = true label that estimated label a maps to
    auto evaluate = [&](const std::vector<int>& perm, double& overall, double& worst) {
        std::vector<double> wrong(std::size_t(G), 0.0);
        for (Index a = 0; a < G; ++a)
            for (Index b = 0; b < G; ++b)
                if (perm[std::size_t(a)] != int(b)) wrong[std::size_t(b)] += confusion(a, b);
        overall = 0.0;
        worst = 0.0;
        for (Index b = 0; b < G; ++b) {
            overall += 2.0 * wrong[std::size_t(b)];
            if (sizes[std::size_t(b)] > 0) worst = std::max(worst, 2.0 * wrong[std::size_t(b)] / sizes[std::size_t(b)]);
        }
        overall /= v;
    };

    MisclusteringLosses out;
    const bool exhaustive =
        search == PermutationSearch::exhaustive || (search == PermutationSearch::automatic && G <= 8);
    out.exhaustive = exhaustive;
    if (exhaustive) {
        std::vector<int> perm(static_cast<std::size_t>(G));
        std::iota(perm.begin(), perm.end(), 0);
        out.overall = out.worst_case = std::numeric_limits<double>::infinity();
        do {
            double overall = 0, worst = 0;
            evaluate(perm, overall, worst);
            out.overall = std::min(out.overall, overall);
            out.worst_case = std::min(out.worst_case, worst);
        } while (std::next_permutation(perm.begin(), perm.end()));
    } else {
        const std::vector<int> perm = hungarian(-confusion);
        evaluate(perm, out.overall, out.worst_case);
    }
    return out;
}

/// Leading r_max eigenvalues of the sample covariance (clamped at 0) as fractions of its trace.
inline Vector explained_variance_profile(const NetworkDataset& data, Index r_max) {
    const Index d = data.edges();
    const Index n = data.subjects();
    detail::require(r_max >= 1 && r_max <= std::min(d, n), "explained_variance_profile: r_max must be in [1, min(d, n)]");
    const Matrix centered = data.X.colwise() - data.X.rowwise().mean();
    // The nonzero spectra of (1/n) Xc Xc^T and (1/n) Xc^T Xc coincide.
    const Matrix small = d <= n ? Matrix(centered * centered.transpose() / double(n))
                                : Matrix(centered.transpose() * centered / double(n));
    const Vector ev = Eigen::SelfAdjointEigenSolver<Matrix>(small, Eigen::EigenvaluesOnly).eigenvalues().reverse();
    const double total = centered.squaredNorm() / double(n);
    if (!(total > 0.0)) return Vector::Zero(r_max);
    return ev.head(r_max).cwiseMax(0.0) / total;
}

/// Row norms of the embedding, descending.
inline Vector edge_norm_profile(const EmbeddingMatrix& q_hat) {
    Vector norms = q_hat.row_norms();
    std::sort(norms.data(), norms.data() + norms.size(), std::greater<>());
    return norms;
}

/// Per-replication values of one metric and their summary.
struct ExperimentRecord {
    std::string design;   // canonical cell key
    std::string method;
    std::string task;
    std::string metric;
    std::vector<double> values;
    std::string status = "ok";

    double mean() const {
        if (values.empty()) return std::numeric_limits<double>::quiet_NaN();
        return std::accumulate(values.begin(), values.end(), 0.0) / double(values.size());
    }

    /// Sample standard deviation over sqrt(reps); 0 for a single replication.
    double stderr_() const {
        if (values.size() < 2) return values.empty() ? std::numeric_limits<double>::quiet_NaN() : 0.0;
        const double m = mean();
        double ss = 0.0;
        for (double x : values) ss += (x - m) * (x - m);
        return std::sqrt(ss / double(values.size() - 1)) / std::sqrt(double(values.size()));
    }
};

/// "mean(se)" with one decimal; `scale` = 100 renders fractions as percentages.
inline std::string format_mean_se(double mean, double se, double scale = 100.0) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.1f(%.1f)", mean * scale, se * scale);
    return buf;
}

} // namespace acerl::metrics
