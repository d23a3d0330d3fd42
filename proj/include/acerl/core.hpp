#pragma once

#include <acerl/error.hpp>

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace acerl {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

/// Lexicographic enumeration of the unordered node pairs (u, u'), u < u',
/// of an undirected graph on `node_count` nodes: (0,1), (0,2), ..., (1,2), ...
class EdgeIndexMap {
public:
    explicit EdgeIndexMap(Index node_count) : v_(node_count) {
        detail::require(node_count >= 2, "EdgeIndexMap: node count must be at least 2");
    }

    Index node_count() const noexcept { return v_; }
    Index edge_count() const noexcept { return v_ * (v_ - 1) / 2; }

    Index index_of(Index u, Index w) const {
        if (u > w) std::swap(u, w);
        detail::require(u >= 0 && w < v_ && u != w, "EdgeIndexMap: invalid node pair");
        return u * v_ - u * (u + 1) / 2 + (w - u - 1);
    }

    std::pair<Index, Index> pair_of(Index e) const {
        detail::require(e >= 0 && e < edge_count(), "EdgeIndexMap: edge index out of range");
        Index u = 0;
        Index row = v_ - 1;
        while (e >= row) {
            e -= row;
            ++u;
            --row;
        }
        return {u, u + 1 + e};
    }

    /// Recovers the node count from an edge count, if d = v(v-1)/2 for some v >= 2.
    static std::optional<EdgeIndexMap> from_edge_count(Index d) {
        const auto v = static_cast<Index>(std::llround((1.0 + std::sqrt(1.0 + 8.0 * double(d))) / 2.0));
        if (v >= 2 && v * (v - 1) / 2 == d) return EdgeIndexMap(v);
        return std::nullopt;
    }

    friend bool operator==(const EdgeIndexMap&, const EdgeIndexMap&) = default;

private:
    Index v_;
};

/// n subjects observed on d edges. Subjects are the columns of X.
struct NetworkDataset {
    Matrix X;
    std::optional<EdgeIndexMap> edge_map;
    std::optional<std::vector<int>> labels;
    std::optional<std::vector<double>> trait;
    std::vector<std::int64_t> subject_ids;

    NetworkDataset() = default;

    explicit NetworkDataset(Matrix x, std::optional<EdgeIndexMap> map = std::nullopt)
        : X(std::move(x)), edge_map(map) {
        validate();
    }

    Index edges() const noexcept { return X.rows(); }
    Index subjects() const noexcept { return X.cols(); }

    void validate() {
        detail::require(X.cols() >= 2, "NetworkDataset: at least two subjects are required");
        detail::require(X.rows() >= 1, "NetworkDataset: at least one edge is required");
        detail::require(X.allFinite(), "NetworkDataset: non-finite entry");
        if (edge_map)
            detail::require(edge_map->edge_count() == X.rows(),
                            "NetworkDataset: row count does not match the edge map");
        if (labels)
            detail::require(Index(labels->size()) == X.cols(), "NetworkDataset: label count mismatch");
        if (trait)
            detail::require(Index(trait->size()) == X.cols(), "NetworkDataset: trait count mismatch");
        if (subject_ids.empty()) {
            subject_ids.resize(std::size_t(X.cols()));
            for (Index i = 0; i < X.cols(); ++i) subject_ids[std::size_t(i)] = i;
        }
        detail::require(Index(subject_ids.size()) == X.cols(), "NetworkDataset: subject id count mismatch");
    }

    /// Dataset restricted to the given subject columns, in order.
    NetworkDataset select_subjects(const std::vector<Index>& cols) const {
        NetworkDataset out;
        out.X.resize(X.rows(), Index(cols.size()));
        out.edge_map = edge_map;
        if (labels) out.labels.emplace();
        if (trait) out.trait.emplace();
        for (std::size_t j = 0; j < cols.size(); ++j) {
            const Index c = cols[j];
            detail::require(c >= 0 && c < X.cols(), "select_subjects: column out of range");
            out.X.col(Index(j)) = X.col(c);
            out.subject_ids.push_back(subject_ids[std::size_t(c)]);
            if (labels) out.labels->push_back((*labels)[std::size_t(c)]);
            if (trait) out.trait->push_back((*trait)[std::size_t(c)]);
        }
        out.validate();
        return out;
    }
};

/// d x r edge embedding matrix; row e is the embedding of edge e.
struct EmbeddingMatrix {
    Matrix Q;

    EmbeddingMatrix() = default;
    explicit EmbeddingMatrix(Matrix q) : Q(std::move(q)) {
        detail::require(Q.allFinite(), "EmbeddingMatrix: non-finite entry");
    }

    Index edges() const noexcept { return Q.rows(); }
    Index rank() const noexcept { return Q.cols(); }

    Vector row_norms() const { return Q.rowwise().norm(); }

    std::vector<Index> row_support() const {
        std::vector<Index> out;
        for (Index e = 0; e < Q.rows(); ++e)
            if (Q.row(e).squaredNorm() > 0.0) out.push_back(e);
        return out;
    }

    /// Number of nonzero rows.
    Index row_sparsity() const { return Index(row_support().size()); }
};

/// r x n subject embeddings; column i belongs to subject i.
struct SubjectEmbedding {
    Matrix Z;
};

/// Symmetric v x v matrix -> edge vector, reading the strict upper triangle.
inline Vector vectorize_adjacency(const Matrix& adjacency, const EdgeIndexMap& map, double sym_tol = 1e-9) {
    const Index v = map.node_count();
    detail::require(adjacency.rows() == v && adjacency.cols() == v,
                    "vectorize_adjacency: matrix dimension does not match the edge map");
    Vector out(map.edge_count());
    Index e = 0;
    for (Index u = 0; u < v; ++u) {
        for (Index w = u + 1; w < v; ++w, ++e) {
            if (std::abs(adjacency(u, w) - adjacency(w, u)) > sym_tol)
                throw InvalidArgument("vectorize_adjacency: matrix is not symmetric at (" + std::to_string(u) +
                                      "," + std::to_string(w) + ")");
            out[e] = adjacency(u, w);
        }
    }
    return out;
}

/// Edge vector -> symmetric v x v matrix with zero diagonal.
inline Matrix devectorize_edges(const Vector& x, const EdgeIndexMap& map) {
    detail::require(x.size() == map.edge_count(), "devectorize_edges: length does not match the edge map");
    const Index v = map.node_count();
    Matrix out = Matrix::Zero(v, v);
    Index e = 0;
    for (Index u = 0; u < v; ++u)
        for (Index w = u + 1; w < v; ++w, ++e) out(u, w) = out(w, u) = x[e];
    return out;
}

} // namespace acerl
