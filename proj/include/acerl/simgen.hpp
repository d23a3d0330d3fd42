#pragma once

#include <acerl/core.hpp>
#include <acerl/masking.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <vector>

namespace acerl::sim {

/// Sparse design: x_{i,e} = 1.25 c_e q_e^T z_i + sigma_xi xi_{i,e},
/// xi_{i,e} ~ N(0, ((e + 1) / d)^2), c a 0/1 vector with s_star ones.
struct SparseSimSpec {
    Index n = 500;
    Index v = 45;
    Index r = 10;
    Index s_star = 50;
    double sigma_xi = 0.0;
    std::uint64_t seed = 0;

    Index d() const { return v * (v - 1) / 2; }

    void validate() const {
        detail::require(n >= 2, "SparseSimSpec: n must be at least 2");
        detail::require(v >= 2, "SparseSimSpec: v must be at least 2");
        detail::require(r >= 2, "SparseSimSpec: r must be at least 2 (labels compare z_1 and z_2)");
        detail::require(s_star >= 1 && s_star <= d(), "SparseSimSpec: s_star must be in [1, d]");
        detail::require(std::isfinite(sigma_xi) && sigma_xi >= 0.0, "SparseSimSpec: sigma_xi must be >= 0");
    }
};

/// Community design: x_{i,e} = 5 sqrt(c_u c_w) 10^{-|c_u - c_w|} q_e^T z_i + sigma_xi xi_{i,e}
/// for edge e = (u, w). Every member of community g shares one level c_g ~ U(0.1, 1.1);
/// `jitter` > 0 perturbs the per-node levels with N(0, jitter^2), clamped to [0.1, 1.1].
struct CommunitySimSpec {
    Index n = 500;
    Index v = 21;
    Index r = 10;
    Index G = 3;
    double sigma_xi = 0.0;
    double jitter = 0.0;
    std::uint64_t seed = 0;

    Index d() const { return v * (v - 1) / 2; }

    void validate() const {
        detail::require(n >= 2, "CommunitySimSpec: n must be at least 2");
        detail::require(v >= 2, "CommunitySimSpec: v must be at least 2");
        detail::require(r >= 2, "CommunitySimSpec: r must be at least 2");
        detail::require(G >= 1 && G <= v, "CommunitySimSpec: G must be in [1, v]");
        detail::require(std::isfinite(sigma_xi) && sigma_xi >= 0.0, "CommunitySimSpec: sigma_xi must be >= 0");
        detail::require(std::isfinite(jitter) && jitter >= 0.0, "CommunitySimSpec: jitter must be >= 0");
    }
};

struct SparseSim {
    NetworkDataset data;
    Matrix q_star;                // effective d x r embedding, rows 1.25 c_e q_e
    Matrix Z;                     // r x n
    std::vector<Index> support;   // ascending
    std::vector<int> labels;      // 1{z_1 > z_2}
};

struct CommunitySim {
    NetworkDataset data;
    Matrix q_star;
    Matrix Z;
    std::vector<int> membership;  // community of each node
    std::vector<double> levels;   // c of each node
    std::vector<int> labels;
};

namespace draw {

inline Matrix standard_normal(Index rows, Index cols, Rng& rng) {
    std::normal_distribution<double> normal(0.0, 1.0);
    Matrix m(rows, cols);
    // Column-major fill keeps the draw order stable.
    for (Index j = 0; j < cols; ++j)
        for (Index i = 0; i < rows; ++i) m(i, j) = normal(rng);
    return m;
}

inline std::vector<int> compare_labels(const Matrix& z) {
    std::vector<int> y(std::size_t(z.cols()));
    for (Index i = 0; i < z.cols(); ++i) y[std::size_t(i)] = z(0, i) > z(1, i) ? 1 : 0;
    return y;
}

/// Heteroscedastic noise: entry (e, i) has sd (e + 1) / d.
inline Matrix edge_noise(Index d, Index n, Rng& rng) {
    Matrix xi = standard_normal(d, n, rng);
    for (Index e = 0; e < d; ++e) xi.row(e) *= double(e + 1) / double(d);
    return xi;
}

} // namespace draw

inline SparseSim gen_sparse(const SparseSimSpec& spec) {
    spec.validate();
    const Index d = spec.d();
    Rng rng(spec.seed);
    SparseSim out;
    out.Z = draw::standard_normal(spec.r, spec.n, rng);
    const Matrix q = draw::standard_normal(d, spec.r, rng);

    std::vector<Index> idx(static_cast<std::size_t>(d));
    std::iota(idx.begin(), idx.end(), Index{0});
    std::shuffle(idx.begin(), idx.end(), rng);
    out.support.assign(idx.begin(), idx.begin() + spec.s_star);
    std::sort(out.support.begin(), out.support.end());

    out.q_star = Matrix::Zero(d, spec.r);
    for (Index e : out.support) out.q_star.row(e) = 1.25 * q.row(e);

    Matrix x = out.q_star * out.Z;
    if (spec.sigma_xi > 0.0) x += spec.sigma_xi * draw::edge_noise(d, spec.n, rng);
    out.labels = draw::compare_labels(out.Z);

    out.data = NetworkDataset(std::move(x), EdgeIndexMap(spec.v));
    out.data.labels = out.labels;
    return out;
}

/// Contiguous near-equal blocks: node u belongs to community floor(u G / v).
inline std::vector<int> balanced_membership(Index v, Index G) {
    std::vector<int> m(static_cast<std::size_t>(v));
    for (Index u = 0; u < v; ++u) m[std::size_t(u)] = int(u * G / v);
    return m;
}

inline double community_edge_scale(double c_u, double c_w) {
    return 5.0 * std::sqrt(c_u * c_w) * std::pow(10.0, -std::abs(c_u - c_w));
}

inline CommunitySim gen_community(const CommunitySimSpec& spec) {
    spec.validate();
    const Index d = spec.d();
    const EdgeIndexMap map(spec.v);
    Rng rng(spec.seed);
    CommunitySim out;

    out.membership = balanced_membership(spec.v, spec.G);
    std::uniform_real_distribution<double> level(0.1, 1.1);
    std::vector<double> block_level(static_cast<std::size_t>(spec.G));
    for (auto& c : block_level) c = level(rng);
    std::normal_distribution<double> normal(0.0, 1.0);
    out.levels.resize(std::size_t(spec.v));
    for (Index u = 0; u < spec.v; ++u) {
        double c = block_level[std::size_t(out.membership[std::size_t(u)])];
        if (spec.jitter > 0.0) c = std::clamp(c + spec.jitter * normal(rng), 0.1, 1.1);
        out.levels[std::size_t(u)] = c;
    }

    out.Z = draw::standard_normal(spec.r, spec.n, rng);
    const Matrix q = draw::standard_normal(d, spec.r, rng);
    out.q_star.resize(d, spec.r);
    for (Index e = 0; e < d; ++e) {
        const auto [u, w] = map.pair_of(e);
        out.q_star.row(e) = community_edge_scale(out.levels[std::size_t(u)], out.levels[std::size_t(w)]) * q.row(e);
    }
    Matrix x = out.q_star * out.Z;
    if (spec.sigma_xi > 0.0) x += spec.sigma_xi * draw::edge_noise(d, spec.n, rng);
    out.labels = draw::compare_labels(out.Z);

    out.data = NetworkDataset(std::move(x), map);
    out.data.labels = out.labels;
    return out;
}

struct Split {
    std::vector<Index> train;  // ascending
    std::vector<Index> test;   // ascending
};

/// Random subject split; floor(frac * n) subjects go to training.
inline Split split_indices(Index n, double frac, std::uint64_t seed) {
    detail::require(frac > 0.0 && frac < 1.0, "split_train_test: fraction must be in (0, 1)");
    const auto n_train = Index(std::floor(frac * double(n)));
    if (n_train < 2 || n - n_train < 2)
        throw InvalidArgument("split_train_test: each side needs at least two subjects");
    std::vector<Index> idx(static_cast<std::size_t>(n));
    std::iota(idx.begin(), idx.end(), Index{0});
    Rng rng(seed);
    std::shuffle(idx.begin(), idx.end(), rng);
    Split out;
    out.train.assign(idx.begin(), idx.begin() + n_train);
    out.test.assign(idx.begin() + n_train, idx.end());
    std::sort(out.train.begin(), out.train.end());
    std::sort(out.test.begin(), out.test.end());
    return out;
}

inline std::pair<NetworkDataset, NetworkDataset> split_train_test(const NetworkDataset& data, double frac,
                                                                  std::uint64_t seed) {
    const Split s = split_indices(data.subjects(), frac, seed);
    return {data.select_subjects(s.train), data.select_subjects(s.test)};
}

} // namespace acerl::sim
