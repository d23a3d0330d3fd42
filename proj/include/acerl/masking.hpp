#pragma once

#include <acerl/core.hpp>

#include <algorithm>
#include <random>

namespace acerl {

using Rng = std::mt19937_64;

/// Per-edge masking probabilities, each in [0, 1].
class MaskingParams {
public:
    MaskingParams() = default;
    explicit MaskingParams(Vector p) : p_(std::move(p)) {
        for (Index e = 0; e < p_.size(); ++e)
            detail::require(std::isfinite(p_[e]) && p_[e] >= 0.0 && p_[e] <= 1.0,
                            "MaskingParams: probability outside [0,1] at edge " + std::to_string(e));
    }
    static MaskingParams constant(Index d, double value) { return MaskingParams(Vector::Constant(d, value)); }

    const Vector& values() const noexcept { return p_; }
    Index size() const noexcept { return p_.size(); }
    double operator[](Index e) const { return p_[e]; }

private:
    Vector p_;
};

/// Diagonal of the masking matrix A. Entries are exactly 0, 0.5 or 1.
struct MaskDiagonal {
    Vector a;

    static MaskDiagonal constant(Index d, double value) { return {Vector::Constant(d, value)}; }
};

/// How the expected diagonal weight E[a_e(1 - a_e)] enters the expected-loss surrogate.
enum class DiagWeight { enumerated, squared };

/// Three-point draw per edge: 0 and 1 with probability (1 - p_e)/2 each, 0.5 with probability p_e.
inline MaskDiagonal sample_mask(const MaskingParams& p, Rng& rng) {
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    MaskDiagonal out{Vector(p.size())};
    for (Index e = 0; e < p.size(); ++e) {
        const double u = unif(rng);
        const double low = 0.5 * (1.0 - p[e]);
        if (u < low)
            out.a[e] = 0.0;
        else if (u < low + p[e])
            out.a[e] = 0.5;
        else
            out.a[e] = 1.0;
    }
    return out;
}

/// E[a_e (1 - a_e)] by enumeration of the three outcomes.
inline double mask_moment(double p_e) {
    detail::require(p_e >= 0.0 && p_e <= 1.0, "mask_moment: probability outside [0,1]");
    const double tail = 0.5 * (1.0 - p_e);
    return tail * (0.0 * 1.0) + p_e * (0.5 * 0.5) + tail * (1.0 * 0.0);
}

inline constexpr double kVarianceFloor = 1e-12;

/// Biased (divide-by-n) per-edge variance.
inline Vector edge_variances(const NetworkDataset& data) {
    const double n = double(data.subjects());
    const Vector mean = data.X.rowwise().sum() / n;
    const Vector second = data.X.rowwise().squaredNorm() / n;
    return (second - mean.cwiseAbs2()).cwiseMax(0.0);
}

/// p_e = min(||q_e|| / sqrt(max(Var(x_e), floor)), 1).
inline MaskingParams update_masking_params(const EmbeddingMatrix& q_hat, const Vector& variances) {
    detail::require(q_hat.edges() == variances.size(), "update_masking_params: dimension mismatch");
    const Vector norms = q_hat.row_norms();
    Vector p(norms.size());
    for (Index e = 0; e < p.size(); ++e)
        p[e] = std::min(norms[e] / std::sqrt(std::max(variances[e], kVarianceFloor)), 1.0);
    return MaskingParams(std::move(p));
}

inline MaskingParams update_masking_params(const EmbeddingMatrix& q_hat, const NetworkDataset& data) {
    detail::require(q_hat.edges() == data.edges(), "update_masking_params: dimension mismatch");
    return update_masking_params(q_hat, edge_variances(data));
}

} // namespace acerl
