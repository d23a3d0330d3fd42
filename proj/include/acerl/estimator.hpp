#pragma once

#include <acerl/core.hpp>
#include <acerl/init.hpp>
#include <acerl/masking.hpp>

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace acerl {

/// Interpretation of the step size.
///
/// `relative` divides eta by the spectral norm of the centered Gram matrix so
/// that the same eta works regardless of the scale of the data. `absolute`
/// uses eta verbatim.
enum class StepScaling { relative, absolute };

/// Inner iteration count per outer iteration: fixed T, or
/// T_k = ceil(min(log n, log(2^k r))) growing with k.
enum class InnerSchedule { constant, growing };

/// Above this many edges the default initializer switches to gram_pca.
inline constexpr Index kFantopeMaxEdges = 1500;

struct AcerlConfig {
    Index r = 1;
    Index s = 0;  // 0: no sparsity (s = d)
    double eta = 1.0;  // relative to ||M||_2 unless step_scaling is absolute
    int inner_iters = 0;  // 0: ceil(log n)
    int outer_iters = 0;  // 0: ceil(log n)
    std::uint64_t seed = 0;
    std::optional<InitMethod> init;  // unset: fantope, or gram_pca when d > 1500
    DiagWeight diag_weight = DiagWeight::enumerated;
    StepScaling step_scaling = StepScaling::relative;
    InnerSchedule schedule = InnerSchedule::constant;
    FantopeAdmmOptions admm{};

    /// Copy with defaults filled in for a dataset of the given shape.
    AcerlConfig resolved(Index d, Index n) const {
        AcerlConfig c = *this;
        const int log_n = std::max(1, int(std::ceil(std::log(double(n)))));
        if (c.inner_iters <= 0) c.inner_iters = log_n;
        if (c.outer_iters <= 0) c.outer_iters = log_n;
        if (c.s <= 0 || c.s > d) c.s = d;
        if (!c.init) c.init = d > kFantopeMaxEdges ? InitMethod::gram_pca : InitMethod::fantope;
        return c;
    }

    void validate(Index d, Index n) const {
        detail::require(r >= 1 && r <= std::min(d, n), "AcerlConfig: r must satisfy 1 <= r <= min(d, n)");
        detail::require(s >= 1 && s <= d, "AcerlConfig: s must satisfy 1 <= s <= d");
        detail::require(std::isfinite(eta) && eta > 0.0, "AcerlConfig: eta must be positive");
        detail::require(inner_iters >= 1, "AcerlConfig: inner iterations must be positive");
        detail::require(outer_iters >= 1, "AcerlConfig: outer iterations must be positive");
    }

    int inner_iters_at(int k, Index n) const {
        if (schedule == InnerSchedule::constant) return inner_iters;
        const double bound = std::min(std::log(double(n)), double(k) * std::log(2.0) + std::log(double(r)));
        return std::max(1, int(std::ceil(bound)));
    }
};

struct TraceRecord {
    int k = 0;
    double mean_p = 0.0;
    double surrogate_loss = 0.0;
    Index support_size = 0;
};

struct FitResult {
    EmbeddingMatrix q_hat;
    MaskingParams masking;
    std::vector<TraceRecord> trace;
    AcerlConfig config;
    std::uint64_t seed = 0;
};

namespace detail {

inline void check_shapes(const Matrix& q, const Matrix& m, const Vector& a, const char* who) {
    require(m.rows() == m.cols() && q.rows() == m.rows() && a.size() == m.rows(),
            std::string(who) + ": dimension mismatch");
}

inline Vector diag_weights(const MaskingParams& p, DiagWeight weight) {
    Vector w(p.size());
    for (Index e = 0; e < p.size(); ++e)
        w[e] = weight == DiagWeight::enumerated ? 4.0 * mask_moment(p[e]) : p[e] * p[e];
    return w;
}

} // namespace detail

/// Contrastive loss for one mask:
///   -tr(Q Q^T (I - A) M A) + ||Q Q^T||_F^2 / 8.
inline double empirical_loss(const Matrix& q, const CenteredGram& gram, const MaskDiagonal& mask) {
    detail::check_shapes(q, gram.M, mask.a, "empirical_loss");
    const Matrix masked = mask.a.asDiagonal() * q;
    const Matrix mq = gram.M * masked;
    const Vector keep = Vector::Ones(mask.a.size()) - mask.a;
    const double cross = (keep.asDiagonal() * q).cwiseProduct(mq).sum();
    const Matrix gram_q = q.transpose() * q;
    return -cross + 0.125 * gram_q.squaredNorm();
}

inline double empirical_loss(const Matrix& q, const NetworkDataset& data, const MaskDiagonal& mask) {
    return empirical_loss(q, centered_gram(data), mask);
}

/// Gradient of empirical_loss: -(B + B^T) Q + Q (Q^T Q) / 2 with B = (I - A) M A.
inline Matrix loss_gradient(const Matrix& q, const CenteredGram& gram, const MaskDiagonal& mask) {
    detail::check_shapes(q, gram.M, mask.a, "loss_gradient");
    const Vector keep = Vector::Ones(mask.a.size()) - mask.a;
    const Matrix bq = keep.asDiagonal() * (gram.M * (mask.a.asDiagonal() * q));
    const Matrix btq = mask.a.asDiagonal() * (gram.M * (keep.asDiagonal() * q));
    return -(bq + btq) + 0.5 * q * (q.transpose() * q);
}

inline Matrix loss_gradient(const Matrix& q, const NetworkDataset& data, const MaskDiagonal& mask) {
    return loss_gradient(q, centered_gram(data), mask);
}

/// Expected loss over masks drawn with parameters p, up to a Q-independent constant:
///   ||Q Q^T - N||_F^2 / 8,  N = offdiag(M) + W diag(M).
inline double expected_loss_surrogate(const Matrix& q, const CenteredGram& gram, const MaskingParams& p,
                                      DiagWeight weight) {
    detail::check_shapes(q, gram.M, p.values(), "expected_loss_surrogate");
    Matrix n = gram.off_diagonal();
    n.diagonal() = detail::diag_weights(p, weight).cwiseProduct(gram.diagonal());
    const Matrix gram_q = q.transpose() * q;
    const double cross = (q.transpose() * n * q).trace();
    return 0.125 * (gram_q.squaredNorm() - 2.0 * cross + n.squaredNorm());
}

inline double expected_loss_surrogate(const Matrix& q, const NetworkDataset& data, const MaskingParams& p,
                                      DiagWeight weight) {
    return expected_loss_surrogate(q, centered_gram(data), p, weight);
}

/// Largest eigenvalue of a symmetric PSD matrix by power iteration from a fixed start.
inline double spectral_norm_psd(const Matrix& m, int iters = 100) {
    Vector x = Vector::Ones(m.rows()) / std::sqrt(double(m.rows()));
    double value = 0.0;
    for (int i = 0; i < iters; ++i) {
        Vector y = m * x;
        const double norm = y.norm();
        if (norm == 0.0) return 0.0;
        value = x.dot(y);
        x = y / norm;
    }
    return std::max(value, (m * x).norm());
}

/// Two-level estimation: gradient steps on sampled masks with hard thresholding,
/// then an update of the masking parameters from the current estimate.
inline FitResult fit(const NetworkDataset& data, const AcerlConfig& config_in,
                     const std::optional<EmbeddingMatrix>& q0 = std::nullopt) {
    const Index d = data.edges();
    const Index n = data.subjects();
    const AcerlConfig config = config_in.resolved(d, n);
    config.validate(d, n);

    const CenteredGram gram = centered_gram(data);
    const Vector variances = gram.diagonal().cwiseMax(0.0);

    EmbeddingMatrix q;
    if (q0) {
        detail::require(q0->edges() == d && q0->rank() == config.r, "fit: initial embedding has wrong shape");
        q = *q0;
    } else {
        q = initial_embedding(gram, n, config.r, config.s, *config.init, config.admm);
    }

    double step = config.eta;
    if (config.step_scaling == StepScaling::relative) {
        const double scale = spectral_norm_psd(gram.M);
        if (scale > 0.0) step /= scale;
    }

    MaskingParams p = update_masking_params(q, variances);
    Rng rng(config.seed);

    FitResult out;
    out.config = config;
    out.seed = config.seed;
    Matrix current = q.Q;
    for (int k = 1; k <= config.outer_iters; ++k) {
        const int inner = config.inner_iters_at(k, n);
        for (int t = 1; t <= inner; ++t) {
            const MaskDiagonal mask = sample_mask(p, rng);
            const Matrix grad = loss_gradient(current, gram, mask);
            current -= step * grad;
            if (!grad.allFinite() || !current.allFinite())
                throw NumericalError("fit: non-finite gradient at outer iteration " + std::to_string(k) +
                                     ", inner iteration " + std::to_string(t) + " (step size too large?)");
            current = hard_threshold(EmbeddingMatrix(std::move(current)), config.s).Q;
        }
        EmbeddingMatrix estimate(current);
        TraceRecord rec;
        rec.k = k;
        rec.mean_p = p.size() > 0 ? p.values().mean() : 0.0;
        rec.surrogate_loss = expected_loss_surrogate(current, gram, p, config.diag_weight);
        rec.support_size = estimate.row_sparsity();
        if (!std::isfinite(rec.surrogate_loss))
            throw NumericalError("fit: non-finite loss at outer iteration " + std::to_string(k));
        out.trace.push_back(rec);
        p = update_masking_params(estimate, variances);
    }
    out.q_hat = EmbeddingMatrix(std::move(current));
    out.masking = std::move(p);
    return out;
}

} // namespace acerl
