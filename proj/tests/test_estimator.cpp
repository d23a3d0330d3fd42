#include "test_util.hpp"

#include <acerl/downstream.hpp>
#include <acerl/estimator.hpp>
#include <acerl/metrics.hpp>
#include <acerl/simgen.hpp>

#include <gtest/gtest.h>

#include <numeric>

using namespace acerl;
using acerl::testing::gaussian;

namespace {

// Direct evaluation of the double-sum form of the loss.
double brute_force_loss(const Matrix& q, const Matrix& x, const Vector& a) {
    const Index n = x.cols();
    const Matrix am = a.asDiagonal() * x;
    const Matrix bm = (Vector::Ones(a.size()) - a).asDiagonal() * x;
    double first = 0.0, second = 0.0;
    for (Index i = 0; i < n; ++i) {
        first += (q.transpose() * am.col(i)).dot(q.transpose() * bm.col(i));
        for (Index j = 0; j < n; ++j) second += (q.transpose() * am.col(i)).dot(q.transpose() * bm.col(j));
    }
    const Matrix qq = q * q.transpose();
    return -first / double(n) + second / double(n * n) + 0.125 * qq.squaredNorm();
}

Matrix finite_difference_gradient(const Matrix& q, const CenteredGram& g, const MaskDiagonal& a, double h) {
    Matrix out(q.rows(), q.cols());
    for (Index i = 0; i < q.rows(); ++i)
        for (Index j = 0; j < q.cols(); ++j) {
            Matrix plus = q, minus = q;
            plus(i, j) += h;
            minus(i, j) -= h;
            out(i, j) = (empirical_loss(plus, g, a) - empirical_loss(minus, g, a)) / (2.0 * h);
        }
    return out;
}

} // namespace

TEST(EmpiricalLoss, ZeroEmbedding) {
    Rng rng(1);
    const auto data = acerl::testing::random_dataset(5, 4, rng);
    EXPECT_EQ(empirical_loss(Matrix::Zero(5, 2), data, acerl::testing::random_mask(5, rng)), 0.0);
}

TEST(EmpiricalLoss, IdentityMaskLeavesPenalty) {
    Rng rng(2);
    const auto data = acerl::testing::random_dataset(5, 4, rng);
    const Matrix q = gaussian(5, 2, rng);
    const double penalty = 0.125 * (q * q.transpose()).squaredNorm();
    EXPECT_NEAR(empirical_loss(q, data, MaskDiagonal::constant(5, 1.0)), penalty, 1e-12 * penalty);
}

TEST(EmpiricalLoss, MatchesDoubleSum) {
    Rng rng(3);
    for (int rep = 0; rep < 10; ++rep) {
        const auto data = acerl::testing::random_dataset(5, 4, rng);
        const Matrix q = gaussian(5, 2, rng);
        const auto a = acerl::testing::random_mask(5, rng);
        const double oracle = brute_force_loss(q, data.X, a.a);
        EXPECT_NEAR(empirical_loss(q, data, a), oracle, 1e-12 * std::max(1.0, std::abs(oracle)));
    }
}

TEST(EmpiricalLoss, RotationInvariant) {
    Rng rng(4);
    for (int rep = 0; rep < 10; ++rep) {
        const auto data = acerl::testing::random_dataset(7, 5, rng);
        const Matrix q = gaussian(7, 3, rng);
        const Matrix o = acerl::testing::random_orthogonal(3, rng);
        const auto a = acerl::testing::random_mask(7, rng);
        EXPECT_NEAR(empirical_loss(q * o, data, a), empirical_loss(q, data, a), 1e-10);
    }
}

TEST(LossGradient, ZeroEmbedding) {
    Rng rng(5);
    const auto data = acerl::testing::random_dataset(5, 4, rng);
    EXPECT_TRUE(loss_gradient(Matrix::Zero(5, 2), data, acerl::testing::random_mask(5, rng)).isZero(0.0));
}

TEST(LossGradient, FiniteDifferences) {
    Rng rng(6);
    for (int rep = 0; rep < 20; ++rep) {
        const Index d = 3 + rep % 8, n = 2 + rep % 7, r = 1 + rep % 3;
        const auto gram = centered_gram(acerl::testing::random_dataset(d, n, rng));
        const Matrix q = gaussian(d, r, rng);
        const auto a = acerl::testing::random_mask(d, rng);
        const Matrix analytic = loss_gradient(q, gram, a);
        const Matrix numeric = finite_difference_gradient(q, gram, a, 1e-5);
        EXPECT_LE((analytic - numeric).norm(), 1e-5 * std::max(1.0, analytic.norm())) << "rep " << rep;
    }
}

TEST(LossGradient, HalfMaskClosedForm) {
    Rng rng(7);
    const auto gram = centered_gram(acerl::testing::random_dataset(6, 5, rng));
    const Matrix q = gaussian(6, 2, rng);
    const Matrix expected = -0.5 * gram.M * q + 0.5 * q * (q.transpose() * q);
    EXPECT_LE((loss_gradient(q, gram, MaskDiagonal::constant(6, 0.5)) - expected).norm(), 1e-12 * expected.norm());
}

TEST(LossGradient, ShapeMismatch) {
    Rng rng(8);
    const auto data = acerl::testing::random_dataset(5, 4, rng);
    EXPECT_THROW(loss_gradient(Matrix::Zero(4, 2), data, MaskDiagonal::constant(5, 0.5)), InvalidArgument);
    EXPECT_THROW(empirical_loss(Matrix::Zero(5, 2), data, MaskDiagonal::constant(3, 0.5)), InvalidArgument);
}

TEST(HardThreshold, Examples) {
    Matrix q(3, 2);
    q << 3, 0, 0, 1, 2, 2;
    const auto ht = hard_threshold(EmbeddingMatrix(q), 2);
    EXPECT_EQ(ht.Q.row(0), q.row(0));
    EXPECT_TRUE(ht.Q.row(1).isZero(0.0));
    EXPECT_EQ(ht.Q.row(2), q.row(2));
    EXPECT_EQ(hard_threshold(EmbeddingMatrix(q), 3).Q, q);
    EXPECT_EQ(hard_threshold(EmbeddingMatrix(q), 10).Q, q);
    EXPECT_TRUE(hard_threshold(EmbeddingMatrix(q), 0).Q.isZero(0.0));
}

TEST(HardThreshold, TiesGoToSmallerIndex) {
    Matrix q(4, 1);
    q << 1, -2, 2, 1;
    const auto ht = hard_threshold(EmbeddingMatrix(q), 2);
    EXPECT_EQ(ht.row_support(), (std::vector<Index>{1, 2}));
    EXPECT_EQ(hard_threshold(EmbeddingMatrix(q), 3).row_support(), (std::vector<Index>{0, 1, 2}));
}

TEST(HardThreshold, IdempotentAndSparse) {
    Rng rng(9);
    for (int rep = 0; rep < 20; ++rep) {
        const EmbeddingMatrix q(gaussian(15, 3, rng));
        const Index s = rep % 16;
        const auto once = hard_threshold(q, s);
        EXPECT_EQ(hard_threshold(once, s).Q, once.Q);
        EXPECT_LE(once.row_sparsity(), s);
        for (Index e : once.row_support()) EXPECT_EQ(once.Q.row(e), q.Q.row(e));
    }
}

TEST(ExpectedLossSurrogate, ZeroEmbeddingIsNormOfTarget) {
    Rng rng(10);
    const auto gram = centered_gram(acerl::testing::random_dataset(6, 5, rng));
    const MaskingParams p((gaussian(6, 1, rng).cwiseAbs() / 4.0).cwiseMin(1.0));
    Matrix n = gram.off_diagonal();
    n.diagonal() = p.values().cwiseProduct(gram.diagonal());
    EXPECT_NEAR(expected_loss_surrogate(Matrix::Zero(6, 2), gram, p, DiagWeight::enumerated), 0.125 * n.squaredNorm(),
                1e-12);
    n.diagonal() = p.values().cwiseAbs2().cwiseProduct(gram.diagonal());
    EXPECT_NEAR(expected_loss_surrogate(Matrix::Zero(6, 2), gram, p, DiagWeight::squared), 0.125 * n.squaredNorm(),
                1e-12);
}

TEST(ExpectedLossSurrogate, WeightingsCoincideAtPOne) {
    Rng rng(11);
    const auto gram = centered_gram(acerl::testing::random_dataset(6, 5, rng));
    const Matrix q = gaussian(6, 2, rng);
    const auto p = MaskingParams::constant(6, 1.0);
    const double direct = 0.125 * (q * q.transpose() - gram.M).squaredNorm();
    EXPECT_NEAR(expected_loss_surrogate(q, gram, p, DiagWeight::enumerated), direct, 1e-10);
    EXPECT_NEAR(expected_loss_surrogate(q, gram, p, DiagWeight::squared), direct, 1e-10);
}

TEST(ExpectedLossSurrogate, ExactExpectationOverAllMasks) {
    // Enumerate all 3^d masks of a tiny instance; E[loss] - surrogate must not depend on Q.
    Rng rng(12);
    const Index d = 4;
    const auto gram = centered_gram(acerl::testing::random_dataset(d, 5, rng));
    const MaskingParams p((Vector(d) << 0.0, 0.3, 0.7, 1.0).finished());
    auto expectation = [&](const Matrix& q) {
        double total = 0.0;
        for (int code = 0; code < 81; ++code) {
            MaskDiagonal a{Vector(d)};
            double prob = 1.0;
            int c = code;
            for (Index e = 0; e < d; ++e, c /= 3) {
                a.a[e] = 0.5 * (c % 3);
                prob *= c % 3 == 1 ? p[e] : 0.5 * (1.0 - p[e]);
            }
            if (prob > 0.0) total += prob * empirical_loss(q, gram, a);
        }
        return total;
    };
    const Matrix q1 = gaussian(d, 2, rng), q2 = gaussian(d, 2, rng), q3 = gaussian(d, 2, rng);
    const double c1 = expectation(q1) - expected_loss_surrogate(q1, gram, p, DiagWeight::enumerated);
    const double c2 = expectation(q2) - expected_loss_surrogate(q2, gram, p, DiagWeight::enumerated);
    const double c3 = expectation(q3) - expected_loss_surrogate(q3, gram, p, DiagWeight::enumerated);
    EXPECT_NEAR(c1, c2, 1e-10);
    EXPECT_NEAR(c1, c3, 1e-10);
}

TEST(ExpectedLossSurrogate, MonteCarloDifference) {
    Rng rng(13);
    const Index d = 20, n = 15, r = 3;
    const auto gram = centered_gram(acerl::testing::random_dataset(d, n, rng));
    const MaskingParams p((gaussian(d, 1, rng).cwiseAbs() / 2.0).cwiseMin(1.0));
    const Matrix q1 = gaussian(d, r, rng), q2 = gaussian(d, r, rng);
    double mc = 0.0;
    const int draws = 10000;
    for (int t = 0; t < draws; ++t) {
        const auto a = sample_mask(p, rng);
        mc += empirical_loss(q1, gram, a) - empirical_loss(q2, gram, a);
    }
    mc /= draws;
    const double exact = expected_loss_surrogate(q1, gram, p, DiagWeight::enumerated) -
                         expected_loss_surrogate(q2, gram, p, DiagWeight::enumerated);
    EXPECT_NEAR(mc, exact, 0.01 * std::abs(exact));
}

TEST(AcerlConfig, ResolvesDefaults) {
    AcerlConfig c;
    c.r = 2;
    const auto r = c.resolved(100, 500);
    EXPECT_EQ(r.inner_iters, 7);
    EXPECT_EQ(r.outer_iters, 7);
    EXPECT_EQ(r.s, 100);
    EXPECT_EQ(*r.init, InitMethod::fantope);
    EXPECT_EQ(*c.resolved(2000, 500).init, InitMethod::gram_pca);
    AcerlConfig bad = r;
    bad.r = 0;
    EXPECT_THROW(bad.validate(100, 500), InvalidArgument);
    bad = r;
    bad.eta = 0.0;
    EXPECT_THROW(bad.validate(100, 500), InvalidArgument);
}

TEST(AcerlConfig, GrowingSchedule) {
    AcerlConfig c;
    c.r = 2;
    c.schedule = InnerSchedule::growing;
    // ceil(min(log 500, k log 2 + log 2))
    EXPECT_EQ(c.inner_iters_at(1, 500), 2);
    EXPECT_EQ(c.inner_iters_at(2, 500), 3);
    EXPECT_EQ(c.inner_iters_at(20, 500), 7);
}

namespace {

struct Planted {
    NetworkDataset data;
    Matrix q_star;
    std::vector<Index> support;
};

Planted planted(Index d, Index r, Index n, Index s_star, std::uint64_t seed) {
    Rng rng(seed);
    Planted p;
    std::vector<Index> idx(static_cast<std::size_t>(d));
    std::iota(idx.begin(), idx.end(), Index{0});
    std::shuffle(idx.begin(), idx.end(), rng);
    p.support.assign(idx.begin(), idx.begin() + s_star);
    std::sort(p.support.begin(), p.support.end());
    p.q_star = Matrix::Zero(d, r);
    const Matrix rows = gaussian(s_star, r, rng);
    for (Index k = 0; k < s_star; ++k) p.q_star.row(p.support[std::size_t(k)]) = rows.row(k);
    p.data = NetworkDataset(p.q_star * gaussian(r, n, rng));
    return p;
}

} // namespace

TEST(Fit, SupportBoundTraceAndDeterminism) {
    const auto p = planted(40, 2, 60, 6, 1);
    AcerlConfig c;
    c.r = 2;
    c.s = 10;
    c.seed = 42;
    c.outer_iters = 3;
    c.inner_iters = 4;
    const auto f1 = fit(p.data, c);
    const auto f2 = fit(p.data, c);
    EXPECT_LE(f1.q_hat.row_sparsity(), 10);
    EXPECT_EQ(f1.trace.size(), 3u);
    EXPECT_EQ(f1.q_hat.Q, f2.q_hat.Q);
    EXPECT_EQ(f1.masking.values(), f2.masking.values());
    EXPECT_EQ(f1.seed, 42u);
    for (const auto& t : f1.trace) EXPECT_LE(t.support_size, 10);
}

TEST(Fit, RejectsBadConfigAndInitialShape) {
    const auto p = planted(20, 2, 10, 4, 2);
    AcerlConfig c;
    c.r = 11;
    EXPECT_THROW(fit(p.data, c), InvalidArgument);
    c.r = 2;
    EXPECT_THROW(fit(p.data, c, EmbeddingMatrix(Matrix::Zero(20, 3))), InvalidArgument);
}

TEST(Fit, DivergentStepReportsIteration) {
    const auto p = planted(20, 2, 30, 5, 3);
    AcerlConfig c;
    c.r = 2;
    c.eta = 1e6;
    c.init = InitMethod::gram_pca;
    try {
        fit(p.data, c);
        FAIL() << "expected a numerical error";
    } catch (const NumericalError& e) {
        EXPECT_NE(std::string(e.what()).find("outer iteration 1"), std::string::npos);
    }
}

TEST(Fit, NoiselessSparseRecovery) {
    // n = 500, d = 200, r = 5, s* = 20, s = 40, averaged over 10 seeds.
    double dist = 0.0;
    int exact = 0;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const auto p = planted(200, 5, 500, 20, seed);
        AcerlConfig c;
        c.r = 5;
        c.s = 40;
        c.seed = seed;
        const auto f = fit(p.data, c);
        dist += metrics::procrustes_dist(f.q_hat.Q, p.q_star) / p.q_star.norm();
        auto top = select_edges(f.q_hat, 20);
        std::sort(top.begin(), top.end());
        exact += top == p.support;
    }
    EXPECT_LE(dist / 10.0, 0.05);
    EXPECT_EQ(exact, 10);
}

TEST(Fit, TableScaleNoiselessSelection) {
    sim::SparseSimSpec spec;
    spec.n = 750;
    spec.seed = 5;
    const auto s = sim::gen_sparse(spec);
    AcerlConfig c;
    c.r = 10;
    c.s = 150;
    c.init = InitMethod::gram_pca;
    const auto f = fit(s.data, c);
    EXPECT_EQ(metrics::selection_recall(select_edges(f.q_hat, 150), s.support), 1.0);
}
