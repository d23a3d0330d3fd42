#include "test_util.hpp"

#include <acerl/masking.hpp>

#include <gtest/gtest.h>

#include <array>

using namespace acerl;

namespace {

// Outcome counts (0, 0.5, 1) of `draws` single-edge masks.
std::array<double, 3> outcome_counts(double p, int draws, std::uint64_t seed) {
    Rng rng(seed);
    const auto params = MaskingParams::constant(1, p);
    std::array<double, 3> c{0, 0, 0};
    for (int t = 0; t < draws; ++t) {
        const double a = sample_mask(params, rng).a[0];
        c[a == 0.0 ? 0 : a == 0.5 ? 1 : 2] += 1;
    }
    return c;
}

} // namespace

TEST(MaskingParams, RejectsOutOfRange) {
    EXPECT_THROW(MaskingParams::constant(3, 1.5), InvalidArgument);
    EXPECT_THROW(MaskingParams::constant(3, -0.1), InvalidArgument);
    EXPECT_NO_THROW(MaskingParams::constant(3, 1.0));
}

TEST(SampleMask, DegenerateAtPOne) {
    Rng rng(1);
    const auto p = MaskingParams::constant(50, 1.0);
    for (int t = 0; t < 100; ++t) EXPECT_TRUE((sample_mask(p, rng).a.array() == 0.5).all());
}

TEST(SampleMask, FairCoinAtPZero) {
    const auto c = outcome_counts(0.0, 100000, 2);
    EXPECT_EQ(c[1], 0.0);
    EXPECT_NEAR(c[0] / 1e5, 0.5, 0.01);
}

TEST(SampleMask, ChiSquareAtPointFour) {
    const int n = 100000;
    const auto c = outcome_counts(0.4, n, 3);
    const std::array<double, 3> prob{0.3, 0.4, 0.3};
    double chi2 = 0.0;
    for (int k = 0; k < 3; ++k) {
        EXPECT_NEAR(c[std::size_t(k)] / n, prob[std::size_t(k)], 0.01);
        const double expected = n * prob[std::size_t(k)];
        chi2 += (c[std::size_t(k)] - expected) * (c[std::size_t(k)] - expected) / expected;
    }
    EXPECT_LT(chi2, 13.816);  // chi-square(2) quantile at 0.999
}

TEST(SampleMask, EntriesAreThreePointAndDeterministic) {
    Rng a(9), b(9);
    Rng gen(4);
    const MaskingParams p((acerl::testing::gaussian(200, 1, gen).cwiseAbs() / 3.0).cwiseMin(1.0));
    const auto m1 = sample_mask(p, a);
    const auto m2 = sample_mask(p, b);
    EXPECT_EQ(m1.a, m2.a);
    for (Index e = 0; e < m1.a.size(); ++e) {
        const double x = m1.a[e];
        EXPECT_TRUE(x == 0.0 || x == 0.5 || x == 1.0);
    }
}

TEST(SampleMask, MeanIsOneHalf) {
    for (double p : {0.0, 0.25, 0.5, 0.75, 1.0}) {
        const int n = 40000;
        const auto c = outcome_counts(p, n, 5);
        const double mean = (0.5 * c[1] + c[2]) / n;
        const double var = 0.25 * (1.0 - p);  // E[(a - 1/2)^2]
        EXPECT_NEAR(mean, 0.5, 3.0 * std::sqrt(var / n) + 1e-12) << "p=" << p;
    }
}

TEST(MaskMoment, Examples) {
    EXPECT_DOUBLE_EQ(mask_moment(0.0), 0.0);
    EXPECT_DOUBLE_EQ(mask_moment(1.0), 0.25);
    EXPECT_DOUBLE_EQ(mask_moment(0.4), 0.1);
    EXPECT_THROW(mask_moment(1.1), InvalidArgument);
}

TEST(MaskMoment, MatchesMonteCarlo) {
    for (double p : {0.0, 0.25, 0.5, 0.75, 1.0}) {
        const int n = 40000;
        const auto c = outcome_counts(p, n, 6);
        const double mc = 0.25 * c[1] / n;  // a(1-a) is 1/4 at a = 0.5, else 0
        const double sd = 0.25 * std::sqrt(p * (1 - p) / n);
        EXPECT_NEAR(mc, mask_moment(p), 3.0 * sd + 1e-12) << "p=" << p;
    }
}

TEST(UpdateMaskingParams, ZeroEmbeddingGivesZero) {
    Rng rng(1);
    const auto data = acerl::testing::random_dataset(5, 10, rng);
    const auto p = update_masking_params(EmbeddingMatrix(Matrix::Zero(5, 2)), data);
    EXPECT_TRUE(p.values().isZero(0.0));
}

TEST(UpdateMaskingParams, ConstantRowClampsToOne) {
    Rng rng(2);
    Matrix x = acerl::testing::gaussian(3, 8, rng);
    x.row(1).setConstant(4.2);
    Matrix q = Matrix::Zero(3, 1);
    q(1, 0) = 1e-3;
    const auto p = update_masking_params(EmbeddingMatrix(q), NetworkDataset(x));
    EXPECT_EQ(p[1], 1.0);
    EXPECT_EQ(p[0], 0.0);
}

TEST(UpdateMaskingParams, UsesBiasedVariance) {
    Matrix x(1, 4);
    x << 1, 2, 3, 4;  // biased variance 1.25
    Matrix q(1, 1);
    q << 0.5;
    const auto p = update_masking_params(EmbeddingMatrix(q), NetworkDataset(x));
    EXPECT_DOUBLE_EQ(p[0], 0.5 / std::sqrt(1.25));
}

TEST(UpdateMaskingParams, NoiselessLargeSampleApproachesOne) {
    Rng rng(3);
    const Index d = 4, r = 3, n = 100000;
    const Matrix q = acerl::testing::gaussian(d, r, rng);
    const Matrix z = acerl::testing::gaussian(r, n, rng);
    const auto p = update_masking_params(EmbeddingMatrix(q), NetworkDataset(q * z));
    for (Index e = 0; e < d; ++e) EXPECT_NEAR(p[e], 1.0, 0.02);
}

TEST(UpdateMaskingParams, AlwaysInUnitInterval) {
    Rng rng(4);
    for (int rep = 0; rep < 20; ++rep) {
        const auto data = acerl::testing::random_dataset(8, 6, rng);
        const Matrix q = acerl::testing::gaussian(8, 2, rng) * double(rep);
        const auto p = update_masking_params(EmbeddingMatrix(q), data);
        EXPECT_TRUE((p.values().array() >= 0.0).all() && (p.values().array() <= 1.0).all());
    }
}
