#pragma once

#include <acerl/core.hpp>
#include <acerl/masking.hpp>

#include <filesystem>
#include <random>
#include <string>

namespace acerl::testing {

inline Matrix gaussian(Index rows, Index cols, Rng& rng) {
    std::normal_distribution<double> normal(0.0, 1.0);
    Matrix m(rows, cols);
    for (Index j = 0; j < cols; ++j)
        for (Index i = 0; i < rows; ++i) m(i, j) = normal(rng);
    return m;
}

inline Matrix random_symmetric(Index d, Rng& rng) {
    const Matrix a = gaussian(d, d, rng);
    return 0.5 * (a + a.transpose());
}

inline Matrix random_orthogonal(Index r, Rng& rng) {
    Eigen::HouseholderQR<Matrix> qr(gaussian(r, r, rng));
    return qr.householderQ() * Matrix::Identity(r, r);
}

inline NetworkDataset random_dataset(Index d, Index n, Rng& rng) { return NetworkDataset(gaussian(d, n, rng)); }

inline MaskDiagonal random_mask(Index d, Rng& rng) {
    std::uniform_int_distribution<int> pick(0, 2);
    MaskDiagonal m{Vector(d)};
    for (Index e = 0; e < d; ++e) m.a[e] = 0.5 * pick(rng);
    return m;
}

/// Fresh, empty scratch directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
    const auto dir = std::filesystem::temp_directory_path() / ("acerl_test_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

} // namespace acerl::testing
