#pragma once

#include <tagcomp/types.hpp>

#include <random>

namespace tagcomp::testing {

inline Matrix random_matrix(std::mt19937_64& rng, Index rows, Index cols, double scale = 1.0) {
    std::normal_distribution<double> normal(0.0, scale);
    Matrix M(rows, cols);
    for (Index e = 0; e < M.size(); ++e) M.data()[e] = normal(rng);
    return M;
}

inline Matrix random_binary(std::mt19937_64& rng, Index rows, Index cols, double p = 0.5) {
    std::bernoulli_distribution coin(p);
    Matrix M(rows, cols);
    for (Index e = 0; e < M.size(); ++e) M.data()[e] = coin(rng) ? 1.0 : 0.0;
    return M;
}

inline Vector flat(const Matrix& M) { return Eigen::Map<const Vector>(M.data(), M.size()); }

inline Matrix unflat(const Vector& v, Index rows, Index cols) {
    return Eigen::Map<const Matrix>(v.data(), rows, cols);
}

}  // namespace tagcomp::testing
