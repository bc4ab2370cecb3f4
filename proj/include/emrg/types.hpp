#pragma once

#include <cstdint>
#include <Eigen/Dense>

namespace emrg {

/// Storage scalar for all model parameters and features.
using Scalar = float;

/// Dense row-major matrix/vector aliases. Row-major storage keeps the
/// flattened layer layout (weights row-major, then bias) a plain memory view.
template <class T>
using MatrixT = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class T>
using VectorT = Eigen::Matrix<T, Eigen::Dynamic, 1>;

using MatX  = MatrixT<Scalar>;
using MatXd = MatrixT<double>;
using VecX  = VectorT<Scalar>;
using VecXd = VectorT<double>;

/// splitmix64 step; used everywhere a child seed is derived from a parent
/// seed so that independent streams never share state.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
    std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (salt + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

} // namespace emrg
