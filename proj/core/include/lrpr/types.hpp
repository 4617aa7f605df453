#pragma once

#include <complex>
#include <type_traits>

#include <Eigen/Dense>

namespace lrpr {

using Index = Eigen::Index;
using cplx = std::complex<double>;

template <class Scalar>
using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <class Scalar>
using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using RealMat = Eigen::MatrixXd;
using RealVec = Eigen::VectorXd;

template <class Scalar>
inline constexpr bool is_complex_v = false;
template <>
inline constexpr bool is_complex_v<cplx> = true;

/// Scalar field the measurement vectors (and the estimates) live in.
enum class Field { Real, Complex };

template <class Scalar>
constexpr Field field_of() {
  return is_complex_v<Scalar> ? Field::Complex : Field::Real;
}

}  // namespace lrpr
