#ifndef GENDSE_TYPES_HPP
#define GENDSE_TYPES_HPP

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace gendse {

inline constexpr int kStateDim = 4;
inline constexpr int kMeasDim = 3;

using StateVector = Eigen::Matrix<double, kStateDim, 1>;
using StateMatrix = Eigen::Matrix<double, kStateDim, kStateDim>;
using MeasVector = Eigen::Matrix<double, kMeasDim, 1>;
using MeasMatrix = Eigen::Matrix<double, kMeasDim, kMeasDim>;
using CrossMatrix = Eigen::Matrix<double, kStateDim, kMeasDim>;
using JacobianMatrix = Eigen::Matrix<double, kMeasDim, kStateDim>;

inline constexpr double deg_to_rad(double deg) { return deg * std::numbers::pi / 180.0; }

// Input rejected before any computation (bad config, malformed file, bad argument).
class ValidationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Integration or filtering produced something non-finite or non-factorable.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline void require(bool ok, const std::string& what) {
    if (!ok) throw ValidationError(what);
}

template <class Derived>
bool all_finite(const Eigen::MatrixBase<Derived>& m) {
    return m.allFinite();
}

// Index of state vector components.
enum StateIndex : int { kDelta = 0, kOmega = 1, kEqp = 2, kEdp = 3 };

// Index of measurement vector components.
enum MeasIndex : int { kDeltaZ = 0, kOmegaZ = 1, kPeZ = 2 };

}  // namespace gendse

#endif  // GENDSE_TYPES_HPP
