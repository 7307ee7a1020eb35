#pragma once

#include <Eigen/Core>

namespace effdiff {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Vec2 = Eigen::Vector2d;

// Collective variables only touch a small leading block of the coordinates.
// Block-local quantities live in fixed-capacity storage so hot paths never
// allocate.
inline constexpr int kMaxBlock = 8;
using BlockVector = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, kMaxBlock, 1>;
using BlockMatrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, kMaxBlock, kMaxBlock>;

}  // namespace effdiff
