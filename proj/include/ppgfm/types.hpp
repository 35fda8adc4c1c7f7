#pragma once

#include <Eigen/Dense>

namespace ppgfm {

// Default scalar for model parameters and dataset storage. Checkpoint and
// dataset blobs are 32-bit IEEE-754 little-endian, so the production scalar
// is float; the math templates also instantiate with double for test oracles.
using Real = float;

template <class S>
using Matrix = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;
template <class S>
using Vector = Eigen::Matrix<S, Eigen::Dynamic, 1>;
template <class S>
using RowVector = Eigen::Matrix<S, 1, Eigen::Dynamic>;

using MatrixR = Matrix<Real>;
using VectorR = Vector<Real>;

using BoolArray = Eigen::Array<bool, Eigen::Dynamic, 1>;
using Index = Eigen::Index;

}  // namespace ppgfm
