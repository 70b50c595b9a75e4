#pragma once

#include <cstdint>

#include <Eigen/Core>

namespace omm {

using Index = Eigen::Index;
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Read-only view of a feature row; accepts rows of column-major matrices without a copy.
using ConstRowRef = Eigen::Ref<const Vector, 0, Eigen::InnerStride<>>;

/// Global integer month counter (months since an arbitrary epoch).
using MonthId = int;
using Count = std::int64_t;

using CountMatrix = Eigen::Matrix<Count, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

}  // namespace omm
