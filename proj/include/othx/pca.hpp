#pragma once

#include <Eigen/Dense>
#include <vector>

#include "othx/errors.hpp"

namespace othx::viz {

struct PcaResult {
  Eigen::MatrixXd components;  // d x h, orthonormal rows
  std::vector<double> explained_variance_ratio;  // descending, sums to <= 1
  Eigen::MatrixXd projected;   // n x d
  Eigen::VectorXd mean;        // h
};

// Mean-centered SVD-based PCA with a deterministic sign convention: the
// largest-magnitude entry of each component (lowest index on ties) is
// positive. Requires 1 <= d <= min(n-1, h).
PcaResult pca(const Eigen::MatrixXd& data, int d);

}  // namespace othx::viz
