#include "othx/pca.hpp"

namespace othx::viz {

PcaResult pca(const Eigen::MatrixXd& data, int d) {
  const int64_t n = data.rows();
  const int64_t h = data.cols();
  if (d < 1 || d > std::min<int64_t>(n - 1, h))
    throw DimError("pca: d must be in [1, min(n-1, h)], got " + std::to_string(d));

  PcaResult out;
  out.mean = data.colwise().mean();
  Eigen::MatrixXd centered = data.rowwise() - out.mean.transpose();

  Eigen::BDCSVD<Eigen::MatrixXd> svd(centered,
                                     Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Eigen::VectorXd& sigma = svd.singularValues();
  const double total = sigma.squaredNorm();

  out.components.resize(d, h);
  out.explained_variance_ratio.resize(static_cast<size_t>(d));
  for (int c = 0; c < d; ++c) {
    Eigen::VectorXd v = svd.matrixV().col(c);
    // sign convention: largest-magnitude entry positive, first index on ties
    Eigen::Index arg = 0;
    for (Eigen::Index i = 1; i < v.size(); ++i)
      if (std::abs(v(i)) > std::abs(v(arg))) arg = i;
    if (v(arg) < 0) v = -v;
    out.components.row(c) = v.transpose();
    out.explained_variance_ratio[static_cast<size_t>(c)] =
        total > 0 ? sigma(c) * sigma(c) / total : 0.0;
  }
  out.projected = centered * out.components.transpose();
  return out;
}

}  // namespace othx::viz
