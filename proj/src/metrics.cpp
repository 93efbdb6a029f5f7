#include "proxdiff/metrics.hpp"

#include <stdexcept>
#include <string>

namespace proxdiff {

namespace {

// Keep at most max_points rows by taking every ceil(n/max)-th row starting at
// row 0. Deterministic, so repeated metric evaluations agree bit for bit.
Eigen::MatrixXd thin_rows(const Eigen::MatrixXd& points, int max_points) {
  const Eigen::Index n = points.rows();
  if (n <= max_points) return points;
  const Eigen::Index stride = (n + max_points - 1) / max_points;
  const Eigen::Index kept = (n + stride - 1) / stride;
  Eigen::MatrixXd out(kept, points.cols());
  for (Eigen::Index i = 0; i < kept; ++i) out.row(i) = points.row(i * stride);
  return out;
}

double mean_pairwise_within(const Eigen::MatrixXd& pts) {
  const Eigen::Index n = pts.rows();
  double total = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      total += (pts.row(i) - pts.row(j)).norm();
    }
  }
  return total / (0.5 * static_cast<double>(n) * static_cast<double>(n - 1));
}

double mean_pairwise_cross(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  double total = 0.0;
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < b.rows(); ++j) {
      total += (a.row(i) - b.row(j)).norm();
    }
  }
  return total / (static_cast<double>(a.rows()) * static_cast<double>(b.rows()));
}

}  // namespace

double energy_distance(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, int max_points) {
  if (a.cols() != b.cols()) {
    throw std::invalid_argument("energy_distance: dimension mismatch (" +
                                std::to_string(a.cols()) + " vs " + std::to_string(b.cols()) +
                                ")");
  }
  if (a.rows() < 2 || b.rows() < 2) {
    throw std::invalid_argument("energy_distance: each sample needs at least 2 points");
  }
  if (max_points < 2) throw std::invalid_argument("energy_distance: max_points must be >= 2");
  const Eigen::MatrixXd x = thin_rows(a, max_points);
  const Eigen::MatrixXd y = thin_rows(b, max_points);
  return 2.0 * mean_pairwise_cross(x, y) - mean_pairwise_within(x) - mean_pairwise_within(y);
}

Eigen::VectorXd sample_mean(const Eigen::MatrixXd& points) {
  if (points.rows() == 0) throw std::invalid_argument("sample_mean: empty sample");
  return points.colwise().mean();
}

Eigen::MatrixXd sample_covariance(const Eigen::MatrixXd& points) {
  if (points.rows() < 2) {
    throw std::invalid_argument("sample_covariance: need at least 2 points");
  }
  const Eigen::MatrixXd centered = points.rowwise() - points.colwise().mean();
  return (centered.transpose() * centered) / static_cast<double>(points.rows());
}

double max_abs_difference(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw std::invalid_argument("max_abs_difference: shape mismatch");
  }
  return (a - b).cwiseAbs().maxCoeff();
}

}  // namespace proxdiff
