#pragma once

#include <Eigen/Dense>
#include <vector>

namespace proxdiff {

// Unbiased energy distance between two samples (rows are observations):
//   ED = 2 E||X-Y|| - E||X-X'|| - E||Y-Y'||
// Within-set terms are U-statistics (distinct pairs), the cross term averages
// all pairs. Values can be slightly negative when the sets coincide.
// Sets larger than max_points are thinned deterministically by stride.
double energy_distance(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b,
                       int max_points = 10000);

// Sample mean and covariance (denominator n, not n-1) of rows.
Eigen::VectorXd sample_mean(const Eigen::MatrixXd& points);
Eigen::MatrixXd sample_covariance(const Eigen::MatrixXd& points);

// Largest absolute entry of (a - b); matrices must be the same shape.
double max_abs_difference(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b);

}  // namespace proxdiff
