#pragma once

// Exact PCA projection with a deterministic sign convention.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "trendlens/common.hpp"

namespace trendlens::pca {

/// Principal axes of a centered batch, strongest first.
struct Projection {
  Eigen::VectorXd mean;
  Eigen::MatrixXd axes;  // h x k, unit columns
  Eigen::VectorXd variances;
};

namespace detail {

/// Flip each column so its largest-magnitude entry is positive
/// (first index wins ties).
inline void fix_signs(Eigen::MatrixXd& axes) {
  for (Eigen::Index c = 0; c < axes.cols(); ++c) {
    Eigen::Index best = 0;
    double best_abs = -1.0;
    for (Eigen::Index r = 0; r < axes.rows(); ++r) {
      const double a = std::abs(axes(r, c));
      if (a > best_abs) {
        best_abs = a;
        best = r;
      }
    }
    if (axes(best, c) < 0.0) axes.col(c) *= -1.0;
  }
}

}  // namespace detail

/// Fits the top-`k` principal axes of `rows` (n x h). Uses the n x n Gram
/// matrix when n <= h and the h x h covariance otherwise. Axes whose
/// variance is numerically zero are set to zero so they project to 0.
inline Projection fit(const Eigen::MatrixXd& rows, std::size_t k) {
  const Eigen::Index n = rows.rows();
  const Eigen::Index h = rows.cols();
  if (n < 2) throw DataError("PCA needs at least two vectors");
  const Eigen::Index keep = std::min<Eigen::Index>(static_cast<Eigen::Index>(k), h);

  Projection p;
  p.mean = rows.colwise().mean().transpose();
  const Eigen::MatrixXd centered = rows.rowwise() - p.mean.transpose();
  p.axes = Eigen::MatrixXd::Zero(h, keep);
  p.variances = Eigen::VectorXd::Zero(keep);

  Eigen::VectorXd eigenvalues;
  Eigen::MatrixXd axes_all;
  if (n <= h) {
    const Eigen::MatrixXd gram = centered * centered.transpose();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(gram);
    eigenvalues = solver.eigenvalues();
    axes_all = centered.transpose() * solver.eigenvectors();  // h x n, unnormalized
  } else {
    const Eigen::MatrixXd cov = centered.transpose() * centered;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
    eigenvalues = solver.eigenvalues();
    axes_all = solver.eigenvectors();
  }
  const double top = std::max(eigenvalues.maxCoeff(), 0.0);
  const double floor = top * 1e-12;
  // Eigen returns ascending eigenvalues.
  const Eigen::Index available = eigenvalues.size();
  for (Eigen::Index c = 0; c < keep && c < available; ++c) {
    const Eigen::Index src = available - 1 - c;
    const double lambda = eigenvalues(src);
    if (!(lambda > floor) || top == 0.0) continue;
    Eigen::VectorXd axis = axes_all.col(src);
    const double norm = axis.norm();
    if (norm == 0.0) continue;
    p.axes.col(c) = axis / norm;
    p.variances(c) = lambda / static_cast<double>(n - 1);
  }
  detail::fix_signs(p.axes);
  return p;
}

inline Eigen::MatrixXd transform(const Projection& p, const Eigen::MatrixXd& rows) {
  return (rows.rowwise() - p.mean.transpose()) * p.axes;
}

}  // namespace trendlens::pca
