#pragma once

#include <Eigen/Dense>

#include "deridge/dataset.hpp"

namespace deridge {

inline constexpr double kDefaultRankTol = 1e-12;  // relative to top singular value

// One-time SVD of the design, plus the response projections every fit
// needs.  All estimators downstream are spectral filters: they touch only
// the singular values and the rank-sized projection of X'y, never a p x p
// inverse.  Immutable once built; sharing one cache across many lambda/k
// configurations is the intended use.
struct SpectralCache {
  Eigen::MatrixXd row_basis;  // p x rank, right singular vectors, orthonormal
  Eigen::VectorXd sing;       // rank, descending, all > tolerance
  Eigen::MatrixXd obs_basis;  // n x rank, left singular vectors, orthonormal
  Eigen::VectorXd xty;        // X'y, p
  Eigen::VectorXd proj_xty;   // row_basis' * xty, rank
  double y_norm2 = 0.0;       // ||y||^2, lets residuals avoid storing y
  Eigen::Index n = 0, p = 0;
  int rank = 0;
  double tol_used = 0.0;  // absolute singular-value cutoff applied

  // r_i = lambda / (d_i^2 + lambda), the per-direction shrinkage ratio.
  Eigen::VectorXd shrinkage(double lambda) const {
    return (lambda /
            (sing.array().square() + lambda)).matrix();
  }
};

// rank_tol is relative: directions with d_i <= rank_tol * d_1 are treated
// as exact zeros.  Non-finite entries are rejected.
SpectralCache decompose(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                        double rank_tol = kDefaultRankTol);

// Dataset overload; requires centered data (fit formulas assume no
// intercept, which centering guarantees for file-borne data).
SpectralCache decompose(const Dataset& d, double rank_tol = kDefaultRankTol);

// Correction-depth rule: either a fixed k, or iterate until consecutive
// corrected estimates move less than eta in Euclidean norm.
struct IterSpec {
  int k = 0;
  bool automatic = false;
  double eta = 1e-2;
  int max_iter = 10000;

  static IterSpec fixed(int k) {
    IterSpec s;
    s.k = k;
    return s;
  }
  static IterSpec stop_rule(double eta = 1e-2, int max_iter = 10000) {
    IterSpec s;
    s.automatic = true;
    s.eta = eta;
    s.max_iter = max_iter;
    return s;
  }
};

struct RidgeConfig {
  double lambda = 1.0;
  IterSpec iter;
};

// A fitted bias-corrected ridge estimate.  `filter` holds the spectral
// weights (1 - r_i^{k+1}) / d_i^2 actually applied, one per retained
// direction; k_used = 0 reproduces plain ridge exactly.  sigma_hat is the
// in-sample residual scale sqrt(||y - X beta||^2 / n).
struct DebiasedFit {
  Eigen::VectorXd beta;
  double lambda = 0.0;
  int k_used = 0;
  bool converged = true;  // false only when the stop rule hit max_iter
  double sigma_hat = 0.0;
  int rank = 0;
  Eigen::VectorXd filter;
};

Eigen::VectorXd ridge_fit(const SpectralCache& cache, double lambda);

// Minimum-norm least squares via the pseudoinverse filter 1/d_i^2.
Eigen::VectorXd least_squares_pinv(const SpectralCache& cache);

DebiasedFit debias(const SpectralCache& cache, const RidgeConfig& config);

// Exact bias of the k-step corrected estimator at the true coefficients:
// lambda^{k+1} (X'X + lambda I)^{-(k+1)} beta.  Computed spectrally as
// row-space decay plus the untouched null-space component, so it is valid
// in both the p < n and p > n regimes.
Eigen::VectorXd bias_oracle(const SpectralCache& cache,
                            const Eigen::VectorXd& beta_true, double lambda,
                            int k);

}  // namespace deridge
