#pragma once

#include <Eigen/Dense>
#include <optional>

#include "deridge/spectral.hpp"

namespace deridge {

// Noise model for the sampling covariance.  Homoskedastic takes one scale;
// diagonal takes a per-observation variance vector.
struct CovarianceModel {
  enum class Kind { homoskedastic, diagonal };
  Kind kind = Kind::homoskedastic;
  double sigma = 1.0;
  Eigen::VectorXd variances;

  static CovarianceModel homoskedastic(double sigma) {
    CovarianceModel m;
    m.kind = Kind::homoskedastic;
    m.sigma = sigma;
    return m;
  }
  static CovarianceModel diagonal(Eigen::VectorXd variances) {
    CovarianceModel m;
    m.kind = Kind::diagonal;
    m.variances = std::move(variances);
    return m;
  }
};

// Exact finite-k sampling covariance of the corrected estimator.  For the
// homoskedastic model this is sigma^2 U diag((1-r^{k+1})^2 / d^2) U'; the
// diagonal model sandwiches X' Sigma X between the same spectral filters.
Eigen::MatrixXd covariance_debiased(const SpectralCache& cache, double lambda,
                                    int k, const CovarianceModel& cov);

struct ContrastResult {
  double estimate = 0.0;
  double se = 0.0;
  double z = 0.0;
  double p_value = 1.0;
};

// Two-sided z-test of theta' beta = null_value under the exact normal law
// of the fit.  Defaults the noise scale to the fit's sigma_hat.  A theta
// with no component in the design's row space is not estimable and raises
// model_error rather than reporting a meaningless zero-variance z.
ContrastResult contrast_test(const DebiasedFit& fit, const SpectralCache& cache,
                             const Eigen::VectorXd& theta, double null_value,
                             std::optional<CovarianceModel> cov = {});

struct IntervalEstimate {
  enum class Kind { confidence, prediction };
  double point = 0.0;
  double se = 0.0;
  double lower = 0.0;
  double upper = 0.0;
  double level = 0.95;
  Kind kind = Kind::confidence;
};

// Normal-quantile interval for x0' beta.  cov defaults to the fit's own
// sigma_hat; pass an explicit model to use a known or robust scale.
IntervalEstimate confidence_interval(const DebiasedFit& fit,
                                     const SpectralCache& cache,
                                     const Eigen::VectorXd& x0, double level,
                                     std::optional<CovarianceModel> cov = {});

// Adds the future-observation noise sigma^2 under the root; the noise
// model must be homoskedastic.
IntervalEstimate prediction_interval(const DebiasedFit& fit,
                                     const SpectralCache& cache,
                                     const Eigen::VectorXd& x0, double level,
                                     std::optional<CovarianceModel> cov = {});

}  // namespace deridge
