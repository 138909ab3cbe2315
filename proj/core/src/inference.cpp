#include "deridge/inference.hpp"

#include <cmath>
#include <string>

#include "checks.hpp"
#include "deridge/errors.hpp"
#include "deridge/stats.hpp"

namespace deridge {
namespace {

void check_cov(const SpectralCache& cache, const CovarianceModel& cov) {
  if (cov.kind == CovarianceModel::Kind::homoskedastic) {
    if (!(cov.sigma >= 0.0) || !std::isfinite(cov.sigma))
      throw usage_error("covariance: sigma must be finite and non-negative");
  } else {
    if (cov.variances.size() != cache.n)
      throw usage_error("covariance: need one variance per observation");
    if (!(cov.variances.array() >= 0.0).all())
      throw usage_error("covariance: negative variance supplied");
  }
}

// Filter factors (1 - r^{k+1}) / d^2 for explicit (lambda, k).
Eigen::ArrayXd filter_for(const SpectralCache& cache, double lambda, int k) {
  const Eigen::ArrayXd d2 = cache.sing.array().square();
  const Eigen::ArrayXd rk1 = (lambda / (d2 + lambda)).pow(k + 1);
  return (1.0 - rk1) / d2;
}

// Variance of theta' beta_hat without materializing the p x p matrix.
double quadratic_form(const SpectralCache& cache, const Eigen::ArrayXd& g,
                      const CovarianceModel& cov, const Eigen::VectorXd& theta) {
  const Eigen::VectorXd t = cache.row_basis.transpose() * theta;  // rank
  const Eigen::ArrayXd d = cache.sing.array();
  if (cov.kind == CovarianceModel::Kind::homoskedastic) {
    // sigma^2 * sum_i (g_i d_i t_i)^2
    return cov.sigma * cov.sigma * (g * d * t.array()).square().sum();
  }
  // G X' diag(v) X G contracted with theta on both sides:
  // v^{1/2} V D g t is an n-vector whose squared norm is the answer.
  const Eigen::VectorXd inner = (g * d * t.array()).matrix();
  const Eigen::VectorXd obs = cache.obs_basis * inner;
  return (cov.variances.array() * obs.array().square()).sum();
}

}  // namespace

Eigen::MatrixXd covariance_debiased(const SpectralCache& cache, double lambda,
                                    int k, const CovarianceModel& cov) {
  if (!(lambda > 0.0)) throw usage_error("covariance: lambda must be positive");
  if (k < 0) throw usage_error("covariance: k must be non-negative");
  if (cache.rank == 0) throw model_error("covariance: rank-zero design");
  check_cov(cache, cov);

  const Eigen::ArrayXd g = filter_for(cache, lambda, k);
  const Eigen::ArrayXd d = cache.sing.array();
  if (cov.kind == CovarianceModel::Kind::homoskedastic) {
    const Eigen::ArrayXd w = (cov.sigma * g * d).square();
    return cache.row_basis * w.matrix().asDiagonal() *
           cache.row_basis.transpose();
  }
  // U diag(g d) V' diag(v) V diag(g d) U'
  const Eigen::MatrixXd half =
      cov.variances.array().sqrt().matrix().asDiagonal() * cache.obs_basis *
      (g * d).matrix().asDiagonal();
  const Eigen::MatrixXd core = half.transpose() * half;
  return cache.row_basis * core * cache.row_basis.transpose();
}

ContrastResult contrast_test(const DebiasedFit& fit, const SpectralCache& cache,
                             const Eigen::VectorXd& theta, double null_value,
                             std::optional<CovarianceModel> cov) {
  if (theta.size() != cache.p)
    throw usage_error("contrast_test: theta has wrong length");
  if (theta.isZero(0.0))
    throw usage_error("contrast_test: theta must be nonzero");
  const CovarianceModel model =
      cov.value_or(CovarianceModel::homoskedastic(fit.sigma_hat));
  check_cov(cache, model);

  ContrastResult res;
  res.estimate = theta.dot(fit.beta);
  const double overlap = (cache.row_basis.transpose() * theta).norm();
  if (overlap <= 1e-12 * std::max(1.0, theta.norm()))
    throw model_error(
        "contrast is not estimable: theta is orthogonal to the row space of "
        "the design");
  const double var = quadratic_form(cache, fit.filter.array(), model, theta);
  res.se = std::sqrt(std::max(var, 0.0));
  if (res.se == 0.0)
    throw model_error("contrast is not estimable: zero variance");
  res.z = (res.estimate - null_value) / res.se;
  res.p_value = normal_two_sided_p(res.z);
  return res;
}

IntervalEstimate confidence_interval(const DebiasedFit& fit,
                                     const SpectralCache& cache,
                                     const Eigen::VectorXd& x0, double level,
                                     std::optional<CovarianceModel> cov) {
  check_level(level);
  if (x0.size() != cache.p)
    throw usage_error("confidence_interval: x0 has wrong length");
  const CovarianceModel model =
      cov.value_or(CovarianceModel::homoskedastic(fit.sigma_hat));
  check_cov(cache, model);

  IntervalEstimate est;
  est.kind = IntervalEstimate::Kind::confidence;
  est.level = level;
  est.point = x0.dot(fit.beta);
  est.se = std::sqrt(
      std::max(quadratic_form(cache, fit.filter.array(), model, x0), 0.0));
  const double z = normal_quantile(0.5 + level / 2.0);
  est.lower = est.point - z * est.se;
  est.upper = est.point + z * est.se;
  return est;
}

IntervalEstimate prediction_interval(const DebiasedFit& fit,
                                     const SpectralCache& cache,
                                     const Eigen::VectorXd& x0, double level,
                                     std::optional<CovarianceModel> cov) {
  check_level(level);
  if (x0.size() != cache.p)
    throw usage_error("prediction_interval: x0 has wrong length");
  const CovarianceModel model =
      cov.value_or(CovarianceModel::homoskedastic(fit.sigma_hat));
  if (model.kind != CovarianceModel::Kind::homoskedastic)
    throw usage_error("prediction_interval: future-noise variance requires "
                      "the homoskedastic model");
  check_cov(cache, model);

  IntervalEstimate est;
  est.kind = IntervalEstimate::Kind::prediction;
  est.level = level;
  est.point = x0.dot(fit.beta);
  const double var_fit =
      std::max(quadratic_form(cache, fit.filter.array(), model, x0), 0.0);
  est.se = std::sqrt(var_fit + model.sigma * model.sigma);
  const double z = normal_quantile(0.5 + level / 2.0);
  est.lower = est.point - z * est.se;
  est.upper = est.point + z * est.se;
  return est;
}

}  // namespace deridge
