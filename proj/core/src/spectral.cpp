#include "deridge/spectral.hpp"

#include <cmath>
#include <string>

#include "checks.hpp"
#include "deridge/errors.hpp"

namespace deridge {

SpectralCache decompose(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                        double rank_tol) {
  if (x.rows() == 0 || x.cols() == 0)
    throw usage_error("decompose: empty design");
  if (y.size() != x.rows())
    throw usage_error("decompose: y has " + std::to_string(y.size()) +
                      " rows, design has " + std::to_string(x.rows()));
  if (!(rank_tol >= 0.0))
    throw usage_error("decompose: rank_tol must be non-negative");
  if (!x.allFinite() || !y.allFinite())
    throw usage_error("decompose: non-finite values in the data");

  Eigen::JacobiSVD<Eigen::MatrixXd> svd(
      x, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Eigen::VectorXd& d = svd.singularValues();
  const double cutoff = d.size() > 0 ? rank_tol * d(0) : 0.0;

  int rank = 0;
  for (Eigen::Index i = 0; i < d.size(); ++i)
    if (d(i) > cutoff && d(i) > 0.0) ++rank;

  SpectralCache cache;
  cache.n = x.rows();
  cache.p = x.cols();
  cache.rank = rank;
  cache.tol_used = cutoff;
  cache.sing = d.head(rank);
  cache.row_basis = svd.matrixV().leftCols(rank);
  cache.obs_basis = svd.matrixU().leftCols(rank);
  cache.xty = x.transpose() * y;
  cache.proj_xty = cache.row_basis.transpose() * cache.xty;
  cache.y_norm2 = y.squaredNorm();
  return cache;
}

SpectralCache decompose(const Dataset& d, double rank_tol) {
  if (!d.centered)
    throw usage_error("decompose: dataset must be centered first "
                      "(call center())");
  return decompose(d.x, d.y, rank_tol);
}

namespace {

// Applies a per-direction filter g to the cached projections:
// beta = row_basis * (g .* proj_xty).
Eigen::VectorXd apply_filter(const SpectralCache& cache,
                             const Eigen::ArrayXd& g) {
  return cache.row_basis * (g * cache.proj_xty.array()).matrix();
}

// ||y - X beta||^2 for a spectrally filtered beta, using
// ||y||^2 - 2 (X'y)'beta + ||D U' beta||^2; beta lies in the row space so
// the cross terms are exact.
double rss_of_filter(const SpectralCache& cache, const Eigen::ArrayXd& g) {
  const Eigen::ArrayXd w = cache.proj_xty.array();
  const Eigen::ArrayXd d2 = cache.sing.array().square();
  const double yxb = (g * w * w).sum();
  const double xb2 = (d2 * g.square() * w * w).sum();
  return std::max(cache.y_norm2 - 2.0 * yxb + xb2, 0.0);
}

}  // namespace

Eigen::VectorXd ridge_fit(const SpectralCache& cache, double lambda) {
  check_lambda(lambda);
  check_rank(cache);
  const Eigen::ArrayXd d2 = cache.sing.array().square();
  return apply_filter(cache, 1.0 / (d2 + lambda));
}

Eigen::VectorXd least_squares_pinv(const SpectralCache& cache) {
  check_rank(cache);
  const Eigen::ArrayXd d2 = cache.sing.array().square();
  return apply_filter(cache, 1.0 / d2);
}

DebiasedFit debias(const SpectralCache& cache, const RidgeConfig& config) {
  check_lambda(config.lambda);
  check_rank(cache);
  const IterSpec& it = config.iter;
  if (!it.automatic && it.k < 0)
    throw usage_error("debias: k must be non-negative");
  if (it.automatic && !(it.eta > 0.0))
    throw usage_error("debias: eta must be positive");
  if (it.automatic && it.max_iter < 1)
    throw usage_error("debias: max_iter must be >= 1");

  const Eigen::ArrayXd d2 = cache.sing.array().square();
  const Eigen::ArrayXd r = config.lambda / (d2 + config.lambda);
  const Eigen::ArrayXd w = cache.proj_xty.array();

  int k_used;
  bool converged = true;
  if (!it.automatic) {
    k_used = it.k;
  } else {
    // Step increments are available in closed form: moving from k-1 to k
    // adds row_basis * diag(r^k (1-r)/d^2) * proj_xty, so the stop rule
    // costs O(rank) per step.
    const Eigen::ArrayXd unit = (1.0 - r) / d2 * w;  // increment at k = 1 is r*unit
    Eigen::ArrayXd pow = r;                          // r^k, starting at k = 1
    k_used = it.max_iter;
    converged = false;
    for (int k = 1; k <= it.max_iter; ++k) {
      const double step = std::sqrt((pow * unit).square().sum());
      if (step <= it.eta) {
        k_used = k;
        converged = true;
        break;
      }
      pow *= r;
    }
  }

  // Geometric sum of the correction series: sum_{j=0}^{k} lambda^j
  // (d^2+lambda)^{-(j+1)} = (1 - r^{k+1}) / d^2.
  const Eigen::ArrayXd rk1 = r.pow(k_used + 1);
  const Eigen::ArrayXd g = (1.0 - rk1) / d2;

  DebiasedFit fit;
  fit.beta = apply_filter(cache, g);
  fit.lambda = config.lambda;
  fit.k_used = k_used;
  fit.converged = converged;
  fit.rank = cache.rank;
  fit.filter = g.matrix();
  fit.sigma_hat =
      std::sqrt(rss_of_filter(cache, g) / static_cast<double>(cache.n));
  return fit;
}

Eigen::VectorXd bias_oracle(const SpectralCache& cache,
                            const Eigen::VectorXd& beta_true, double lambda,
                            int k) {
  check_lambda(lambda);
  if (k < 0) throw usage_error("bias_oracle: k must be non-negative");
  if (beta_true.size() != cache.p)
    throw usage_error("bias_oracle: beta has wrong length");
  const Eigen::ArrayXd d2 = cache.sing.array().square();
  const Eigen::ArrayXd rk1 =
      (lambda / (d2 + lambda)).pow(k + 1);
  const Eigen::VectorXd proj = cache.row_basis.transpose() * beta_true;
  // Row-space part decays geometrically; the null-space part never moves.
  return cache.row_basis * (rk1 * proj.array()).matrix() +
         (beta_true - cache.row_basis * proj);
}

}  // namespace deridge
