#include "deridge/tradeoff.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "checks.hpp"
#include "deridge/errors.hpp"

namespace deridge {
namespace {

// Curve values at one depth.  pow_next holds r_i^{k+1}.
struct Point {
  double bias_sq;
  double variance;
  double total;
};

Point eval_point(const Eigen::VectorXd& delta2, const Eigen::VectorXd& d2,
                 const Eigen::VectorXd& pow_next, double sigma2) {
  Point pt{0.0, 0.0, 0.0};
  for (Eigen::Index i = 0; i < delta2.size(); ++i) {
    const double rk = pow_next(i);
    pt.bias_sq += delta2(i) * rk * rk;
    const double miss = 1.0 - rk;
    pt.variance += sigma2 * miss * miss / d2(i);
  }
  pt.total = pt.bias_sq + pt.variance;
  return pt;
}

// Per-direction depth k_i = log(1 - ratio_i)/log(r_i) - 1, defined only for
// ratio_i < 1; the window is the [min, max] over those directions.  The
// continuous-k derivative behind this formula is known to disagree with the
// discrete argmin, so the window is a reported diagnostic, never a verdict.
std::optional<std::pair<double, double>> heuristic_window(
    const Eigen::VectorXd& ratios, const Eigen::VectorXd& shrink) {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  bool any = false;
  for (Eigen::Index i = 0; i < ratios.size(); ++i) {
    const double ratio = ratios(i);
    const double r = shrink(i);
    if (!(ratio < 1.0) || !(r > 0.0) || !(r < 1.0)) continue;
    const double k = std::log1p(-ratio) / std::log(r) - 1.0;
    lo = std::min(lo, k);
    hi = std::max(hi, k);
    any = true;
  }
  if (!any) return std::nullopt;
  return std::make_pair(std::max(0.0, lo), std::max(0.0, hi));
}

void validate(const SpectralCache& cache, const Eigen::VectorXd& beta_true,
              double lambda, double sigma, int k_max) {
  check_lambda(lambda);
  check_rank(cache);
  if (cache.rank < cache.p || cache.p >= cache.n)
    throw model_error(
        "mse decomposition needs a full-rank design with fewer columns than "
        "rows; rank " +
        std::to_string(cache.rank) + ", p " + std::to_string(cache.p) +
        ", n " + std::to_string(cache.n));
  if (beta_true.size() != cache.p)
    throw usage_error("beta_true length " + std::to_string(beta_true.size()) +
                      " does not match p " + std::to_string(cache.p));
  if (!(sigma >= 0.0) || !std::isfinite(sigma))
    throw usage_error("sigma must be finite and nonnegative");
  if (k_max < 0) throw usage_error("k_max must be nonnegative");
}

}  // namespace

MseDecomposition mse_curve(const SpectralCache& cache,
                           const Eigen::VectorXd& beta_true, double lambda,
                           double sigma, int k_max) {
  validate(cache, beta_true, lambda, sigma, k_max);
  constexpr int kHardCap = 5000;

  const Eigen::VectorXd delta = cache.row_basis.transpose() * beta_true;
  const Eigen::VectorXd delta2 = delta.array().square();
  const Eigen::VectorXd d2 = cache.sing.array().square();
  const Eigen::VectorXd shrink = cache.shrinkage(lambda);
  const double sigma2 = sigma * sigma;

  MseDecomposition out;
  out.requested_k_max = k_max;

  std::vector<Point> pts;
  Eigen::VectorXd pow_next = shrink;  // r^{k+1} starting at k = 0
  int grid_end = k_max;
  for (int k = 0;; ++k) {
    pts.push_back(eval_point(delta2, d2, pow_next, sigma2));
    if (k == grid_end) {
      int best = 0;
      for (int j = 1; j < static_cast<int>(pts.size()); ++j)
        if (pts[j].total < pts[best].total) best = j;
      if (best < grid_end || grid_end >= kHardCap) {
        out.argmin_k = best;
        break;
      }
      grid_end = std::min(kHardCap, grid_end == 0 ? 1 : grid_end * 2);
      out.extended = true;
    }
    pow_next.array() *= shrink.array();
  }

  const int m = static_cast<int>(pts.size());
  out.ks.resize(m);
  out.bias_sq.resize(m);
  out.variance.resize(m);
  out.total.resize(m);
  for (int k = 0; k < m; ++k) {
    out.ks[k] = k;
    out.bias_sq(k) = pts[k].bias_sq;
    out.variance(k) = pts[k].variance;
    out.total(k) = pts[k].total;
  }

  if (out.argmin_k == 0)
    out.regime = MseRegime::increasing;
  else if (out.argmin_k == m - 1)
    out.regime = MseRegime::decreasing;
  else
    out.regime = MseRegime::interior_minimum;

  Eigen::VectorXd ratios(delta2.size());
  for (Eigen::Index i = 0; i < delta2.size(); ++i)
    ratios(i) = sigma2 > 0.0
                    ? delta2(i) * d2(i) / sigma2
                    : std::numeric_limits<double>::infinity();
  out.heuristic_k_window = heuristic_window(ratios, shrink);
  return out;
}

RegimeReport regime_classify(const SpectralCache& cache,
                             const Eigen::VectorXd& beta_true, double lambda,
                             double sigma, int k_max) {
  validate(cache, beta_true, lambda, sigma, k_max);

  const Eigen::VectorXd delta = cache.row_basis.transpose() * beta_true;
  const Eigen::VectorXd delta2 = delta.array().square();
  const Eigen::VectorXd d2 = cache.sing.array().square();
  const Eigen::VectorXd shrink = cache.shrinkage(lambda);
  const double sigma2 = sigma * sigma;

  // Fixed grid: classification is about the window 0..k_max itself, so no
  // extension even if the curve is still falling at the edge.
  int best = 0;
  double best_total = std::numeric_limits<double>::infinity();
  Eigen::VectorXd pow_next = shrink;
  for (int k = 0; k <= k_max; ++k) {
    const Point pt = eval_point(delta2, d2, pow_next, sigma2);
    if (pt.total < best_total) {
      best_total = pt.total;
      best = k;
    }
    pow_next.array() *= shrink.array();
  }

  RegimeReport rep;
  rep.argmin_k = best;
  if (best == 0)
    rep.regime = MseRegime::increasing;
  else if (best == k_max)
    rep.regime = MseRegime::decreasing;
  else
    rep.regime = MseRegime::interior_minimum;

  rep.ratios.resize(delta2.size());
  for (Eigen::Index i = 0; i < delta2.size(); ++i)
    rep.ratios(i) = sigma2 > 0.0
                        ? delta2(i) * d2(i) / sigma2
                        : std::numeric_limits<double>::infinity();
  rep.heuristic_k_window = heuristic_window(rep.ratios, shrink);
  return rep;
}

}  // namespace deridge
