#include "deridge/screening.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "deridge/errors.hpp"

namespace deridge {

std::vector<int> top_magnitude_indices(const Eigen::VectorXd& v, int n_star) {
  if (n_star < 1 || n_star > v.size())
    throw usage_error("top_magnitude_indices: n_star out of range");
  std::vector<int> order(static_cast<std::size_t>(v.size()));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    const double ma = std::fabs(v(a)), mb = std::fabs(v(b));
    if (ma != mb) return ma > mb;
    return a < b;
  });
  order.resize(static_cast<std::size_t>(n_star));
  std::sort(order.begin(), order.end());
  return order;
}

ScreeningSelection screen(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                          const SpectralCache& cache, double lambda_star,
                          const IterSpec& k, int n_star, double rank_tol) {
  if (x.cols() != cache.p || x.rows() != cache.n)
    throw usage_error("screen: cache does not match the design");
  if (n_star < 1 || n_star > x.cols())
    throw usage_error("screen: n_star must lie in [1, p]");

  RidgeConfig cfg;
  cfg.lambda = lambda_star;
  cfg.iter = k;
  const DebiasedFit stage1 = debias(cache, cfg);

  ScreeningSelection sel;
  sel.indices = top_magnitude_indices(stage1.beta, n_star);
  sel.lambda_star = lambda_star;
  sel.k_stage1 = stage1.k_used;
  sel.n_star = n_star;
  sel.stage1_beta = stage1.beta;
  sel.large_n_star_warning = (x.cols() > x.rows()) && (n_star >= x.rows());

  Eigen::MatrixXd restricted(x.rows(), n_star);
  for (int j = 0; j < n_star; ++j)
    restricted.col(j) = x.col(sel.indices[static_cast<std::size_t>(j)]);
  sel.restricted_cache = decompose(restricted, y, rank_tol);
  return sel;
}

TwoStageFit two_stage_fit(const ScreeningSelection& selection,
                          const IterSpec& l, std::optional<double> lambda) {
  RidgeConfig cfg;
  cfg.lambda = lambda.value_or(selection.lambda_star);
  cfg.iter = l;

  TwoStageFit fit;
  fit.selection = selection;
  fit.restricted = debias(selection.restricted_cache, cfg);
  fit.beta_full = Eigen::VectorXd::Zero(selection.stage1_beta.size());
  for (std::size_t j = 0; j < selection.indices.size(); ++j)
    fit.beta_full(selection.indices[j]) =
        fit.restricted.beta(static_cast<Eigen::Index>(j));
  return fit;
}

namespace {

Eigen::VectorXd restrict_x0(const TwoStageFit& fit, const Eigen::VectorXd& x0) {
  if (x0.size() != fit.beta_full.size())
    throw usage_error("interval: x0 must have the full design length");
  Eigen::VectorXd sub(static_cast<Eigen::Index>(fit.selection.indices.size()));
  for (std::size_t j = 0; j < fit.selection.indices.size(); ++j)
    sub(static_cast<Eigen::Index>(j)) = x0(fit.selection.indices[j]);
  return sub;
}

}  // namespace

IntervalEstimate confidence_interval(const TwoStageFit& fit,
                                     const Eigen::VectorXd& x0, double level,
                                     std::optional<CovarianceModel> cov) {
  return confidence_interval(fit.restricted, fit.selection.restricted_cache,
                             restrict_x0(fit, x0), level, std::move(cov));
}

IntervalEstimate prediction_interval(const TwoStageFit& fit,
                                     const Eigen::VectorXd& x0, double level,
                                     std::optional<CovarianceModel> cov) {
  return prediction_interval(fit.restricted, fit.selection.restricted_cache,
                             restrict_x0(fit, x0), level, std::move(cov));
}

namespace {

struct Fold {
  std::vector<Eigen::Index> train;
  std::vector<Eigen::Index> validate;
};

std::vector<Fold> make_folds(Eigen::Index n, const TuneScheme& scheme) {
  std::vector<Fold> folds;
  if (scheme.kind == TuneScheme::Kind::kfold) {
    if (scheme.folds < 2 || scheme.folds > n)
      throw usage_error("tune: folds must lie in [2, n]");
    const Eigen::Index k = scheme.folds;
    for (Eigen::Index f = 0; f < k; ++f) {
      const Eigen::Index lo = f * n / k, hi = (f + 1) * n / k;
      Fold fold;
      for (Eigen::Index i = 0; i < n; ++i)
        (i >= lo && i < hi ? fold.validate : fold.train).push_back(i);
      folds.push_back(std::move(fold));
    }
  } else {
    if (!(scheme.holdout_fraction > 0.0 && scheme.holdout_fraction < 1.0))
      throw usage_error("tune: holdout fraction must lie in (0, 1)");
    const auto n_val = static_cast<Eigen::Index>(
        std::ceil(scheme.holdout_fraction * static_cast<double>(n)));
    if (n_val < 1 || n_val >= n)
      throw usage_error("tune: holdout split leaves an empty side");
    Fold fold;
    for (Eigen::Index i = 0; i < n; ++i)
      (i >= n - n_val ? fold.validate : fold.train).push_back(i);
    folds.push_back(std::move(fold));
  }
  return folds;
}

Eigen::MatrixXd take_rows(const Eigen::MatrixXd& x,
                          const std::vector<Eigen::Index>& rows) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), x.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(i) = x.row(rows[i]);
  return out;
}

Eigen::VectorXd take_rows(const Eigen::VectorXd& v,
                          const std::vector<Eigen::Index>& rows) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) out(i) = v(rows[i]);
  return out;
}

}  // namespace

TuneResult tune(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                std::span<const double> lambda_grid,
                std::span<const int> n_star_grid, const TuneScheme& scheme,
                const IterSpec& k_stage1, double rank_tol) {
  if (lambda_grid.empty() || n_star_grid.empty())
    throw usage_error("tune: empty grid");
  if (y.size() != x.rows()) throw usage_error("tune: y/x row mismatch");

  const auto folds = make_folds(x.rows(), scheme);

  TuneResult result;
  bool any_feasible = false;
  double best = std::numeric_limits<double>::infinity();
  double second = std::numeric_limits<double>::infinity();

  // Grid is walked n_star-major then lambda so the first feasible minimum
  // encountered is already the tie-broken winner (smaller n_star, then
  // smaller lambda).
  std::vector<int> n_sorted(n_star_grid.begin(), n_star_grid.end());
  std::sort(n_sorted.begin(), n_sorted.end());
  std::vector<double> l_sorted(lambda_grid.begin(), lambda_grid.end());
  std::sort(l_sorted.begin(), l_sorted.end());

  for (int n_star : n_sorted) {
    for (double lambda : l_sorted) {
      TuneCell cell;
      cell.lambda_star = lambda;
      cell.n_star = n_star;
      if (n_star < 1 || n_star > x.cols()) {
        cell.feasible = false;
        cell.note = "n_star outside [1, p]";
        result.table.push_back(cell);
        continue;
      }
      bool feasible = true;
      double sq_err = 0.0;
      Eigen::Index n_scored = 0;
      for (const auto& fold : folds) {
        if (static_cast<std::size_t>(n_star) >= fold.train.size()) {
          cell.note = "n_star >= training rows";
          feasible = false;
          break;
        }
        const Eigen::MatrixXd xt = take_rows(x, fold.train);
        const Eigen::VectorXd yt = take_rows(y, fold.train);
        const SpectralCache cache = decompose(xt, yt, rank_tol);
        const ScreeningSelection sel =
            screen(xt, yt, cache, lambda, k_stage1, n_star, rank_tol);
        const Eigen::VectorXd beta_m =
            ridge_fit(sel.restricted_cache, lambda);
        for (Eigen::Index v : fold.validate) {
          double pred = 0.0;
          for (std::size_t j = 0; j < sel.indices.size(); ++j)
            pred += x(v, sel.indices[j]) * beta_m(static_cast<Eigen::Index>(j));
          const double e = y(v) - pred;
          sq_err += e * e;
          ++n_scored;
        }
      }
      cell.feasible = feasible;
      if (feasible) {
        cell.score = sq_err / static_cast<double>(n_scored);
        any_feasible = true;
        if (cell.score < best) {
          second = best;
          best = cell.score;
          result.lambda_star = lambda;
          result.n_star = n_star;
        } else if (cell.score < second) {
          second = cell.score;
        }
      }
      result.table.push_back(cell);
    }
  }
  if (!any_feasible)
    throw usage_error("tune: no feasible (lambda_star, n_star) pair on the grid");
  result.best_score = best;
  result.near_tie = std::isfinite(second) && (second - best) < 1e-6;
  return result;
}

}  // namespace deridge
