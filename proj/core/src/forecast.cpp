#include "deridge/forecast.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "checks.hpp"
#include "deridge/dataset.hpp"
#include "deridge/errors.hpp"
#include "deridge/inference.hpp"
#include "deridge/screening.hpp"

namespace deridge {
namespace {

void validate(const Eigen::VectorXd& target,
              const std::optional<Eigen::MatrixXd>& panel,
              const ForecastSpec& spec) {
  if (spec.lags < 1) throw usage_error("lags must be positive");
  if (spec.horizon < 1) throw usage_error("horizon must be positive");
  if (spec.factors < 0) throw usage_error("factors must be nonnegative");
  if (!(spec.train_fraction > 0.0) || !(spec.train_fraction < 1.0))
    throw usage_error("train_fraction must lie strictly inside (0, 1)");
  if (spec.lambda_grid.empty())
    throw usage_error("lambda grid must not be empty");
  check_level(spec.level);
  if (!target.allFinite())
    throw usage_error("target series contains non-finite values");
  if (spec.factors > 0) {
    if (!panel)
      throw usage_error("factor augmentation needs a covariate panel");
    if (panel->rows() != target.size())
      throw usage_error("panel rows (" + std::to_string(panel->rows()) +
                        ") must match the target length (" +
                        std::to_string(target.size()) + ")");
    if (panel->cols() < spec.factors)
      throw usage_error("panel has fewer columns than requested factors");
    if (!panel->allFinite())
      throw usage_error("panel contains non-finite values");
  }
  if (spec.screen) {
    if (spec.screen->n_star < 1)
      throw usage_error("screen n_star must be positive");
    if (spec.screen->n_star > spec.lags + spec.factors)
      throw usage_error("screen n_star exceeds the regressor count");
    if (spec.screen->k_stage1 < 0)
      throw usage_error("screen stage k must be nonnegative");
  }
}

}  // namespace

ForecastResult rolling_forecast(const Eigen::VectorXd& target,
                                const std::optional<Eigen::MatrixXd>& panel,
                                const ForecastSpec& spec) {
  validate(target, panel, spec);

  const Eigen::Index t_len = target.size();
  const int q = spec.lags;
  const int h = spec.horizon;
  const int r = spec.factors;
  const Eigen::Index embedded = t_len - q - h + 1;
  if (embedded < 3)
    throw usage_error("series of length " + std::to_string(t_len) +
                      " leaves fewer than 3 embedded rows at order " +
                      std::to_string(q) + ", horizon " + std::to_string(h));

  const auto n_train = static_cast<Eigen::Index>(
      std::floor(spec.train_fraction * static_cast<double>(embedded)));
  if (n_train < 2)
    throw usage_error("insufficient history for the first fitting window");
  const Eigen::Index n_test = embedded - n_train;
  if (n_test < 1) throw usage_error("no test points after the split");

  const Dataset emb = lag_embed(target, LagSpec{q, h});
  const std::size_t n_grid = spec.lambda_grid.size();

  std::vector<double> lambdas(n_grid);
  for (std::size_t g = 0; g < n_grid; ++g) {
    lambdas[g] = spec.lambda_grid[g].resolve(n_train);
    check_lambda(lambdas[g]);
  }
  const std::optional<double> screen_lambda =
      spec.screen && spec.screen->lambda_star
          ? std::optional<double>(spec.screen->lambda_star->resolve(n_train))
          : std::nullopt;

  // One forecast path per grid penalty; the winner is chosen afterwards.
  std::vector<std::vector<ForecastPoint>> paths(
      n_grid, std::vector<ForecastPoint>(n_test));

  const int n_cols = q + r;
  for (Eigen::Index j = n_train; j < embedded; ++j) {
    // Window = the n_train embedded rows before test row j.  Anchor time
    // of row i is q-1+i, so every feature uses values at or before the
    // forecast origin q-1+j.
    Eigen::MatrixXd xw(n_train, n_cols);
    xw.leftCols(q) = emb.x.middleRows(j - n_train, n_train);
    Eigen::VectorXd x0(n_cols);
    x0.head(q) = emb.x.row(j);

    if (r > 0) {
      const Eigen::Index first_anchor = q - 1 + (j - n_train);
      Eigen::MatrixXd window_panel =
          panel->middleRows(first_anchor, n_train + 1);
      const Eigen::RowVectorXd means = window_panel.colwise().mean();
      window_panel.rowwise() -= means;
      const Eigen::MatrixXd scores = pca_factors(window_panel, r);
      xw.rightCols(r) = scores.topRows(n_train);
      x0.tail(r) = scores.row(n_train);
    }

    Eigen::VectorXd yw = emb.y.segment(j - n_train, n_train);
    const Eigen::RowVectorXd x_means = xw.colwise().mean();
    const double y_mean = yw.mean();
    xw.rowwise() -= x_means;
    yw.array() -= y_mean;
    const Eigen::VectorXd x0c = x0 - x_means.transpose();

    const SpectralCache cache = decompose(xw, yw);
    const double actual = emb.y(j);
    const Eigen::Index target_index = q - 1 + j + h;

    for (std::size_t g = 0; g < n_grid; ++g) {
      const double lambda = lambdas[g];
      IntervalEstimate pi;
      if (!spec.screen) {
        const DebiasedFit fit = debias(cache, RidgeConfig{lambda, spec.iter});
        pi = prediction_interval(fit, cache, x0c, spec.level);
      } else {
        const ScreeningSelection sel =
            screen(xw, yw, cache, screen_lambda.value_or(lambda),
                   IterSpec::fixed(spec.screen->k_stage1),
                   spec.screen->n_star);
        const TwoStageFit fit = two_stage_fit(sel, spec.iter, lambda);
        pi = prediction_interval(fit, x0c, spec.level);
      }
      ForecastPoint& pt = paths[g][j - n_train];
      pt.target_index = target_index;
      pt.actual = actual;
      pt.point = y_mean + pi.point;
      pt.se = pi.se;
      pt.lower = y_mean + pi.lower;
      pt.upper = y_mean + pi.upper;
    }
  }

  ForecastResult out;
  out.window_rows = n_train;
  out.test_points = n_test;
  out.grid.resize(n_grid);
  for (std::size_t g = 0; g < n_grid; ++g) {
    double sse = 0.0;
    Eigen::Index hits = 0;
    for (const ForecastPoint& pt : paths[g]) {
      const double err = pt.actual - pt.point;
      sse += err * err;
      if (pt.lower <= pt.actual && pt.actual <= pt.upper) ++hits;
    }
    out.grid[g].lambda = lambdas[g];
    out.grid[g].msfe = sse / static_cast<double>(n_test);
    out.grid[g].coverage =
        static_cast<double>(hits) / static_cast<double>(n_test);
  }

  std::size_t best = 0;
  for (std::size_t g = 1; g < n_grid; ++g)
    if (out.grid[g].msfe < out.grid[best].msfe) best = g;
  out.best_index = static_cast<int>(best);
  out.lambda_used = out.grid[best].lambda;
  out.msfe = out.grid[best].msfe;
  out.coverage = out.grid[best].coverage;
  out.points = std::move(paths[best]);
  return out;
}

}  // namespace deridge
