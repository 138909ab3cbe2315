#pragma once

#include <Eigen/Dense>
#include <optional>
#include <vector>

#include "deridge/spectral.hpp"

namespace deridge {

// Penalty value that may be expressed as a multiple of the sample size
// ("0.3n") and resolved once the fitting window's row count is known.
struct LambdaRule {
  double value = 1.0;
  bool n_relative = false;

  double resolve(Eigen::Index n) const {
    return n_relative ? value * static_cast<double>(n) : value;
  }
  static LambdaRule absolute(double v) { return {v, false}; }
  static LambdaRule times_n(double v) { return {v, true}; }
};

// Optional selection stage inside each window: rank at (lambda_star,
// k_stage1), keep n_star regressors, then fit the candidate penalty on the
// restriction.  lambda_star defaults to the candidate penalty itself.
struct ForecastScreen {
  int n_star = 1;
  int k_stage1 = 100;
  std::optional<LambdaRule> lambda_star;
};

struct ForecastSpec {
  int lags = 4;
  int factors = 0;  // 0 = plain autoregression, no panel needed
  int horizon = 1;
  double train_fraction = 0.8;
  std::vector<LambdaRule> lambda_grid;
  IterSpec iter = IterSpec::stop_rule();
  double level = 0.95;
  std::optional<ForecastScreen> screen;
};

struct ForecastPoint {
  Eigen::Index target_index = 0;  // position of the forecast target in the series
  double actual = 0.0;
  double point = 0.0;
  double se = 0.0;
  double lower = 0.0;
  double upper = 0.0;
};

struct ForecastGridEntry {
  double lambda = 0.0;  // resolved against the window length
  double msfe = 0.0;
  double coverage = 0.0;
};

struct ForecastResult {
  std::vector<ForecastGridEntry> grid;
  int best_index = 0;      // position in grid of the MSFE minimizer
  double lambda_used = 0.0;
  double msfe = 0.0;
  double coverage = 0.0;   // fraction of realized targets inside intervals
  std::vector<ForecastPoint> points;  // the winning penalty's path
  Eigen::Index window_rows = 0;       // embedded rows per fitting window
  Eigen::Index test_points = 0;
};

// Rolling-window evaluation: embed the target autoregressively, optionally
// augment each window with principal-component factor scores of the panel
// re-estimated inside that window (no look-ahead), fit the corrected ridge
// estimator per grid penalty, and emit one prediction interval per test
// point.  The winning penalty minimizes out-of-sample mean squared
// forecast error; ties keep the earlier grid entry.
ForecastResult rolling_forecast(const Eigen::VectorXd& target,
                                const std::optional<Eigen::MatrixXd>& panel,
                                const ForecastSpec& spec);

}  // namespace deridge
