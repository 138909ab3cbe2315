#pragma once

#include <Eigen/Dense>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "deridge/inference.hpp"
#include "deridge/spectral.hpp"

namespace deridge {

// Result of ranking the stage-one corrected estimate and keeping the
// n_star largest coefficients in magnitude.  Indices are zero-based
// original column positions, ascending; ties keep the lower index.  The
// restricted design's decomposition is cached here so second-stage fits
// and intervals never redo the SVD.
struct ScreeningSelection {
  std::vector<int> indices;
  double lambda_star = 0.0;
  int k_stage1 = 0;
  int n_star = 0;
  bool large_n_star_warning = false;  // p > n path asked to keep >= n columns
  Eigen::VectorXd stage1_beta;        // the ranked coefficients, diagnostics
  SpectralCache restricted_cache;
};

// Pure ranking rule, exposed for reuse: positions of the n_star largest
// |v_i|, ascending; exact ties resolved toward the lower index.
std::vector<int> top_magnitude_indices(const Eigen::VectorXd& v, int n_star);

// cache must come from decompose(x, y) with the same data.
ScreeningSelection screen(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                          const SpectralCache& cache, double lambda_star,
                          const IterSpec& k, int n_star,
                          double rank_tol = kDefaultRankTol);

struct TwoStageFit {
  ScreeningSelection selection;
  DebiasedFit restricted;      // coefficients in restricted coordinates
  Eigen::VectorXd beta_full;   // length p, zero off the selection
};

// Second-stage corrected fit on the selected columns.  lambda defaults to
// the selection's lambda_star.
TwoStageFit two_stage_fit(const ScreeningSelection& selection,
                          const IterSpec& l,
                          std::optional<double> lambda = {});

// Intervals for x0' beta after selection: x0 is full length and is
// restricted to the selected coordinates internally.
IntervalEstimate confidence_interval(const TwoStageFit& fit,
                                     const Eigen::VectorXd& x0, double level,
                                     std::optional<CovarianceModel> cov = {});
IntervalEstimate prediction_interval(const TwoStageFit& fit,
                                     const Eigen::VectorXd& x0, double level,
                                     std::optional<CovarianceModel> cov = {});

// Validation scheme for tune(): contiguous k-fold blocks or an ordered
// holdout tail.  Folds are deterministic functions of n alone.
struct TuneScheme {
  enum class Kind { kfold, holdout };
  Kind kind = Kind::kfold;
  int folds = 5;
  double holdout_fraction = 0.2;

  static TuneScheme kfold(int folds) {
    TuneScheme s;
    s.kind = Kind::kfold;
    s.folds = folds;
    return s;
  }
  static TuneScheme holdout(double fraction) {
    TuneScheme s;
    s.kind = Kind::holdout;
    s.holdout_fraction = fraction;
    return s;
  }
};

struct TuneCell {
  double lambda_star = 0.0;
  int n_star = 0;
  double score = 0.0;  // mean squared prediction error over validation rows
  bool feasible = true;
  std::string note;
};

struct TuneResult {
  double lambda_star = 0.0;
  int n_star = 0;
  double best_score = 0.0;
  bool near_tie = false;  // runner-up within 1e-6 of the best score
  std::vector<TuneCell> table;
};

// Grid search over (lambda_star, n_star): screen on each training block,
// fit the restricted ridge estimator at lambda_star, score squared
// prediction error on the held-out rows.  Ties prefer smaller n_star,
// then smaller lambda_star.
TuneResult tune(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                std::span<const double> lambda_grid,
                std::span<const int> n_star_grid, const TuneScheme& scheme,
                const IterSpec& k_stage1,
                double rank_tol = kDefaultRankTol);

}  // namespace deridge
