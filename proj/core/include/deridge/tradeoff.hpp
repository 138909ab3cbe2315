#pragma once

#include <Eigen/Dense>
#include <optional>
#include <utility>
#include <vector>

#include "deridge/spectral.hpp"

namespace deridge {

enum class MseRegime { decreasing, interior_minimum, increasing };

// Exact MSE decomposition of the corrected estimator over a grid of
// correction depths:
//   bias_sq(k) = sum_i delta_i^2 r_i^{2(k+1)}
//   variance(k) = sigma^2 sum_i (1 - r_i^{k+1})^2 / d_i^2
// with delta the projection of the true coefficients onto the row basis.
// The scan is the authority on the optimal k; `heuristic_k_window` is the
// closed-form [floor(k1), floor(k2)] bracket, reported for diagnosis only
// because its derivation misbehaves near the regime boundary.
struct MseDecomposition {
  std::vector<int> ks;
  Eigen::VectorXd bias_sq;
  Eigen::VectorXd variance;
  Eigen::VectorXd total;
  int argmin_k = 0;
  MseRegime regime = MseRegime::increasing;
  bool extended = false;   // scan grew past the requested k_max
  int requested_k_max = 0;
  std::optional<std::pair<double, double>> heuristic_k_window;
};

// Requires a full-rank p < n design (the decomposition needs every
// coordinate identifiable).  If the total is still falling at k_max the
// grid doubles until the minimum is interior, capping at k = 5000.
MseDecomposition mse_curve(const SpectralCache& cache,
                           const Eigen::VectorXd& beta_true, double lambda,
                           double sigma, int k_max = 200);

// Same decomposition on the fixed grid 0..k_max (no extension), plus the
// per-direction signal ratios delta_i^2 d_i^2 / sigma^2 driving the shape.
struct RegimeReport {
  MseRegime regime = MseRegime::increasing;
  int argmin_k = 0;
  Eigen::VectorXd ratios;
  std::optional<std::pair<double, double>> heuristic_k_window;
};

RegimeReport regime_classify(const SpectralCache& cache,
                             const Eigen::VectorXd& beta_true, double lambda,
                             double sigma, int k_max = 200);

}  // namespace deridge
