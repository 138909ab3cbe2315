#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "deridge/inference.hpp"
#include "deridge/screening.hpp"
#include "deridge/spectral.hpp"

namespace deridge {

// A fixed-design study: the design matrix and true coefficients are drawn
// once from the study seed and then held fixed; only the noise is redrawn
// per replication.
//
// Stream assignment is part of the determinism contract:
//   stream 0            design matrix entries, row-major
//   stream 1            true-coefficient entries, in index order
//   stream 2 + r        replication r: n noise draws, then one held-out
//                       noise draw per coverage point, in row order
enum class DgpFamily { example1, example2, custom };

struct Dgp {
  DgpFamily family = DgpFamily::custom;
  Eigen::MatrixXd x;
  Eigen::VectorXd beta_true;
  CovarianceModel noise = CovarianceModel::homoskedastic(1.0);
  std::uint64_t seed = 0;
  std::string design_rule;
  std::string beta_rule;

  Eigen::Index n() const { return x.rows(); }
  Eigen::Index p() const { return x.cols(); }
};

// Orthonormal-design family: the design is the product of the left and
// right singular vectors of an n x p matrix with U(-2,2) entries, so
// X'X = I_p exactly.  Coefficients: first p/2 from U(-2,-1), rest from
// U(1,2).  Requires p even and p < n.
Dgp generate_example1(int p, int n, std::uint64_t seed);

// Overdetermined sparse family: rows of X i.i.d. N(0, I_p); first five
// coefficients from U(-5,-2), next five from U(2,5), remainder zero.
// Requires p > n and p >= 10.
Dgp generate_example2(int p, int n, std::uint64_t seed);

Dgp custom_dgp(Eigen::MatrixXd x, Eigen::VectorXd beta_true,
               CovarianceModel noise, std::uint64_t seed);

// Optional screening stage ahead of the final correction; mirrors the
// two-stage fit: rank at (lambda_star, k_stage1), keep n_star columns,
// then run the estimator's own (lambda, iter) on the restriction.
struct ScreenStage {
  double lambda_star = 0.0;
  int k_stage1 = 0;
  int n_star = 0;
};

struct EstimatorSpec {
  std::string label;
  double lambda = 1.0;
  IterSpec iter;
  std::optional<ScreenStage> screen;

  static EstimatorSpec ridge(std::string label, double lambda) {
    return {std::move(label), lambda, IterSpec::fixed(0), {}};
  }
  static EstimatorSpec debiased(std::string label, double lambda, int k) {
    return {std::move(label), lambda, IterSpec::fixed(k), {}};
  }
};

// One histogram series: sqrt(n) * theta'(beta_hat - beta) recorded every
// replication for the named estimator.
struct ContrastSpec {
  std::string label;
  std::string estimator_label;
  Eigen::VectorXd theta;
};

// Interval coverage check: each row of x0 is an evaluation point; CI
// coverage is measured against x0'beta, PI coverage against a fresh
// held-out response drawn at x0.
struct CoverageSpec {
  Eigen::MatrixXd x0;
  double level = 0.95;
};

struct StudyConfig {
  int replications = 1000;
  int threads = 0;  // 0 = hardware concurrency
  std::vector<ContrastSpec> contrasts;
  std::optional<CoverageSpec> coverage;
};

struct EstimatorSummary {
  std::string label;
  double mse = 0.0;        // mean ||beta_hat - beta||^2
  double aee = 0.0;        // ||mean(beta_hat) - beta|| / sqrt(p)
  double sigma_hat = 0.0;  // pooled: sqrt(mean of ||y - X beta_hat||^2 / n)
  double mean_k_used = 0.0;
  bool all_converged = true;
  std::optional<double> ep;           // screened estimators only
  std::optional<double> ci_coverage;  // when coverage was requested
  std::optional<double> pi_coverage;
};

// Samples plus the exact normal law they should follow when the estimator
// has a fixed correction depth (mean = -sqrt(n) theta' bias, sd from the
// finite-k sampling covariance at the true noise scale).  Adaptive-depth
// and screened estimators record samples only.
struct ContrastSamples {
  std::string label;
  std::string estimator_label;
  Eigen::VectorXd samples;
  bool has_theory = false;
  double theory_mean = 0.0;
  double theory_sd = 1.0;
};

struct StudyResult {
  std::vector<EstimatorSummary> estimators;
  std::vector<ContrastSamples> contrasts;
  int replications = 0;
  std::uint64_t seed = 0;
};

// Runs the replication loop.  Deterministic for a given (dgp, estimators,
// config) regardless of thread count: replications are reduced in fixed
// 32-replication blocks merged in index order, and every replication draws
// from its own substream.  A non-finite estimate or a failed fit aborts
// with the offending replication and estimator label.
StudyResult run_study(const Dgp& dgp,
                      const std::vector<EstimatorSpec>& estimators,
                      const StudyConfig& config);

// Two-column CSV (sample,density): the recorded draws in ascending order,
// each paired with the exact normal density at that value.  Errors if the
// label is unknown or the series has no recorded law.
void emit_histogram_data(const StudyResult& result, const std::string& label,
                         std::ostream& out);

}  // namespace deridge
