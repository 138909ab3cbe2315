#include "deridge/montecarlo.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <thread>
#include <utility>

#include "checks.hpp"
#include "deridge/errors.hpp"
#include "deridge/rng.hpp"
#include "deridge/stats.hpp"

namespace deridge {
namespace {

// Reduction granularity.  Fixed so the merge order, and therefore every
// floating-point sum, is independent of the worker count.
constexpr int kBlockReps = 32;

// Rebuilds the response-dependent cache fields on top of a shared basis,
// following the same computation order as decompose() so a fit through
// this path is bitwise-identical to one through a fresh decomposition.
SpectralCache with_response(const SpectralCache& base, const Eigen::MatrixXd& x,
                            const Eigen::VectorXd& y) {
  SpectralCache c = base;
  c.xty = x.transpose() * y;
  c.proj_xty = c.row_basis.transpose() * c.xty;
  c.y_norm2 = y.squaredNorm();
  return c;
}

struct BlockAccum {
  std::vector<double> sq_err;
  std::vector<Eigen::VectorXd> beta_sum;
  std::vector<double> rss_over_n;
  std::vector<double> k_sum;
  std::vector<int> nonconverged;
  std::vector<double> ep_sum;
  std::vector<long> ci_hits;
  std::vector<long> pi_hits;

  BlockAccum() = default;
  BlockAccum(std::size_t n_est, Eigen::Index p)
      : sq_err(n_est, 0.0),
        beta_sum(n_est, Eigen::VectorXd::Zero(p)),
        rss_over_n(n_est, 0.0),
        k_sum(n_est, 0.0),
        nonconverged(n_est, 0),
        ep_sum(n_est, 0.0),
        ci_hits(n_est, 0),
        pi_hits(n_est, 0) {}
};

void validate_study(const Dgp& dgp, const std::vector<EstimatorSpec>& estimators,
                    const StudyConfig& config) {
  if (dgp.x.size() == 0 || dgp.beta_true.size() != dgp.p())
    throw usage_error("dgp design and coefficient sizes disagree");
  if (config.replications < 1)
    throw usage_error("replications must be positive");
  if (estimators.empty()) throw usage_error("no estimators configured");
  for (std::size_t i = 0; i < estimators.size(); ++i) {
    const auto& e = estimators[i];
    if (e.label.empty()) throw usage_error("estimator label must be nonempty");
    for (std::size_t j = 0; j < i; ++j)
      if (estimators[j].label == e.label)
        throw usage_error("duplicate estimator label '" + e.label + "'");
    check_lambda(e.lambda);
    if (e.screen) {
      check_lambda(e.screen->lambda_star);
      if (e.screen->k_stage1 < 0)
        throw usage_error("screening stage k must be nonnegative");
      if (e.screen->n_star < 1)
        throw usage_error("screening stage n_star must be positive");
    }
  }
  for (std::size_t i = 0; i < config.contrasts.size(); ++i) {
    const auto& c = config.contrasts[i];
    if (c.label.empty()) throw usage_error("contrast label must be nonempty");
    for (std::size_t j = 0; j < i; ++j)
      if (config.contrasts[j].label == c.label)
        throw usage_error("duplicate contrast label '" + c.label + "'");
    if (c.theta.size() != dgp.p())
      throw usage_error("contrast '" + c.label + "' has length " +
                        std::to_string(c.theta.size()) + ", expected " +
                        std::to_string(dgp.p()));
    bool found = false;
    for (const auto& e : estimators)
      if (e.label == c.estimator_label) found = true;
    if (!found)
      throw usage_error("contrast '" + c.label +
                        "' references unknown estimator '" +
                        c.estimator_label + "'");
  }
  if (config.coverage) {
    if (config.coverage->x0.cols() != dgp.p())
      throw usage_error("coverage points have " +
                        std::to_string(config.coverage->x0.cols()) +
                        " columns, expected " + std::to_string(dgp.p()));
    if (config.coverage->x0.rows() < 1)
      throw usage_error("coverage needs at least one evaluation point");
    check_level(config.coverage->level);
    if (dgp.noise.kind != CovarianceModel::Kind::homoskedastic)
      throw usage_error(
          "interval coverage is defined for homoskedastic noise only");
  }
}

std::string rep_context(int rep, const std::string& label) {
  return "replication " + std::to_string(rep) + ", estimator '" + label + "'";
}

}  // namespace

Dgp generate_example1(int p, int n, std::uint64_t seed) {
  if (p < 2 || p % 2 != 0)
    throw usage_error("orthonormal-design family needs even p >= 2");
  if (p >= n)
    throw usage_error("orthonormal-design family needs p < n; got p = " +
                      std::to_string(p) + ", n = " + std::to_string(n));

  Rng design(seed, 0);
  Eigen::MatrixXd h(n, p);
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < p; ++c) h(r, c) = design.uniform(-2.0, 2.0);
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(
      h, Eigen::ComputeThinU | Eigen::ComputeThinV);

  Dgp dgp;
  dgp.family = DgpFamily::example1;
  dgp.x = svd.matrixU() * svd.matrixV().transpose();
  dgp.seed = seed;
  dgp.noise = CovarianceModel::homoskedastic(1.0);
  dgp.design_rule =
      "left-by-right singular-vector product of an n x p U(-2,2) draw; "
      "X'X = I";
  dgp.beta_rule = "first p/2 from U(-2,-1), remaining p/2 from U(1,2)";

  Rng coef(seed, 1);
  dgp.beta_true.resize(p);
  for (int i = 0; i < p / 2; ++i) dgp.beta_true(i) = coef.uniform(-2.0, -1.0);
  for (int i = p / 2; i < p; ++i) dgp.beta_true(i) = coef.uniform(1.0, 2.0);
  return dgp;
}

Dgp generate_example2(int p, int n, std::uint64_t seed) {
  if (p <= n)
    throw usage_error("sparse overdetermined family needs p > n; got p = " +
                      std::to_string(p) + ", n = " + std::to_string(n));
  if (p < 10) throw usage_error("sparse family needs p >= 10");

  Rng design(seed, 0);
  Dgp dgp;
  dgp.family = DgpFamily::example2;
  dgp.x.resize(n, p);
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < p; ++c) dgp.x(r, c) = design.normal();
  dgp.seed = seed;
  dgp.noise = CovarianceModel::homoskedastic(1.0);
  dgp.design_rule = "rows i.i.d. N(0, I_p)";
  dgp.beta_rule =
      "coefficients 1-5 from U(-5,-2), 6-10 from U(2,5), remainder zero";

  Rng coef(seed, 1);
  dgp.beta_true = Eigen::VectorXd::Zero(p);
  for (int i = 0; i < 5; ++i) dgp.beta_true(i) = coef.uniform(-5.0, -2.0);
  for (int i = 5; i < 10; ++i) dgp.beta_true(i) = coef.uniform(2.0, 5.0);
  return dgp;
}

Dgp custom_dgp(Eigen::MatrixXd x, Eigen::VectorXd beta_true,
               CovarianceModel noise, std::uint64_t seed) {
  if (x.cols() != beta_true.size())
    throw usage_error("design columns and coefficient length disagree");
  Dgp dgp;
  dgp.family = DgpFamily::custom;
  dgp.x = std::move(x);
  dgp.beta_true = std::move(beta_true);
  dgp.noise = std::move(noise);
  dgp.seed = seed;
  dgp.design_rule = "caller-supplied";
  dgp.beta_rule = "caller-supplied";
  return dgp;
}

StudyResult run_study(const Dgp& dgp,
                      const std::vector<EstimatorSpec>& estimators,
                      const StudyConfig& config) {
  validate_study(dgp, estimators, config);

  const Eigen::Index n = dgp.n();
  const Eigen::Index p = dgp.p();
  const int reps = config.replications;
  const std::size_t n_est = estimators.size();
  const std::size_t n_con = config.contrasts.size();
  const Eigen::Index n_cov =
      config.coverage ? config.coverage->x0.rows() : 0;

  const SpectralCache base =
      decompose(dgp.x, Eigen::VectorXd::Zero(n));
  const Eigen::VectorXd x_beta = dgp.x * dgp.beta_true;
  const double sqrt_n = std::sqrt(static_cast<double>(n));

  // True support, for the screening-recovery metric.
  std::vector<int> support;
  for (Eigen::Index i = 0; i < p; ++i)
    if (dgp.beta_true(i) != 0.0) support.push_back(static_cast<int>(i));

  Eigen::VectorXd cov_truth(n_cov);
  if (config.coverage)
    cov_truth = config.coverage->x0 * dgp.beta_true;

  // Per-observation noise scales.
  Eigen::VectorXd noise_scale(n);
  if (dgp.noise.kind == CovarianceModel::Kind::homoskedastic) {
    noise_scale.setConstant(dgp.noise.sigma);
  } else {
    if (dgp.noise.variances.size() != n)
      throw usage_error("diagonal noise needs one variance per observation");
    noise_scale = dgp.noise.variances.array().max(0.0).sqrt();
  }

  const int nblocks = (reps + kBlockReps - 1) / kBlockReps;
  std::vector<BlockAccum> blocks(nblocks);
  std::vector<std::exception_ptr> block_err(nblocks);
  std::vector<Eigen::VectorXd> samples(n_con);
  for (auto& s : samples) s.resize(reps);

  std::atomic<int> next_block{0};
  std::atomic<bool> failed{false};

  auto run_block = [&](int b) {
    BlockAccum acc(n_est, p);
    const int lo = b * kBlockReps;
    const int hi = std::min(reps, lo + kBlockReps);
    Eigen::VectorXd y(n);
    for (int rep = lo; rep < hi; ++rep) {
      Rng rng(dgp.seed, 2 + static_cast<std::uint64_t>(rep));
      for (Eigen::Index i = 0; i < n; ++i)
        y(i) = x_beta(i) + noise_scale(i) * rng.normal();
      // Held-out responses for prediction coverage, drawn immediately
      // after the in-sample noise so the stream layout is fixed.
      Eigen::VectorXd held_out(n_cov);
      for (Eigen::Index j = 0; j < n_cov; ++j)
        held_out(j) = cov_truth(j) + dgp.noise.sigma * rng.normal();

      const SpectralCache cache = with_response(base, dgp.x, y);

      for (std::size_t e = 0; e < n_est; ++e) {
        const EstimatorSpec& spec = estimators[e];
        Eigen::VectorXd beta_hat;
        double rss_over_n = 0.0;
        double k_used = 0.0;
        bool converged = true;
        try {
          if (!spec.screen) {
            const DebiasedFit fit =
                debias(cache, RidgeConfig{spec.lambda, spec.iter});
            beta_hat = fit.beta;
            rss_over_n = fit.sigma_hat * fit.sigma_hat;
            k_used = fit.k_used;
            converged = fit.converged;
            if (config.coverage) {
              for (Eigen::Index j = 0; j < n_cov; ++j) {
                const Eigen::VectorXd x0 = config.coverage->x0.row(j);
                const auto ci = confidence_interval(fit, cache, x0,
                                                    config.coverage->level);
                if (ci.lower <= cov_truth(j) && cov_truth(j) <= ci.upper)
                  ++acc.ci_hits[e];
                const auto pi = prediction_interval(fit, cache, x0,
                                                    config.coverage->level);
                if (pi.lower <= held_out(j) && held_out(j) <= pi.upper)
                  ++acc.pi_hits[e];
              }
            }
          } else {
            const ScreeningSelection sel =
                screen(dgp.x, y, cache, spec.screen->lambda_star,
                       IterSpec::fixed(spec.screen->k_stage1),
                       spec.screen->n_star);
            const TwoStageFit fit =
                two_stage_fit(sel, spec.iter, spec.lambda);
            beta_hat = fit.beta_full;
            rss_over_n = fit.restricted.sigma_hat * fit.restricted.sigma_hat;
            k_used = fit.restricted.k_used;
            converged = fit.restricted.converged;
            if (!support.empty()) {
              int recovered = 0;
              for (int s : support)
                if (std::binary_search(sel.indices.begin(),
                                       sel.indices.end(), s))
                  ++recovered;
              acc.ep_sum[e] +=
                  static_cast<double>(recovered) / support.size();
            }
            if (config.coverage) {
              for (Eigen::Index j = 0; j < n_cov; ++j) {
                const Eigen::VectorXd x0 = config.coverage->x0.row(j);
                const auto ci =
                    confidence_interval(fit, x0, config.coverage->level);
                if (ci.lower <= cov_truth(j) && cov_truth(j) <= ci.upper)
                  ++acc.ci_hits[e];
                const auto pi =
                    prediction_interval(fit, x0, config.coverage->level);
                if (pi.lower <= held_out(j) && held_out(j) <= pi.upper)
                  ++acc.pi_hits[e];
              }
            }
          }
        } catch (const std::exception& why) {
          throw model_error(rep_context(rep, spec.label) + ": " + why.what());
        }
        if (!beta_hat.allFinite())
          throw model_error(rep_context(rep, spec.label) +
                            ": non-finite estimate");

        acc.sq_err[e] += (beta_hat - dgp.beta_true).squaredNorm();
        acc.beta_sum[e] += beta_hat;
        acc.rss_over_n[e] += rss_over_n;
        acc.k_sum[e] += k_used;
        if (!converged) ++acc.nonconverged[e];

        for (std::size_t c = 0; c < n_con; ++c) {
          if (config.contrasts[c].estimator_label != spec.label) continue;
          samples[c](rep) =
              sqrt_n * config.contrasts[c].theta.dot(beta_hat - dgp.beta_true);
        }
      }
    }
    blocks[b] = std::move(acc);
  };

  auto worker = [&] {
    for (;;) {
      const int b = next_block.fetch_add(1);
      if (b >= nblocks || failed.load()) return;
      try {
        run_block(b);
      } catch (...) {
        block_err[b] = std::current_exception();
        failed.store(true);
        return;
      }
    }
  };

  int threads = config.threads > 0
                    ? config.threads
                    : static_cast<int>(std::thread::hardware_concurrency());
  if (threads < 1) threads = 1;
  threads = std::min(threads, nblocks);

  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  for (int b = 0; b < nblocks; ++b)
    if (block_err[b]) std::rethrow_exception(block_err[b]);

  // Ordered merge: block by block, estimator by estimator.
  BlockAccum total(n_est, p);
  for (int b = 0; b < nblocks; ++b) {
    const BlockAccum& acc = blocks[b];
    for (std::size_t e = 0; e < n_est; ++e) {
      total.sq_err[e] += acc.sq_err[e];
      total.beta_sum[e] += acc.beta_sum[e];
      total.rss_over_n[e] += acc.rss_over_n[e];
      total.k_sum[e] += acc.k_sum[e];
      total.nonconverged[e] += acc.nonconverged[e];
      total.ep_sum[e] += acc.ep_sum[e];
      total.ci_hits[e] += acc.ci_hits[e];
      total.pi_hits[e] += acc.pi_hits[e];
    }
  }

  StudyResult out;
  out.replications = reps;
  out.seed = dgp.seed;
  out.estimators.reserve(n_est);
  const double r = reps;
  for (std::size_t e = 0; e < n_est; ++e) {
    EstimatorSummary s;
    s.label = estimators[e].label;
    s.mse = total.sq_err[e] / r;
    s.aee = (total.beta_sum[e] / r - dgp.beta_true).norm() /
            std::sqrt(static_cast<double>(p));
    s.sigma_hat = std::sqrt(total.rss_over_n[e] / r);
    s.mean_k_used = total.k_sum[e] / r;
    s.all_converged = total.nonconverged[e] == 0;
    if (estimators[e].screen && !support.empty())
      s.ep = total.ep_sum[e] / r;
    if (config.coverage) {
      const double cells = r * static_cast<double>(n_cov);
      s.ci_coverage = static_cast<double>(total.ci_hits[e]) / cells;
      s.pi_coverage = static_cast<double>(total.pi_hits[e]) / cells;
    }
    out.estimators.push_back(std::move(s));
  }

  out.contrasts.reserve(n_con);
  for (std::size_t c = 0; c < n_con; ++c) {
    const ContrastSpec& cs = config.contrasts[c];
    ContrastSamples rec;
    rec.label = cs.label;
    rec.estimator_label = cs.estimator_label;
    rec.samples = std::move(samples[c]);
    for (const auto& spec : estimators) {
      if (spec.label != cs.estimator_label) continue;
      if (!spec.screen && !spec.iter.automatic) {
        const Eigen::VectorXd bias =
            bias_oracle(base, dgp.beta_true, spec.lambda, spec.iter.k);
        rec.theory_mean = -sqrt_n * cs.theta.dot(bias);
        const Eigen::MatrixXd sigma_mat =
            covariance_debiased(base, spec.lambda, spec.iter.k, dgp.noise);
        const double var =
            static_cast<double>(n) * cs.theta.dot(sigma_mat * cs.theta);
        if (var > 0.0) {
          rec.theory_sd = std::sqrt(var);
          rec.has_theory = true;
        }
      }
    }
    out.contrasts.push_back(std::move(rec));
  }
  return out;
}

void emit_histogram_data(const StudyResult& result, const std::string& label,
                         std::ostream& out) {
  const ContrastSamples* rec = nullptr;
  for (const auto& c : result.contrasts)
    if (c.label == label) rec = &c;
  if (!rec) throw usage_error("unknown contrast label '" + label + "'");
  if (!rec->has_theory)
    throw usage_error("contrast '" + label +
                      "' has no recorded exact law (adaptive or screened "
                      "estimator)");

  std::vector<double> sorted(rec->samples.data(),
                             rec->samples.data() + rec->samples.size());
  std::sort(sorted.begin(), sorted.end());

  out << "sample,density\n";
  char buf[80];
  for (double v : sorted) {
    const double dens = normal_pdf(v, rec->theory_mean, rec->theory_sd);
    std::snprintf(buf, sizeof(buf), "%.17g,%.17g\n", v, dens);
    out << buf;
  }
}

}  // namespace deridge
