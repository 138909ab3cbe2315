// Command line front end.  Every subcommand reads CSV inputs, writes its
// result file(s), and drops a manifest with the fully resolved parameters
// next to the primary output, so a run is reproducible from the manifest
// alone.  Exit codes: 0 ok, 1 numeric/model failure, 2 usage or I/O.

#include <CLI11.hpp>
#include <Eigen/Dense>
#include <cctype>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "deridge/dataset.hpp"
#include "deridge/errors.hpp"
#include "deridge/forecast.hpp"
#include "deridge/inference.hpp"
#include "deridge/montecarlo.hpp"
#include "deridge/screening.hpp"
#include "deridge/spectral.hpp"
#include "deridge/tradeoff.hpp"
#include "deridge/version.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace deridge;

namespace {

// ---------------------------------------------------------------- parsing

std::string trimmed(const std::string& s) {
  auto b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return "";
  auto e = s.find_last_not_of(" \t");
  return s.substr(b, e - b + 1);
}

double parse_double(const std::string& raw, const std::string& what) {
  const std::string s = trimmed(raw);
  if (s.empty()) throw usage_error(what + ": empty value");
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end != s.c_str() + s.size())
    throw usage_error(what + ": cannot parse '" + raw + "'");
  return v;
}

int parse_int(const std::string& raw, const std::string& what) {
  const std::string s = trimmed(raw);
  if (s.empty()) throw usage_error(what + ": empty value");
  std::size_t pos = 0;
  int v = 0;
  try {
    v = std::stoi(s, &pos);
  } catch (...) {
    throw usage_error(what + ": cannot parse '" + raw + "'");
  }
  if (pos != s.size()) throw usage_error(what + ": cannot parse '" + raw + "'");
  return v;
}

// "0.3n" is a multiple of the sample size; anything else is an absolute
// penalty value.
LambdaRule parse_lambda_rule(const std::string& raw) {
  std::string s = trimmed(raw);
  if (s.empty()) throw usage_error("lambda: empty value");
  bool relative = false;
  if (s.back() == 'n' || s.back() == 'N') {
    relative = true;
    s.pop_back();
    if (s.empty()) s = "1";
  }
  const double v = parse_double(s, "lambda");
  return relative ? LambdaRule::times_n(v) : LambdaRule::absolute(v);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string item;
  std::stringstream ss(s);
  while (std::getline(ss, item, ',')) out.push_back(item);
  return out;
}

std::vector<LambdaRule> parse_rule_list(const std::string& s) {
  std::vector<LambdaRule> out;
  for (const auto& item : split_list(s)) out.push_back(parse_lambda_rule(item));
  if (out.empty()) throw usage_error("lambda grid: empty list");
  return out;
}

std::vector<int> parse_int_list(const std::string& s, const std::string& what) {
  std::vector<int> out;
  for (const auto& item : split_list(s)) out.push_back(parse_int(item, what));
  if (out.empty()) throw usage_error(what + ": empty list");
  return out;
}

// Column flag: digits select by zero-based position, anything else by
// header name.
ColumnRef parse_column(const std::string& s) {
  const std::string t = trimmed(s);
  if (t.empty()) throw usage_error("column reference must be nonempty");
  bool digits = true;
  for (char c : t)
    if (!std::isdigit(static_cast<unsigned char>(c))) digits = false;
  if (digits) return ColumnRef{parse_int(t, "column index")};
  if (t[0] == '-')
    throw usage_error("column index must be nonnegative: '" + s + "'");
  return ColumnRef{t};
}

IterSpec parse_iter(const std::string& k, double eta, int max_iter) {
  if (!(eta > 0.0)) throw usage_error("eta must be positive");
  if (max_iter < 1) throw usage_error("max-iter must be positive");
  if (trimmed(k) == "auto") return IterSpec::stop_rule(eta, max_iter);
  const int fixed = parse_int(k, "k");
  if (fixed < 0) throw usage_error("k must be nonnegative or 'auto'");
  return IterSpec::fixed(fixed);
}

// ---------------------------------------------------------------- output

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void write_text(const fs::path& p, const std::string& content) {
  if (p.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(p.parent_path(), ec);
  }
  std::ofstream out(p, std::ios::binary);
  if (!out) throw io_error("cannot write " + p.string());
  out << content;
  out.close();
  if (!out) throw io_error("write failed for " + p.string());
}

fs::path sibling(const fs::path& primary, const std::string& suffix) {
  fs::path p = primary;
  p.replace_filename(primary.stem().string() + suffix);
  return p;
}

void write_manifest(const fs::path& primary, const std::string& command,
                    json parameters, json inputs,
                    std::vector<std::string> outputs) {
  json m;
  m["artifact_version"] = kVersion;
  m["command"] = command;
  m["parameters"] = std::move(parameters);
  m["inputs"] = std::move(inputs);
  m["outputs"] = std::move(outputs);
  write_text(sibling(primary, ".manifest.json"), m.dump(2) + "\n");
}

json vector_json(const Eigen::VectorXd& v) {
  json arr = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v(i));
  return arr;
}

json fit_json(const DebiasedFit& fit, const Eigen::VectorXd& beta) {
  json j;
  j["lambda"] = fit.lambda;
  j["k_used"] = fit.k_used;
  j["converged"] = fit.converged;
  j["beta"] = vector_json(beta);
  j["sigma_hat"] = fit.sigma_hat;
  j["rank"] = fit.rank;
  return j;
}

const char* kind_name(IntervalEstimate::Kind k) {
  return k == IntervalEstimate::Kind::confidence ? "ci" : "pi";
}

struct IntervalRow {
  int x0_id;
  IntervalEstimate est;
};

std::string intervals_csv(const std::vector<IntervalRow>& rows) {
  std::string out = "x0_id,point,se,lower,upper,level,kind\n";
  for (const auto& r : rows) {
    out += std::to_string(r.x0_id) + ',' + num(r.est.point) + ',' +
           num(r.est.se) + ',' + num(r.est.lower) + ',' + num(r.est.upper) +
           ',' + num(r.est.level) + ',' + kind_name(r.est.kind) + '\n';
  }
  return out;
}

json intervals_json(const std::vector<IntervalRow>& rows) {
  json arr = json::array();
  for (const auto& r : rows) {
    json j;
    j["x0_id"] = r.x0_id;
    j["point"] = r.est.point;
    j["se"] = r.est.se;
    j["lower"] = r.est.lower;
    j["upper"] = r.est.upper;
    j["level"] = r.est.level;
    j["kind"] = kind_name(r.est.kind);
    arr.push_back(std::move(j));
  }
  return arr;
}

std::string sanitize_label(const std::string& label) {
  std::string out;
  for (char c : label)
    out += (std::isalnum(static_cast<unsigned char>(c)) || c == '-' ||
            c == '_')
               ? c
               : '_';
  return out;
}

// ------------------------------------------------------------- common args

struct IoArgs {
  std::string input;
  std::string output;
  std::string response = "0";
  bool no_header = false;
  double rank_tol = kDefaultRankTol;
};

void add_io_flags(CLI::App* cmd, IoArgs& a, const std::string& default_out) {
  a.output = default_out;
  cmd->add_option("--input", a.input, "input CSV (response plus covariates)")
      ->required();
  cmd->add_option("--output,-o", a.output, "primary output path");
  cmd->add_option("--response", a.response,
                  "response column: zero-based index or header name");
  cmd->add_flag("--no-header", a.no_header, "input has no header row");
  cmd->add_option("--rank-tol", a.rank_tol,
                  "relative singular value cutoff");
}

Dataset load_centered(const IoArgs& a) {
  return center(load_csv(a.input, !a.no_header, parse_column(a.response)));
}

int resolve_threads(int flag) {
  if (flag > 0) return flag;
  if (const char* env = std::getenv("DERIDGE_THREADS")) {
    const int v = std::atoi(env);
    if (v > 0) return v;
  }
  return 0;
}

// --------------------------------------------------------------- fit/debias

struct FitArgs {
  IoArgs io;
  std::string lambda;
  std::string k = "auto";
  double eta = 1e-2;
  int max_iter = 10000;
};

void run_fit(const FitArgs& a, const std::string& command) {
  const Dataset data = load_centered(a.io);
  const SpectralCache cache = decompose(data, a.io.rank_tol);
  const LambdaRule rule = parse_lambda_rule(a.lambda);
  const double lambda = rule.resolve(data.rows());
  const IterSpec iter = command == "fit" ? IterSpec::fixed(0)
                                         : parse_iter(a.k, a.eta, a.max_iter);
  const DebiasedFit fit = debias(cache, RidgeConfig{lambda, iter});

  json out = fit_json(fit, fit.beta);
  if (!data.column_names.empty()) out["column_names"] = data.column_names;
  write_text(a.io.output, out.dump(2) + "\n");

  json params;
  params["lambda"] = lambda;
  params["lambda_rule"] = a.lambda;
  params["k"] = command == "fit" ? "0" : a.k;
  params["eta"] = a.eta;
  params["max_iter"] = a.max_iter;
  params["response"] = a.io.response;
  params["has_header"] = !a.io.no_header;
  params["rank_tol"] = a.io.rank_tol;
  params["centered"] = true;
  write_manifest(a.io.output, command, params, json{{"input", a.io.input}},
                 {a.io.output});
}

// -------------------------------------------------------------------- infer

struct InferArgs {
  IoArgs io;
  std::string lambda;
  std::string k = "auto";
  double eta = 1e-2;
  int max_iter = 10000;
  std::string x0;
  double level = 0.95;
  std::string kind = "both";
  std::string contrasts;
  double null_value = 0.0;
  std::string format = "csv";
};

void run_infer(const InferArgs& a) {
  if (a.kind != "both" && a.kind != "ci" && a.kind != "pi")
    throw usage_error("kind must be ci, pi, or both");
  if (a.format != "csv" && a.format != "json")
    throw usage_error("format must be csv or json");

  const Dataset data = load_centered(a.io);
  const SpectralCache cache = decompose(data, a.io.rank_tol);
  const double lambda = parse_lambda_rule(a.lambda).resolve(data.rows());
  const DebiasedFit fit =
      debias(cache, RidgeConfig{lambda, parse_iter(a.k, a.eta, a.max_iter)});

  const Eigen::MatrixXd x0 = load_matrix_csv(a.x0, false).values;
  if (x0.cols() != data.cols())
    throw usage_error("x0 file has " + std::to_string(x0.cols()) +
                      " columns, design has " + std::to_string(data.cols()));

  // Points arrive on the original scale; the fit lives on centered data.
  std::vector<IntervalRow> rows;
  for (Eigen::Index i = 0; i < x0.rows(); ++i) {
    const Eigen::VectorXd x0c = x0.row(i).transpose() - data.x_means.transpose();
    auto shift = [&](IntervalEstimate est) {
      est.point += data.y_mean;
      est.lower += data.y_mean;
      est.upper += data.y_mean;
      return est;
    };
    if (a.kind != "pi")
      rows.push_back({static_cast<int>(i),
                      shift(confidence_interval(fit, cache, x0c, a.level))});
    if (a.kind != "ci")
      rows.push_back({static_cast<int>(i),
                      shift(prediction_interval(fit, cache, x0c, a.level))});
  }

  std::vector<std::string> outputs{a.io.output};
  if (a.format == "csv")
    write_text(a.io.output, intervals_csv(rows));
  else
    write_text(a.io.output, intervals_json(rows).dump(2) + "\n");

  if (!a.contrasts.empty()) {
    const Eigen::MatrixXd thetas = load_matrix_csv(a.contrasts, false).values;
    if (thetas.cols() != data.cols())
      throw usage_error("contrast file has " + std::to_string(thetas.cols()) +
                        " columns, design has " + std::to_string(data.cols()));
    const fs::path cpath = sibling(a.io.output, "_contrasts." + a.format);
    if (a.format == "csv") {
      std::string body = "contrast_id,estimate,se,z,p_value\n";
      for (Eigen::Index i = 0; i < thetas.rows(); ++i) {
        const ContrastResult res = contrast_test(
            fit, cache, thetas.row(i).transpose(), a.null_value);
        body += std::to_string(i) + ',' + num(res.estimate) + ',' +
                num(res.se) + ',' + num(res.z) + ',' + num(res.p_value) + '\n';
      }
      write_text(cpath, body);
    } else {
      json arr = json::array();
      for (Eigen::Index i = 0; i < thetas.rows(); ++i) {
        const ContrastResult res = contrast_test(
            fit, cache, thetas.row(i).transpose(), a.null_value);
        json j;
        j["contrast_id"] = static_cast<int>(i);
        j["estimate"] = res.estimate;
        j["se"] = res.se;
        j["z"] = res.z;
        j["p_value"] = res.p_value;
        arr.push_back(std::move(j));
      }
      write_text(cpath, arr.dump(2) + "\n");
    }
    outputs.push_back(cpath.string());
  }

  json params;
  params["lambda"] = lambda;
  params["lambda_rule"] = a.lambda;
  params["k"] = a.k;
  params["eta"] = a.eta;
  params["max_iter"] = a.max_iter;
  params["level"] = a.level;
  params["kind"] = a.kind;
  params["null"] = a.null_value;
  params["format"] = a.format;
  params["response"] = a.io.response;
  params["has_header"] = !a.io.no_header;
  params["rank_tol"] = a.io.rank_tol;
  json inputs{{"input", a.io.input}, {"x0", a.x0}};
  if (!a.contrasts.empty()) inputs["contrasts"] = a.contrasts;
  write_manifest(a.io.output, "infer", params, inputs, outputs);
}

// ------------------------------------------------------------------- screen

struct ScreenArgs {
  IoArgs io;
  std::string lambda_star;
  int n_star = 0;
  std::string k = "100";  // stage 1
  std::string l = "100";  // stage 2
  std::string lambda2;
  double eta = 1e-2;
  int max_iter = 10000;
  bool tune_mode = false;
  std::string lambda_grid;
  std::string n_star_grid;
  int folds = 5;
  double holdout = 0.0;
  std::string x0;
  double level = 0.95;
  std::string format = "csv";
};

void run_screen(const ScreenArgs& a) {
  if (a.format != "csv" && a.format != "json")
    throw usage_error("format must be csv or json");
  const Dataset data = load_centered(a.io);
  const SpectralCache cache = decompose(data, a.io.rank_tol);
  const IterSpec stage1 = parse_iter(a.k, a.eta, a.max_iter);

  double lambda_star = 0.0;
  int n_star = 0;
  std::optional<TuneResult> tuned;
  if (a.tune_mode) {
    if (a.lambda_grid.empty() || a.n_star_grid.empty())
      throw usage_error("--tune needs --lambda-grid and --n-star-grid");
    std::vector<double> lambdas;
    for (const auto& r : parse_rule_list(a.lambda_grid))
      lambdas.push_back(r.resolve(data.rows()));
    const std::vector<int> n_stars = parse_int_list(a.n_star_grid, "n-star");
    const TuneScheme scheme = a.holdout > 0.0 ? TuneScheme::holdout(a.holdout)
                                              : TuneScheme::kfold(a.folds);
    tuned = tune(data.x, data.y, lambdas, n_stars, scheme, stage1,
                 a.io.rank_tol);
    lambda_star = tuned->lambda_star;
    n_star = tuned->n_star;
  } else {
    if (a.lambda_star.empty() || a.n_star <= 0)
      throw usage_error("need --lambda-star and --n-star (or --tune)");
    lambda_star = parse_lambda_rule(a.lambda_star).resolve(data.rows());
    n_star = a.n_star;
  }

  const ScreeningSelection sel =
      screen(data.x, data.y, cache, lambda_star, stage1, n_star,
             a.io.rank_tol);
  const double lambda2 = a.lambda2.empty()
                             ? lambda_star
                             : parse_lambda_rule(a.lambda2).resolve(
                                   data.rows());
  const TwoStageFit fit =
      two_stage_fit(sel, parse_iter(a.l, a.eta, a.max_iter), lambda2);

  json out;
  out["selection"]["lambda_star"] = sel.lambda_star;
  out["selection"]["n_star"] = sel.n_star;
  out["selection"]["k_stage1"] = sel.k_stage1;
  out["selection"]["indices"] = sel.indices;  // zero-based column positions
  out["selection"]["large_n_star_warning"] = sel.large_n_star_warning;
  if (!data.column_names.empty()) {
    std::vector<std::string> names;
    for (int idx : sel.indices) names.push_back(data.column_names[idx]);
    out["selection"]["column_names"] = names;
  }
  out["fit"] = fit_json(fit.restricted, fit.beta_full);
  if (tuned) {
    json t;
    t["lambda_star"] = tuned->lambda_star;
    t["n_star"] = tuned->n_star;
    t["best_score"] = tuned->best_score;
    t["near_tie"] = tuned->near_tie;
    out["tune"] = std::move(t);
  }
  write_text(a.io.output, out.dump(2) + "\n");
  std::vector<std::string> outputs{a.io.output};

  std::vector<std::string> warnings;
  if (sel.large_n_star_warning)
    warnings.push_back(
        "n_star is at least the sample size; interval inference disabled");

  if (!a.x0.empty() && !sel.large_n_star_warning) {
    const Eigen::MatrixXd x0 = load_matrix_csv(a.x0, false).values;
    if (x0.cols() != data.cols())
      throw usage_error("x0 file has " + std::to_string(x0.cols()) +
                        " columns, design has " +
                        std::to_string(data.cols()));
    std::vector<IntervalRow> rows;
    for (Eigen::Index i = 0; i < x0.rows(); ++i) {
      const Eigen::VectorXd x0c =
          x0.row(i).transpose() - data.x_means.transpose();
      auto shift = [&](IntervalEstimate est) {
        est.point += data.y_mean;
        est.lower += data.y_mean;
        est.upper += data.y_mean;
        return est;
      };
      rows.push_back(
          {static_cast<int>(i), shift(confidence_interval(fit, x0c, a.level))});
      rows.push_back(
          {static_cast<int>(i), shift(prediction_interval(fit, x0c, a.level))});
    }
    const fs::path ipath = sibling(a.io.output, "_intervals." + a.format);
    if (a.format == "csv")
      write_text(ipath, intervals_csv(rows));
    else
      write_text(ipath, intervals_json(rows).dump(2) + "\n");
    outputs.push_back(ipath.string());
  }

  json params;
  params["lambda_star"] = lambda_star;
  if (!a.lambda_star.empty()) params["lambda_star_rule"] = a.lambda_star;
  params["n_star"] = n_star;
  params["k"] = a.k;
  params["l"] = a.l;
  params["lambda_stage2"] = lambda2;
  params["eta"] = a.eta;
  params["max_iter"] = a.max_iter;
  params["level"] = a.level;
  params["format"] = a.format;
  params["response"] = a.io.response;
  params["has_header"] = !a.io.no_header;
  params["rank_tol"] = a.io.rank_tol;
  params["tune"] = a.tune_mode;
  if (a.tune_mode) {
    params["lambda_grid"] = a.lambda_grid;
    params["n_star_grid"] = a.n_star_grid;
    if (a.holdout > 0.0)
      params["holdout"] = a.holdout;
    else
      params["folds"] = a.folds;
  }
  if (!warnings.empty()) params["warnings"] = warnings;
  json inputs{{"input", a.io.input}};
  if (!a.x0.empty()) inputs["x0"] = a.x0;
  write_manifest(a.io.output, "screen", params, inputs, outputs);
}

// ----------------------------------------------------------------- tradeoff

struct TradeoffArgs {
  IoArgs io;
  std::string beta;
  double sigma = -1.0;
  std::string lambda;
  int k_max = 200;
  std::string format = "csv";
};

void run_tradeoff(const TradeoffArgs& a) {
  if (a.format != "csv" && a.format != "json")
    throw usage_error("format must be csv or json");
  const Dataset data = load_centered(a.io);
  const SpectralCache cache = decompose(data, a.io.rank_tol);
  const double lambda = parse_lambda_rule(a.lambda).resolve(data.rows());

  Eigen::MatrixXd braw = load_matrix_csv(a.beta, false).values;
  if (braw.cols() != 1 && braw.rows() == 1) braw = braw.transpose().eval();
  if (braw.cols() != 1)
    throw usage_error("beta file must hold a single column");
  const Eigen::VectorXd beta_true = braw.col(0);

  const MseDecomposition dec =
      mse_curve(cache, beta_true, lambda, a.sigma, a.k_max);
  const RegimeReport fixed_grid =
      regime_classify(cache, beta_true, lambda, a.sigma, a.k_max);

  auto regime_name = [](MseRegime r) {
    switch (r) {
      case MseRegime::decreasing: return "decreasing";
      case MseRegime::interior_minimum: return "interior_minimum";
      default: return "increasing";
    }
  };

  json summary;
  summary["argmin_k"] = dec.argmin_k;
  summary["regime"] = regime_name(dec.regime);
  summary["extended"] = dec.extended;
  summary["requested_k_max"] = dec.requested_k_max;
  summary["fixed_grid_argmin_k"] = fixed_grid.argmin_k;
  summary["fixed_grid_regime"] = regime_name(fixed_grid.regime);
  if (dec.heuristic_k_window) {
    summary["heuristic_k_window"] = {dec.heuristic_k_window->first,
                                     dec.heuristic_k_window->second};
  }

  std::vector<std::string> outputs{a.io.output};
  if (a.format == "csv") {
    std::string body = "k,bias_sq,variance,total\n";
    for (std::size_t i = 0; i < dec.ks.size(); ++i)
      body += std::to_string(dec.ks[i]) + ',' + num(dec.bias_sq(i)) + ',' +
              num(dec.variance(i)) + ',' + num(dec.total(i)) + '\n';
    write_text(a.io.output, body);
    const fs::path spath = sibling(a.io.output, "_summary.json");
    write_text(spath, summary.dump(2) + "\n");
    outputs.push_back(spath.string());
  } else {
    json out = summary;
    out["ks"] = dec.ks;
    out["bias_sq"] = vector_json(dec.bias_sq);
    out["variance"] = vector_json(dec.variance);
    out["total"] = vector_json(dec.total);
    write_text(a.io.output, out.dump(2) + "\n");
  }

  json params;
  params["lambda"] = lambda;
  params["lambda_rule"] = a.lambda;
  params["sigma"] = a.sigma;
  params["k_max"] = a.k_max;
  params["format"] = a.format;
  params["response"] = a.io.response;
  params["has_header"] = !a.io.no_header;
  params["rank_tol"] = a.io.rank_tol;
  write_manifest(a.io.output, "tradeoff", params,
                 json{{"input", a.io.input}, {"beta", a.beta}}, outputs);
}

// ----------------------------------------------------------------- simulate

const json& require_key(const json& j, const std::string& key,
                        const std::string& where) {
  auto it = j.find(key);
  if (it == j.end())
    throw usage_error("config: missing '" + key + "' in " + where);
  return *it;
}

LambdaRule rule_from_json(const json& j, const std::string& where) {
  if (j.is_number()) return LambdaRule::absolute(j.get<double>());
  if (j.is_string()) return parse_lambda_rule(j.get<std::string>());
  throw usage_error("config: " + where +
                    " must be a number or a rule string like '0.1n'");
}

IterSpec iter_from_json(const json& spec, const std::string& where) {
  const double eta = spec.value("eta", 1e-2);
  const int max_iter = spec.value("max_iter", 10000);
  if (!spec.contains("k")) return IterSpec::stop_rule(eta, max_iter);
  const json& k = spec.at("k");
  if (k.is_string()) {
    if (k.get<std::string>() != "auto")
      throw usage_error("config: " + where + ".k must be an integer or 'auto'");
    return IterSpec::stop_rule(eta, max_iter);
  }
  if (!k.is_number_integer())
    throw usage_error("config: " + where + ".k must be an integer or 'auto'");
  return IterSpec::fixed(k.get<int>());
}

Eigen::VectorXd theta_from_json(const json& c, Eigen::Index p,
                                const std::string& where) {
  if (c.contains("theta")) {
    const json& arr = c.at("theta");
    if (!arr.is_array() || static_cast<Eigen::Index>(arr.size()) != p)
      throw usage_error("config: " + where + ".theta must be an array of " +
                        std::to_string(p) + " numbers");
    Eigen::VectorXd theta(p);
    for (Eigen::Index i = 0; i < p; ++i) theta(i) = arr[i].get<double>();
    return theta;
  }
  if (c.contains("theta_sparse")) {
    Eigen::VectorXd theta = Eigen::VectorXd::Zero(p);
    for (const auto& [key, val] : c.at("theta_sparse").items()) {
      const int idx = parse_int(key, where + ".theta_sparse index");
      if (idx < 0 || idx >= p)
        throw usage_error("config: " + where + ".theta_sparse index " + key +
                          " out of range");
      theta(idx) = val.get<double>();
    }
    return theta;
  }
  throw usage_error("config: " + where + " needs theta or theta_sparse");
}

struct SimulateArgs {
  std::string config;
  std::string output = "study.json";
  int threads = 0;
  std::vector<std::string> histograms;
};

void run_simulate(const SimulateArgs& a) {
  std::ifstream in(a.config);
  if (!in) throw io_error("cannot open file: " + a.config);
  json cfg;
  try {
    cfg = json::parse(in);
  } catch (const json::parse_error& e) {
    throw io_error("config: " + std::string(e.what()));
  }

  const std::string family =
      require_key(cfg, "family", "config").get<std::string>();
  const auto seed = cfg.value("seed", std::uint64_t{1234});

  Dgp dgp;
  if (family == "example1" || family == "example2") {
    const int p = require_key(cfg, "p", "config").get<int>();
    const int n = require_key(cfg, "n", "config").get<int>();
    dgp = family == "example1" ? generate_example1(p, n, seed)
                               : generate_example2(p, n, seed);
  } else if (family == "custom") {
    const std::string design =
        require_key(cfg, "design", "config").get<std::string>();
    const std::string beta =
        require_key(cfg, "beta", "config").get<std::string>();
    Eigen::MatrixXd braw = load_matrix_csv(beta, false).values;
    if (braw.cols() != 1 && braw.rows() == 1) braw = braw.transpose().eval();
    if (braw.cols() != 1)
      throw usage_error("config: beta file must hold a single column");
    const double sigma = require_key(cfg, "sigma", "config").get<double>();
    if (!(sigma >= 0.0)) throw usage_error("config: sigma must be >= 0");
    dgp = custom_dgp(load_matrix_csv(design, false).values, braw.col(0),
                     CovarianceModel::homoskedastic(sigma), seed);
  } else {
    throw usage_error("config: unknown family '" + family + "'");
  }

  const json& est_arr = require_key(cfg, "estimators", "config");
  if (!est_arr.is_array() || est_arr.empty())
    throw usage_error("config: estimators must be a nonempty array");

  std::vector<EstimatorSpec> estimators;
  for (const auto& e : est_arr) {
    EstimatorSpec spec;
    spec.label = require_key(e, "label", "estimator").get<std::string>();
    spec.lambda = rule_from_json(require_key(e, "lambda", spec.label),
                                 spec.label + ".lambda")
                      .resolve(dgp.n());
    spec.iter = iter_from_json(e, spec.label);
    if (e.contains("screen")) {
      const json& s = e.at("screen");
      ScreenStage stage;
      stage.lambda_star =
          rule_from_json(require_key(s, "lambda_star", spec.label + ".screen"),
                         spec.label + ".screen.lambda_star")
              .resolve(dgp.n());
      stage.k_stage1 = s.value("k", 100);
      stage.n_star =
          require_key(s, "n_star", spec.label + ".screen").get<int>();
      spec.screen = stage;
    }
    estimators.push_back(std::move(spec));
  }

  StudyConfig sc;
  sc.replications = cfg.value("replications", 1000);
  sc.threads = resolve_threads(a.threads);
  if (cfg.contains("contrasts")) {
    for (const auto& c : cfg.at("contrasts")) {
      ContrastSpec cs;
      cs.label = require_key(c, "label", "contrast").get<std::string>();
      cs.estimator_label =
          require_key(c, "estimator", cs.label).get<std::string>();
      cs.theta = theta_from_json(c, dgp.p(), cs.label);
      sc.contrasts.push_back(std::move(cs));
    }
  }
  if (cfg.contains("coverage")) {
    const json& cov = cfg.at("coverage");
    CoverageSpec spec;
    spec.level = cov.value("level", 0.95);
    if (cov.contains("x0")) {
      const json& arr = cov.at("x0");
      if (!arr.is_array() || arr.empty())
        throw usage_error("config: coverage.x0 must be a nonempty array");
      spec.x0.resize(static_cast<Eigen::Index>(arr.size()), dgp.p());
      for (std::size_t i = 0; i < arr.size(); ++i) {
        const json& row = arr[i];
        if (!row.is_array() ||
            static_cast<Eigen::Index>(row.size()) != dgp.p())
          throw usage_error("config: coverage.x0 rows must have p entries");
        for (Eigen::Index j = 0; j < dgp.p(); ++j)
          spec.x0(static_cast<Eigen::Index>(i), j) = row[j].get<double>();
      }
    } else if (cov.contains("x0_sparse")) {
      const json& arr = cov.at("x0_sparse");
      if (!arr.is_array() || arr.empty())
        throw usage_error(
            "config: coverage.x0_sparse must be a nonempty array");
      spec.x0 = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(arr.size()),
                                      dgp.p());
      for (std::size_t i = 0; i < arr.size(); ++i)
        for (const auto& [key, val] : arr[i].items()) {
          const int idx = parse_int(key, "coverage.x0_sparse index");
          if (idx < 0 || idx >= dgp.p())
            throw usage_error("config: coverage.x0_sparse index out of range");
          spec.x0(static_cast<Eigen::Index>(i), idx) = val.get<double>();
        }
    } else {
      throw usage_error("config: coverage needs x0 or x0_sparse");
    }
    sc.coverage = std::move(spec);
  }

  const StudyResult res = run_study(dgp, estimators, sc);

  json out;
  out["family"] = family;
  out["p"] = dgp.p();
  out["n"] = dgp.n();
  out["seed"] = res.seed;
  out["replications"] = res.replications;
  out["estimators"] = json::array();
  for (const auto& s : res.estimators) {
    json j;
    j["label"] = s.label;
    j["mse"] = s.mse;
    j["aee"] = s.aee;
    j["sigma_hat"] = s.sigma_hat;
    j["mean_k_used"] = s.mean_k_used;
    j["all_converged"] = s.all_converged;
    if (s.ep) j["ep"] = *s.ep;
    if (s.ci_coverage) j["ci_coverage"] = *s.ci_coverage;
    if (s.pi_coverage) j["pi_coverage"] = *s.pi_coverage;
    out["estimators"].push_back(std::move(j));
  }
  out["contrasts"] = json::array();
  for (const auto& c : res.contrasts) {
    json j;
    j["label"] = c.label;
    j["estimator"] = c.estimator_label;
    j["samples"] = static_cast<int>(c.samples.size());
    j["has_theory"] = c.has_theory;
    if (c.has_theory) {
      j["theory_mean"] = c.theory_mean;
      j["theory_sd"] = c.theory_sd;
    }
    out["contrasts"].push_back(std::move(j));
  }
  write_text(a.output, out.dump(2) + "\n");
  std::vector<std::string> outputs{a.output};

  // Wide table, one row per study: the tabular mirror of the JSON.
  {
    std::string head = "p,n";
    std::string row = std::to_string(dgp.p()) + ',' + std::to_string(dgp.n());
    for (const auto& s : res.estimators) {
      head += ',' + s.label;
      row += ',' + num(s.mse);
    }
    const fs::path tpath = sibling(fs::path(a.output), "_table.csv");
    write_text(tpath, head + "\n" + row + "\n");
    outputs.push_back(tpath.string());
  }

  for (const auto& label : a.histograms) {
    std::ostringstream ss;
    emit_histogram_data(res, label, ss);
    const fs::path hpath =
        sibling(fs::path(a.output), "_hist_" + sanitize_label(label) + ".csv");
    write_text(hpath, ss.str());
    outputs.push_back(hpath.string());
  }

  json params = cfg;
  params["threads"] = sc.threads;
  params["histograms"] = a.histograms;
  write_manifest(a.output, "simulate", params, json{{"config", a.config}},
                 outputs);
}

// --------------------------------------------------------------------- tune

struct TuneArgs {
  IoArgs io;
  std::string lambda_grid;
  std::string n_star_grid;
  int folds = 5;
  double holdout = 0.0;
  std::string k = "100";
  double eta = 1e-2;
  int max_iter = 10000;
};

void run_tune(const TuneArgs& a) {
  const Dataset data = load_centered(a.io);
  std::vector<double> lambdas;
  for (const auto& r : parse_rule_list(a.lambda_grid))
    lambdas.push_back(r.resolve(data.rows()));
  const std::vector<int> n_stars = parse_int_list(a.n_star_grid, "n-star");
  const TuneScheme scheme = a.holdout > 0.0 ? TuneScheme::holdout(a.holdout)
                                            : TuneScheme::kfold(a.folds);
  const TuneResult res =
      tune(data.x, data.y, lambdas, n_stars, scheme,
           parse_iter(a.k, a.eta, a.max_iter), a.io.rank_tol);

  json out;
  out["lambda_star"] = res.lambda_star;
  out["n_star"] = res.n_star;
  out["best_score"] = res.best_score;
  out["near_tie"] = res.near_tie;
  out["table"] = json::array();
  for (const auto& cell : res.table) {
    json j;
    j["lambda"] = cell.lambda_star;
    j["n_star"] = cell.n_star;
    j["score"] = cell.score;
    j["feasible"] = cell.feasible;
    if (!cell.note.empty()) j["note"] = cell.note;
    out["table"].push_back(std::move(j));
  }
  write_text(a.io.output, out.dump(2) + "\n");

  json params;
  params["lambda_grid"] = a.lambda_grid;
  params["n_star_grid"] = a.n_star_grid;
  if (a.holdout > 0.0)
    params["holdout"] = a.holdout;
  else
    params["folds"] = a.folds;
  params["k"] = a.k;
  params["eta"] = a.eta;
  params["max_iter"] = a.max_iter;
  params["response"] = a.io.response;
  params["has_header"] = !a.io.no_header;
  params["rank_tol"] = a.io.rank_tol;
  write_manifest(a.io.output, "tune", params, json{{"input", a.io.input}},
                 {a.io.output});
}

// ----------------------------------------------------------------- forecast

struct ForecastArgs {
  std::string input;
  std::string output = "forecast.csv";
  std::string target = "0";
  bool no_header = false;
  int lags = 4;
  int factors = 0;
  int horizon = 1;
  double train_fraction = 0.8;
  std::string lambda_grid;
  std::string k = "auto";
  double eta = 1e-2;
  int max_iter = 10000;
  double level = 0.95;
  int screen_n_star = 0;
  int screen_k = 100;
  std::string screen_lambda;
  std::string format = "csv";
};

void run_forecast(const ForecastArgs& a) {
  if (a.format != "csv" && a.format != "json")
    throw usage_error("format must be csv or json");
  const MatrixCsv table = load_matrix_csv(a.input, !a.no_header);

  Eigen::Index target_col = 0;
  const ColumnRef ref = parse_column(a.target);
  if (std::holds_alternative<int>(ref)) {
    target_col = std::get<int>(ref);
    if (target_col >= table.values.cols())
      throw usage_error("target column index out of range");
  } else {
    const auto& name = std::get<std::string>(ref);
    const auto it = std::find(table.column_names.begin(),
                              table.column_names.end(), name);
    if (it == table.column_names.end())
      throw usage_error("target column '" + name + "' not found in header");
    target_col = it - table.column_names.begin();
  }

  ForecastSpec spec;
  spec.lags = a.lags;
  spec.factors = a.factors;
  spec.horizon = a.horizon;
  spec.train_fraction = a.train_fraction;
  spec.lambda_grid = parse_rule_list(a.lambda_grid);
  spec.iter = parse_iter(a.k, a.eta, a.max_iter);
  spec.level = a.level;
  if (a.screen_n_star > 0) {
    ForecastScreen fsc;
    fsc.n_star = a.screen_n_star;
    fsc.k_stage1 = a.screen_k;
    if (!a.screen_lambda.empty())
      fsc.lambda_star = parse_lambda_rule(a.screen_lambda);
    spec.screen = fsc;
  }

  const Eigen::VectorXd target = table.values.col(target_col);
  std::optional<Eigen::MatrixXd> panel;
  if (a.factors > 0) {
    Eigen::MatrixXd m(table.values.rows(), table.values.cols() - 1);
    Eigen::Index k = 0;
    for (Eigen::Index j = 0; j < table.values.cols(); ++j) {
      if (j == target_col) continue;
      m.col(k++) = table.values.col(j);
    }
    panel = std::move(m);
  }

  const ForecastResult res = rolling_forecast(target, panel, spec);

  std::vector<std::string> outputs{a.output};
  if (a.format == "csv") {
    std::string body = "target_index,actual,point,se,lower,upper\n";
    for (const auto& pt : res.points)
      body += std::to_string(pt.target_index) + ',' + num(pt.actual) + ',' +
              num(pt.point) + ',' + num(pt.se) + ',' + num(pt.lower) + ',' +
              num(pt.upper) + '\n';
    write_text(a.output, body);
  } else {
    json arr = json::array();
    for (const auto& pt : res.points) {
      json j;
      j["target_index"] = pt.target_index;
      j["actual"] = pt.actual;
      j["point"] = pt.point;
      j["se"] = pt.se;
      j["lower"] = pt.lower;
      j["upper"] = pt.upper;
      arr.push_back(std::move(j));
    }
    write_text(a.output, arr.dump(2) + "\n");
  }

  json summary;
  summary["lambda_used"] = res.lambda_used;
  summary["msfe"] = res.msfe;
  summary["coverage"] = res.coverage;
  summary["window_rows"] = res.window_rows;
  summary["test_points"] = res.test_points;
  summary["best_index"] = res.best_index;
  summary["grid"] = json::array();
  for (const auto& g : res.grid) {
    json j;
    j["lambda"] = g.lambda;
    j["msfe"] = g.msfe;
    j["coverage"] = g.coverage;
    summary["grid"].push_back(std::move(j));
  }
  const fs::path spath = sibling(fs::path(a.output), "_summary.json");
  write_text(spath, summary.dump(2) + "\n");
  outputs.push_back(spath.string());

  json params;
  params["target"] = a.target;
  params["lags"] = a.lags;
  params["factors"] = a.factors;
  params["horizon"] = a.horizon;
  params["train_fraction"] = a.train_fraction;
  params["lambda_grid"] = a.lambda_grid;
  params["lambda_selected"] = res.lambda_used;
  params["k"] = a.k;
  params["eta"] = a.eta;
  params["max_iter"] = a.max_iter;
  params["level"] = a.level;
  params["format"] = a.format;
  params["has_header"] = !a.no_header;
  if (a.screen_n_star > 0) {
    params["screen_n_star"] = a.screen_n_star;
    params["screen_k"] = a.screen_k;
    if (!a.screen_lambda.empty()) params["screen_lambda"] = a.screen_lambda;
  }
  write_manifest(a.output, "forecast", params, json{{"input", a.input}},
                 outputs);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"iterative bias correction for ridge regression"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  FitArgs fit_args;
  auto* cmd_fit = app.add_subcommand("fit", "plain ridge fit (k = 0)");
  add_io_flags(cmd_fit, fit_args.io, "fit.json");
  cmd_fit->add_option("--lambda,--lambda-rule", fit_args.lambda,
                      "penalty: absolute value or multiple of n like '0.3n'")
      ->required();

  FitArgs debias_args;
  auto* cmd_debias =
      app.add_subcommand("debias", "iteratively corrected ridge fit");
  add_io_flags(cmd_debias, debias_args.io, "debias.json");
  cmd_debias
      ->add_option("--lambda,--lambda-rule", debias_args.lambda,
                   "penalty: absolute value or multiple of n like '0.3n'")
      ->required();
  cmd_debias->add_option("--k", debias_args.k,
                         "correction depth: integer or 'auto'");
  cmd_debias->add_option("--eta", debias_args.eta,
                         "stop threshold for --k auto");
  cmd_debias->add_option("--max-iter", debias_args.max_iter,
                         "iteration cap for --k auto");

  InferArgs infer_args;
  auto* cmd_infer =
      app.add_subcommand("infer", "intervals and contrast tests");
  add_io_flags(cmd_infer, infer_args.io, "intervals.csv");
  cmd_infer
      ->add_option("--lambda,--lambda-rule", infer_args.lambda, "penalty")
      ->required();
  cmd_infer->add_option("--k", infer_args.k, "correction depth or 'auto'");
  cmd_infer->add_option("--eta", infer_args.eta, "stop threshold");
  cmd_infer->add_option("--max-iter", infer_args.max_iter, "iteration cap");
  cmd_infer
      ->add_option("--x0", infer_args.x0,
                   "headerless CSV of evaluation points (original scale)")
      ->required();
  cmd_infer->add_option("--level", infer_args.level, "interval level");
  cmd_infer->add_option("--kind", infer_args.kind, "ci, pi, or both");
  cmd_infer->add_option("--contrasts", infer_args.contrasts,
                        "headerless CSV of contrast vectors");
  cmd_infer->add_option("--null", infer_args.null_value,
                        "null value for contrast tests");
  cmd_infer->add_option("--format", infer_args.format, "csv or json");

  ScreenArgs screen_args;
  auto* cmd_screen =
      app.add_subcommand("screen", "ridge screening plus second-stage fit");
  add_io_flags(cmd_screen, screen_args.io, "screen.json");
  cmd_screen->add_option("--lambda-star", screen_args.lambda_star,
                         "stage-1 penalty rule");
  cmd_screen->add_option("--n-star", screen_args.n_star,
                         "columns to keep");
  cmd_screen->add_option("--k", screen_args.k,
                         "stage-1 correction depth or 'auto'");
  cmd_screen->add_option("--l", screen_args.l,
                         "stage-2 correction depth or 'auto'");
  cmd_screen->add_option("--lambda2", screen_args.lambda2,
                         "stage-2 penalty rule (default: lambda-star)");
  cmd_screen->add_option("--eta", screen_args.eta, "stop threshold");
  cmd_screen->add_option("--max-iter", screen_args.max_iter, "iteration cap");
  cmd_screen->add_flag("--tune", screen_args.tune_mode,
                       "choose (lambda-star, n-star) by cross-validation");
  cmd_screen->add_option("--lambda-grid", screen_args.lambda_grid,
                         "comma-separated penalty rules for --tune");
  cmd_screen->add_option("--n-star-grid", screen_args.n_star_grid,
                         "comma-separated n-star values for --tune");
  cmd_screen->add_option("--folds", screen_args.folds, "CV folds for --tune");
  cmd_screen->add_option("--holdout", screen_args.holdout,
                         "holdout fraction (overrides --folds)");
  cmd_screen->add_option("--x0", screen_args.x0,
                         "headerless CSV of evaluation points");
  cmd_screen->add_option("--level", screen_args.level, "interval level");
  cmd_screen->add_option("--format", screen_args.format, "csv or json");

  TradeoffArgs tradeoff_args;
  auto* cmd_tradeoff = app.add_subcommand(
      "tradeoff", "exact bias-variance decomposition over k");
  add_io_flags(cmd_tradeoff, tradeoff_args.io, "tradeoff.csv");
  cmd_tradeoff
      ->add_option("--beta", tradeoff_args.beta,
                   "single-column CSV with the true coefficients")
      ->required();
  cmd_tradeoff->add_option("--sigma", tradeoff_args.sigma, "noise sd")
      ->required();
  cmd_tradeoff
      ->add_option("--lambda,--lambda-rule", tradeoff_args.lambda, "penalty")
      ->required();
  cmd_tradeoff->add_option("--k-max", tradeoff_args.k_max, "grid end");
  cmd_tradeoff->add_option("--format", tradeoff_args.format, "csv or json");

  SimulateArgs simulate_args;
  auto* cmd_simulate =
      app.add_subcommand("simulate", "seeded replication study");
  cmd_simulate
      ->add_option("--config", simulate_args.config, "study JSON document")
      ->required();
  cmd_simulate->add_option("--output,-o", simulate_args.output,
                           "summary JSON path");
  cmd_simulate->add_option("--threads", simulate_args.threads,
                           "worker threads (0 = DERIDGE_THREADS or all)");
  cmd_simulate->add_option("--histogram", simulate_args.histograms,
                           "contrast label to dump as sample/density CSV");

  TuneArgs tune_args;
  auto* cmd_tune =
      app.add_subcommand("tune", "cross-validate (lambda-star, n-star)");
  add_io_flags(cmd_tune, tune_args.io, "tune.json");
  cmd_tune
      ->add_option("--lambda-grid", tune_args.lambda_grid,
                   "comma-separated penalty rules")
      ->required();
  cmd_tune
      ->add_option("--n-star-grid", tune_args.n_star_grid,
                   "comma-separated n-star values")
      ->required();
  cmd_tune->add_option("--folds", tune_args.folds, "CV folds");
  cmd_tune->add_option("--holdout", tune_args.holdout,
                       "holdout fraction (overrides --folds)");
  cmd_tune->add_option("--k", tune_args.k, "stage-1 correction depth");
  cmd_tune->add_option("--eta", tune_args.eta, "stop threshold");
  cmd_tune->add_option("--max-iter", tune_args.max_iter, "iteration cap");

  ForecastArgs forecast_args;
  auto* cmd_forecast =
      app.add_subcommand("forecast", "rolling-window interval forecasts");
  cmd_forecast
      ->add_option("--input", forecast_args.input,
                   "CSV: target series plus optional covariate panel")
      ->required();
  cmd_forecast->add_option("--output,-o", forecast_args.output,
                           "forecast table path");
  cmd_forecast->add_option("--target", forecast_args.target,
                           "target column: index or header name");
  cmd_forecast->add_flag("--no-header", forecast_args.no_header,
                         "input has no header row");
  cmd_forecast->add_option("--lags", forecast_args.lags, "autoregressive order");
  cmd_forecast->add_option("--factors", forecast_args.factors,
                           "principal-component factors from the panel");
  cmd_forecast->add_option("--horizon", forecast_args.horizon, "forecast lead");
  cmd_forecast->add_option("--train-fraction", forecast_args.train_fraction,
                           "initial training share of embedded rows");
  cmd_forecast
      ->add_option("--lambda-grid", forecast_args.lambda_grid,
                   "comma-separated penalty rules, winner by MSFE")
      ->required();
  cmd_forecast->add_option("--k", forecast_args.k,
                           "correction depth or 'auto'");
  cmd_forecast->add_option("--eta", forecast_args.eta, "stop threshold");
  cmd_forecast->add_option("--max-iter", forecast_args.max_iter,
                           "iteration cap");
  cmd_forecast->add_option("--level", forecast_args.level, "interval level");
  cmd_forecast->add_option("--screen-n-star", forecast_args.screen_n_star,
                           "enable in-window screening, keeping this many");
  cmd_forecast->add_option("--screen-k", forecast_args.screen_k,
                           "stage-1 depth for --screen-n-star");
  cmd_forecast->add_option("--screen-lambda", forecast_args.screen_lambda,
                           "stage-1 penalty rule (default: candidate)");
  cmd_forecast->add_option("--format", forecast_args.format, "csv or json");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (cmd_fit->parsed()) run_fit(fit_args, "fit");
    if (cmd_debias->parsed()) run_fit(debias_args, "debias");
    if (cmd_infer->parsed()) run_infer(infer_args);
    if (cmd_screen->parsed()) run_screen(screen_args);
    if (cmd_tradeoff->parsed()) run_tradeoff(tradeoff_args);
    if (cmd_simulate->parsed()) run_simulate(simulate_args);
    if (cmd_tune->parsed()) run_tune(tune_args);
    if (cmd_forecast->parsed()) run_forecast(forecast_args);
    return 0;
  } catch (const usage_error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const io_error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const model_error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}
