#pragma once

#include <Eigen/Dense>
#include <filesystem>
#include <string>
#include <variant>
#include <vector>

namespace deridge {

// A design matrix with its response.  `centered` records whether column
// means have been removed; the removed means stay with the data so that
// fitted values and forecasts can be mapped back to the original scale.
struct Dataset {
  Eigen::MatrixXd x;
  Eigen::VectorXd y;
  std::vector<std::string> column_names;  // empty for headerless sources
  bool centered = false;
  Eigen::RowVectorXd x_means;  // filled by center()
  double y_mean = 0.0;

  Eigen::Index rows() const { return x.rows(); }
  Eigen::Index cols() const { return x.cols(); }
};

// Response column designated by zero-based position or by header name.
using ColumnRef = std::variant<int, std::string>;

// Strict numeric CSV reader: comma separated, one decimal convention,
// scientific notation allowed.  Ragged rows, non-numeric or non-finite
// fields, and empty columns are io_errors carrying row/column context.
Dataset load_csv(const std::filesystem::path& path, bool has_header,
                 const ColumnRef& response);

// Removes column means from x and the mean from y.  Idempotent.
Dataset center(const Dataset& d);

// Maps a model-scale prediction at a (raw, uncentered) input row back to
// the original y scale: y_mean + (x0 - x_means) * beta for centered data.
double predict_original_scale(const Dataset& d, const Eigen::VectorXd& x0,
                              const Eigen::VectorXd& beta);

// Autoregressive design: row for time t holds the `order` most recent
// values (most recent first); the response is the value `horizon` steps
// ahead.  A series of length n yields n - order - horizon + 1 rows.
struct LagSpec {
  int order = 1;
  int horizon = 1;
};

Dataset lag_embed(const Eigen::VectorXd& series, const LagSpec& spec);

// Principal-component scores: the first r left singular vectors of x
// scaled by their singular values.  Sign convention: the largest-magnitude
// entry of each loading (right singular) vector is positive, so factor
// signs do not flip between windows.  Expects a centered panel.
Eigen::MatrixXd pca_factors(const Eigen::MatrixXd& x, int r);

// Plain numeric table with no designated response; same strict parsing as
// load_csv.  Single-column files are allowed.
struct MatrixCsv {
  Eigen::MatrixXd values;
  std::vector<std::string> column_names;  // empty for headerless sources
};

MatrixCsv load_matrix_csv(const std::filesystem::path& path, bool has_header);

}  // namespace deridge
