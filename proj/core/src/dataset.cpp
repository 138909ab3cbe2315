#include "deridge/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "deridge/errors.hpp"

namespace deridge {
namespace {

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::stringstream ss(line);
  while (std::getline(ss, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

std::string trim(const std::string& s) {
  auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double parse_number(const std::string& raw, std::size_t row, std::size_t col,
                    const std::filesystem::path& path) {
  const std::string s = trim(raw);
  auto fail = [&](const char* what) {
    throw io_error("csv: " + std::string(what) + " at row " +
                   std::to_string(row) + ", column " + std::to_string(col + 1) +
                   " in " + path.string() + ": '" + raw + "'");
  };
  if (s.empty()) fail("empty field");
  double value = 0.0;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last) fail("non-numeric field");
  if (!std::isfinite(value)) fail("non-finite field");
  return value;
}

// Shared reader: header names (when requested) plus rectangular numeric
// rows, with row/column context on every failure.
std::vector<std::vector<double>> read_table(const std::filesystem::path& path,
                                            bool has_header,
                                            std::vector<std::string>& names) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot open file: " + path.string());

  std::string line;
  std::vector<std::vector<double>> rows;
  std::size_t n_cols = 0;
  std::size_t line_no = 0;

  bool want_header = has_header;
  while (std::getline(in, line)) {
    ++line_no;
    if (line_no == 1 && line.size() >= 3 &&
        static_cast<unsigned char>(line[0]) == 0xEF &&
        static_cast<unsigned char>(line[1]) == 0xBB &&
        static_cast<unsigned char>(line[2]) == 0xBF) {
      line.erase(0, 3);  // UTF-8 BOM
    }
    if (trim(line).empty()) continue;
    auto fields = split_fields(line);
    if (want_header) {
      for (auto& f : fields) names.push_back(trim(f));
      n_cols = names.size();
      want_header = false;
      continue;
    }
    if (n_cols == 0) n_cols = fields.size();
    if (fields.size() != n_cols)
      throw io_error("csv: ragged row " + std::to_string(line_no) + " in " +
                     path.string() + ": expected " + std::to_string(n_cols) +
                     " fields, found " + std::to_string(fields.size()));
    std::vector<double> row(n_cols);
    for (std::size_t j = 0; j < n_cols; ++j)
      row[j] = parse_number(fields[j], line_no, j, path);
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw io_error("csv: no data rows in " + path.string());
  return rows;
}

}  // namespace

Dataset load_csv(const std::filesystem::path& path, bool has_header,
                 const ColumnRef& response) {
  std::vector<std::string> names;
  const auto rows = read_table(path, has_header, names);
  const std::size_t n_cols = rows.front().size();
  if (n_cols < 2)
    throw io_error("csv: need at least two columns (response plus one "
                   "covariate) in " + path.string());

  std::size_t resp = 0;
  if (std::holds_alternative<int>(response)) {
    const int idx = std::get<int>(response);
    if (idx < 0 || static_cast<std::size_t>(idx) >= n_cols)
      throw usage_error("response column index " + std::to_string(idx) +
                        " out of range for " + std::to_string(n_cols) +
                        " columns");
    resp = static_cast<std::size_t>(idx);
  } else {
    const std::string& name = std::get<std::string>(response);
    auto it = std::find(names.begin(), names.end(), name);
    if (it == names.end())
      throw usage_error("response column '" + name + "' not found in header");
    resp = static_cast<std::size_t>(it - names.begin());
  }

  Dataset d;
  d.x.resize(static_cast<Eigen::Index>(rows.size()),
             static_cast<Eigen::Index>(n_cols - 1));
  d.y.resize(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    d.y(static_cast<Eigen::Index>(i)) = rows[i][resp];
    Eigen::Index k = 0;
    for (std::size_t j = 0; j < n_cols; ++j) {
      if (j == resp) continue;
      d.x(static_cast<Eigen::Index>(i), k++) = rows[i][j];
    }
  }
  if (!names.empty()) {
    for (std::size_t j = 0; j < n_cols; ++j)
      if (j != resp) d.column_names.push_back(names[j]);
  }
  return d;
}

MatrixCsv load_matrix_csv(const std::filesystem::path& path, bool has_header) {
  MatrixCsv out;
  const auto rows = read_table(path, has_header, out.column_names);
  const std::size_t n_cols = rows.front().size();
  out.values.resize(static_cast<Eigen::Index>(rows.size()),
                    static_cast<Eigen::Index>(n_cols));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < n_cols; ++j)
      out.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          rows[i][j];
  return out;
}

Dataset center(const Dataset& d) {
  if (d.x.rows() == 0) throw usage_error("center: empty dataset");
  Dataset out = d;
  if (d.centered) return out;
  out.x_means = d.x.colwise().mean();
  out.x.rowwise() -= out.x_means;
  out.y_mean = d.y.mean();
  out.y.array() -= out.y_mean;
  out.centered = true;
  return out;
}

double predict_original_scale(const Dataset& d, const Eigen::VectorXd& x0,
                              const Eigen::VectorXd& beta) {
  if (x0.size() != d.x.cols() || beta.size() != d.x.cols())
    throw usage_error("predict_original_scale: dimension mismatch");
  if (!d.centered) return x0.dot(beta);
  return d.y_mean + (x0.transpose() - d.x_means).dot(beta);
}

Dataset lag_embed(const Eigen::VectorXd& series, const LagSpec& spec) {
  const Eigen::Index n = series.size();
  if (spec.order < 1) throw usage_error("lag_embed: order must be >= 1");
  if (spec.horizon < 1) throw usage_error("lag_embed: horizon must be >= 1");
  const Eigen::Index rows = n - spec.order - spec.horizon + 1;
  if (rows < 1)
    throw usage_error("lag_embed: series of length " + std::to_string(n) +
                      " too short for order " + std::to_string(spec.order) +
                      " and horizon " + std::to_string(spec.horizon));
  Dataset d;
  d.x.resize(rows, spec.order);
  d.y.resize(rows);
  // Row i sits at time t = order - 1 + i (zero-based); predictors are
  // series[t], series[t-1], ..., most recent first.
  for (Eigen::Index i = 0; i < rows; ++i) {
    const Eigen::Index t = spec.order - 1 + i;
    for (int j = 0; j < spec.order; ++j) d.x(i, j) = series(t - j);
    d.y(i) = series(t + spec.horizon);
  }
  for (int j = 0; j < spec.order; ++j)
    d.column_names.push_back("lag" + std::to_string(j + 1));
  return d;
}

Eigen::MatrixXd pca_factors(const Eigen::MatrixXd& x, int r) {
  if (r < 1) throw usage_error("pca_factors: r must be >= 1");
  if (x.rows() == 0 || x.cols() == 0)
    throw usage_error("pca_factors: empty panel");
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(
      x, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& sing = svd.singularValues();
  const double tol =
      1e-12 * std::max(1.0, sing.size() > 0 ? sing(0) : 0.0);
  int rank = 0;
  for (Eigen::Index i = 0; i < sing.size(); ++i)
    if (sing(i) > tol) ++rank;
  if (r > rank)
    throw model_error("pca_factors: requested " + std::to_string(r) +
                      " factors but the panel has rank " +
                      std::to_string(rank));
  Eigen::MatrixXd scores(x.rows(), r);
  for (int j = 0; j < r; ++j) {
    Eigen::VectorXd loading = svd.matrixV().col(j);
    Eigen::Index imax = 0;
    loading.cwiseAbs().maxCoeff(&imax);
    const double sign = loading(imax) < 0.0 ? -1.0 : 1.0;
    scores.col(j) = sign * sing(j) * svd.matrixU().col(j);
  }
  return scores;
}

}  // namespace deridge
