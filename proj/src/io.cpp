#include "metacont/io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "metacont/spectral.hpp"

namespace metacont {

std::string format_double(double value) {
  char buffer[40];
  std::snprintf(buffer, sizeof(buffer), "%.17g", value);
  return buffer;
}

namespace {

std::string cell_text(const Cell& cell) {
  if (std::holds_alternative<std::int64_t>(cell)) {
    return std::to_string(std::get<std::int64_t>(cell));
  }
  if (std::holds_alternative<double>(cell)) {
    return format_double(std::get<double>(cell));
  }
  return std::get<std::string>(cell);
}

void write_csv(const Table& table, std::ostream& out) {
  for (std::size_t i = 0; i < table.columns.size(); ++i) {
    if (i) out << ',';
    out << table.columns[i];
  }
  out << '\n';
  for (const auto& row : table.rows) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) out << ',';
      out << cell_text(row[i]);
    }
    out << '\n';
  }
}

void write_json(const Table& table, std::ostream& out) {
  nlohmann::ordered_json rows = nlohmann::ordered_json::array();
  for (const auto& row : table.rows) {
    nlohmann::ordered_json obj;
    for (std::size_t i = 0; i < row.size() && i < table.columns.size(); ++i) {
      const Cell& cell = row[i];
      if (std::holds_alternative<std::int64_t>(cell)) {
        obj[table.columns[i]] = std::get<std::int64_t>(cell);
      } else if (std::holds_alternative<double>(cell)) {
        obj[table.columns[i]] = std::get<double>(cell);
      } else {
        obj[table.columns[i]] = std::get<std::string>(cell);
      }
    }
    rows.push_back(std::move(obj));
  }
  out << rows.dump(2) << '\n';
}

std::string event_label(const Branch& branch, std::size_t row) {
  std::string label;
  for (const BranchEvent& event : branch.events) {
    if (event.index == row || event.index + 1 == row) {
      if (!label.empty()) label += ';';
      label += to_string(event.kind);
    }
  }
  return label.empty() ? "none" : label;
}

}  // namespace

void write_table(const Table& table, const std::filesystem::path& path,
                 OutputFormat format) {
  for (const auto& row : table.rows) {
    if (row.size() != table.columns.size()) {
      throw std::logic_error("write_table: row width does not match column count");
    }
  }
  if (path.has_parent_path()) {
    std::filesystem::create_directories(path.parent_path());
  }
  std::ofstream out(path);
  if (!out) {
    throw std::runtime_error("write_table: cannot open '" + path.string() + "' for writing");
  }
  if (format == OutputFormat::Csv) {
    write_csv(table, out);
  } else {
    write_json(table, out);
  }
  if (!out) {
    throw std::runtime_error("write_table: write to '" + path.string() + "' failed");
  }
}

Table branch_table(const Branch& branch) {
  Table table;
  const int n = branch.points.empty() ? 0 : static_cast<int>(branch.points.front().x.size());
  table.columns = {"index", "mu"};
  for (int i = 1; i <= n; ++i) table.columns.push_back("x_" + std::to_string(i));
  table.columns.push_back("max_re_eig");
  table.columns.push_back("stability");
  table.columns.push_back("event");
  for (std::size_t row = 0; row < branch.points.size(); ++row) {
    const BranchPoint& p = branch.points[row];
    std::vector<Cell> cells;
    cells.emplace_back(static_cast<std::int64_t>(row));
    cells.emplace_back(p.mu);
    for (int i = 0; i < n; ++i) cells.emplace_back(p.x[i]);
    cells.emplace_back(max_real_part(p.eigenvalues));
    cells.emplace_back(to_string(p.stability));
    cells.emplace_back(event_label(branch, row));
    table.rows.push_back(std::move(cells));
  }
  return table;
}

Table covariance_table(const Branch& branch,
                       const std::vector<std::optional<CovarianceResult>>& cov) {
  if (cov.size() != branch.points.size()) {
    throw std::invalid_argument("covariance_table: covariance list must parallel the branch");
  }
  Table table;
  const int n = branch.points.empty() ? 0 : static_cast<int>(branch.points.front().x.size());
  table.columns = {"index", "mu"};
  for (int i = 1; i <= n; ++i) {
    for (int j = i; j <= n; ++j) {
      table.columns.push_back("c_" + std::to_string(i) + std::to_string(j));
    }
  }
  table.columns.push_back("residual");
  table.columns.push_back("method");
  table.columns.push_back("iterations");
  table.columns.push_back("numerical_rank");
  for (std::size_t row = 0; row < branch.points.size(); ++row) {
    if (!cov[row]) continue;
    const CovarianceResult& r = *cov[row];
    std::vector<Cell> cells;
    cells.emplace_back(static_cast<std::int64_t>(row));
    cells.emplace_back(branch.points[row].mu);
    for (int i = 0; i < n; ++i) {
      for (int j = i; j < n; ++j) cells.emplace_back(r.c(i, j));
    }
    cells.emplace_back(r.residual);
    cells.emplace_back(std::string(to_string(r.method)));
    cells.emplace_back(static_cast<std::int64_t>(r.iterations));
    cells.emplace_back(static_cast<std::int64_t>(r.numerical_rank));
    table.rows.push_back(std::move(cells));
  }
  return table;
}

Table distance_table(const std::vector<BranchDistancePoint>& points, int dim) {
  Table table;
  table.columns = {"mu", "delta"};
  for (int i = 1; i <= dim; ++i) table.columns.push_back("v_" + std::to_string(i));
  table.columns.push_back("iterations");
  table.columns.push_back("function_evals");
  table.columns.push_back("converged");
  for (const BranchDistancePoint& p : points) {
    std::vector<Cell> cells;
    cells.emplace_back(p.mu);
    cells.emplace_back(p.result.delta);
    for (int i = 0; i < dim; ++i) {
      cells.emplace_back(i < p.result.v_star.size()
                             ? p.result.v_star[i]
                             : std::numeric_limits<double>::quiet_NaN());
    }
    cells.emplace_back(static_cast<std::int64_t>(p.result.iterations));
    cells.emplace_back(static_cast<std::int64_t>(p.result.function_evals));
    cells.emplace_back(static_cast<std::int64_t>(p.result.converged ? 1 : 0));
    table.rows.push_back(std::move(cells));
  }
  return table;
}

Table ellipse_table(const Branch& branch,
                    const std::vector<std::optional<CovarianceResult>>& cov, double h,
                    int every_k, int n_points) {
  if (cov.size() != branch.points.size()) {
    throw std::invalid_argument("ellipse_table: covariance list must parallel the branch");
  }
  if (every_k < 1) throw std::invalid_argument("ellipse_table: every_k must be >= 1");
  Table table;
  table.columns = {"mu", "theta_index", "x1", "x2"};
  for (std::size_t row = 0; row < branch.points.size(); row += every_k) {
    if (!cov[row]) continue;
    const Ellipsoid e = make_ellipsoid(branch.points[row].x, cov[row]->c, h);
    const Eigen::MatrixXd polyline = ellipse_polyline(e, n_points);
    for (int k = 0; k < polyline.rows(); ++k) {
      std::vector<Cell> cells;
      cells.emplace_back(branch.points[row].mu);
      cells.emplace_back(static_cast<std::int64_t>(k));
      cells.emplace_back(polyline(k, 0));
      cells.emplace_back(polyline(k, 1));
      table.rows.push_back(std::move(cells));
    }
  }
  return table;
}

Table ensemble_table(const std::vector<double>& mu, const std::vector<EnsembleStats>& stats) {
  if (mu.size() != stats.size()) {
    throw std::invalid_argument("ensemble_table: mu and stats sizes differ");
  }
  Table table;
  table.columns = {"mu", "T_p_mean", "T_p_stderr", "n_paths"};
  for (std::size_t i = 0; i < mu.size(); ++i) {
    table.rows.push_back({Cell(mu[i]), Cell(stats[i].mean), Cell(stats[i].std_error),
                          Cell(static_cast<std::int64_t>(stats[i].n_paths))});
  }
  return table;
}

Table kramers_table(const std::vector<KramersEstimate>& estimates) {
  Table table;
  table.columns = {"mu",      "barrier",       "lambda_unstable", "det_saddle",
                   "det_min", "expected_time", "rayleigh_iters"};
  for (const KramersEstimate& e : estimates) {
    table.rows.push_back({Cell(e.mu), Cell(e.barrier), Cell(e.lambda_unstable),
                          Cell(e.det_saddle), Cell(e.det_min), Cell(e.expected_time),
                          Cell(static_cast<std::int64_t>(e.rayleigh_iters))});
  }
  return table;
}

Table path_table(const SdePath& path, int dim) {
  Table table;
  table.columns = {"t"};
  for (int i = 1; i <= dim; ++i) table.columns.push_back("x_" + std::to_string(i));
  for (std::size_t row = 0; row < path.t.size(); ++row) {
    std::vector<Cell> cells;
    cells.emplace_back(path.t[row]);
    for (int i = 0; i < dim; ++i) cells.emplace_back(path.x[row][i]);
    table.rows.push_back(std::move(cells));
  }
  return table;
}

Table events_table(const Branch& branch, int dim) {
  Table table;
  table.columns = {"index", "kind", "mu"};
  for (int i = 1; i <= dim; ++i) table.columns.push_back("x_" + std::to_string(i));
  table.columns.push_back("test_value");
  for (const BranchEvent& e : branch.events) {
    std::vector<Cell> cells;
    cells.emplace_back(static_cast<std::int64_t>(e.index));
    cells.emplace_back(to_string(e.kind));
    cells.emplace_back(e.mu);
    for (int i = 0; i < dim; ++i) {
      cells.emplace_back(i < e.x.size() ? e.x[i] : std::numeric_limits<double>::quiet_NaN());
    }
    cells.emplace_back(e.test_value);
    table.rows.push_back(std::move(cells));
  }
  return table;
}

std::vector<std::pair<Eigen::VectorXd, double>> read_branch_csv(
    const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("read_branch_csv: cannot open '" + path.string() + "'");
  }
  std::string line;
  if (!std::getline(in, line)) {
    throw std::runtime_error("read_branch_csv: '" + path.string() + "' is empty");
  }
  std::vector<std::string> columns;
  {
    std::stringstream header(line);
    std::string name;
    while (std::getline(header, name, ',')) columns.push_back(name);
  }
  int mu_col = -1;
  std::vector<int> x_cols;
  for (std::size_t i = 0; i < columns.size(); ++i) {
    if (columns[i] == "mu") mu_col = static_cast<int>(i);
    if (columns[i].rfind("x_", 0) == 0) x_cols.push_back(static_cast<int>(i));
  }
  if (mu_col < 0 || x_cols.empty()) {
    throw std::runtime_error("read_branch_csv: '" + path.string() +
                             "' lacks mu/x_i columns");
  }

  std::vector<std::pair<Eigen::VectorXd, double>> out;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream row(line);
    std::string cell;
    while (std::getline(row, cell, ',')) cells.push_back(cell);
    if (cells.size() != columns.size()) {
      std::ostringstream msg;
      msg << "read_branch_csv: line " << line_no << " has " << cells.size()
          << " cells, expected " << columns.size();
      throw std::runtime_error(msg.str());
    }
    Eigen::VectorXd x(static_cast<int>(x_cols.size()));
    try {
      for (std::size_t i = 0; i < x_cols.size(); ++i) {
        x[static_cast<int>(i)] = std::stod(cells[static_cast<std::size_t>(x_cols[i])]);
      }
      out.emplace_back(std::move(x),
                       std::stod(cells[static_cast<std::size_t>(mu_col)]));
    } catch (const std::exception&) {
      std::ostringstream msg;
      msg << "read_branch_csv: line " << line_no << " has a malformed number";
      throw std::runtime_error(msg.str());
    }
  }
  return out;
}

}  // namespace metacont
