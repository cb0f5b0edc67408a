#include "oodlab/reports.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "json.hpp"
#include "oodlab/csv.hpp"
#include "oodlab/image.hpp"

namespace oodlab {

namespace {

DataError file_error(const std::filesystem::path& path, const std::string& msg) {
  return DataError(path.string() + ": " + msg);
}

nlohmann::json matrix_rows(const Matrix& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (int r = 0; r < m.rows; ++r) {
    nlohmann::json row = nlohmann::json::array();
    for (int c = 0; c < m.cols; ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace

void write_named_matrix(const NamedMatrix& m, const std::filesystem::path& path) {
  const int n = static_cast<int>(m.names.size());
  if (m.values.rows != n || m.values.cols != n) {
    throw DataError("write_named_matrix: name count does not match matrix shape");
  }
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> header = {"domain"};
  header.insert(header.end(), m.names.begin(), m.names.end());
  rows.push_back(std::move(header));
  for (int r = 0; r < n; ++r) {
    std::vector<std::string> row = {m.names[r]};
    for (int c = 0; c < n; ++c) row.push_back(csv::format_double(m.values(r, c)));
    rows.push_back(std::move(row));
  }
  csv::write_file(path, rows);
}

NamedMatrix read_named_matrix(const std::filesystem::path& path) {
  const auto rows = csv::read_file(path);
  if (rows.empty()) throw file_error(path, "empty matrix file");
  const auto& header = rows[0];
  if (header.empty() || header[0] != "domain") {
    throw file_error(path, "first header cell must be 'domain'");
  }
  NamedMatrix m;
  m.names.assign(header.begin() + 1, header.end());
  const int n = static_cast<int>(m.names.size());
  if (n == 0) throw file_error(path, "matrix has no columns");
  if (static_cast<int>(rows.size()) != n + 1) {
    throw file_error(path, "expected " + std::to_string(n) + " data rows, found " +
                               std::to_string(rows.size() - 1));
  }
  m.values = Matrix(n, n);
  for (int r = 0; r < n; ++r) {
    const auto& row = rows[r + 1];
    if (static_cast<int>(row.size()) != n + 1) {
      throw file_error(path, "row '" + (row.empty() ? std::string() : row[0]) +
                                 "' has the wrong field count");
    }
    if (row[0] != m.names[r]) {
      throw file_error(path, "row name '" + row[0] + "' does not match column name '" +
                                 m.names[r] + "'");
    }
    for (int c = 0; c < n; ++c) {
      m.values(r, c) = csv::parse_double(row[c + 1], path.string() + " row " + row[0]);
    }
  }
  return m;
}

void write_heatmap(const NamedMatrix& m, const std::filesystem::path& path, int cell_px) {
  const int n = static_cast<int>(m.names.size());
  if (n == 0) throw DataError("write_heatmap: empty matrix");
  if (cell_px < 1) throw DataError("write_heatmap: cell size must be >= 1");
  GrayImage img = make_image(n * cell_px, n * cell_px);
  for (int r = 0; r < n; ++r) {
    for (int c = 0; c < n; ++c) {
      const double v = std::clamp(m.values(r, c), 0.0, 100.0);
      const double shade = 1.0 - v / 100.0;  // 0 -> white, 100 -> black
      for (int y = 0; y < cell_px; ++y) {
        for (int x = 0; x < cell_px; ++x) {
          img.at(r * cell_px + y, c * cell_px + x) = shade;
        }
      }
    }
  }
  save_pgm(img, path);
}

MetricsTable load_metrics_table(const std::filesystem::path& path) {
  const auto rows = csv::read_file(path);
  if (rows.empty()) throw file_error(path, "empty metrics file");
  const auto& header = rows[0];

  std::vector<std::string> expected = {"model", "source", "target"};
  for (const std::string& c : metric_column_names()) expected.push_back(c);

  std::map<std::string, int> index;
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (index.count(header[i])) throw file_error(path, "duplicate column '" + header[i] + "'");
    index[header[i]] = static_cast<int>(i);
  }
  for (const std::string& c : expected) {
    if (!index.count(c)) throw file_error(path, "missing column '" + c + "'");
  }
  for (const auto& [name, pos] : index) {
    (void)pos;
    if (std::find(expected.begin(), expected.end(), name) == expected.end()) {
      throw file_error(path, "unknown column '" + name + "'");
    }
  }

  MetricsTable table;
  std::set<std::string> keys;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    if (row.size() != header.size()) {
      throw file_error(path, "row " + std::to_string(r + 1) + ": wrong field count");
    }
    MetricsRow mr;
    mr.model = row[index["model"]];
    mr.source = row[index["source"]];
    mr.target = row[index["target"]];
    if (mr.model.empty() || mr.source.empty() || mr.target.empty()) {
      throw file_error(path, "row " + std::to_string(r + 1) + ": empty key field");
    }
    const std::string key = mr.model + "\x1f" + mr.source + "\x1f" + mr.target;
    if (!keys.insert(key).second) {
      throw file_error(path, "row " + std::to_string(r + 1) + ": duplicate key (" + mr.model +
                                 ", " + mr.source + ", " + mr.target + ")");
    }
    for (const std::string& c : metric_column_names()) {
      const double v =
          csv::parse_double(row[index[c]], path.string() + " row " + std::to_string(r + 1));
      if (!std::isfinite(v) || v < 0.0) {
        throw file_error(path, "row " + std::to_string(r + 1) + ": column '" + c +
                                   "' must be a finite nonnegative number");
      }
      metric_ref(mr, c) = v;
    }
    table.rows.push_back(std::move(mr));
  }
  if (table.rows.empty()) throw file_error(path, "metrics file has no data rows");
  return table;
}

void save_metrics_table(const MetricsTable& table, const std::filesystem::path& path) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> header = {"model", "source", "target"};
  for (const std::string& c : metric_column_names()) header.push_back(c);
  rows.push_back(std::move(header));
  for (const MetricsRow& mr : table.rows) {
    std::vector<std::string> row = {mr.model, mr.source, mr.target};
    for (const std::string& c : metric_column_names()) {
      row.push_back(csv::format_double(metric_value(mr, c)));
    }
    rows.push_back(std::move(row));
  }
  csv::write_file(path, rows);
}

std::map<std::string, CrossTable> load_cross_tables(const std::filesystem::path& path,
                                                    std::vector<std::string>* model_order) {
  const auto rows = csv::read_file(path);
  if (rows.empty()) throw file_error(path, "empty cross-domain file");
  const std::vector<std::string> expected = {"model", "source", "target", "cer"};
  if (rows[0] != expected) {
    throw file_error(path, "header must be exactly 'model,source,target,cer'");
  }
  if (rows.size() == 1) throw file_error(path, "cross-domain file has no data rows");

  // First pass pins name orders (first appearance); second pass fills cells.
  std::map<std::string, CrossTable> tables;
  std::vector<std::string> order;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    if (row.size() != 4) {
      throw file_error(path, "row " + std::to_string(r + 1) + ": wrong field count");
    }
    if (row[0].empty() || row[1].empty() || row[2].empty()) {
      throw file_error(path, "row " + std::to_string(r + 1) + ": empty key field");
    }
    if (!tables.count(row[0])) order.push_back(row[0]);
    CrossTable& t = tables[row[0]];
    if (std::find(t.sources.begin(), t.sources.end(), row[1]) == t.sources.end()) {
      t.sources.push_back(row[1]);
    }
    if (std::find(t.targets.begin(), t.targets.end(), row[2]) == t.targets.end()) {
      t.targets.push_back(row[2]);
    }
  }
  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (auto& [model, t] : tables) {
    (void)model;
    t.values = Matrix(static_cast<int>(t.sources.size()), static_cast<int>(t.targets.size()));
    for (double& v : t.values.data) v = nan;
  }
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    CrossTable& t = tables[row[0]];
    const int si = static_cast<int>(std::find(t.sources.begin(), t.sources.end(), row[1]) -
                                    t.sources.begin());
    const int ti = static_cast<int>(std::find(t.targets.begin(), t.targets.end(), row[2]) -
                                    t.targets.begin());
    const double v = csv::parse_double(row[3], path.string() + " row " + std::to_string(r + 1));
    if (!std::isfinite(v) || v < 0.0) {
      throw file_error(path, "row " + std::to_string(r + 1) + ": cer must be nonnegative");
    }
    if (!std::isnan(t.values(si, ti))) {
      throw file_error(path, "row " + std::to_string(r + 1) + ": duplicate cell (" + row[0] +
                                 ", " + row[1] + ", " + row[2] + ")");
    }
    t.values(si, ti) = v;
  }
  if (model_order) *model_order = order;
  return tables;
}

std::map<std::string, std::set<std::string>> load_outliers(const std::filesystem::path& path) {
  const auto rows = csv::read_file(path);
  if (rows.empty()) throw file_error(path, "empty outlier file");
  const std::vector<std::string> expected = {"model", "target"};
  if (rows[0] != expected) throw file_error(path, "header must be exactly 'model,target'");
  std::map<std::string, std::set<std::string>> out;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    if (row.size() != 2 || row[0].empty() || row[1].empty()) {
      throw file_error(path, "row " + std::to_string(r + 1) + ": expected model,target");
    }
    out[row[0]].insert(row[1]);
  }
  return out;
}

std::vector<ValRecord> load_val_records(const std::filesystem::path& path) {
  const auto rows = csv::read_file(path);
  if (rows.empty()) throw file_error(path, "empty validation file");
  const std::vector<std::string> expected = {"checkpoint", "domain", "val_cer"};
  if (rows[0] != expected) {
    throw file_error(path, "header must be exactly 'checkpoint,domain,val_cer'");
  }
  std::vector<ValRecord> records;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    if (row.size() != 3 || row[0].empty() || row[1].empty()) {
      throw file_error(path, "row " + std::to_string(r + 1) +
                                 ": expected checkpoint,domain,val_cer");
    }
    ValRecord rec;
    rec.checkpoint = row[0];
    rec.domain = row[1];
    rec.val_cer = csv::parse_double(row[2], path.string() + " row " + std::to_string(r + 1));
    if (!std::isfinite(rec.val_cer) || rec.val_cer < 0.0) {
      throw file_error(path, "row " + std::to_string(r + 1) + ": val_cer must be nonnegative");
    }
    records.push_back(std::move(rec));
  }
  if (records.empty()) throw file_error(path, "validation file has no data rows");
  return records;
}

std::string factor_report_json(const FactorModel& model) {
  nlohmann::json j;
  j["columns"] = model.columns;
  j["eigenvalues"] = model.eigenvalues;
  j["retained"] = model.retained;
  j["loadings"] = matrix_rows(model.loadings);
  j["rotated_loadings"] = matrix_rows(model.rotated_loadings);
  j["rotation"] = matrix_rows(model.rotation);
  j["rotation_converged"] = model.rotation_converged;
  j["criterion_initial"] =
      model.criterion_trace.empty() ? 0.0 : model.criterion_trace.front();
  j["criterion_final"] = model.criterion_trace.empty() ? 0.0 : model.criterion_trace.back();
  return j.dump(2) + "\n";
}

std::string regression_report_json(const RegressionModel& model, const RegressionEvaluation& eval,
                                   double bucket_width) {
  nlohmann::json j;
  j["features"] = model.features;
  j["coefficients"] = model.coefficients;
  j["intercept"] = model.intercept;
  j["feature_mean"] = model.feature_mean;
  j["feature_std"] = model.feature_std;
  j["rank_deficient"] = model.rank_deficient;
  j["evaluation"]["mae"] = eval.mae;
  j["evaluation"]["mse"] = eval.mse;
  j["evaluation"]["residual_count"] = eval.abs_residuals.size();
  nlohmann::json buckets = nlohmann::json::array();
  const std::vector<double> cumulative = residual_distribution(eval.abs_residuals, bucket_width);
  for (std::size_t i = 0; i < cumulative.size(); ++i) {
    nlohmann::json b;
    b["upper"] = bucket_width * static_cast<double>(i + 1);
    b["cumulative_percent"] = cumulative[i];
    buckets.push_back(std::move(b));
  }
  j["residual_cumulative"] = std::move(buckets);
  return j.dump(2) + "\n";
}

void write_summary_csv(const std::vector<ModelSummary>& summaries,
                       const std::filesystem::path& path) {
  std::vector<std::vector<std::string>> rows;
  rows.push_back({"model", "mean_cer_id", "mean_cer_ood", "mean_gap"});
  for (const ModelSummary& s : summaries) {
    rows.push_back({s.model, csv::format_double(s.mean_id), csv::format_double(s.mean_ood),
                    csv::format_double(s.mean_gap)});
  }
  csv::write_file(path, rows);
}

void write_targets_csv(const std::vector<ModelSummary>& summaries,
                       const std::filesystem::path& path) {
  std::vector<std::vector<std::string>> rows;
  rows.push_back({"model", "target", "cer_id", "best_source", "cer_ood", "gap", "outlier"});
  for (const ModelSummary& s : summaries) {
    for (const TargetSummary& t : s.rows) {
      rows.push_back({s.model, t.target, csv::format_double(t.cer_id), t.source,
                      csv::format_double(t.cer_ood), csv::format_double(t.gap),
                      t.outlier ? "1" : "0"});
    }
  }
  csv::write_file(path, rows);
}

}  // namespace oodlab
