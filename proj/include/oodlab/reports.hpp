#pragma once

#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "oodlab/analysis.hpp"
#include "oodlab/errors.hpp"
#include "oodlab/linalg.hpp"

namespace oodlab {

// On-disk formats shared by the command-line pipeline. Everything is CSV or
// JSON, written byte-deterministically so reruns on unchanged inputs produce
// identical files.

// Square divergence matrix with a shared row/column name set:
//   domain,iam,rimes
//   iam,0,1.5
//   rimes,2.25,0
void write_named_matrix(const NamedMatrix& m, const std::filesystem::path& path);
NamedMatrix read_named_matrix(const std::filesystem::path& path);

// Renders a matrix of values on the 0..100 scale as a PGM heatmap: 0 maps to
// white, 100 to black, each cell painted as a cell_px x cell_px block.
void write_heatmap(const NamedMatrix& m, const std::filesystem::path& path, int cell_px = 24);

// Experiment metrics table, one row per (model, source, target) with the nine
// numeric columns. Columns are matched by header name, so order is free on
// input; output uses the canonical order.
MetricsTable load_metrics_table(const std::filesystem::path& path);
void save_metrics_table(const MetricsTable& table, const std::filesystem::path& path);

// Cross-domain CER grids, rows "model,source,target,cer". Source/target name
// order follows first appearance per model; missing cells stay NaN. The model
// order of first appearance is returned alongside the grids.
std::map<std::string, CrossTable> load_cross_tables(const std::filesystem::path& path,
                                                    std::vector<std::string>* model_order = nullptr);

// Outlier marks, rows "model,target": targets excluded from that model's
// averages.
std::map<std::string, std::set<std::string>> load_outliers(const std::filesystem::path& path);

// Per-checkpoint validation scores, rows "checkpoint,domain,val_cer".
std::vector<ValRecord> load_val_records(const std::filesystem::path& path);

// JSON report bodies (returned as strings so the caller owns file placement).
std::string factor_report_json(const FactorModel& model);
std::string regression_report_json(const RegressionModel& model, const RegressionEvaluation& eval,
                                   double bucket_width);

// Summary tables produced by the report command.
//   summary.csv: model,mean_cer_id,mean_cer_ood,mean_gap
//   targets.csv: model,target,cer_id,best_source,cer_ood,gap,outlier
void write_summary_csv(const std::vector<ModelSummary>& summaries,
                       const std::filesystem::path& path);
void write_targets_csv(const std::vector<ModelSummary>& summaries,
                       const std::filesystem::path& path);

}  // namespace oodlab
