#pragma once

#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include "oodlab/errors.hpp"
#include "oodlab/linalg.hpp"

namespace oodlab {

// One experiment outcome: a recognizer trained on `source`, evaluated on
// `target`, together with the proxy metrics that describe the domain shift.
struct MetricsRow {
  std::string model;
  std::string source;
  std::string target;
  double params_millions = 0;
  double cer_id = 0;    // character error rate on the source's own test data
  double cer_ood = 0;   // character error rate on the target
  double ece_id = 0;    // calibration error in-domain
  double ece_ood = 0;   // calibration error on the target
  double delta_s = 0;   // visual divergence, source split vs source split
  double delta_t = 0;   // visual divergence, source vs target images
  double delta_l = 0;   // textual divergence against same-language text
  double delta_gt = 0;  // textual divergence against the target's ground truth
};

struct MetricsTable {
  std::vector<MetricsRow> rows;
};

// The nine numeric columns, in canonical order.
const std::vector<std::string>& metric_column_names();
double metric_value(const MetricsRow& row, const std::string& column);
double& metric_ref(MetricsRow& row, const std::string& column);

// ---------------------------------------------------------------------------
// Factor analysis
// ---------------------------------------------------------------------------

struct Standardized {
  Matrix z;  // rows x columns, z-scores
  std::vector<std::string> columns;
  std::vector<double> mean;
  std::vector<double> stddev;  // sample standard deviation (n - 1)
};

// Column-wise z-scores. Throws DataError on fewer than 2 rows or when a column
// has zero variance (the error names the column).
Standardized standardize(const MetricsTable& table, const std::vector<std::string>& columns);

// Pearson correlations of the standardized columns: Z^T Z / (n - 1), with the
// diagonal pinned to 1 and entries clamped to [-1, 1].
Matrix correlation_matrix(const Standardized& s);

// Number of factors kept: count of eigenvalues >= 1.
int retain_factors(const std::vector<double>& eigenvalues);

// Principal-axis loadings: column i is eigenvector_i * sqrt(eigenvalue_i), with
// the sign flipped so each column's largest-magnitude entry is positive.
Matrix principal_loadings(const EigenResult& eig, int k);

// Orthogonal rotation maximizing  Q(L) = ln(sum L^4) - 2 ln(sum L^2)  by
// projected gradient ascent on the orthogonal group (ascend, then project back
// via the polar factor). Row norms of the loadings (communalities) are
// preserved. The criterion trace never decreases.
struct RotationResult {
  Matrix loadings;                      // rotated loadings, input * rotation
  Matrix rotation;                      // orthogonal k x k
  std::vector<double> criterion_trace;  // criterion value per accepted step
  bool converged = false;
};
double rotation_criterion(const Matrix& loadings);
RotationResult rotate_loadings(const Matrix& loadings, std::uint64_t seed = 42);

struct FactorModel {
  std::vector<std::string> columns;
  std::vector<double> eigenvalues;
  int retained = 0;
  Matrix loadings;          // unrotated, columns x retained
  Matrix rotated_loadings;  // loadings * rotation
  Matrix rotation;
  std::vector<double> criterion_trace;
  bool rotation_converged = false;
};

FactorModel factor_analysis(const MetricsTable& table, const std::vector<std::string>& columns,
                            std::uint64_t seed = 42);

// ---------------------------------------------------------------------------
// Checkpoint selection
// ---------------------------------------------------------------------------

struct ValRecord {
  std::string checkpoint;
  std::string domain;
  double val_cer = 0;
};

enum class SelectionStrategy {
  NoSelection,  // best validation CER on the source domain
  Heldout,      // best mean validation CER over every domain except the target
  Oracle,       // best validation CER on the target domain itself
};

SelectionStrategy parse_strategy(const std::string& name);
std::string strategy_name(SelectionStrategy s);

// Returns the chosen checkpoint id. `domain` is the source for NoSelection and
// the target for Heldout/Oracle. Ties resolve to the checkpoint that appears
// first in the records. Throws DataError when the needed domain is absent or a
// (checkpoint, domain) pair is duplicated.
std::string select_model(const std::vector<ValRecord>& records, SelectionStrategy strategy,
                         const std::string& domain);

// ---------------------------------------------------------------------------
// Cross-domain summary
// ---------------------------------------------------------------------------

// CER grid for one model: rows are training domains, columns are evaluation
// domains, NaN marks a missing cell.
struct CrossTable {
  std::vector<std::string> sources;
  std::vector<std::string> targets;
  Matrix values;

  double value(const std::string& source, const std::string& target) const;
};

struct BestSource {
  std::string source;
  double cer = 0;
};

// Minimum CER over sources != target for the given column; skips missing cells,
// ties go to the earliest source row.
BestSource best_source(const CrossTable& table, const std::string& target);

struct TargetSummary {
  std::string target;
  double cer_id = 0;
  double cer_ood = 0;  // best-source out-of-distribution CER
  double gap = 0;      // cer_ood - cer_id
  std::string source;  // where cer_ood came from
  bool outlier = false;
};

struct ModelSummary {
  std::string model;
  std::vector<TargetSummary> rows;
  double mean_id = 0;   // over non-outlier targets
  double mean_ood = 0;  // over non-outlier targets
  double mean_gap = 0;  // mean_ood - mean_id
};

// Per-target ID/OOD/gap rows plus outlier-filtered averages.
ModelSummary aggregate_summary(const std::string& model, const CrossTable& table,
                               const std::set<std::string>& outlier_targets = {});

// ---------------------------------------------------------------------------
// OOD-error regression
// ---------------------------------------------------------------------------

// Predictors that need no labels from the target domain.
const std::vector<std::string>& label_free_features();

struct RegressionModel {
  std::vector<std::string> features;
  std::vector<double> coefficients;  // one per feature, on standardized inputs
  double intercept = 0;
  std::vector<double> feature_mean;
  std::vector<double> feature_std;
  bool rank_deficient = false;
};

// Ordinary least squares predicting cer_ood from standardized features. The
// normal equations are solved exactly through eigen_symmetric; rank-deficient
// designs fall back to the pseudo-inverse and set the flag.
RegressionModel fit_ood_regressor(const MetricsTable& table,
                                  const std::vector<std::string>& features = label_free_features());

double predict_ood(const RegressionModel& model, const MetricsRow& row);

struct RegressionEvaluation {
  double mae = 0;
  double mse = 0;
  std::vector<double> abs_residuals;  // |prediction - cer_ood|, one per table row
};

// Leave-one-target-domain-out: for every distinct target, fit on all rows with
// a different target and predict the held-out rows.
RegressionEvaluation evaluate_regressor(const MetricsTable& table,
                                        const std::vector<std::string>& features =
                                            label_free_features());

// Cumulative share (percent) of residuals in buckets [0,w), [w,2w), ... The
// last entry is exactly 100. Throws DataError on empty or negative input.
std::vector<double> residual_distribution(const std::vector<double>& abs_residuals,
                                          double bucket_width = 5.0);

}  // namespace oodlab
