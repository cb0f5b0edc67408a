#include "oodlab/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "oodlab/rng.hpp"

namespace oodlab {

namespace {
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
}

const std::vector<std::string>& metric_column_names() {
  static const std::vector<std::string> names = {
      "params_millions", "cer_id",  "cer_ood", "ece_id",  "ece_ood",
      "delta_s",         "delta_t", "delta_l", "delta_gt"};
  return names;
}

double& metric_ref(MetricsRow& row, const std::string& column) {
  if (column == "params_millions") return row.params_millions;
  if (column == "cer_id") return row.cer_id;
  if (column == "cer_ood") return row.cer_ood;
  if (column == "ece_id") return row.ece_id;
  if (column == "ece_ood") return row.ece_ood;
  if (column == "delta_s") return row.delta_s;
  if (column == "delta_t") return row.delta_t;
  if (column == "delta_l") return row.delta_l;
  if (column == "delta_gt") return row.delta_gt;
  throw DataError("unknown metric column '" + column + "'");
}

double metric_value(const MetricsRow& row, const std::string& column) {
  return metric_ref(const_cast<MetricsRow&>(row), column);
}

// ---------------------------------------------------------------------------
// Factor analysis
// ---------------------------------------------------------------------------

Standardized standardize(const MetricsTable& table, const std::vector<std::string>& columns) {
  const int n = static_cast<int>(table.rows.size());
  const int p = static_cast<int>(columns.size());
  if (n < 2) throw DataError("standardize: need at least 2 rows");
  if (p < 1) throw DataError("standardize: no columns given");

  Standardized s;
  s.columns = columns;
  s.z = Matrix(n, p);
  s.mean.resize(p);
  s.stddev.resize(p);
  for (int j = 0; j < p; ++j) {
    double mean = 0.0;
    for (int i = 0; i < n; ++i) mean += metric_value(table.rows[i], columns[j]);
    mean /= n;
    double ss = 0.0;
    for (int i = 0; i < n; ++i) {
      const double d = metric_value(table.rows[i], columns[j]) - mean;
      ss += d * d;
    }
    const double sd = std::sqrt(ss / (n - 1));
    if (!(sd > 0.0)) throw DataError("standardize: zero-variance column '" + columns[j] + "'");
    s.mean[j] = mean;
    s.stddev[j] = sd;
    for (int i = 0; i < n; ++i) {
      s.z(i, j) = (metric_value(table.rows[i], columns[j]) - mean) / sd;
    }
  }
  return s;
}

Matrix correlation_matrix(const Standardized& s) {
  const int n = s.z.rows;
  const int p = s.z.cols;
  Matrix r(p, p);
  for (int a = 0; a < p; ++a) {
    for (int b = a; b < p; ++b) {
      double acc = 0.0;
      for (int i = 0; i < n; ++i) acc += s.z(i, a) * s.z(i, b);
      acc /= (n - 1);
      acc = std::clamp(acc, -1.0, 1.0);
      r(a, b) = r(b, a) = acc;
    }
    r(a, a) = 1.0;
  }
  return r;
}

int retain_factors(const std::vector<double>& eigenvalues) {
  int k = 0;
  for (double v : eigenvalues) {
    if (v >= 1.0) ++k;
  }
  return k;
}

Matrix principal_loadings(const EigenResult& eig, int k) {
  const int p = eig.vectors.rows;
  if (k < 1 || k > p) throw DataError("principal_loadings: bad factor count");
  Matrix l(p, k);
  for (int j = 0; j < k; ++j) {
    const double w = std::sqrt(std::max(eig.values[j], 0.0));
    // Sign convention: largest-magnitude entry of the column is positive.
    int arg = 0;
    for (int i = 1; i < p; ++i) {
      if (std::abs(eig.vectors(i, j)) > std::abs(eig.vectors(arg, j))) arg = i;
    }
    const double sign = eig.vectors(arg, j) < 0.0 ? -1.0 : 1.0;
    for (int i = 0; i < p; ++i) l(i, j) = sign * w * eig.vectors(i, j);
  }
  return l;
}

double rotation_criterion(const Matrix& loadings) {
  double s2 = 0.0, s4 = 0.0;
  for (double v : loadings.data) {
    const double q = v * v;
    s2 += q;
    s4 += q * q;
  }
  if (!(s2 > 0.0) || !(s4 > 0.0)) throw NumericError("rotation_criterion: degenerate loadings");
  return std::log(s4) - 2.0 * std::log(s2);
}

namespace {

// Gradient of the rotation criterion with respect to the rotated loadings.
Matrix criterion_gradient(const Matrix& lam) {
  double s2 = 0.0, s4 = 0.0;
  for (double v : lam.data) {
    const double q = v * v;
    s2 += q;
    s4 += q * q;
  }
  Matrix g(lam.rows, lam.cols);
  for (std::size_t i = 0; i < lam.data.size(); ++i) {
    const double v = lam.data[i];
    g.data[i] = 4.0 * v * v * v / s4 - 4.0 * v / s2;
  }
  return g;
}

struct AscentRun {
  Matrix rotation;
  double q = 0;
  std::vector<double> trace;
  bool converged = false;
};

// One projected-gradient ascent from the given starting rotation. The raw
// criterion gradient is projected onto the tangent space of the orthogonal
// group at the current rotation (its normal component only distorts the polar
// pullback and strangles the step size), the step is taken along that tangent
// direction, and the result is pulled back onto the group through the polar
// factor; only improving steps are kept.
AscentRun ascend(const Matrix& l, Matrix t0) {
  AscentRun run;
  run.rotation = std::move(t0);
  Matrix lam = matmul(l, run.rotation);
  run.q = rotation_criterion(lam);
  run.trace.push_back(run.q);

  const Matrix lt = transpose(l);
  const int k = l.cols;
  double step = 1.0;
  const int max_iter = 600;
  for (int iter = 0; iter < max_iter; ++iter) {
    const Matrix g = matmul(lt, criterion_gradient(lam));
    // Tangent vectors at T are T*A with A skew-symmetric; steepest ascent uses
    // the skew part of T^T g.
    const Matrix tg = matmul(transpose(run.rotation), g);
    Matrix skew(k, k);
    for (int i = 0; i < k; ++i) {
      for (int j = 0; j < k; ++j) skew(i, j) = 0.5 * (tg(i, j) - tg(j, i));
    }
    const Matrix grad_t = matmul(run.rotation, skew);

    // Retraction of a step of size s; q is NaN when the polar factor fails.
    struct Trial {
      Matrix rotation;
      Matrix lam;
      double q;
    };
    auto retract = [&](double s) -> Trial {
      Matrix cand = run.rotation;
      for (std::size_t i = 0; i < cand.data.size(); ++i) {
        cand.data[i] += s * grad_t.data[i];
      }
      try {
        cand = polar_orthogonal(cand);
      } catch (const NumericError&) {
        return {Matrix(), Matrix(), kNaN};
      }
      Matrix cand_lam = matmul(l, cand);
      const double cand_q = rotation_criterion(cand_lam);
      return {std::move(cand), std::move(cand_lam), cand_q};
    };

    bool accepted = false;
    for (int halving = 0; halving < 48 && !accepted; ++halving) {
      Trial best = retract(step);
      if (!(best.q > run.q)) {  // also covers the NaN case
        step *= 0.5;
        continue;
      }
      // The first improving step can massively overshoot around the curved
      // group (the retraction saturates for large steps), which locks the
      // search into a slow reflect-across-the-optimum oscillation. Keep
      // halving while that strictly improves the candidate.
      for (int refine = 0; refine < 48; ++refine) {
        Trial smaller = retract(step * 0.5);
        if (!(smaller.q > best.q)) break;
        step *= 0.5;
        best = std::move(smaller);
      }
      const double gain = best.q - run.q;
      run.rotation = std::move(best.rotation);
      lam = std::move(best.lam);
      run.q = best.q;
      run.trace.push_back(best.q);
      accepted = true;
      step *= 2.0;  // be greedier next time
      if (gain < 1e-14 * (1.0 + std::abs(run.q))) {
        run.converged = true;
        return run;
      }
    }
    if (!accepted) {  // no improving step exists at any scale: stationary point
      run.converged = true;
      return run;
    }
  }
  return run;  // hit the iteration cap; converged stays false
}

Matrix random_orthogonal(int k, Rng& rng) {
  Matrix m(k, k);
  for (double& v : m.data) v = rng.gaussian();
  return polar_orthogonal(m);
}

}  // namespace

RotationResult rotate_loadings(const Matrix& loadings, std::uint64_t seed) {
  if (loadings.rows < 1 || loadings.cols < 1) throw DataError("rotate_loadings: empty loadings");
  const int k = loadings.cols;

  RotationResult res;
  if (k == 1) {  // a single factor admits no rotation
    res.loadings = loadings;
    res.rotation = Matrix::identity(1);
    res.criterion_trace = {rotation_criterion(loadings)};
    res.converged = true;
    return res;
  }

  // Multi-start: the identity plus a few random rotations guard against
  // starting on a stationary ridge. Later starts must beat the incumbent by a
  // real margin, so the identity start wins all ties.
  AscentRun best = ascend(loadings, Matrix::identity(k));
  Rng rng(mix_seed(seed, 0x6f626c78));
  for (int s = 0; s < 4; ++s) {
    AscentRun run = ascend(loadings, random_orthogonal(k, rng));
    if (run.q > best.q + 1e-10) best = std::move(run);
  }

  res.rotation = best.rotation;
  res.loadings = matmul(loadings, best.rotation);
  res.criterion_trace = best.trace;
  res.converged = best.converged;
  return res;
}

FactorModel factor_analysis(const MetricsTable& table, const std::vector<std::string>& columns,
                            std::uint64_t seed) {
  FactorModel fm;
  fm.columns = columns;
  const Standardized s = standardize(table, columns);
  const Matrix corr = correlation_matrix(s);
  const EigenResult eig = eigen_symmetric(corr);
  fm.eigenvalues = eig.values;
  fm.retained = retain_factors(eig.values);
  // A correlation matrix has trace p, so its largest eigenvalue is >= 1 and at
  // least one factor always survives the threshold.
  fm.loadings = principal_loadings(eig, fm.retained);
  RotationResult rot = rotate_loadings(fm.loadings, seed);
  fm.rotated_loadings = std::move(rot.loadings);
  fm.rotation = std::move(rot.rotation);
  fm.criterion_trace = std::move(rot.criterion_trace);
  fm.rotation_converged = rot.converged;
  return fm;
}

// ---------------------------------------------------------------------------
// Checkpoint selection
// ---------------------------------------------------------------------------

SelectionStrategy parse_strategy(const std::string& name) {
  if (name == "no-selection") return SelectionStrategy::NoSelection;
  if (name == "heldout") return SelectionStrategy::Heldout;
  if (name == "oracle") return SelectionStrategy::Oracle;
  throw DataError("unknown selection strategy '" + name +
                  "' (want no-selection, heldout or oracle)");
}

std::string strategy_name(SelectionStrategy s) {
  switch (s) {
    case SelectionStrategy::NoSelection: return "no-selection";
    case SelectionStrategy::Heldout: return "heldout";
    case SelectionStrategy::Oracle: return "oracle";
  }
  return "?";
}

std::string select_model(const std::vector<ValRecord>& records, SelectionStrategy strategy,
                         const std::string& domain) {
  if (records.empty()) throw DataError("select_model: no records");
  if (domain.empty()) throw DataError("select_model: empty domain");

  // Checkpoints keep their first-appearance order; that order breaks ties.
  std::vector<std::string> checkpoints;
  std::map<std::string, std::map<std::string, double>> by_ckpt;  // ckpt -> domain -> cer
  for (const ValRecord& r : records) {
    auto [it, inserted] = by_ckpt[r.checkpoint].emplace(r.domain, r.val_cer);
    (void)it;
    if (!inserted) {
      throw DataError("select_model: duplicate record for checkpoint '" + r.checkpoint +
                      "', domain '" + r.domain + "'");
    }
    if (by_ckpt[r.checkpoint].size() == 1) checkpoints.push_back(r.checkpoint);
  }

  std::string best;
  double best_score = std::numeric_limits<double>::infinity();
  for (const std::string& ckpt : checkpoints) {
    const auto& dom_map = by_ckpt[ckpt];
    double score;
    if (strategy == SelectionStrategy::Heldout) {
      double sum = 0.0;
      int cnt = 0;
      for (const auto& [dom, cer] : dom_map) {
        if (dom == domain) continue;
        sum += cer;
        ++cnt;
      }
      if (cnt == 0) continue;
      score = sum / cnt;
    } else {
      auto it = dom_map.find(domain);
      if (it == dom_map.end()) continue;
      score = it->second;
    }
    if (score < best_score) {
      best_score = score;
      best = ckpt;
    }
  }
  if (best.empty()) {
    throw DataError("select_model: strategy '" + strategy_name(strategy) +
                    "' has no usable validation records for domain '" + domain + "'");
  }
  return best;
}

// ---------------------------------------------------------------------------
// Cross-domain summary
// ---------------------------------------------------------------------------

namespace {
int index_of(const std::vector<std::string>& names, const std::string& name,
             const std::string& what) {
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (names[i] == name) return static_cast<int>(i);
  }
  throw DataError("unknown " + what + " '" + name + "'");
}
}  // namespace

double CrossTable::value(const std::string& source, const std::string& target) const {
  return values(index_of(sources, source, "source"), index_of(targets, target, "target"));
}

BestSource best_source(const CrossTable& table, const std::string& target) {
  const int col = index_of(table.targets, target, "target");
  BestSource best;
  best.cer = std::numeric_limits<double>::infinity();
  bool found = false;
  for (std::size_t i = 0; i < table.sources.size(); ++i) {
    if (table.sources[i] == target) continue;
    const double v = table.values(static_cast<int>(i), col);
    if (std::isnan(v)) continue;
    if (v < best.cer) {
      best.cer = v;
      best.source = table.sources[i];
      found = true;
    }
  }
  if (!found) throw DataError("best_source: no out-of-domain entries for target '" + target + "'");
  return best;
}

ModelSummary aggregate_summary(const std::string& model, const CrossTable& table,
                               const std::set<std::string>& outlier_targets) {
  ModelSummary ms;
  ms.model = model;
  double sum_id = 0.0, sum_ood = 0.0;
  int kept = 0;
  for (const std::string& target : table.targets) {
    TargetSummary ts;
    ts.target = target;
    ts.cer_id = table.value(target, target);
    if (std::isnan(ts.cer_id)) {
      throw DataError("aggregate_summary: missing in-domain entry for '" + target + "'");
    }
    const BestSource bs = best_source(table, target);
    ts.cer_ood = bs.cer;
    ts.source = bs.source;
    ts.gap = ts.cer_ood - ts.cer_id;
    ts.outlier = outlier_targets.count(target) > 0;
    if (!ts.outlier) {
      sum_id += ts.cer_id;
      sum_ood += ts.cer_ood;
      ++kept;
    }
    ms.rows.push_back(std::move(ts));
  }
  if (kept == 0) throw DataError("aggregate_summary: every target is marked as an outlier");
  ms.mean_id = sum_id / kept;
  ms.mean_ood = sum_ood / kept;
  ms.mean_gap = ms.mean_ood - ms.mean_id;
  return ms;
}

// ---------------------------------------------------------------------------
// OOD-error regression
// ---------------------------------------------------------------------------

const std::vector<std::string>& label_free_features() {
  static const std::vector<std::string> names = {"cer_id",  "ece_id",  "params_millions",
                                                 "delta_s", "delta_t", "delta_l"};
  return names;
}

RegressionModel fit_ood_regressor(const MetricsTable& table,
                                  const std::vector<std::string>& features) {
  const int n = static_cast<int>(table.rows.size());
  const int p = static_cast<int>(features.size());
  if (p < 1) throw DataError("fit_ood_regressor: no features");
  if (n < p + 1) {
    throw DataError("fit_ood_regressor: need at least " + std::to_string(p + 1) + " rows, got " +
                    std::to_string(n));
  }

  RegressionModel model;
  model.features = features;
  model.feature_mean.resize(p);
  model.feature_std.resize(p);

  // Standardize features; constant columns get std 1 so their z-scores vanish
  // and the pseudo-inverse below zeroes their coefficients.
  Matrix z(n, p);
  for (int j = 0; j < p; ++j) {
    double mean = 0.0;
    for (int i = 0; i < n; ++i) mean += metric_value(table.rows[i], features[j]);
    mean /= n;
    double ss = 0.0;
    for (int i = 0; i < n; ++i) {
      const double d = metric_value(table.rows[i], features[j]) - mean;
      ss += d * d;
    }
    double sd = std::sqrt(ss / (n - 1));
    if (!(sd > 0.0)) {
      sd = 1.0;
      model.rank_deficient = true;
    }
    model.feature_mean[j] = mean;
    model.feature_std[j] = sd;
    for (int i = 0; i < n; ++i) {
      z(i, j) = (metric_value(table.rows[i], features[j]) - mean) / sd;
    }
  }

  // Exact normal equations on the design [1 | Z]; the symmetric system is
  // solved through the eigendecomposition, clipping tiny eigenvalues to get the
  // pseudo-inverse when the design is rank deficient.
  const int d = p + 1;
  Matrix ata(d, d, 0.0);
  std::vector<double> aty(d, 0.0);
  for (int i = 0; i < n; ++i) {
    std::vector<double> xi(d);
    xi[0] = 1.0;
    for (int j = 0; j < p; ++j) xi[j + 1] = z(i, j);
    const double y = table.rows[i].cer_ood;
    for (int a = 0; a < d; ++a) {
      aty[a] += xi[a] * y;
      for (int b = 0; b < d; ++b) ata(a, b) += xi[a] * xi[b];
    }
  }

  const EigenResult eig = eigen_symmetric(ata);
  const double lmax = std::max(eig.values.front(), 0.0);
  const double tol = lmax * d * 1e-12;
  std::vector<double> beta(d, 0.0);
  for (int k = 0; k < d; ++k) {
    const double lam = eig.values[k];
    if (lam <= tol) {
      model.rank_deficient = true;
      continue;
    }
    double proj = 0.0;
    for (int a = 0; a < d; ++a) proj += eig.vectors(a, k) * aty[a];
    proj /= lam;
    for (int a = 0; a < d; ++a) beta[a] += proj * eig.vectors(a, k);
  }

  model.intercept = beta[0];
  model.coefficients.assign(beta.begin() + 1, beta.end());
  return model;
}

double predict_ood(const RegressionModel& model, const MetricsRow& row) {
  double y = model.intercept;
  for (std::size_t j = 0; j < model.features.size(); ++j) {
    const double zj =
        (metric_value(row, model.features[j]) - model.feature_mean[j]) / model.feature_std[j];
    y += model.coefficients[j] * zj;
  }
  return y;
}

RegressionEvaluation evaluate_regressor(const MetricsTable& table,
                                        const std::vector<std::string>& features) {
  std::set<std::string> targets;
  for (const MetricsRow& row : table.rows) targets.insert(row.target);
  if (targets.size() < 2) {
    throw DataError("evaluate_regressor: need at least 2 distinct target domains");
  }

  RegressionEvaluation ev;
  ev.abs_residuals.assign(table.rows.size(), 0.0);
  for (const std::string& held_out : targets) {
    MetricsTable train;
    for (const MetricsRow& row : table.rows) {
      if (row.target != held_out) train.rows.push_back(row);
    }
    const RegressionModel model = fit_ood_regressor(train, features);
    for (std::size_t i = 0; i < table.rows.size(); ++i) {
      if (table.rows[i].target != held_out) continue;
      ev.abs_residuals[i] = std::abs(predict_ood(model, table.rows[i]) - table.rows[i].cer_ood);
    }
  }

  double sum = 0.0, sumsq = 0.0;
  for (double r : ev.abs_residuals) {
    sum += r;
    sumsq += r * r;
  }
  ev.mae = sum / static_cast<double>(ev.abs_residuals.size());
  ev.mse = sumsq / static_cast<double>(ev.abs_residuals.size());
  return ev;
}

std::vector<double> residual_distribution(const std::vector<double>& abs_residuals,
                                          double bucket_width) {
  if (abs_residuals.empty()) throw DataError("residual_distribution: no residuals");
  if (!(bucket_width > 0.0)) throw DataError("residual_distribution: bucket width must be > 0");
  double maxr = 0.0;
  for (double r : abs_residuals) {
    if (r < 0.0) throw DataError("residual_distribution: negative residual");
    maxr = std::max(maxr, r);
  }
  const int buckets = static_cast<int>(maxr / bucket_width) + 1;
  std::vector<std::size_t> count(static_cast<std::size_t>(buckets), 0);
  for (double r : abs_residuals) {
    int b = static_cast<int>(r / bucket_width);
    if (b >= buckets) b = buckets - 1;  // r == maxr on the boundary
    ++count[static_cast<std::size_t>(b)];
  }
  std::vector<double> cumulative(static_cast<std::size_t>(buckets), 0.0);
  std::size_t acc = 0;
  for (int b = 0; b < buckets; ++b) {
    acc += count[static_cast<std::size_t>(b)];
    cumulative[static_cast<std::size_t>(b)] =
        100.0 * static_cast<double>(acc) / static_cast<double>(abs_residuals.size());
  }
  return cumulative;
}

}  // namespace oodlab
