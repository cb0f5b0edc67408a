#include "oodlab/ngram.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

namespace oodlab {

NgramModel fit_ngrams(const std::vector<std::string>& corpus, int order, double alpha) {
  if (corpus.empty()) throw DataError("fit_ngrams: empty corpus");
  if (order < 1) throw DataError("fit_ngrams: order must be >= 1");
  if (alpha < 0.0) throw DataError("fit_ngrams: negative smoothing");
  NgramModel m;
  m.order = order;
  m.alpha = alpha;
  for (const std::string& line : corpus) {
    if (static_cast<int>(line.size()) < order) continue;
    for (std::size_t i = 0; i + order <= line.size(); ++i) {
      ++m.counts[line.substr(i, static_cast<std::size_t>(order))];
      ++m.total;
    }
  }
  return m;
}

double kl_divergence(const NgramModel& p, const NgramModel& q) {
  if (p.order != q.order) {
    throw DataError("kl_divergence: order mismatch (" + std::to_string(p.order) + " vs " +
                    std::to_string(q.order) + ")");
  }

  // Union support; both maps are ordered, so the merged key set is deterministic.
  std::set<std::string> support;
  for (const auto& [k, _] : p.counts) support.insert(k);
  for (const auto& [k, _] : q.counts) support.insert(k);
  if (support.empty()) return 0.0;  // neither corpus produced n-grams at this order

  const double u = static_cast<double>(support.size());
  const double p_denom = static_cast<double>(p.total) + p.alpha * u;
  const double q_denom = static_cast<double>(q.total) + q.alpha * u;
  if (p_denom <= 0.0 || q_denom <= 0.0) {
    throw NumericError("kl_divergence: empty model with zero smoothing");
  }

  double kl = 0.0;
  for (const std::string& g : support) {
    auto pit = p.counts.find(g);
    auto qit = q.counts.find(g);
    const double pc = (pit == p.counts.end() ? 0.0 : static_cast<double>(pit->second));
    const double qc = (qit == q.counts.end() ? 0.0 : static_cast<double>(qit->second));
    const double pj = (pc + p.alpha) / p_denom;
    const double qj = (qc + q.alpha) / q_denom;
    if (pj == 0.0) continue;  // 0 * log(0/q) contributes nothing
    if (qj == 0.0) return std::numeric_limits<double>::infinity();  // only possible at alpha == 0
    kl += pj * std::log(pj / qj);
  }
  return kl;
}

double textual_divergence(const std::vector<std::string>& source,
                          const std::vector<std::string>& target, int max_order, double alpha) {
  if (max_order < 1) throw DataError("textual_divergence: max_order must be >= 1");
  if (source.empty() || target.empty()) throw DataError("textual_divergence: empty corpus");
  double sum = 0.0;
  for (int n = 1; n <= max_order; ++n) {
    sum += kl_divergence(fit_ngrams(source, n, alpha), fit_ngrams(target, n, alpha));
  }
  return sum / max_order;
}

void normalize_offdiagonal(NamedMatrix& m) {
  const int n = m.values.rows;
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (i == j) continue;
      lo = std::min(lo, m.values(i, j));
      hi = std::max(hi, m.values(i, j));
    }
  }
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (i == j) continue;
      m.values(i, j) = (hi > lo) ? 100.0 * (m.values(i, j) - lo) / (hi - lo) : 0.0;
    }
  }
}

NamedMatrix divergence_matrix(const std::vector<std::vector<std::string>>& corpora,
                              const std::vector<std::string>& names, bool normalize,
                              int max_order, double alpha) {
  if (corpora.size() < 2) throw DataError("divergence_matrix: need at least 2 corpora");
  if (names.size() != corpora.size()) throw DataError("divergence_matrix: names/corpora mismatch");
  const int n = static_cast<int>(corpora.size());

  // Fit each corpus once per order instead of refitting per pair.
  std::vector<std::vector<NgramModel>> models(corpora.size());
  for (std::size_t i = 0; i < corpora.size(); ++i) {
    if (corpora[i].empty()) throw DataError("divergence_matrix: corpus '" + names[i] + "' is empty");
    for (int ord = 1; ord <= max_order; ++ord) {
      models[i].push_back(fit_ngrams(corpora[i], ord, alpha));
    }
  }

  NamedMatrix out;
  out.names = names;
  out.values = Matrix(n, n, 0.0);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (i == j) continue;  // divergence of a corpus against itself is exactly 0
      double sum = 0.0;
      for (int ord = 0; ord < max_order; ++ord) {
        sum += kl_divergence(models[i][ord], models[j][ord]);
      }
      out.values(i, j) = sum / max_order;
    }
  }
  if (normalize) normalize_offdiagonal(out);
  return out;
}

}  // namespace oodlab
