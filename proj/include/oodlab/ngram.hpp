#pragma once

#include <map>
#include <string>
#include <vector>

#include "oodlab/errors.hpp"
#include "oodlab/linalg.hpp"

namespace oodlab {

// Character n-gram counts for one corpus at a single order. Probabilities are
// only ever formed at comparison time, smoothed over the union support of the
// two models being compared.
struct NgramModel {
  int order = 1;
  double alpha = 1.0;  // additive smoothing mass per support element
  long long total = 0;  // sum of all counts
  std::map<std::string, long long> counts;  // observed n-grams (keys double as the vocabulary)
};

// Counts every contiguous length-n substring of every line. Lines shorter than
// n contribute nothing. Throws DataError on an empty corpus or order < 1.
NgramModel fit_ngrams(const std::vector<std::string>& corpus, int order, double alpha = 1.0);

// KL(P || Q) in nats over the union of both models' observed n-grams, with each
// probability smoothed as (count + alpha) / (total + alpha * |union|).
// Directional: kl_divergence(p, q) != kl_divergence(q, p) in general.
// Throws DataError when the models have different orders.
double kl_divergence(const NgramModel& p, const NgramModel& q);

// Average of kl_divergence over n-gram orders 1..max_order between two corpora
// of already-normalized lines. Zero exactly when source == target.
double textual_divergence(const std::vector<std::string>& source,
                          const std::vector<std::string>& target, int max_order = 5,
                          double alpha = 1.0);

// Square matrix of pairwise textual divergences, entry (i, j) = divergence from
// corpus i to corpus j. With normalize, off-diagonal entries are affinely mapped
// to [0, 100] (min -> 0, max -> 100); diagonals stay 0 and are excluded from the
// min/max. The map is monotone, so argmin/argmax cells are unchanged.
NamedMatrix divergence_matrix(const std::vector<std::vector<std::string>>& corpora,
                              const std::vector<std::string>& names, bool normalize,
                              int max_order = 5, double alpha = 1.0);

// The affine [0, 100] rescaling used by divergence_matrix, exposed for reuse by
// other pairwise matrices (e.g. reconstruction-error grids).
void normalize_offdiagonal(NamedMatrix& m);

}  // namespace oodlab
