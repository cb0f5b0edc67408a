#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "oodlab/errors.hpp"

namespace oodlab {

// One line of a recognition run: what the model saw, what it should have read,
// what it read, and (optionally) a per-character confidence for the hypothesis.
struct PredictionRecord {
  std::string sample_id;
  std::string reference;   // UTF-8
  std::string hypothesis;  // UTF-8
  std::optional<std::vector<double>> confidences;  // one value per hypothesis code point
};

// Unit-cost edit distance (insert / delete / substitute) between two sequences.
template <class T>
std::size_t levenshtein(const std::vector<T>& a, const std::vector<T>& b) {
  const std::size_t n = a.size(), m = b.size();
  if (n == 0) return m;
  if (m == 0) return n;
  std::vector<std::size_t> prev(m + 1), cur(m + 1);
  for (std::size_t j = 0; j <= m; ++j) prev[j] = j;
  for (std::size_t i = 1; i <= n; ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= m; ++j) {
      const std::size_t sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      cur[j] = std::min({sub, prev[j] + 1, cur[j - 1] + 1});
    }
    std::swap(prev, cur);
  }
  return prev[m];
}

// Edit distance over Unicode code points of two UTF-8 strings.
std::size_t levenshtein_utf8(std::string_view a, std::string_view b);

std::vector<char32_t> decode_codepoints(std::string_view utf8);
std::vector<std::string> split_words(std::string_view text);  // whitespace runs collapse

// Pooled (micro-averaged) character error rate in percent:
// 100 * sum(edit distances) / sum(reference lengths). Lengths count code points.
// Throws DataError when records are empty or every reference is empty.
double corpus_cer(const std::vector<PredictionRecord>& records);

// Pooled word error rate in percent over whitespace tokens. Can exceed 100 when
// hypotheses carry more errors than the references have words.
double corpus_wer(const std::vector<PredictionRecord>& records);

// One step of the minimum-edit alignment between reference and hypothesis.
struct AlignOp {
  enum Kind { Match, Substitute, Insert, Delete } kind;
  int ref_index;  // -1 for Insert
  int hyp_index;  // -1 for Delete
};

// Alignment backing the calibration metric. Traceback ties prefer
// match/substitute over insert over delete, which pins a unique alignment.
std::vector<AlignOp> align_sequences(const std::vector<char32_t>& ref,
                                     const std::vector<char32_t>& hyp);

// Expected calibration error over hypothesis characters. Characters are marked
// correct/incorrect through the edit alignment (match/substitute pairs only;
// inserted characters carry no reference position and are skipped), then pooled
// into `bins` equal-width confidence bins on [0, 1]:
//   ECE = sum_b (|B_b| / N) * |accuracy(B_b) - mean_confidence(B_b)|
// Throws DataError when a record lacks confidences or bins < 1.
double expected_calibration_error(const std::vector<PredictionRecord>& records, int bins = 15);

// Reads the tab-separated prediction log:
//   sample_id <TAB> reference <TAB> hypothesis [<TAB> comma-separated confidences]
// Confidence counts must match the hypothesis length; errors cite the line.
std::vector<PredictionRecord> load_prediction_log(const std::filesystem::path& path);

void save_prediction_log(const std::vector<PredictionRecord>& records,
                         const std::filesystem::path& path);

}  // namespace oodlab
