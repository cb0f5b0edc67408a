#include "oodlab/metrics.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>

namespace oodlab {

std::vector<char32_t> decode_codepoints(std::string_view utf8) {
  std::vector<char32_t> out;
  std::size_t i = 0;
  while (i < utf8.size()) {
    const unsigned char b0 = static_cast<unsigned char>(utf8[i]);
    std::size_t len = 1;
    char32_t cp = b0;
    if (b0 >= 0xF0) {
      len = 4;
      cp = b0 & 0x07;
    } else if (b0 >= 0xE0) {
      len = 3;
      cp = b0 & 0x0F;
    } else if (b0 >= 0xC0) {
      len = 2;
      cp = b0 & 0x1F;
    }
    if (len == 1) {
      out.push_back(cp);
      ++i;
      continue;
    }
    if (i + len > utf8.size()) {
      out.push_back(0xFFFD);
      ++i;
      continue;
    }
    bool ok = true;
    for (std::size_t k = 1; k < len; ++k) {
      const unsigned char b = static_cast<unsigned char>(utf8[i + k]);
      if ((b & 0xC0) != 0x80) {
        ok = false;
        break;
      }
      cp = (cp << 6) | (b & 0x3F);
    }
    if (!ok) {
      out.push_back(0xFFFD);
      ++i;
    } else {
      out.push_back(cp);
      i += len;
    }
  }
  return out;
}

std::size_t levenshtein_utf8(std::string_view a, std::string_view b) {
  return levenshtein(decode_codepoints(a), decode_codepoints(b));
}

std::vector<std::string> split_words(std::string_view text) {
  std::vector<std::string> words;
  std::string cur;
  for (char c : text) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      if (!cur.empty()) {
        words.push_back(cur);
        cur.clear();
      }
    } else {
      cur.push_back(c);
    }
  }
  if (!cur.empty()) words.push_back(cur);
  return words;
}

double corpus_cer(const std::vector<PredictionRecord>& records) {
  if (records.empty()) throw DataError("corpus_cer: no records");
  std::size_t edits = 0, ref_len = 0;
  for (const PredictionRecord& r : records) {
    const auto ref = decode_codepoints(r.reference);
    const auto hyp = decode_codepoints(r.hypothesis);
    edits += levenshtein(ref, hyp);
    ref_len += ref.size();
  }
  if (ref_len == 0) throw DataError("corpus_cer: all references are empty");
  return 100.0 * static_cast<double>(edits) / static_cast<double>(ref_len);
}

double corpus_wer(const std::vector<PredictionRecord>& records) {
  if (records.empty()) throw DataError("corpus_wer: no records");
  std::size_t edits = 0, ref_len = 0;
  for (const PredictionRecord& r : records) {
    const auto ref = split_words(r.reference);
    const auto hyp = split_words(r.hypothesis);
    edits += levenshtein(ref, hyp);
    ref_len += ref.size();
  }
  if (ref_len == 0) throw DataError("corpus_wer: all references are empty");
  return 100.0 * static_cast<double>(edits) / static_cast<double>(ref_len);
}

std::vector<AlignOp> align_sequences(const std::vector<char32_t>& ref,
                                     const std::vector<char32_t>& hyp) {
  const std::size_t n = ref.size(), m = hyp.size();
  std::vector<std::vector<std::size_t>> d(n + 1, std::vector<std::size_t>(m + 1));
  for (std::size_t i = 0; i <= n; ++i) d[i][0] = i;
  for (std::size_t j = 0; j <= m; ++j) d[0][j] = j;
  for (std::size_t i = 1; i <= n; ++i) {
    for (std::size_t j = 1; j <= m; ++j) {
      const std::size_t sub = d[i - 1][j - 1] + (ref[i - 1] == hyp[j - 1] ? 0 : 1);
      d[i][j] = std::min({sub, d[i][j - 1] + 1, d[i - 1][j] + 1});
    }
  }

  // Traceback, preferring diagonal (match/substitute), then insert, then delete.
  std::vector<AlignOp> ops;
  std::size_t i = n, j = m;
  while (i > 0 || j > 0) {
    if (i > 0 && j > 0 &&
        d[i][j] == d[i - 1][j - 1] + (ref[i - 1] == hyp[j - 1] ? 0 : 1)) {
      ops.push_back({ref[i - 1] == hyp[j - 1] ? AlignOp::Match : AlignOp::Substitute,
                     static_cast<int>(i) - 1, static_cast<int>(j) - 1});
      --i;
      --j;
    } else if (j > 0 && d[i][j] == d[i][j - 1] + 1) {
      ops.push_back({AlignOp::Insert, -1, static_cast<int>(j) - 1});
      --j;
    } else {
      ops.push_back({AlignOp::Delete, static_cast<int>(i) - 1, -1});
      --i;
    }
  }
  std::reverse(ops.begin(), ops.end());
  return ops;
}

double expected_calibration_error(const std::vector<PredictionRecord>& records, int bins) {
  if (bins < 1) throw DataError("expected_calibration_error: bins must be >= 1");
  if (records.empty()) throw DataError("expected_calibration_error: no records");

  std::vector<std::size_t> count(static_cast<std::size_t>(bins), 0);
  std::vector<double> conf_sum(static_cast<std::size_t>(bins), 0.0);
  std::vector<std::size_t> correct(static_cast<std::size_t>(bins), 0);
  std::size_t total = 0;

  for (const PredictionRecord& r : records) {
    if (!r.confidences.has_value()) {
      throw DataError("expected_calibration_error: record '" + r.sample_id +
                      "' has no confidences");
    }
    const auto ref = decode_codepoints(r.reference);
    const auto hyp = decode_codepoints(r.hypothesis);
    if (r.confidences->size() != hyp.size()) {
      throw DataError("expected_calibration_error: record '" + r.sample_id +
                      "': confidence count does not match hypothesis length");
    }
    for (const AlignOp& op : align_sequences(ref, hyp)) {
      if (op.kind != AlignOp::Match && op.kind != AlignOp::Substitute) continue;
      const double conf = (*r.confidences)[static_cast<std::size_t>(op.hyp_index)];
      if (!(conf >= 0.0 && conf <= 1.0)) {
        throw DataError("expected_calibration_error: record '" + r.sample_id +
                        "': confidence outside [0, 1]");
      }
      int b = static_cast<int>(conf * bins);
      if (b == bins) b = bins - 1;  // confidence exactly 1.0 lands in the top bin
      count[b] += 1;
      conf_sum[b] += conf;
      correct[b] += (op.kind == AlignOp::Match) ? 1 : 0;
      ++total;
    }
  }

  if (total == 0) return 0.0;  // nothing aligned (e.g. all hypotheses empty)
  double ece = 0.0;
  for (int b = 0; b < bins; ++b) {
    if (count[b] == 0) continue;
    const double acc = static_cast<double>(correct[b]) / count[b];
    const double conf = conf_sum[b] / count[b];
    ece += (static_cast<double>(count[b]) / total) * std::abs(acc - conf);
  }
  return ece;
}

namespace {

std::vector<std::string> split_on(const std::string& line, char sep) {
  std::vector<std::string> fields;
  std::string cur;
  for (char c : line) {
    if (c == sep) {
      fields.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  fields.push_back(cur);
  return fields;
}

}  // namespace

std::vector<PredictionRecord> load_prediction_log(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError(path.string() + ": cannot open");
  std::vector<PredictionRecord> records;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto fields = split_on(line, '\t');
    if (fields.size() != 3 && fields.size() != 4) {
      throw DataError(path.string() + ":" + std::to_string(lineno) +
                      ": expected 3 or 4 tab-separated fields, got " +
                      std::to_string(fields.size()));
    }
    PredictionRecord rec;
    rec.sample_id = fields[0];
    rec.reference = fields[1];
    rec.hypothesis = fields[2];
    if (rec.sample_id.empty()) {
      throw DataError(path.string() + ":" + std::to_string(lineno) + ": empty sample id");
    }
    if (fields.size() == 4) {
      std::vector<double> confs;
      if (!fields[3].empty()) {
        for (const std::string& tok : split_on(fields[3], ',')) {
          try {
            std::size_t used = 0;
            const double v = std::stod(tok, &used);
            if (used != tok.size()) throw std::invalid_argument(tok);
            confs.push_back(v);
          } catch (const std::exception&) {
            throw DataError(path.string() + ":" + std::to_string(lineno) +
                            ": bad confidence value '" + tok + "'");
          }
        }
      }
      const std::size_t hyp_len = decode_codepoints(rec.hypothesis).size();
      if (confs.size() != hyp_len) {
        throw DataError(path.string() + ":" + std::to_string(lineno) + ": " +
                        std::to_string(confs.size()) + " confidences for " +
                        std::to_string(hyp_len) + " hypothesis characters");
      }
      for (double v : confs) {
        if (!(v >= 0.0 && v <= 1.0)) {
          throw DataError(path.string() + ":" + std::to_string(lineno) +
                          ": confidence outside [0, 1]");
        }
      }
      rec.confidences = std::move(confs);
    }
    records.push_back(std::move(rec));
  }
  return records;
}

void save_prediction_log(const std::vector<PredictionRecord>& records,
                         const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError(path.string() + ": cannot open for writing");
  for (const PredictionRecord& r : records) {
    for (const std::string* s : {&r.sample_id, &r.reference, &r.hypothesis}) {
      if (s->find('\t') != std::string::npos || s->find('\n') != std::string::npos) {
        throw DataError("save_prediction_log: field contains tab or newline");
      }
    }
    out << r.sample_id << '\t' << r.reference << '\t' << r.hypothesis;
    if (r.confidences.has_value()) {
      out << '\t';
      for (std::size_t i = 0; i < r.confidences->size(); ++i) {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%.6f", (*r.confidences)[i]);
        out << (i ? "," : "") << buf;
      }
    }
    out << '\n';
  }
  if (!out) throw DataError(path.string() + ": write failed");
}

}  // namespace oodlab
