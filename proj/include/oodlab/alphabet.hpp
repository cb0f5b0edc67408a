#pragma once

#include <array>
#include <string>
#include <string_view>
#include <vector>

#include "oodlab/manifest.hpp"

namespace oodlab {

// Transcript symbols after transliteration are single ASCII bytes; characters with
// no mapping are replaced by this sentinel byte (ASCII SUB), displayed as "[UNK]".
inline constexpr char kUnknownChar = '\x1a';

// Fixed symbol inventory shared by every domain in a study. The four control
// tokens come first, then the printable symbols sorted by code point.
struct Alphabet {
  std::vector<std::string> symbols;  // display forms: "[BOS]","[PAD]","[UNK]","[EOS]", chars
  int bos = 0;
  int pad = 1;
  int unk = 2;
  int eos = 3;

  int size() const { return static_cast<int>(symbols.size()); }
  bool contains(char c) const {
    return c == kUnknownChar || member_[static_cast<unsigned char>(c)];
  }

  static Alphabet from_chars(const std::vector<char>& chars);

 private:
  std::array<bool, 256> member_{};  // fast byte membership for normalize_text
};

// Transliterates UTF-8 text to the folded ASCII form used everywhere downstream:
// Latin letters lose their diacritics (é -> e, ß -> ss), typographic punctuation
// folds to its ASCII cousin (curly quotes, dashes, ellipsis), all whitespace
// becomes a plain space, and anything without a mapping becomes kUnknownChar.
// Idempotent: folding folded text is the identity.
std::string fold_to_ascii(std::string_view utf8);

// fold_to_ascii, then any symbol outside the alphabet also becomes kUnknownChar.
std::string normalize_text(std::string_view utf8, const Alphabet& alphabet);

// Union of transliterated symbols over all transcripts of all splits of all
// domains, with the control tokens prepended. Order-independent and idempotent.
Alphabet build_alphabet(const std::vector<DatasetManifest>& domains);

// Display helper: "[UNK]" for the sentinel byte, a one-character string otherwise.
std::string display_symbol(char c);

}  // namespace oodlab
