#include "oodlab/alphabet.hpp"

#include <algorithm>
#include <cstdint>
#include <map>
#include <set>

namespace oodlab {

namespace {

// Decodes one UTF-8 code point starting at s[i]; advances i past it.
// Malformed bytes decode as 0xFFFD (which has no fold, hence becomes [UNK]).
char32_t decode_utf8(std::string_view s, std::size_t& i) {
  const unsigned char b0 = static_cast<unsigned char>(s[i]);
  std::size_t len;
  char32_t cp;
  if (b0 < 0x80) {
    ++i;
    return b0;
  } else if ((b0 & 0xE0) == 0xC0) {
    len = 2;
    cp = b0 & 0x1F;
  } else if ((b0 & 0xF0) == 0xE0) {
    len = 3;
    cp = b0 & 0x0F;
  } else if ((b0 & 0xF8) == 0xF0) {
    len = 4;
    cp = b0 & 0x07;
  } else {
    ++i;
    return 0xFFFD;
  }
  if (i + len > s.size()) {
    ++i;
    return 0xFFFD;
  }
  for (std::size_t k = 1; k < len; ++k) {
    const unsigned char b = static_cast<unsigned char>(s[i + k]);
    if ((b & 0xC0) != 0x80) {
      ++i;
      return 0xFFFD;
    }
    cp = (cp << 6) | (b & 0x3F);
  }
  i += len;
  return cp;
}

// Fold table for everything outside printable ASCII. Covers the Latin-1
// supplement, the common Latin Extended-A letters, and typographic punctuation.
// Returns nullptr when the code point has no mapping.
const char* fold_nonascii(char32_t cp) {
  static const std::map<char32_t, const char*> table = {
      // whitespace variants
      {0x00A0, " "},  // no-break space
      {0x2002, " "}, {0x2003, " "}, {0x2009, " "}, {0x202F, " "},
      // Latin-1 supplement, uppercase
      {0x00C0, "A"}, {0x00C1, "A"}, {0x00C2, "A"}, {0x00C3, "A"}, {0x00C4, "A"}, {0x00C5, "A"},
      {0x00C6, "AE"}, {0x00C7, "C"},
      {0x00C8, "E"}, {0x00C9, "E"}, {0x00CA, "E"}, {0x00CB, "E"},
      {0x00CC, "I"}, {0x00CD, "I"}, {0x00CE, "I"}, {0x00CF, "I"},
      {0x00D0, "D"}, {0x00D1, "N"},
      {0x00D2, "O"}, {0x00D3, "O"}, {0x00D4, "O"}, {0x00D5, "O"}, {0x00D6, "O"}, {0x00D8, "O"},
      {0x00D9, "U"}, {0x00DA, "U"}, {0x00DB, "U"}, {0x00DC, "U"},
      {0x00DD, "Y"}, {0x00DE, "TH"}, {0x00DF, "ss"},
      // Latin-1 supplement, lowercase
      {0x00E0, "a"}, {0x00E1, "a"}, {0x00E2, "a"}, {0x00E3, "a"}, {0x00E4, "a"}, {0x00E5, "a"},
      {0x00E6, "ae"}, {0x00E7, "c"},
      {0x00E8, "e"}, {0x00E9, "e"}, {0x00EA, "e"}, {0x00EB, "e"},
      {0x00EC, "i"}, {0x00ED, "i"}, {0x00EE, "i"}, {0x00EF, "i"},
      {0x00F0, "d"}, {0x00F1, "n"},
      {0x00F2, "o"}, {0x00F3, "o"}, {0x00F4, "o"}, {0x00F5, "o"}, {0x00F6, "o"}, {0x00F8, "o"},
      {0x00F9, "u"}, {0x00FA, "u"}, {0x00FB, "u"}, {0x00FC, "u"},
      {0x00FD, "y"}, {0x00FE, "th"}, {0x00FF, "y"},
      // Latin-1 punctuation and signs
      {0x00A1, "!"}, {0x00AB, "\""}, {0x00B4, "'"}, {0x00B7, "."}, {0x00BB, "\""}, {0x00BF, "?"},
      {0x00AA, "a"}, {0x00BA, "o"},
      {0x00B9, "1"}, {0x00B2, "2"}, {0x00B3, "3"},
      // Latin Extended-A (the letters that actually occur in western European HTR data)
      {0x0100, "A"}, {0x0101, "a"}, {0x0102, "A"}, {0x0103, "a"}, {0x0104, "A"}, {0x0105, "a"},
      {0x0106, "C"}, {0x0107, "c"}, {0x0108, "C"}, {0x0109, "c"}, {0x010A, "C"}, {0x010B, "c"},
      {0x010C, "C"}, {0x010D, "c"}, {0x010E, "D"}, {0x010F, "d"}, {0x0110, "D"}, {0x0111, "d"},
      {0x0112, "E"}, {0x0113, "e"}, {0x0114, "E"}, {0x0115, "e"}, {0x0116, "E"}, {0x0117, "e"},
      {0x0118, "E"}, {0x0119, "e"}, {0x011A, "E"}, {0x011B, "e"},
      {0x011C, "G"}, {0x011D, "g"}, {0x011E, "G"}, {0x011F, "g"}, {0x0120, "G"}, {0x0121, "g"},
      {0x0122, "G"}, {0x0123, "g"}, {0x0124, "H"}, {0x0125, "h"}, {0x0126, "H"}, {0x0127, "h"},
      {0x0128, "I"}, {0x0129, "i"}, {0x012A, "I"}, {0x012B, "i"}, {0x012C, "I"}, {0x012D, "i"},
      {0x012E, "I"}, {0x012F, "i"}, {0x0130, "I"}, {0x0131, "i"},
      {0x0134, "J"}, {0x0135, "j"}, {0x0136, "K"}, {0x0137, "k"},
      {0x0139, "L"}, {0x013A, "l"}, {0x013B, "L"}, {0x013C, "l"}, {0x013D, "L"}, {0x013E, "l"},
      {0x0141, "L"}, {0x0142, "l"},
      {0x0143, "N"}, {0x0144, "n"}, {0x0145, "N"}, {0x0146, "n"}, {0x0147, "N"}, {0x0148, "n"},
      {0x014C, "O"}, {0x014D, "o"}, {0x014E, "O"}, {0x014F, "o"}, {0x0150, "O"}, {0x0151, "o"},
      {0x0152, "OE"}, {0x0153, "oe"},
      {0x0154, "R"}, {0x0155, "r"}, {0x0156, "R"}, {0x0157, "r"}, {0x0158, "R"}, {0x0159, "r"},
      {0x015A, "S"}, {0x015B, "s"}, {0x015C, "S"}, {0x015D, "s"}, {0x015E, "S"}, {0x015F, "s"},
      {0x0160, "S"}, {0x0161, "s"},
      {0x0162, "T"}, {0x0163, "t"}, {0x0164, "T"}, {0x0165, "t"}, {0x0166, "T"}, {0x0167, "t"},
      {0x0168, "U"}, {0x0169, "u"}, {0x016A, "U"}, {0x016B, "u"}, {0x016C, "U"}, {0x016D, "u"},
      {0x016E, "U"}, {0x016F, "u"}, {0x0170, "U"}, {0x0171, "u"}, {0x0172, "U"}, {0x0173, "u"},
      {0x0174, "W"}, {0x0175, "w"}, {0x0176, "Y"}, {0x0177, "y"}, {0x0178, "Y"},
      {0x0179, "Z"}, {0x017A, "z"}, {0x017B, "Z"}, {0x017C, "z"}, {0x017D, "Z"}, {0x017E, "z"},
      // typographic punctuation
      {0x2010, "-"}, {0x2011, "-"}, {0x2012, "-"}, {0x2013, "-"}, {0x2014, "-"}, {0x2015, "-"},
      {0x2018, "'"}, {0x2019, "'"}, {0x201A, "'"}, {0x201B, "'"},
      {0x201C, "\""}, {0x201D, "\""}, {0x201E, "\""}, {0x201F, "\""},
      {0x2026, "..."},
      {0x2032, "'"}, {0x2033, "\""},
      {0x2039, "'"}, {0x203A, "'"},
      {0x02BC, "'"}, {0x02B9, "'"}, {0x02BB, "'"},
  };
  auto it = table.find(cp);
  return it == table.end() ? nullptr : it->second;
}

}  // namespace

std::string fold_to_ascii(std::string_view utf8) {
  std::string out;
  out.reserve(utf8.size());
  std::size_t i = 0;
  while (i < utf8.size()) {
    const char32_t cp = decode_utf8(utf8, i);
    if (cp == ' ' || cp == '\t' || cp == '\n' || cp == '\r' || cp == '\v' || cp == '\f') {
      out.push_back(' ');
    } else if (cp >= 0x21 && cp <= 0x7E) {
      out.push_back(static_cast<char>(cp));
    } else if (cp == static_cast<char32_t>(static_cast<unsigned char>(kUnknownChar))) {
      out.push_back(kUnknownChar);  // keeps folding idempotent
    } else if (const char* rep = fold_nonascii(cp)) {
      out += rep;
    } else {
      out.push_back(kUnknownChar);
    }
  }
  return out;
}

Alphabet Alphabet::from_chars(const std::vector<char>& chars) {
  Alphabet a;
  a.symbols = {"[BOS]", "[PAD]", "[UNK]", "[EOS]"};
  std::set<char> uniq(chars.begin(), chars.end());
  uniq.erase(kUnknownChar);
  for (char c : uniq) {  // std::set iterates in code-point order
    a.symbols.push_back(std::string(1, c));
    a.member_[static_cast<unsigned char>(c)] = true;
  }
  return a;
}

std::string normalize_text(std::string_view utf8, const Alphabet& alphabet) {
  std::string folded = fold_to_ascii(utf8);
  for (char& c : folded) {
    if (!alphabet.contains(c)) c = kUnknownChar;
  }
  return folded;
}

Alphabet build_alphabet(const std::vector<DatasetManifest>& domains) {
  std::vector<char> chars;
  for (const DatasetManifest& m : domains) {
    for (const auto& [_, refs] : m.splits) {
      for (const SampleRef& ref : refs) {
        for (char c : fold_to_ascii(ref.transcript)) chars.push_back(c);
      }
    }
  }
  return Alphabet::from_chars(chars);
}

std::string display_symbol(char c) {
  if (c == kUnknownChar) return "[UNK]";
  return std::string(1, c);
}

}  // namespace oodlab
