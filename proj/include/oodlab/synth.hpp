#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "oodlab/errors.hpp"
#include "oodlab/image.hpp"
#include "oodlab/manifest.hpp"

namespace oodlab {

// Fixed-height bitmap font. Each glyph is a list of column bytes with the
// least significant bit at the top, so bit r of column c is the pixel at
// (row r, col c). Variable widths are allowed but the height is shared.
struct BitmapFont {
  int glyph_height = 0;
  int spacing = 1;  // blank columns between glyphs, at scale 1
  std::map<char, std::vector<std::uint8_t>> glyphs;

  bool has(char c) const { return glyphs.find(c) != glyphs.end(); }
};

// The embedded 5x7 face covering printable ASCII (0x20..0x7E) plus the
// normalization placeholder character, which renders as a filled box.
const BitmapFont& builtin_font();

// Knobs that define a synthetic visual domain. Same text + same style gives
// byte-identical renders, which is what makes domain construction repeatable.
struct StyleParams {
  double scale = 2.0;           // glyph magnification (> 0)
  double slant = 0.0;           // horizontal shear per row of height
  int ink = 0;                  // stroke dilation radius, 0..2
  double noise_sigma = 0.0;     // Gaussian pixel noise std (>= 0)
  int baseline_jitter = 0;      // max per-glyph vertical offset, pixels
  std::uint64_t seed = 42;

  void validate() const;  // DataError on out-of-range values
};

// Paints `text` onto a white canvas of the given height: glyphs are scaled
// with nearest-neighbour sampling and placed left to right with scaled
// spacing, vertically centered with per-glyph jitter; rows are then shifted
// for slant, ink pixels dilated, and Gaussian noise added (clamped to [0,1]).
// All randomness comes from style.seed. Throws DataError on a character the
// font cannot draw.
GrayImage render_line(const std::string& text, const BitmapFont& font, const StyleParams& style,
                      int canvas_height = 32);

// Renders every line of `lines` into out_dir/images/line_%05d.pgm, assigns
// train/val/test splits by line index (8/1/1 pattern), and writes
// out_dir/manifest.jsonl plus a style.json sidecar recording the parameters.
// Each line uses a sub-seed mixed from (style.seed, line index). Returns the
// manifest that was written.
DatasetManifest make_domain(const std::vector<std::string>& lines, const BitmapFont& font,
                            const StyleParams& style, const std::filesystem::path& out_dir,
                            const std::string& name, const std::string& language,
                            int canvas_height = 32);

}  // namespace oodlab
