#include "oodlab/synth.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "json.hpp"
#include "oodlab/rng.hpp"

namespace oodlab {

void StyleParams::validate() const {
  if (!(scale > 0.0)) throw DataError("StyleParams: scale must be positive");
  if (ink < 0 || ink > 2) throw DataError("StyleParams: ink radius must be 0, 1 or 2");
  if (!(noise_sigma >= 0.0)) throw DataError("StyleParams: noise_sigma must be >= 0");
  if (baseline_jitter < 0) throw DataError("StyleParams: baseline_jitter must be >= 0");
}

namespace {

// Nearest-neighbour upscale of one glyph to the requested height; integer
// arithmetic only, so the result is platform-independent.
GrayImage scale_glyph(const std::vector<std::uint8_t>& cols, int src_h, int dst_h, int dst_w) {
  const int src_w = static_cast<int>(cols.size());
  GrayImage g = make_image(dst_h, dst_w);
  for (int r = 0; r < dst_h; ++r) {
    const int sr = r * src_h / dst_h;
    for (int c = 0; c < dst_w; ++c) {
      const int sc = c * src_w / dst_w;
      if ((cols[sc] >> sr) & 1u) g.at(r, c) = 0.0;
    }
  }
  return g;
}

}  // namespace

GrayImage render_line(const std::string& text, const BitmapFont& font, const StyleParams& style,
                      int canvas_height) {
  style.validate();
  if (font.glyph_height < 1) throw DataError("render_line: font has no height");
  if (canvas_height < 1) throw DataError("render_line: canvas height must be >= 1");

  const int gh = std::max(1, static_cast<int>(std::llround(style.scale * font.glyph_height)));
  if (gh > canvas_height) {
    throw DataError("render_line: scaled glyph height " + std::to_string(gh) +
                    " exceeds canvas height " + std::to_string(canvas_height));
  }
  const int sp = std::max(1, static_cast<int>(std::llround(style.scale * font.spacing)));
  const int margin = 2 * sp;

  // Layout first so the canvas width is known up front.
  struct Placed {
    const std::vector<std::uint8_t>* cols;
    int x;
    int w;
  };
  std::vector<Placed> placed;
  int cursor = margin;
  for (char ch : text) {
    auto it = font.glyphs.find(ch);
    if (it == font.glyphs.end()) {
      throw DataError(std::string("render_line: no glyph for character '") + ch + "'");
    }
    const int gw = std::max(
        1, static_cast<int>(std::llround(style.scale * static_cast<double>(it->second.size()))));
    if (!placed.empty()) cursor += sp;
    placed.push_back({&it->second, cursor, gw});
    cursor += gw;
  }
  const int width = cursor + margin;

  Rng rng(style.seed);
  GrayImage canvas = make_image(canvas_height, width);
  for (const Placed& p : placed) {
    int top = (canvas_height - gh) / 2;
    if (style.baseline_jitter > 0) {
      top += static_cast<int>(rng.range(-style.baseline_jitter, style.baseline_jitter));
      top = std::clamp(top, 0, canvas_height - gh);
    }
    GrayImage glyph = scale_glyph(*p.cols, font.glyph_height, gh, p.w);
    for (int r = 0; r < gh; ++r) {
      for (int c = 0; c < p.w; ++c) {
        if (glyph.at(r, c) == 0.0) canvas.at(top + r, p.x + c) = 0.0;
      }
    }
  }

  // Shear as whole-row shifts; rounding to integers keeps the render exact.
  if (style.slant != 0.0) {
    std::vector<int> shift(static_cast<std::size_t>(canvas_height));
    int smin = 0, smax = 0;
    for (int r = 0; r < canvas_height; ++r) {
      shift[r] = static_cast<int>(std::llround(style.slant * (canvas_height - 1 - r)));
      smin = std::min(smin, shift[r]);
      smax = std::max(smax, shift[r]);
    }
    GrayImage sheared = make_image(canvas_height, width + (smax - smin));
    for (int r = 0; r < canvas_height; ++r) {
      const int off = shift[r] - smin;
      for (int c = 0; c < width; ++c) sheared.at(r, c + off) = canvas.at(r, c);
    }
    canvas = std::move(sheared);
  }

  // Stroke thickening: every pixel takes the darkest value within a Chebyshev
  // square of the ink radius.
  if (style.ink > 0) {
    const int k = style.ink;
    GrayImage dilated = canvas;
    for (int r = 0; r < canvas.height; ++r) {
      for (int c = 0; c < canvas.width; ++c) {
        double v = canvas.at(r, c);
        for (int dr = -k; dr <= k && v > 0.0; ++dr) {
          const int rr = r + dr;
          if (rr < 0 || rr >= canvas.height) continue;
          for (int dc = -k; dc <= k; ++dc) {
            const int cc = c + dc;
            if (cc < 0 || cc >= canvas.width) continue;
            v = std::min(v, canvas.at(rr, cc));
          }
        }
        dilated.at(r, c) = v;
      }
    }
    canvas = std::move(dilated);
  }

  if (style.noise_sigma > 0.0) {
    for (double& v : canvas.pixels) {
      v = std::clamp(v + rng.gaussian(0.0, style.noise_sigma), 0.0, 1.0);
    }
  }
  return canvas;
}

DatasetManifest make_domain(const std::vector<std::string>& lines, const BitmapFont& font,
                            const StyleParams& style, const std::filesystem::path& out_dir,
                            const std::string& name, const std::string& language,
                            int canvas_height) {
  style.validate();
  if (lines.empty()) throw DataError("make_domain: empty corpus");
  if (name.empty()) throw DataError("make_domain: domain name must not be empty");
  if (language.size() != 2 || !std::islower(static_cast<unsigned char>(language[0])) ||
      !std::islower(static_cast<unsigned char>(language[1]))) {
    throw DataError("make_domain: language must be a two-letter lowercase code");
  }

  std::filesystem::create_directories(out_dir / "images");

  DatasetManifest m;
  m.name = name;
  m.language = language;
  m.base_dir = out_dir;

  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (lines[i].empty()) {
      throw DataError("make_domain: line " + std::to_string(i + 1) + ": empty text");
    }
    StyleParams line_style = style;
    line_style.seed = mix_seed(style.seed, static_cast<std::uint64_t>(i));
    GrayImage img;
    try {
      img = render_line(lines[i], font, line_style, canvas_height);
    } catch (const DataError& e) {
      throw DataError("make_domain: line " + std::to_string(i + 1) + ": " + e.what());
    }
    char fname[32];
    std::snprintf(fname, sizeof(fname), "line_%05zu.pgm", i);
    save_pgm(img, out_dir / "images" / fname);

    const int slot = static_cast<int>(i % 10);
    const std::string split = slot < 8 ? "train" : (slot == 8 ? "val" : "test");
    m.splits[split].push_back({std::string("images/") + fname, lines[i]});
  }

  nlohmann::json sidecar;
  sidecar["scale"] = style.scale;
  sidecar["slant"] = style.slant;
  sidecar["ink"] = style.ink;
  sidecar["noise_sigma"] = style.noise_sigma;
  sidecar["baseline_jitter"] = style.baseline_jitter;
  sidecar["seed"] = style.seed;
  std::ofstream side(out_dir / "style.json", std::ios::binary);
  if (!side) throw DataError((out_dir / "style.json").string() + ": cannot open for writing");
  side << sidecar.dump(2) << "\n";

  save_manifest(m, out_dir / "manifest.jsonl");
  return m;
}

}  // namespace oodlab
