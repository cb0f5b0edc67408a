#include "oodlab/image.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <string>

namespace oodlab {

GrayImage make_image(int height, int width, double fill) {
  if (height < 1 || width < 1) throw DataError("make_image: dimensions must be positive");
  GrayImage img;
  img.height = height;
  img.width = width;
  img.pixels.assign(static_cast<std::size_t>(height) * width, fill);
  return img;
}

namespace {

// Reads the next header token, skipping whitespace and '#' comments.
std::string next_pgm_token(std::istream& in) {
  std::string tok;
  int ch;
  while ((ch = in.get()) != EOF) {
    if (ch == '#') {
      while (ch != EOF && ch != '\n') ch = in.get();
      continue;
    }
    if (std::isspace(ch)) {
      if (!tok.empty()) return tok;
      continue;
    }
    tok.push_back(static_cast<char>(ch));
  }
  return tok;
}

long parse_header_int(const std::string& tok, const std::string& what,
                      const std::filesystem::path& path) {
  if (tok.empty() || tok.find_first_not_of("0123456789") != std::string::npos) {
    throw DataError(path.string() + ": malformed PGM header (" + what + ")");
  }
  return std::stol(tok);
}

}  // namespace

GrayImage load_pgm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(path.string() + ": cannot open");

  char magic[2] = {0, 0};
  in.read(magic, 2);
  if (in.gcount() != 2 || magic[0] != 'P' || magic[1] != '5') {
    throw DataError(path.string() + ": unsupported magic number (want binary PGM 'P5')");
  }

  const long width = parse_header_int(next_pgm_token(in), "width", path);
  const long height = parse_header_int(next_pgm_token(in), "height", path);
  const long maxval = parse_header_int(next_pgm_token(in), "maxval", path);
  if (width < 1 || height < 1) throw DataError(path.string() + ": bad PGM dimensions");
  if (maxval < 1 || maxval > 255) {
    throw DataError(path.string() + ": unsupported maxval " + std::to_string(maxval) +
                    " (only 8-bit PGM)");
  }
  // The single whitespace byte after maxval was already consumed by the tokenizer.

  GrayImage img;
  img.height = static_cast<int>(height);
  img.width = static_cast<int>(width);
  const std::size_t n = static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
  std::vector<unsigned char> raw(n);
  in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(n));
  if (static_cast<std::size_t>(in.gcount()) != n) {
    throw DataError(path.string() + ": truncated pixel payload");
  }
  img.pixels.resize(n);
  for (std::size_t i = 0; i < n; ++i) img.pixels[i] = raw[i] / 255.0;
  return img;
}

void save_pgm(const GrayImage& img, const std::filesystem::path& path) {
  if (img.height < 1 || img.width < 1 ||
      img.pixels.size() != static_cast<std::size_t>(img.height) * img.width) {
    throw DataError("save_pgm: inconsistent image shape");
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError(path.string() + ": cannot open for writing");
  out << "P5\n" << img.width << " " << img.height << "\n255\n";
  std::vector<unsigned char> raw(img.pixels.size());
  for (std::size_t i = 0; i < img.pixels.size(); ++i) {
    const double v = std::clamp(img.pixels[i], 0.0, 1.0);
    raw[i] = static_cast<unsigned char>(std::lround(v * 255.0));
  }
  out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (!out) throw DataError(path.string() + ": write failed");
}

GrayImage resize_bilinear(const GrayImage& img, int out_height, int out_width) {
  if (out_height < 1 || out_width < 1) throw DataError("resize_bilinear: bad output size");
  if (img.height < 1 || img.width < 1) throw DataError("resize_bilinear: empty input");

  GrayImage out = make_image(out_height, out_width, 0.0);
  const double sy = static_cast<double>(img.height) / out_height;
  const double sx = static_cast<double>(img.width) / out_width;
  for (int r = 0; r < out_height; ++r) {
    // Half-pixel centers: output center maps to (r + 0.5) * scale - 0.5 in the source.
    const double fy = (r + 0.5) * sy - 0.5;
    const int y0 = static_cast<int>(std::floor(fy));
    const double ty = fy - y0;
    const int ya = std::clamp(y0, 0, img.height - 1);
    const int yb = std::clamp(y0 + 1, 0, img.height - 1);
    for (int c = 0; c < out_width; ++c) {
      const double fx = (c + 0.5) * sx - 0.5;
      const int x0 = static_cast<int>(std::floor(fx));
      const double tx = fx - x0;
      const int xa = std::clamp(x0, 0, img.width - 1);
      const int xb = std::clamp(x0 + 1, 0, img.width - 1);
      const double top = (1.0 - tx) * img.at(ya, xa) + tx * img.at(ya, xb);
      const double bot = (1.0 - tx) * img.at(yb, xa) + tx * img.at(yb, xb);
      out.at(r, c) = std::clamp((1.0 - ty) * top + ty * bot, 0.0, 1.0);
    }
  }
  return out;
}

}  // namespace oodlab
