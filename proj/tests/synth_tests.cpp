#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include "doctest.h"
#include "oodlab/alphabet.hpp"
#include "oodlab/errors.hpp"
#include "oodlab/image.hpp"
#include "oodlab/manifest.hpp"
#include "oodlab/synth.hpp"
#include "test_util.hpp"

using namespace oodlab;

namespace {

StyleParams plain_style() {
    StyleParams s;
    s.scale = 1.0;
    s.slant = 0.0;
    s.ink = 0;
    s.noise_sigma = 0.0;
    s.baseline_jitter = 0;
    s.seed = 7;
    return s;
}

std::vector<std::string> numbered_lines(int n) {
    std::vector<std::string> lines;
    for (int i = 0; i < n; ++i) lines.push_back("line " + std::to_string(i));
    return lines;
}

}  // namespace

TEST_CASE("builtin font covers printable ascii plus the unknown sentinel") {
    const auto& font = builtin_font();
    CHECK(font.glyph_height == 7);
    CHECK(font.spacing == 1);
    for (int c = 0x20; c <= 0x7E; ++c) {
        CHECK(font.has(static_cast<char>(c)));
        CHECK(font.glyphs.at(static_cast<char>(c)).size() == 5);
    }
    REQUIRE(font.has(kUnknownChar));
    for (auto col : font.glyphs.at(kUnknownChar)) CHECK(col == 0x7F);
    CHECK_FALSE(font.has('\t'));
}

TEST_CASE("unscaled single glyph lands centered with a two-pixel margin") {
    const auto& font = builtin_font();
    auto img = render_line("a", font, plain_style());
    // Glyph is 5x7 at scale 1; margins are twice the 1-pixel spacing.
    REQUIRE(static_cast<int>(img.width) == 9);
    REQUIRE(static_cast<int>(img.height) == 32);

    const auto& glyph = font.glyphs.at('a');
    const int top = (32 - 7) / 2;
    for (int r = 0; r < 32; ++r) {
        for (int c = 0; c < 9; ++c) {
            bool in_box = r >= top && r < top + 7 && c >= 2 && c < 7;
            bool inked = in_box && ((glyph[static_cast<std::size_t>(c - 2)] >> (r - top)) & 1u);
            CHECK(img.at(static_cast<std::size_t>(r), static_cast<std::size_t>(c)) ==
                  (inked ? 0.0 : 1.0));
        }
    }
}

TEST_CASE("empty text renders a blank canvas of just the margins") {
    auto img = render_line("", builtin_font(), plain_style());
    CHECK(static_cast<int>(img.width) == 4);
    for (double p : img.pixels) CHECK(p == 1.0);
}

TEST_CASE("scaling doubles glyph metrics") {
    StyleParams s = plain_style();
    s.scale = 2.0;
    auto img = render_line("ab", builtin_font(), s);
    // Two 10-wide glyphs, 2-wide gap, 4-wide margins either side.
    CHECK(static_cast<int>(img.width) == 4 + 10 + 2 + 10 + 4);
    bool any_ink = false;
    for (double p : img.pixels) any_ink = any_ink || p == 0.0;
    CHECK(any_ink);
}

TEST_CASE("rendering is deterministic for a fixed style") {
    StyleParams s = plain_style();
    s.noise_sigma = 0.15;
    s.baseline_jitter = 2;
    s.slant = 0.3;
    s.ink = 1;
    auto a = render_line("noisy text", builtin_font(), s);
    auto b = render_line("noisy text", builtin_font(), s);
    CHECK(a.pixels == b.pixels);

    s.seed = 8;
    auto c = render_line("noisy text", builtin_font(), s);
    CHECK(a.pixels != c.pixels);
}

TEST_CASE("slant shifts rows and widens the canvas to fit") {
    StyleParams s = plain_style();
    auto plain = render_line("ll", builtin_font(), s);

    s.slant = 0.5;
    auto sheared = render_line("ll", builtin_font(), s);
    // Top row of a 32-high canvas moves right by round(0.5 * 31) = 16.
    REQUIRE(sheared.width == plain.width + 16);
    REQUIRE(sheared.height == plain.height);
    for (int r = 0; r < plain.height; ++r) {
        int off = static_cast<int>(std::llround(0.5 * (plain.height - 1 - r)));
        for (int c = 0; c < plain.width; ++c) {
            CHECK(sheared.at(r, c + off) == plain.at(r, c));
        }
    }
}

TEST_CASE("ink dilation takes the darkest pixel in a chebyshev square") {
    StyleParams s = plain_style();
    auto base = render_line("a", builtin_font(), s);

    s.ink = 1;
    auto thick = render_line("a", builtin_font(), s);
    REQUIRE(thick.pixels.size() == base.pixels.size());
    for (int r = 0; r < base.height; ++r) {
        for (int c = 0; c < base.width; ++c) {
            double want = base.at(r, c);
            for (int dr = -1; dr <= 1; ++dr) {
                for (int dc = -1; dc <= 1; ++dc) {
                    int rr = r + dr, cc = c + dc;
                    if (rr < 0 || cc < 0 || rr >= base.height || cc >= base.width) continue;
                    want = std::min(want, base.at(rr, cc));
                }
            }
            CHECK(thick.at(r, c) == want);
        }
    }
}

TEST_CASE("noise stays clamped to the unit interval") {
    StyleParams s = plain_style();
    s.noise_sigma = 0.8;
    auto img = render_line("clamp", builtin_font(), s);
    bool changed = false;
    for (double p : img.pixels) {
        CHECK(p >= 0.0);
        CHECK(p <= 1.0);
        if (p != 0.0 && p != 1.0) changed = true;
    }
    CHECK(changed);
}

TEST_CASE("style validation rejects out-of-range knobs") {
    auto s = plain_style();
    s.scale = 0.0;
    CHECK_THROWS_AS(s.validate(), DataError);
    s = plain_style();
    s.ink = 3;
    CHECK_THROWS_AS(s.validate(), DataError);
    s = plain_style();
    s.noise_sigma = -0.1;
    CHECK_THROWS_AS(s.validate(), DataError);
    s = plain_style();
    s.baseline_jitter = -1;
    CHECK_THROWS_AS(s.validate(), DataError);
}

TEST_CASE("oversized glyphs for the canvas are rejected") {
    StyleParams s = plain_style();
    s.scale = 2.0;  // glyph height 14
    CHECK_THROWS_AS(render_line("a", builtin_font(), s, 8), DataError);
    CHECK_THROWS_AS(render_line("a", builtin_font(), s, 0), DataError);
}

TEST_CASE("unknown characters have no glyph and raise an error") {
    CHECK_THROWS_WITH_AS(render_line("a\tb", builtin_font(), plain_style()),
                         doctest::Contains("no glyph"), DataError);
}

TEST_CASE("domain generation splits lines 8/1/1 by position") {
    testutil::TempDir dir;
    auto manifest = make_domain(numbered_lines(10), builtin_font(), plain_style(),
                                dir / "dom", "demo", "en");
    CHECK(manifest.name == "demo");
    CHECK(manifest.language == "en");
    CHECK(manifest.split("train").size() == 8);
    CHECK(manifest.split("val").size() == 1);
    CHECK(manifest.split("test").size() == 1);
    // Ninth line (index 8) validates, tenth (index 9) tests.
    CHECK(manifest.split("val")[0].transcript == "line 8");
    CHECK(manifest.split("test")[0].transcript == "line 9");

    // Every referenced image decodes.
    for (const auto& split : {"train", "val", "test"}) {
        for (const auto& ref : manifest.split(split)) {
            auto img = load_pgm(manifest.base_dir / ref.image_path);
            CHECK(img.height == 32);
            CHECK(img.width > 0);
        }
    }

    // A style sidecar and a reloadable manifest land next to the images.
    CHECK(std::filesystem::exists(dir / "dom" / "style.json"));
    auto reloaded = load_manifest(dir / "dom" / "manifest.jsonl");
    CHECK(reloaded.total_samples() == 10);

    // With 25 lines the pattern holds per block of ten.
    auto bigger = make_domain(numbered_lines(25), builtin_font(), plain_style(),
                              dir / "dom25", "demo25", "en");
    CHECK(bigger.split("train").size() == 21);
    CHECK(bigger.split("val").size() == 2);
    CHECK(bigger.split("test").size() == 2);
}

TEST_CASE("domain generation is byte-reproducible") {
    testutil::TempDir dir;
    StyleParams s = plain_style();
    s.noise_sigma = 0.1;
    s.baseline_jitter = 1;
    auto lines = numbered_lines(6);
    make_domain(lines, builtin_font(), s, dir / "one", "dom", "en");
    make_domain(lines, builtin_font(), s, dir / "two", "dom", "en");

    CHECK(testutil::read_file(dir / "one" / "manifest.jsonl") ==
          testutil::read_file(dir / "two" / "manifest.jsonl"));
    CHECK(testutil::read_file(dir / "one" / "style.json") ==
          testutil::read_file(dir / "two" / "style.json"));
    for (int i = 0; i < 6; ++i) {
        char leaf[32];
        std::snprintf(leaf, sizeof(leaf), "line_%05d.pgm", i);
        CHECK(testutil::read_file(dir / "one" / "images" / leaf) ==
              testutil::read_file(dir / "two" / "images" / leaf));
    }
}

TEST_CASE("identical lines at different positions draw different noise") {
    testutil::TempDir dir;
    StyleParams s = plain_style();
    s.noise_sigma = 0.1;
    auto manifest = make_domain({"same text", "same text"}, builtin_font(), s,
                                dir / "dom", "dup", "en");
    auto a = load_pgm(manifest.base_dir / manifest.split("train")[0].image_path);
    auto b = load_pgm(manifest.base_dir / manifest.split("train")[1].image_path);
    REQUIRE(a.pixels.size() == b.pixels.size());
    CHECK(a.pixels != b.pixels);
}

TEST_CASE("domain generation validates inputs and cites the line") {
    testutil::TempDir dir;
    const auto& font = builtin_font();
    auto style = plain_style();

    CHECK_THROWS_AS(make_domain({}, font, style, dir / "x", "d", "en"), DataError);
    CHECK_THROWS_AS(make_domain({"ok"}, font, style, dir / "x", "", "en"), DataError);
    CHECK_THROWS_AS(make_domain({"ok"}, font, style, dir / "x", "d", "EN"), DataError);
    CHECK_THROWS_AS(make_domain({"ok"}, font, style, dir / "x", "d", "eng"), DataError);
    CHECK_THROWS_WITH_AS(make_domain({"ok", ""}, font, style, dir / "x", "d", "en"),
                         doctest::Contains("line 2"), DataError);
    CHECK_THROWS_WITH_AS(make_domain({"ok", "bad\tline"}, font, style, dir / "x", "d", "en"),
                         doctest::Contains("line 2"), DataError);
}
