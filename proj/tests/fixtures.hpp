#pragma once

#include <array>
#include <cstdio>
#include <string>
#include <vector>

#include "oodlab/analysis.hpp"

namespace fixtures {

// Reference cross-domain character-error grids for two recognizer
// architectures over seven handwriting corpora.  Rows are source (training)
// domains, columns are target (evaluation) domains, in the same order as
// kDomains.  Diagonal cells are in-distribution scores.  These drive the
// aggregation and best-source tests, which pin the expected summaries below.
inline const std::vector<std::string> kDomains = {
    "iam", "rimes", "gw", "bentham", "sg", "rodrigo", "icfhr2016",
};

inline constexpr std::array<std::array<double, 7>, 7> kCrnnGrid = {{
    {6.4, 25.0, 31.1, 25.3, 45.5, 40.9, 86.2},
    {35.4, 3.7, 49.0, 50.2, 52.3, 47.1, 87.9},
    {55.6, 61.5, 8.2, 59.2, 69.3, 66.2, 100.0},
    {34.9, 45.3, 32.2, 4.7, 57.8, 43.8, 78.7},
    {77.7, 74.5, 89.3, 78.0, 7.2, 52.8, 100.0},
    {65.7, 61.4, 71.8, 66.3, 33.6, 1.7, 85.3},
    {74.9, 78.4, 81.6, 75.4, 77.9, 75.6, 5.2},
}};

inline constexpr std::array<std::array<double, 7>, 7> kVanGrid = {{
    {6.6, 21.3, 34.5, 26.6, 39.8, 38.5, 82.9},
    {28.6, 5.6, 46.1, 45.0, 47.2, 43.7, 88.4},
    {73.7, 67.4, 9.3, 59.3, 67.1, 69.6, 100.0},
    {37.2, 41.7, 32.0, 7.4, 49.4, 38.6, 75.3},
    {96.1, 85.0, 93.1, 83.1, 7.8, 57.7, 100.0},
    {76.5, 70.7, 78.2, 68.1, 41.1, 2.3, 87.3},
    {70.8, 74.8, 76.4, 67.8, 72.1, 71.4, 7.5},
}};

// Expected best-source (lowest off-diagonal score in each column) per target.
inline const std::vector<std::string> kCrnnBestSource = {
    "bentham", "iam", "iam", "iam", "rodrigo", "iam", "bentham",
};
inline const std::vector<std::string> kVanBestSource = {
    "rimes", "iam", "bentham", "iam", "iam", "iam", "bentham",
};

// Expected best-source out-of-distribution scores per target (column minima
// excluding the diagonal).
inline constexpr std::array<double, 7> kCrnnBestOod = {34.9, 25.0, 31.1, 25.3, 33.6, 40.9, 78.7};
inline constexpr std::array<double, 7> kVanBestOod = {28.6, 21.3, 32.0, 26.6, 39.8, 38.5, 75.3};

inline oodlab::CrossTable make_cross_table(const std::array<std::array<double, 7>, 7>& grid) {
    oodlab::CrossTable table;
    table.sources = kDomains;
    table.targets = kDomains;
    table.values = oodlab::Matrix(7, 7);
    for (int r = 0; r < 7; ++r) {
        for (int c = 0; c < 7; ++c) {
            table.values(r, c) = grid[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)];
        }
    }
    return table;
}

// CSV body (model,source,target,cer) covering both grids, row-major.
inline std::string cross_csv_text() {
    std::string out = "model,source,target,cer\n";
    auto append = [&out](const char* model, const std::array<std::array<double, 7>, 7>& grid) {
        char buf[128];
        for (std::size_t r = 0; r < 7; ++r) {
            for (std::size_t c = 0; c < 7; ++c) {
                std::snprintf(buf, sizeof(buf), "%s,%s,%s,%.1f\n", model, kDomains[r].c_str(),
                              kDomains[c].c_str(), grid[r][c]);
                out += buf;
            }
        }
    };
    append("crnn", kCrnnGrid);
    append("van", kVanGrid);
    return out;
}

}  // namespace fixtures
