#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "oodlab/errors.hpp"

namespace oodlab::csv {

// Minimal CSV: plain comma-separated fields, no quoting. Writers reject fields
// that would need quoting; readers split on commas and strip trailing CR.
// Blank lines are skipped.
std::vector<std::vector<std::string>> read_file(const std::filesystem::path& path);

void write_file(const std::filesystem::path& path,
                const std::vector<std::vector<std::string>>& rows);

std::string format_double(double v);  // shortest form that survives a round trip

double parse_double(const std::string& s, const std::string& context);

}  // namespace oodlab::csv
