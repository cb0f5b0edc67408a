#include "oodlab/manifest.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>

#include "json.hpp"

namespace oodlab {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::filesystem::path& path, std::size_t line, const std::string& msg) {
  throw DataError(path.string() + ":" + std::to_string(line) + ": " + msg);
}

bool valid_language_code(const std::string& s) {
  return s.size() == 2 && std::islower(static_cast<unsigned char>(s[0])) &&
         std::islower(static_cast<unsigned char>(s[1]));
}

}  // namespace

const std::vector<SampleRef>& DatasetManifest::split(const std::string& s) const {
  auto it = splits.find(s);
  if (it == splits.end()) {
    throw DataError("manifest '" + name + "': missing split '" + s + "'");
  }
  return it->second;
}

std::vector<std::string> DatasetManifest::transcripts(const std::string& s) const {
  std::vector<std::string> out;
  for (const SampleRef& ref : split(s)) out.push_back(ref.transcript);
  return out;
}

std::size_t DatasetManifest::total_samples() const {
  std::size_t n = 0;
  for (const auto& [_, refs] : splits) n += refs.size();
  return n;
}

DatasetManifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError(path.string() + ": cannot open");

  DatasetManifest m;
  m.base_dir = path.has_parent_path() ? path.parent_path() : std::filesystem::path(".");

  std::string line;
  std::size_t lineno = 0;
  bool saw_header = false;
  std::map<std::string, std::set<std::string>> seen_images;

  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;

    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      fail(path, lineno, std::string("malformed JSON record (") + e.what() + ")");
    }
    if (!j.is_object()) fail(path, lineno, "record is not a JSON object");

    if (!saw_header) {
      if (!j.contains("name") || !j["name"].is_string() || j["name"].get<std::string>().empty()) {
        fail(path, lineno, "header must carry a non-empty string 'name'");
      }
      if (!j.contains("language") || !j["language"].is_string()) {
        fail(path, lineno, "header must carry a string 'language'");
      }
      m.name = j["name"].get<std::string>();
      m.language = j["language"].get<std::string>();
      if (!valid_language_code(m.language)) {
        fail(path, lineno, "language '" + m.language + "' is not a two-letter ISO 639-1 code");
      }
      saw_header = true;
      continue;
    }

    for (const char* key : {"split", "image", "text"}) {
      if (!j.contains(key) || !j[key].is_string()) {
        fail(path, lineno, std::string("record missing string field '") + key + "'");
      }
    }
    const std::string split = j["split"].get<std::string>();
    const std::string image = j["image"].get<std::string>();
    const std::string text = j["text"].get<std::string>();
    if (std::find(split_names().begin(), split_names().end(), split) == split_names().end()) {
      fail(path, lineno, "unknown split '" + split + "' (want train, val or test)");
    }
    if (image.empty()) fail(path, lineno, "empty image path");
    if (text.empty()) fail(path, lineno, "empty transcript");
    if (!seen_images[split].insert(image).second) {
      fail(path, lineno, "duplicate image path '" + image + "' within split '" + split + "'");
    }
    m.splits[split].push_back(SampleRef{image, text});
  }

  if (!saw_header) throw DataError(path.string() + ": empty manifest (missing header line)");
  return m;
}

void save_manifest(const DatasetManifest& m, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError(path.string() + ": cannot open for writing");
  json header;
  header["name"] = m.name;
  header["language"] = m.language;
  out << header.dump() << "\n";
  for (const std::string& split : split_names()) {
    auto it = m.splits.find(split);
    if (it == m.splits.end()) continue;
    for (const SampleRef& ref : it->second) {
      json rec;
      rec["split"] = split;
      rec["image"] = ref.image_path;
      rec["text"] = ref.transcript;
      out << rec.dump() << "\n";
    }
  }
  if (!out) throw DataError(path.string() + ": write failed");
}

}  // namespace oodlab
