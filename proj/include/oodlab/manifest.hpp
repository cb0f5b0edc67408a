#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "oodlab/errors.hpp"

namespace oodlab {

struct SampleRef {
  std::string image_path;  // relative to the manifest's directory
  std::string transcript;  // raw UTF-8
};

// One handwriting domain: a named dataset with train/val/test splits.
//
// On disk this is a UTF-8 JSON-lines file: a header line
//   {"name": "...", "language": ".."}
// followed by one record per sample
//   {"split": "train|val|test", "image": "relative/path.pgm", "text": "..."}
struct DatasetManifest {
  std::string name;
  std::string language;  // ISO 639-1 code
  std::map<std::string, std::vector<SampleRef>> splits;
  std::filesystem::path base_dir;  // directory the manifest was loaded from

  bool has_split(const std::string& split) const { return splits.count(split) > 0; }
  const std::vector<SampleRef>& split(const std::string& split) const;
  std::vector<std::string> transcripts(const std::string& split) const;
  std::size_t total_samples() const;
};

// Parses and validates a manifest. Every validation failure names the offending
// line, e.g. "corpus/manifest.jsonl:7: empty transcript".
DatasetManifest load_manifest(const std::filesystem::path& path);

// Writes the JSON-lines form (header first, then records in train/val/test order).
// Byte-deterministic for identical input.
void save_manifest(const DatasetManifest& m, const std::filesystem::path& path);

inline const std::vector<std::string>& split_names() {
  static const std::vector<std::string> names = {"train", "val", "test"};
  return names;
}

}  // namespace oodlab
