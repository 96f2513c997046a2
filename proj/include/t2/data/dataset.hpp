#pragma once

#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include "t2/core/tensor.hpp"
#include "t2/det/boxes.hpp"

namespace t2 {

// In-memory view of a corpus directory: manifest.json (splits, config echo,
// checksums) plus annotations.jsonl. Image and illumination pixels stay on
// disk and load on demand.
struct Dataset {
  std::string root;
  uint64_t seed = 0;
  std::map<std::string, std::vector<std::string>> splits;
  std::unordered_map<std::string, std::vector<Annotation>> annotations;
  std::map<std::string, std::string> checksums;  // path relative to root

  const std::vector<std::string>& split(const std::string& name) const;
  const std::vector<Annotation>& boxes_of(const std::string& id) const;
};

Dataset load_dataset(const std::string& root);

Tensor<float> load_image(const Dataset& ds, const std::string& id);
Tensor<float> load_illumination(const Dataset& ds, const std::string& id);

// Recomputes every file checksum; returns the relative paths that disagree
// with the manifest (empty means intact).
std::vector<std::string> verify_checksums(const Dataset& ds);

// Directory of illumination maps produced by some external decomposer,
// keyed by source-image file stem (<dir>/<key>.npyf).
struct PrecomputedDecompositionStore {
  std::string dir;

  bool contains(const std::string& key) const;
  Tensor<float> load(const std::string& key) const;  // LookupError if absent
};

}  // namespace t2
