#include "t2/data/dataset.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "t2/data/checksum.hpp"
#include "t2/data/image_io.hpp"
#include "t2/data/npyf_io.hpp"

namespace t2 {

const std::vector<std::string>& Dataset::split(const std::string& name) const {
  auto it = splits.find(name);
  if (it == splits.end())
    throw LookupError("dataset has no split '" + name + "'");
  return it->second;
}

const std::vector<Annotation>& Dataset::boxes_of(const std::string& id) const {
  auto it = annotations.find(id);
  if (it == annotations.end())
    throw LookupError("no annotations for image '" + id + "'");
  return it->second;
}

Dataset load_dataset(const std::string& root) {
  Dataset ds;
  ds.root = root;

  std::ifstream mf(root + "/manifest.json");
  if (!mf) throw IoError("cannot open " + root + "/manifest.json");
  nlohmann::json manifest;
  try {
    mf >> manifest;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("malformed manifest.json: " + std::string(e.what()));
  }
  require(manifest.value("format", "") == "t2-synth-corpus",
          "unrecognized manifest format in " + root);
  ds.seed = manifest.value("seed", uint64_t{0});
  for (auto& [name, ids] : manifest.at("splits").items())
    ds.splits[name] = ids.get<std::vector<std::string>>();
  if (manifest.contains("checksums"))
    for (auto& [path, crc] : manifest.at("checksums").items())
      ds.checksums[path] = crc.get<std::string>();

  std::ifstream af(root + "/annotations.jsonl");
  if (!af) throw IoError("cannot open " + root + "/annotations.jsonl");
  std::string line;
  int lineno = 0;
  while (std::getline(af, line)) {
    ++lineno;
    if (line.empty()) continue;
    nlohmann::json rec;
    try {
      rec = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw ValidationError("annotations.jsonl line " + std::to_string(lineno) +
                            ": " + std::string(e.what()));
    }
    std::vector<Annotation> anns;
    for (const auto& b : rec.at("boxes")) {
      Annotation a;
      a.box = {b.at("x1").get<double>(), b.at("y1").get<double>(),
               b.at("x2").get<double>(), b.at("y2").get<double>()};
      a.class_id = b.at("class_id").get<int>();
      require(box_valid(a.box), "annotations.jsonl line " +
                                    std::to_string(lineno) + ": invalid box");
      anns.push_back(a);
    }
    ds.annotations[rec.at("id").get<std::string>()] = std::move(anns);
  }

  for (const auto& [name, ids] : ds.splits)
    for (const auto& id : ids)
      require(ds.annotations.count(id) > 0,
              "split '" + name + "' references unannotated image '" + id + "'");
  return ds;
}

Tensor<float> load_image(const Dataset& ds, const std::string& id) {
  return read_png_rgb8(ds.root + "/images/" + id + ".png");
}

Tensor<float> load_illumination(const Dataset& ds, const std::string& id) {
  return read_t2il(ds.root + "/illum/" + id + ".npyf");
}

std::vector<std::string> verify_checksums(const Dataset& ds) {
  std::vector<std::string> bad;
  for (const auto& [rel, want] : ds.checksums)
    if (crc32_hex(crc32_file(ds.root + "/" + rel)) != want) bad.push_back(rel);
  return bad;
}

bool PrecomputedDecompositionStore::contains(const std::string& key) const {
  return std::filesystem::exists(dir + "/" + key + ".npyf");
}

Tensor<float> PrecomputedDecompositionStore::load(const std::string& key) const {
  const std::string path = dir + "/" + key + ".npyf";
  if (!std::filesystem::exists(path))
    throw LookupError("no precomputed illumination for '" + key + "' in " +
                      dir);
  return read_t2il(path);
}

}  // namespace t2
