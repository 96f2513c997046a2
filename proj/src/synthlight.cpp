#include "t2/synthlight.hpp"

#include <zlib.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <vector>

#include "json.hpp"
#include "t2/data/checksum.hpp"
#include "t2/data/image_io.hpp"
#include "t2/data/npyf_io.hpp"

namespace t2 {

namespace {

constexpr double kMinAlbedo = 0.08;  // darkest background channel

struct Lobe {
  double cx, cy, sigma, amp;
};

struct Instance {
  int class_id;
  Box box;
  double albedo[3];
};

// fraction of a 4x4 subsample grid inside the shape
double coverage(const Instance& obj, int px, int py) {
  const double cx = obj.box.cx(), cy = obj.box.cy();
  const double hw = 0.5 * obj.box.width(), hh = 0.5 * obj.box.height();
  int hit = 0;
  for (int sy = 0; sy < 4; ++sy)
    for (int sx = 0; sx < 4; ++sx) {
      const double x = px + (sx + 0.5) / 4.0;
      const double y = py + (sy + 0.5) / 4.0;
      bool inside = false;
      switch (obj.class_id) {
        case 0: {  // disk
          const double dx = (x - cx) / hw, dy = (y - cy) / hh;
          inside = dx * dx + dy * dy <= 1.0;
          break;
        }
        case 1:  // square
          inside = std::abs(x - cx) <= hw && std::abs(y - cy) <= hh;
          break;
        case 2: {  // triangle, apex up
          const double t = (y - obj.box.y1) / obj.box.height();
          inside = t >= 0.0 && t <= 1.0 && std::abs(x - cx) <= hw * t;
          break;
        }
        default: {  // ring
          const double dx = (x - cx) / hw, dy = (y - cy) / hh;
          const double d2 = dx * dx + dy * dy;
          inside = d2 <= 1.0 && d2 >= 0.55 * 0.55;
          break;
        }
      }
      hit += inside;
    }
  return hit / 16.0;
}

}  // namespace

const char* synth_class_name(int class_id) {
  switch (class_id) {
    case 0: return "disk";
    case 1: return "square";
    case 2: return "triangle";
    case 3: return "ring";
    default: throw LookupError("unknown class id " + std::to_string(class_id));
  }
}

void validate(const SynthConfig& cfg) {
  require(cfg.canvas >= 32 && cfg.canvas % 128 == 0,
          "synth.canvas must be a positive multiple of 128");
  require(cfg.train >= 0 && cfg.val >= 0 && cfg.test >= 0 &&
              cfg.train + cfg.val + cfg.test > 0,
          "synth split sizes must be nonnegative and sum above zero");
  require(cfg.min_objects >= 1 && cfg.max_objects >= cfg.min_objects,
          "synth object count range invalid");
  require(cfg.min_size >= 4.0 && cfg.max_size >= cfg.min_size &&
              cfg.max_size <= cfg.canvas - 2.0,
          "synth size range invalid for the canvas");
  require(cfg.max_overlap >= 0.0 && cfg.max_overlap < 1.0,
          "synth.max_overlap must be in [0,1)");
  require(cfg.noise_sigma >= 0.0, "synth.noise_sigma must be nonnegative");
  require(cfg.darkness_min > 0.0 && cfg.darkness_max >= cfg.darkness_min &&
              cfg.darkness_max <= 0.97,
          "synth darkness range must sit inside (0, 0.97]");
  require(cfg.field_floor > 0.0 && cfg.field_floor <= 1.0,
          "synth.field_floor must be in (0,1]");
  // darkest representable pixel must still land on a nonzero 8-bit code,
  // otherwise the stored illumination cannot be inverted
  require(cfg.darkness_min * cfg.field_floor * kMinAlbedo * 255.0 > 0.5,
          "corpus too dark for 8-bit storage: raise darkness_min or "
          "field_floor");
  require(cfg.max_field_step > 0.0, "synth.max_field_step must be positive");
}

Tensor<float> darken(const Tensor<float>& clean, const Tensor<float>& field,
                     double sigma, Rng& rng) {
  require(field.same_shape(clean), "darken: field shape " + field.shape_str() +
                                       " does not match image " +
                                       clean.shape_str());
  require(field.all_finite(), "darken: field has non-finite values");
  require(field.m.minCoeff() > 0.0f && field.m.maxCoeff() <= 1.0f,
          "darken: field values outside (0,1]");
  Tensor<float> out = clean;
  out.m.array() *= field.m.array();
  if (sigma > 0.0) {
    for (Eigen::Index i = 0; i < out.m.size(); ++i)
      out.m.data()[i] += static_cast<float>(rng.normal(0.0, sigma));
    out.m = out.m.cwiseMax(0.0f).cwiseMin(1.0f);
  }
  return out;
}

Scene render_scene(const SynthConfig& cfg, int scene_id) {
  validate(cfg);
  Rng rng(mix_seed(cfg.seed, 70000 + static_cast<uint64_t>(scene_id)));
  const int S = cfg.canvas;
  Scene scene;
  scene.clean = Tensor<float>::grid(1, 3, S, S);

  // smooth background albedo: a per-channel base plus shared soft blobs
  double base[3];
  for (double& b : base) b = rng.uniform(0.10, 0.20);
  std::vector<Lobe> blobs(3);
  for (auto& l : blobs)
    l = {rng.uniform(0.0, S), rng.uniform(0.0, S), rng.uniform(16.0, 48.0),
         rng.uniform(-0.04, 0.04)};
  for (int y = 0; y < S; ++y)
    for (int x = 0; x < S; ++x) {
      double bump = 0;
      for (const auto& l : blobs) {
        const double dx = x + 0.5 - l.cx, dy = y + 0.5 - l.cy;
        bump += l.amp * std::exp(-(dx * dx + dy * dy) / (2 * l.sigma * l.sigma));
      }
      for (int c = 0; c < 3; ++c)
        scene.clean.at(0, c, y, x) = static_cast<float>(
            std::clamp(base[c] + bump, kMinAlbedo, 0.24));
    }

  // place instances by rejection, capping pairwise box overlap
  const int want =
      cfg.min_objects + rng.uniform_int(cfg.max_objects - cfg.min_objects + 1);
  std::vector<Instance> objects;
  int tries = 0;
  while (static_cast<int>(objects.size()) < want && tries < 60 * want) {
    ++tries;
    Instance obj;
    obj.class_id = rng.uniform_int(kSynthClasses);
    const double w = rng.uniform(cfg.min_size, cfg.max_size);
    const double h = std::min(w * rng.uniform(0.75, 1.3333),
                              static_cast<double>(cfg.canvas) - 2.0);
    const double x1 = rng.uniform(1.0, S - 1.0 - w);
    const double y1 = rng.uniform(1.0, S - 1.0 - h);
    obj.box = {x1, y1, x1 + w, y1 + h};
    for (double& a : obj.albedo) a = rng.uniform(0.30, 0.95);
    bool ok = true;
    for (const auto& other : objects)
      ok = ok && iou(obj.box, other.box) <= cfg.max_overlap;
    if (ok) objects.push_back(obj);
  }

  for (const auto& obj : objects) {
    const int x0 = std::max(0, static_cast<int>(std::floor(obj.box.x1)) - 1);
    const int y0 = std::max(0, static_cast<int>(std::floor(obj.box.y1)) - 1);
    const int x1 = std::min(S - 1, static_cast<int>(std::ceil(obj.box.x2)));
    const int y1 = std::min(S - 1, static_cast<int>(std::ceil(obj.box.y2)));
    for (int y = y0; y <= y1; ++y)
      for (int x = x0; x <= x1; ++x) {
        const double cov = coverage(obj, x, y);
        if (cov == 0.0) continue;
        for (int c = 0; c < 3; ++c) {
          float& px = scene.clean.at(0, c, y, x);
          px = static_cast<float>(px * (1.0 - cov) + obj.albedo[c] * cov);
        }
      }
    scene.annotations.push_back({obj.box, obj.class_id});
  }

  // lighting: clamped low-frequency lobe mixture scaled by a global darkness
  std::vector<Lobe> lights(2 + rng.uniform_int(3));
  for (auto& l : lights)
    l = {rng.uniform(-0.25 * S, 1.25 * S), rng.uniform(-0.25 * S, 1.25 * S),
         rng.uniform(24.0, 64.0), rng.uniform(-0.4, 0.4)};
  scene.darkness = rng.uniform(cfg.darkness_min, cfg.darkness_max);
  scene.illum = Tensor<float>::grid(1, 3, S, S);
  for (int y = 0; y < S; ++y)
    for (int x = 0; x < S; ++x) {
      double v = 0.55;
      for (const auto& l : lights) {
        const double dx = x + 0.5 - l.cx, dy = y + 0.5 - l.cy;
        v += l.amp * std::exp(-(dx * dx + dy * dy) / (2 * l.sigma * l.sigma));
      }
      const float field = static_cast<float>(
          scene.darkness * std::clamp(v, cfg.field_floor, 1.0));
      for (int c = 0; c < 3; ++c) scene.illum.at(0, c, y, x) = field;
    }

  scene.low_light = darken(scene.clean, scene.illum, cfg.noise_sigma, rng);
  return scene;
}

std::vector<std::string> build_corpus(const SynthConfig& cfg,
                                      const std::string& out_dir) {
  validate(cfg);
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(fs::path(out_dir) / "images", ec);
  fs::create_directories(fs::path(out_dir) / "illum", ec);
  if (ec) throw IoError("cannot create corpus directories under " + out_dir);

  const int total = cfg.train + cfg.val + cfg.test;
  std::vector<std::string> ids;
  std::map<std::string, std::string> checksums;
  std::string jsonl;

  for (int i = 0; i < total; ++i) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "img_%05d", i);
    const std::string id = buf;
    ids.push_back(id);

    Scene scene = render_scene(cfg, i);

    // quantize exactly as the png writer will, then derive the effective
    // illumination of the stored bytes so division recovers the clean render
    Tensor<float> quant = scene.low_light;
    for (Eigen::Index k = 0; k < quant.m.size(); ++k) {
      const float v = std::min(1.0f, std::max(0.0f, quant.m.data()[k]));
      quant.m.data()[k] = static_cast<float>(std::lround(255.0f * v)) / 255.0f;
    }
    Tensor<float> illum_eff = quant;
    for (Eigen::Index k = 0; k < illum_eff.m.size(); ++k) {
      const float lq = std::max(quant.m.data()[k], 1.0f / 255.0f);
      illum_eff.m.data()[k] = std::min(lq / scene.clean.m.data()[k], 1.0f);
    }

    const std::string img_rel = "images/" + id + ".png";
    const std::string ill_rel = "illum/" + id + ".npyf";
    write_png_rgb8(out_dir + "/" + img_rel, quant);
    write_t2il(out_dir + "/" + ill_rel, illum_eff);
    checksums[img_rel] = crc32_hex(crc32_file(out_dir + "/" + img_rel));
    checksums[ill_rel] = crc32_hex(crc32_file(out_dir + "/" + ill_rel));

    nlohmann::json rec;
    rec["id"] = id;
    rec["boxes"] = nlohmann::json::array();
    for (const auto& ann : scene.annotations)
      rec["boxes"].push_back({{"class_id", ann.class_id},
                              {"x1", ann.box.x1},
                              {"y1", ann.box.y1},
                              {"x2", ann.box.x2},
                              {"y2", ann.box.y2}});
    jsonl += rec.dump();
    jsonl += '\n';
  }

  {
    std::ofstream f(out_dir + "/annotations.jsonl",
                    std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot write " + out_dir + "/annotations.jsonl");
    f << jsonl;
  }
  checksums["annotations.jsonl"] =
      crc32_hex(crc32_bytes(jsonl.data(), jsonl.size()));

  nlohmann::json manifest;
  manifest["format"] = "t2-synth-corpus";
  manifest["version"] = 1;
  manifest["seed"] = cfg.seed;
  manifest["config"] = {{"canvas", cfg.canvas},
                        {"train", cfg.train},
                        {"val", cfg.val},
                        {"test", cfg.test},
                        {"min_objects", cfg.min_objects},
                        {"max_objects", cfg.max_objects},
                        {"min_size", cfg.min_size},
                        {"max_size", cfg.max_size},
                        {"max_overlap", cfg.max_overlap},
                        {"noise_sigma", cfg.noise_sigma},
                        {"darkness_min", cfg.darkness_min},
                        {"darkness_max", cfg.darkness_max},
                        {"field_floor", cfg.field_floor},
                        {"max_field_step", cfg.max_field_step}};
  manifest["splits"]["train"] =
      std::vector<std::string>(ids.begin(), ids.begin() + cfg.train);
  manifest["splits"]["val"] = std::vector<std::string>(
      ids.begin() + cfg.train, ids.begin() + cfg.train + cfg.val);
  manifest["splits"]["test"] =
      std::vector<std::string>(ids.begin() + cfg.train + cfg.val, ids.end());
  manifest["checksums"] = checksums;

  std::ofstream mf(out_dir + "/manifest.json",
                   std::ios::binary | std::ios::trunc);
  if (!mf) throw IoError("cannot write " + out_dir + "/manifest.json");
  mf << manifest.dump(2) << '\n';
  return ids;
}

uint32_t crc32_bytes(const void* data, size_t len, uint32_t seed) {
  return static_cast<uint32_t>(
      ::crc32(seed, static_cast<const Bytef*>(data), static_cast<uInt>(len)));
}

uint32_t crc32_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open for checksum: " + path);
  char buf[1 << 16];
  uint32_t crc = 0;
  while (f.read(buf, sizeof(buf)) || f.gcount() > 0)
    crc = crc32_bytes(buf, static_cast<size_t>(f.gcount()), crc);
  return crc;
}

std::string crc32_hex(uint32_t crc) {
  char buf[9];
  std::snprintf(buf, sizeof(buf), "%08x", crc);
  return buf;
}

}  // namespace t2
