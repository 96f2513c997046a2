#pragma once

#include <string>
#include <vector>

#include "t2/core/rng.hpp"
#include "t2/core/tensor.hpp"
#include "t2/det/boxes.hpp"

namespace t2 {

// Class ids of the rendered shapes.
inline constexpr int kSynthClasses = 4;
const char* synth_class_name(int class_id);  // disk, square, triangle, ring

struct SynthConfig {
  uint64_t seed = 7;
  int canvas = 128;
  int train = 800, val = 100, test = 100;
  int min_objects = 1, max_objects = 8;
  double min_size = 10.0, max_size = 48.0;
  double max_overlap = 0.5;     // pairwise IoU cap between instance boxes
  double noise_sigma = 0.01;    // additive read noise after darkening
  double darkness_min = 0.25;   // global darkness scalar range
  double darkness_max = 0.75;
  double field_floor = 0.15;    // lower clamp of the base lighting field
  double max_field_step = 0.05; // smoothness bound, per-pixel change
};

void validate(const SynthConfig& cfg);

// One fully rendered scene before any quantization. `illum` is the exact
// multiplicative field (equal across channels); `low_light` already includes
// noise and clipping when noise_sigma > 0.
struct Scene {
  Tensor<float> clean;
  Tensor<float> illum;
  Tensor<float> low_light;
  std::vector<Annotation> annotations;
  double darkness = 0;  // the sampled global scalar
};

Scene render_scene(const SynthConfig& cfg, int scene_id);

// clean * field, then optional additive Gaussian noise and a [0,1] clip.
// Rejects fields with values outside (0,1].
Tensor<float> darken(const Tensor<float>& clean, const Tensor<float>& field,
                     double sigma, Rng& rng);

// Writes images/<id>.png, illum/<id>.npyf, annotations.jsonl, manifest.json.
// The persisted illumination is the effective field of the quantized image
// (stored_png / clean), so dividing the loaded image by it recovers the clean
// render despite 8-bit storage. Returns the ordered list of image ids.
std::vector<std::string> build_corpus(const SynthConfig& cfg,
                                      const std::string& out_dir);

}  // namespace t2
