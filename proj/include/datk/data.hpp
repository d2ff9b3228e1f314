#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "datk/models.hpp"
#include "datk/tensor.hpp"

namespace datk::data {

// Labeled image collection; images is [N,C,H,W] with values in [0,1].
struct Dataset {
  Tensor images;
  std::vector<int> labels;
  std::size_t classes = 0;

  std::size_t size() const { return labels.size(); }
  bool empty() const { return labels.empty(); }
  models::ImageShape image_shape() const;
  // Gathers the given sample indices into a batch.
  Dataset subset(std::span<const std::size_t> indices) const;
  Dataset slice(std::size_t begin, std::size_t count) const;
};

// Class signal lives in per-class phase templates; amplitude carries a
// per-sample random style with roughly 1/f falloff, optionally tilted
// toward a class-specific orientation.
struct SyntheticSpec {
  std::size_t classes = 4;
  models::ImageShape image{3, 16, 16};
  // Std of the per-sample phase jitter added to the template, radians.
  double phase_noise = 0.3;
  // Strength of the class orientation in the amplitude: every non-DC
  // coefficient is scaled by exp(amplitude_cue * cos(2 (theta - theta_k))),
  // theta its frequency angle and theta_k = k * pi / classes. 0 disables it.
  double amplitude_cue = 0.0;
  // Seed of the phase templates; shared by train and test draws.
  std::uint64_t template_seed = 7;

  friend bool operator==(const SyntheticSpec&, const SyntheticSpec&) = default;
};

// n_per_class samples of every class, interleaved by class. Amplitude
// styles and phase jitter are drawn from `seed`.
Dataset make_synthetic_dataset(const SyntheticSpec& spec, std::size_t n_per_class,
                               std::uint64_t seed);

// Phase templates [classes, C, H, W] for a spec.
Tensor phase_templates(const SyntheticSpec& spec);

}  // namespace datk::data
