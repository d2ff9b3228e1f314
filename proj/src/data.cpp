#include "datk/data.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "datk/error.hpp"
#include "datk/spectral.hpp"

namespace datk::data {

models::ImageShape Dataset::image_shape() const {
  if (images.rank() != 4) throw ContractError("dataset has no images");
  return {images.dim(1), images.dim(2), images.dim(3)};
}

Dataset Dataset::subset(std::span<const std::size_t> indices) const {
  if (indices.empty()) throw ContractError("empty subset");
  const std::size_t per = images.numel() / images.dim(0);
  Shape s = images.shape();
  s[0] = indices.size();
  Dataset out;
  out.images = Tensor(s);
  out.classes = classes;
  out.labels.reserve(indices.size());
  for (std::size_t k = 0; k < indices.size(); ++k) {
    const std::size_t i = indices[k];
    if (i >= size()) throw ContractError("subset index out of range");
    std::copy_n(images.data() + i * per, per, out.images.data() + k * per);
    out.labels.push_back(labels[i]);
  }
  return out;
}

Dataset Dataset::slice(std::size_t begin, std::size_t count) const {
  Dataset out;
  out.images = images.rows(begin, count);
  out.labels.assign(labels.begin() + static_cast<std::ptrdiff_t>(begin),
                    labels.begin() + static_cast<std::ptrdiff_t>(begin + count));
  out.classes = classes;
  return out;
}

namespace {

std::size_t partner(std::size_t u, std::size_t v, std::size_t h, std::size_t w) {
  return ((h - u) % h) * w + (w - v) % w;
}

void check_spec(const SyntheticSpec& spec) {
  if (spec.classes < 2) throw ConfigError("synthetic data needs at least 2 classes");
  if (spec.image.channels == 0 || spec.image.height < 4 || spec.image.width < 4) {
    throw ConfigError("synthetic images must be at least 4x4");
  }
  if (!(spec.phase_noise >= 0.0)) throw ConfigError("phase noise must be >= 0");
  if (!(spec.amplitude_cue >= 0.0)) throw ConfigError("amplitude cue must be >= 0");
}

}  // namespace

Tensor phase_templates(const SyntheticSpec& spec) {
  check_spec(spec);
  const auto [c, h, w] = spec.image;
  std::mt19937_64 rng(spec.template_seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Tensor out({spec.classes, c, h, w});
  for (std::size_t k = 0; k < spec.classes; ++k) {
    Tensor noise({h, w});
    for (auto& v : noise.vec()) v = normal(rng);
    const Tensor phase = spectral::dft_decompose(noise).phase;
    for (std::size_t ch = 0; ch < c; ++ch) {
      std::copy(phase.vec().begin(), phase.vec().end(), out.data() + (k * c + ch) * h * w);
    }
  }
  return out;
}

Dataset make_synthetic_dataset(const SyntheticSpec& spec, std::size_t n_per_class,
                               std::uint64_t seed) {
  check_spec(spec);
  if (n_per_class == 0) throw ConfigError("n_per_class must be >= 1");
  const auto [c, h, w] = spec.image;
  const std::size_t plane = h * w;
  const Tensor templates = phase_templates(spec);

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> uni(0.0, 1.0);

  Dataset out;
  out.classes = spec.classes;
  out.images = Tensor({n_per_class * spec.classes, c, h, w});
  out.labels.reserve(n_per_class * spec.classes);

  // Per-class orientation gain, mirrored onto partner bins so the
  // spectrum stays conjugate-symmetric.
  std::vector<double> tilts(spec.classes * plane);
  for (std::size_t k = 0; k < spec.classes; ++k) {
    const double theta_k = std::numbers::pi * static_cast<double>(k) / static_cast<double>(spec.classes);
    for (std::size_t u = 0; u < h; ++u) {
      const double su = static_cast<double>(u) - (u > h / 2 ? static_cast<double>(h) : 0.0);
      for (std::size_t v = 0; v < w; ++v) {
        const double sv = static_cast<double>(v) - (v > w / 2 ? static_cast<double>(w) : 0.0);
        const std::size_t i = u * w + v, p = partner(u, v, h, w);
        tilts[k * plane + i] = p < i ? tilts[k * plane + p]
                                     : std::exp(spec.amplitude_cue * std::cos(2.0 * (std::atan2(su, sv) - theta_k)));
      }
    }
  }

  std::vector<double> jitter(plane), phase_jitter(plane);
  Tensor amp({c, h, w}), phase({c, h, w});
  for (std::size_t n = 0; n < n_per_class; ++n) {
    for (std::size_t k = 0; k < spec.classes; ++k) {
      const double falloff = 0.8 + 0.8 * uni(rng);
      for (std::size_t u = 0; u < h; ++u) {
        for (std::size_t v = 0; v < w; ++v) {
          const std::size_t i = u * w + v, p = partner(u, v, h, w);
          if (p < i) {
            jitter[i] = jitter[p];
            phase_jitter[i] = -phase_jitter[p];
          } else {
            jitter[i] = std::exp(0.3 * normal(rng));
            phase_jitter[i] = p == i ? 0.0 : spec.phase_noise * normal(rng);
          }
        }
      }
      for (std::size_t ch = 0; ch < c; ++ch) {
        const double mean = 0.35 + 0.3 * uni(rng);
        const double contrast = 0.12 + 0.08 * uni(rng);
        double energy = 0.0;
        for (std::size_t u = 0; u < h; ++u) {
          const double fu = static_cast<double>(std::min(u, h - u));
          for (std::size_t v = 0; v < w; ++v) {
            const double fv = static_cast<double>(std::min(v, w - v));
            const double rho = std::sqrt(fu * fu + fv * fv);
            const std::size_t i = u * w + v;
            const double a = i == 0 ? 0.0 : tilts[k * plane + i] * jitter[i] / std::pow(1.0 + rho, falloff);
            amp[ch * plane + u * w + v] = a;
            energy += a * a;
          }
        }
        // Non-DC energy of the spectrum is (HW)^2 times the pixel variance.
        const double gain = static_cast<double>(plane) * contrast / std::sqrt(energy);
        for (std::size_t i = 0; i < plane; ++i) amp[ch * plane + i] *= gain;
        amp[ch * plane] = static_cast<double>(plane) * mean;
        for (std::size_t i = 0; i < plane; ++i) {
          phase[ch * plane + i] = templates[(k * c + ch) * plane + i] + phase_jitter[i];
        }
        phase[ch * plane] = 0.0;
      }
      const Tensor img = spectral::idft_recombine(amp, phase, {.clamp_to_unit = true});
      const std::size_t idx = out.labels.size();
      std::copy(img.vec().begin(), img.vec().end(), out.images.data() + idx * c * plane);
      out.labels.push_back(static_cast<int>(k));
    }
  }
  return out;
}

}  // namespace datk::data
