#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "datk/graph.hpp"
#include "datk/layers.hpp"
#include "datk/params.hpp"
#include "datk/tensor.hpp"

namespace datk::models {

struct ImageShape {
  std::size_t channels = 3;
  std::size_t height = 32;
  std::size_t width = 32;

  std::size_t numel() const { return channels * height * width; }
  // Element count of the half spectrum [C,H,W/2+1].
  std::size_t half_numel() const { return channels * height * (width / 2 + 1); }
  friend bool operator==(const ImageShape&, const ImageShape&) = default;
};

// conv3x3(C->16,s1)-BN-ReLU, conv3x3(16->32,s2)-BN-ReLU,
// conv3x3(32->64,s2)-BN-ReLU, global average pool, linear(64->classes).
class SmallConvNet {
 public:
  SmallConvNet(ImageShape input, std::size_t classes, std::uint64_t seed);

  // x is [N,C,H,W]. Train mode updates running statistics of `bank` only.
  Var forward(Graph& g, Var x, Mode mode, Bank bank);
  Tensor logits(const Tensor& x, Mode mode, Bank bank);

  ParameterSet& params() { return params_; }
  const ParameterSet& params() const { return params_; }
  const std::vector<LayerSpec>& layers() const { return layers_; }
  std::vector<std::string> bn_layer_names() const;
  ImageShape input_shape() const { return input_; }
  std::size_t classes() const { return classes_; }

  // Trainable names, optionally leaving out bank B's affine parameters.
  std::vector<std::string> trainable_names(bool include_bank_b) const;
  // Copies every bank-A batch-norm entry (values and velocity) into bank B.
  void mirror_bank_b();

 private:
  ImageShape input_;
  std::size_t classes_;
  std::vector<LayerSpec> layers_;
  ParameterSet params_;
};

enum class AagInput { NoiseOnly, NoiseOneHot, NoiseLogits };

std::string_view aag_input_name(AagInput mode);
AagInput parse_aag_input(std::string_view name);

inline constexpr std::size_t kDefaultTau = 100;

// Four linear layers (tau+cond) -> 256 -> 512 -> 1024 -> C*H*(W/2+1) with
// ReLU between and a sigmoid at the end. Parameter names carry the "aag."
// prefix so they never collide with classifier names on a shared graph.
class AagNet {
 public:
  AagNet(ImageShape image, std::size_t classes, AagInput mode, std::size_t tau, std::uint64_t seed);

  std::size_t tau() const { return tau_; }
  std::size_t cond_width() const;
  std::size_t output_width() const { return image_.half_numel(); }
  AagInput input_mode() const { return mode_; }
  ImageShape image_shape() const { return image_; }

  // Concatenates z [N,tau] and conditioning [N,cond_width] (ignored for
  // noise-only) into the network input.
  Tensor make_input(const Tensor& z, const Tensor* conditioning) const;
  // input [N,tau+cond] -> [N,C*H*(W/2+1)] in (0,1).
  Var forward(Graph& g, Var input);
  Tensor forward(const Tensor& z, const Tensor* conditioning);

  ParameterSet& params() { return params_; }
  const ParameterSet& params() const { return params_; }
  std::vector<std::string> trainable_names() const { return params_.trainable_names(); }

 private:
  ImageShape image_;
  std::size_t classes_;
  AagInput mode_;
  std::size_t tau_;
  ParameterSet params_;
};

// Running mean of natural half amplitudes, used to bring generator output
// (0,1) up to natural magnitudes.
class AmplitudeScale {
 public:
  static constexpr double kMomentum = 0.01;

  explicit AmplitudeScale(ImageShape image);

  bool initialized() const { return initialized_; }
  // First call copies the batch mean; later calls move by kMomentum.
  // half_amplitudes is [N,C,H,W/2+1].
  void update(const Tensor& half_amplitudes);
  // [C,H,W/2+1]
  const Tensor& mean() const;
  // raw [N, C*H*(W/2+1)] or [N,C,H,W/2+1] -> raw * 2 * mean, shaped [N,C,H,W/2+1].
  Tensor apply(const Tensor& raw) const;
  Var apply(Graph& g, Var raw) const;

  void set_mean(Tensor mean);

 private:
  ImageShape image_;
  Tensor mean_;
  bool initialized_ = false;
};

// Spectrum of a batch [N,C,H,W]; both members [N,C,H,W].
struct BatchSpectrum {
  Tensor amplitude;
  Tensor phase;
};
BatchSpectrum decompose_batch(const Tensor& x);
// [N,C,H,W] full amplitudes -> [N,C,H,W/2+1]
Tensor half_amplitudes(const Tensor& full_amplitude);

// Generator conditioning per input mode: nothing, one-hot labels, or
// eval-mode bank-A logits of `net` (constant, no gradient path).
Tensor conditioning_for(const AagNet& gen, SmallConvNet& net, const Tensor& x,
                        std::span<const int> labels);

// Draws z ~ N(0,1) of shape [n, tau].
Tensor draw_noise(std::size_t n, std::size_t tau, std::mt19937_64& rng);

// x_hat = clamp(IDFT(lambda * expand(scaled A_G) + (1 - lambda) * A(x), P(x)), 0, 1)
// on a graph, with gradients reaching the generator parameters.
Var recombine(Graph& g, const Tensor& x, const BatchSpectrum& spectrum, SmallConvNet& net,
              AagNet& gen, const AmplitudeScale& scale, std::span<const double> lambdas,
              std::span<const int> labels, const Tensor& z);

// Value-level recombination; z is drawn from rng.
Tensor build_recombined(const Tensor& x, SmallConvNet& net, AagNet& gen, const AmplitudeScale& scale,
                        std::span<const double> lambdas, std::span<const int> labels,
                        std::mt19937_64& rng);

struct BnSimilarity {
  std::string layer;
  double gamma = 1.0;
  double beta = 1.0;
  double running_mean = 1.0;
  double running_var = 1.0;
  bool degenerate = false;
};
std::vector<BnSimilarity> bn_parameter_similarity(const SmallConvNet& net);

}  // namespace datk::models
