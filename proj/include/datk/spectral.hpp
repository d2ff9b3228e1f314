#pragma once

// 2-D discrete Fourier transform of real images, per channel.
//
// Convention: F(u,v) = sum_{h,w} x(h,w) exp(-2*pi*i*(u*h/H + v*w/W)), no
// scaling on the forward transform, 1/(H*W) on the inverse. Amplitude is
// |F|; phase is atan2(Im, Re) in (-pi, pi].

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

#include "datk/graph.hpp"
#include "datk/tensor.hpp"

namespace datk::spectral {

enum class DftPath { Auto, Direct, Fast };

using Complex = std::complex<double>;

// In-place 2-D transform of one H*W row-major plane. Direct is the
// separable O(HW(H+W)) sum; Fast is radix-2 and needs power-of-two sides;
// Auto picks Fast when possible. inverse=true applies the 1/(HW) factor.
void transform_plane(std::span<Complex> plane, std::size_t h, std::size_t w, bool inverse,
                     DftPath path = DftPath::Auto);

bool is_power_of_two(std::size_t n);

struct Spectrum {
  Tensor amplitude;  // [C,H,W], >= 0
  Tensor phase;      // [C,H,W], (-pi, pi]
};

// x is [C,H,W] (or [H,W], treated as one channel) with H, W >= 2.
Spectrum dft_decompose(const Tensor& x, DftPath path = DftPath::Auto);

struct RecombineOptions {
  bool clamp_to_unit = false;
  DftPath path = DftPath::Auto;
};
// Real part of IDFT(amplitude * exp(i*phase)). When the product is
// conjugate-symmetric the discarded imaginary residue must be below 1e-4,
// else NumericalError.
Tensor idft_recombine(const Tensor& amplitude, const Tensor& phase,
                      RecombineOptions opts = {});

inline constexpr double kImagResidueLimit = 1e-4;

// lambda * other + (1 - lambda) * primary.
Tensor mix_amplitudes(const Tensor& primary, const Tensor& other, double lambda);

inline std::size_t half_width(std::size_t w) { return w / 2 + 1; }

// [C,H,W/2+1] -> [C,H,W] with A(u,v) == A(-u mod H, -v mod W) exactly.
// Columns that pair with themselves (v == 0, and v == W/2 for even W) are
// symmetrized by averaging each (u, -u) pair, so the result is symmetric for
// any input and equal to the input when it already was.
Tensor expand_half_amplitude(const Tensor& half, std::size_t h, std::size_t w);
// First W/2+1 columns of a conjugate-symmetric amplitude (checked to 1e-5).
Tensor extract_half(const Tensor& full);

// Largest |A(c,u,v) - A(c,-u,-v)|.
double symmetry_defect(const Tensor& full);

// Wrapped angular distance in [0, pi].
double angle_distance(double a, double b);

// Differentiable counterparts over batches [N,C,...].
namespace ops {
// [N,C,H,W/2+1] -> [N,C,H,W]
Var expand_half(Graph& g, Var half, std::size_t w);
// out_i = lambda_i * gen_i + (1 - lambda_i) * natural_i
Var mix(Graph& g, Var gen, const Tensor& natural, std::span<const double> lambdas);
// Real part of IDFT(amplitude * exp(i*phase)); phase is held constant.
Var idft_with_phase(Graph& g, Var amplitude, const Tensor& phase);
}  // namespace ops

}  // namespace datk::spectral
