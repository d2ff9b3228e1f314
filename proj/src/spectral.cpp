#include "datk/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "datk/error.hpp"
#include "datk/kernels.hpp"

namespace datk::spectral {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

// tw[j] = exp(sign * 2*pi*i * j / n)
std::vector<Complex> twiddles(std::size_t n, double sign) {
  std::vector<Complex> tw(n);
  for (std::size_t j = 0; j < n; ++j) {
    const double a = sign * kTwoPi * static_cast<double>(j) / static_cast<double>(n);
    tw[j] = {std::cos(a), std::sin(a)};
  }
  return tw;
}

void dft_1d_direct(std::span<Complex> data, std::span<const Complex> tw, std::vector<Complex>& tmp) {
  const std::size_t n = data.size();
  tmp.assign(n, Complex{});
  for (std::size_t k = 0; k < n; ++k) {
    Complex acc{};
    std::size_t idx = 0;
    for (std::size_t j = 0; j < n; ++j) {
      acc += data[j] * tw[idx];
      idx += k;
      if (idx >= n) idx -= n;
    }
    tmp[k] = acc;
  }
  std::copy(tmp.begin(), tmp.end(), data.begin());
}

void fft_1d(std::span<Complex> data, std::span<const Complex> tw) {
  const std::size_t n = data.size();
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(data[i], data[j]);
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const std::size_t step = n / len;
    for (std::size_t i = 0; i < n; i += len) {
      for (std::size_t k = 0; k < len / 2; ++k) {
        const Complex u = data[i + k];
        const Complex v = data[i + k + len / 2] * tw[k * step];
        data[i + k] = u + v;
        data[i + k + len / 2] = u - v;
      }
    }
  }
}

bool self_conjugate(std::size_t u, std::size_t v, std::size_t h, std::size_t w) {
  return (2 * u) % h == 0 && (2 * v) % w == 0;
}

void split_chw(const Tensor& t, std::size_t& c, std::size_t& h, std::size_t& w) {
  if (t.rank() == 3) {
    c = t.dim(0);
    h = t.dim(1);
    w = t.dim(2);
  } else if (t.rank() == 2) {
    c = 1;
    h = t.dim(0);
    w = t.dim(1);
  } else {
    throw ConfigError("expected [C,H,W] or [H,W], got " + shape_str(t.shape()));
  }
}

}  // namespace

bool is_power_of_two(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

void transform_plane(std::span<Complex> plane, std::size_t h, std::size_t w, bool inverse,
                     DftPath path) {
  if (plane.size() != h * w) throw ContractError("transform_plane: size mismatch");
  const bool fast_ok = is_power_of_two(h) && is_power_of_two(w);
  if (path == DftPath::Fast && !fast_ok) {
    throw ConfigError("fast DFT path needs power-of-two sides");
  }
  const bool fast = path == DftPath::Fast || (path == DftPath::Auto && fast_ok);
  const double sign = inverse ? 1.0 : -1.0;
  const auto tw_w = twiddles(w, sign);
  const auto tw_h = twiddles(h, sign);
  std::vector<Complex> tmp;
  for (std::size_t r = 0; r < h; ++r) {
    auto row = plane.subspan(r * w, w);
    fast ? fft_1d(row, tw_w) : dft_1d_direct(row, tw_w, tmp);
  }
  std::vector<Complex> col(h);
  for (std::size_t c = 0; c < w; ++c) {
    for (std::size_t r = 0; r < h; ++r) col[r] = plane[r * w + c];
    fast ? fft_1d(col, tw_h) : dft_1d_direct(col, tw_h, tmp);
    for (std::size_t r = 0; r < h; ++r) plane[r * w + c] = col[r];
  }
  if (inverse) {
    const double s = 1.0 / static_cast<double>(h * w);
    for (Complex& z : plane) z *= s;
  }
}

Spectrum dft_decompose(const Tensor& x, DftPath path) {
  std::size_t c, h, w;
  split_chw(x, c, h, w);
  if (h < 2 || w < 2) throw ContractError("dft_decompose needs H, W >= 2");
  const Shape shape{c, h, w};
  Spectrum s{Tensor(shape), Tensor(shape)};
  std::vector<Complex> plane(h * w);
  for (std::size_t ch = 0; ch < c; ++ch) {
    const double* src = x.data() + ch * h * w;
    for (std::size_t i = 0; i < h * w; ++i) plane[i] = {src[i], 0.0};
    transform_plane(plane, h, w, false, path);
    for (std::size_t u = 0; u < h; ++u) {
      for (std::size_t v = 0; v < w; ++v) {
        Complex z = plane[u * w + v];
        // Real input: these bins are real up to rounding.
        if (self_conjugate(u, v, h, w)) z.imag(0.0);
        const std::size_t i = ch * h * w + u * w + v;
        s.amplitude[i] = std::hypot(z.real(), z.imag());
        double p = std::atan2(z.imag(), z.real());
        if (p <= -std::numbers::pi) p += kTwoPi;
        s.phase[i] = p;
      }
    }
  }
  return s;
}

namespace {

// Fills `plane` with IDFT(a * exp(i*phase)) and returns the largest
// imaginary residue; throws when the input is symmetric yet the residue is
// too large.
double inverse_plane(const double* amp, const double* phase, std::size_t h, std::size_t w,
                     DftPath path, std::vector<Complex>& plane) {
  plane.resize(h * w);
  double scale = 0.0;
  for (std::size_t i = 0; i < h * w; ++i) {
    plane[i] = std::polar(1.0, phase[i]) * amp[i];
    scale = std::max(scale, std::abs(amp[i]));
  }
  double defect = 0.0;
  for (std::size_t u = 0; u < h; ++u) {
    for (std::size_t v = 0; v < w; ++v) {
      const Complex a = plane[u * w + v];
      const Complex b = plane[((h - u) % h) * w + (w - v) % w];
      defect = std::max(defect, std::abs(a - std::conj(b)));
    }
  }
  const bool symmetric = defect <= 1e-9 * std::max(1.0, scale);
  transform_plane(plane, h, w, true, path);
  double residue = 0.0;
  for (const Complex& z : plane) residue = std::max(residue, std::abs(z.imag()));
  if (symmetric && residue >= kImagResidueLimit) {
    throw NumericalError("inverse DFT of a conjugate-symmetric spectrum left imaginary residue " +
                         std::to_string(residue));
  }
  return residue;
}

}  // namespace

Tensor idft_recombine(const Tensor& amplitude, const Tensor& phase, RecombineOptions opts) {
  if (amplitude.shape() != phase.shape()) throw ContractError("idft_recombine: shape mismatch");
  std::size_t c, h, w;
  split_chw(amplitude, c, h, w);
  for (double a : amplitude.vec()) {
    if (a < 0.0) throw ContractError("idft_recombine: negative amplitude");
  }
  Tensor out(amplitude.shape());
  std::vector<Complex> plane;
  for (std::size_t ch = 0; ch < c; ++ch) {
    const std::size_t off = ch * h * w;
    inverse_plane(amplitude.data() + off, phase.data() + off, h, w, opts.path, plane);
    for (std::size_t i = 0; i < h * w; ++i) {
      const double v = plane[i].real();
      out[off + i] = opts.clamp_to_unit ? std::clamp(v, 0.0, 1.0) : v;
    }
  }
  return out;
}

Tensor mix_amplitudes(const Tensor& primary, const Tensor& other, double lambda) {
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw ContractError("mix_amplitudes: lambda outside [0,1]");
  if (primary.shape() != other.shape()) throw ContractError("mix_amplitudes: shape mismatch");
  Tensor out(primary.shape());
  for (std::size_t i = 0; i < out.numel(); ++i) {
    if (primary[i] < 0.0 || other[i] < 0.0) throw ContractError("mix_amplitudes: negative amplitude");
    out[i] = lambda * other[i] + (1.0 - lambda) * primary[i];
  }
  return out;
}

namespace {

// For full-plane index (u,v): the half-plane source indices and weights.
// Returns 1 or 2 sources.
int half_sources(std::size_t u, std::size_t v, std::size_t h, std::size_t w, std::size_t wh,
                 std::size_t src[2]) {
  if (v >= wh) {
    src[0] = ((h - u) % h) * wh + (w - v);
    return 1;
  }
  const bool paired_column = v == 0 || (w % 2 == 0 && v == w / 2);
  const std::size_t um = (h - u) % h;
  if (paired_column && um != u) {
    src[0] = u * wh + v;
    src[1] = um * wh + v;
    return 2;
  }
  src[0] = u * wh + v;
  return 1;
}

}  // namespace

Tensor expand_half_amplitude(const Tensor& half, std::size_t h, std::size_t w) {
  std::size_t c, hh, wh;
  split_chw(half, c, hh, wh);
  if (hh != h || wh != half_width(w) || w < 2) {
    throw ContractError("expand_half_amplitude: half shape " + shape_str(half.shape()) +
                        " does not fit H=" + std::to_string(h) + " W=" + std::to_string(w));
  }
  Tensor out({c, h, w});
  for (std::size_t ch = 0; ch < c; ++ch) {
    const double* src = half.data() + ch * h * wh;
    double* dst = out.data() + ch * h * w;
    for (std::size_t u = 0; u < h; ++u) {
      for (std::size_t v = 0; v < w; ++v) {
        std::size_t s[2];
        const int k = half_sources(u, v, h, w, wh, s);
        dst[u * w + v] = k == 1 ? src[s[0]] : 0.5 * (src[s[0]] + src[s[1]]);
      }
    }
  }
  return out;
}

double symmetry_defect(const Tensor& full) {
  std::size_t c, h, w;
  split_chw(full, c, h, w);
  double d = 0.0;
  for (std::size_t ch = 0; ch < c; ++ch) {
    const double* p = full.data() + ch * h * w;
    for (std::size_t u = 0; u < h; ++u) {
      for (std::size_t v = 0; v < w; ++v) {
        d = std::max(d, std::abs(p[u * w + v] - p[((h - u) % h) * w + (w - v) % w]));
      }
    }
  }
  return d;
}

Tensor extract_half(const Tensor& full) {
  std::size_t c, h, w;
  split_chw(full, c, h, w);
  if (symmetry_defect(full) > 1e-5) throw ContractError("extract_half: input is not conjugate-symmetric");
  const std::size_t wh = half_width(w);
  Tensor out({c, h, wh});
  for (std::size_t ch = 0; ch < c; ++ch) {
    for (std::size_t u = 0; u < h; ++u) {
      for (std::size_t v = 0; v < wh; ++v) out[(ch * h + u) * wh + v] = full[(ch * h + u) * w + v];
    }
  }
  return out;
}

double angle_distance(double a, double b) {
  double d = std::fmod(std::abs(a - b), kTwoPi);
  return d > std::numbers::pi ? kTwoPi - d : d;
}

namespace ops {

Var expand_half(Graph& g, Var half, std::size_t w) {
  const Tensor& vh = g.value(half);
  if (vh.rank() != 4 || vh.dim(3) != half_width(w)) {
    throw ConfigError("expand_half expects [N,C,H,W/2+1], got " + shape_str(vh.shape()));
  }
  const std::size_t n = vh.dim(0), c = vh.dim(1), h = vh.dim(2), wh = vh.dim(3);
  Tensor out({n, c, h, w});
  for (std::size_t p = 0; p < n * c; ++p) {
    const double* src = vh.data() + p * h * wh;
    double* dst = out.data() + p * h * w;
    for (std::size_t u = 0; u < h; ++u) {
      for (std::size_t v = 0; v < w; ++v) {
        std::size_t s[2];
        const int k = half_sources(u, v, h, w, wh, s);
        dst[u * w + v] = k == 1 ? src[s[0]] : 0.5 * (src[s[0]] + src[s[1]]);
      }
    }
  }
  const Var in[] = {half};
  return g.record(std::move(out), in, [half, n, c, h, w, wh](Graph& g, Var o) {
    auto go = g.grad_span(o);
    auto& gh = g.grad_buffer(half);
    for (std::size_t p = 0; p < n * c; ++p) {
      const double* gsrc = go.data() + p * h * w;
      double* gdst = gh.data() + p * h * wh;
      for (std::size_t u = 0; u < h; ++u) {
        for (std::size_t v = 0; v < w; ++v) {
          std::size_t s[2];
          const int k = half_sources(u, v, h, w, wh, s);
          if (k == 1) {
            gdst[s[0]] += gsrc[u * w + v];
          } else {
            gdst[s[0]] += 0.5 * gsrc[u * w + v];
            gdst[s[1]] += 0.5 * gsrc[u * w + v];
          }
        }
      }
    }
  });
}

Var mix(Graph& g, Var gen, const Tensor& natural, std::span<const double> lambdas) {
  const Tensor& vg = g.value(gen);
  if (vg.shape() != natural.shape() || lambdas.size() != vg.dim(0)) {
    throw ConfigError("spectral mix: shape mismatch");
  }
  const std::size_t n = vg.dim(0), per = vg.numel() / n;
  std::vector<double> lam(lambdas.begin(), lambdas.end());
  for (double l : lam) {
    if (!(l >= 0.0 && l <= 1.0)) throw ContractError("spectral mix: lambda outside [0,1]");
  }
  Tensor out(vg.shape());
  for (std::size_t s = 0; s < n; ++s) {
    for (std::size_t i = s * per; i < (s + 1) * per; ++i) {
      out[i] = lam[s] * vg[i] + (1.0 - lam[s]) * natural[i];
    }
  }
  const Var in[] = {gen};
  return g.record(std::move(out), in, [gen, lam, n, per](Graph& g, Var o) {
    auto go = g.grad_span(o);
    auto& gg = g.grad_buffer(gen);
    for (std::size_t s = 0; s < n; ++s) {
      kernels::axpy(lam[s], go.data() + s * per, gg.data() + s * per, per);
    }
  });
}

Var idft_with_phase(Graph& g, Var amplitude, const Tensor& phase) {
  const Tensor& va = g.value(amplitude);
  if (va.rank() != 4 || va.shape() != phase.shape()) {
    throw ConfigError("idft_with_phase: expected matching [N,C,H,W] amplitude and phase");
  }
  const std::size_t planes = va.dim(0) * va.dim(1), h = va.dim(2), w = va.dim(3);
  Tensor out(va.shape());
  std::vector<Complex> plane;
  for (std::size_t p = 0; p < planes; ++p) {
    const std::size_t off = p * h * w;
    inverse_plane(va.data() + off, phase.data() + off, h, w, DftPath::Auto, plane);
    for (std::size_t i = 0; i < h * w; ++i) out[off + i] = plane[i].real();
  }
  const Var in[] = {amplitude};
  return g.record(std::move(out), in, [amplitude, phase, planes, h, w](Graph& g, Var o) {
    auto go = g.grad_span(o);
    auto& ga = g.grad_buffer(amplitude);
    std::vector<Complex> plane(h * w);
    const double inv = 1.0 / static_cast<double>(h * w);
    for (std::size_t p = 0; p < planes; ++p) {
      const std::size_t off = p * h * w;
      for (std::size_t i = 0; i < h * w; ++i) plane[i] = {go[off + i], 0.0};
      transform_plane(plane, h, w, false);
      for (std::size_t i = 0; i < h * w; ++i) {
        const double ph = phase[off + i];
        ga[off + i] += inv * (std::cos(ph) * plane[i].real() + std::sin(ph) * plane[i].imag());
      }
    }
  });
}

}  // namespace ops

}  // namespace datk::spectral
