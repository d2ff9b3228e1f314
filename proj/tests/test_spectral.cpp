#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "datk/error.hpp"
#include "datk/spectral.hpp"
#include "oracle.hpp"

using namespace datk;
using namespace datk::spectral;

TEST_CASE("constant image spectrum") {
  const Spectrum s = dft_decompose(Tensor({1, 2, 2}, 1.0));
  CHECK(s.amplitude[0] == doctest::Approx(4.0).epsilon(1e-15));
  for (std::size_t i = 1; i < 4; ++i) CHECK(std::abs(s.amplitude[i]) < 1e-12);
  CHECK(s.phase[0] == 0.0);
}

TEST_CASE("impulse image spectrum is flat with zero phase") {
  Tensor x({1, 2, 2}, 0.0);
  x[0] = 1.0;
  const Spectrum s = dft_decompose(x);
  const Tensor oa = oracle::amplitude(x), op = oracle::phase(x);
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(s.amplitude[i] == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(std::abs(s.phase[i]) < 1e-14);
    CHECK(std::abs(oa[i] - 1.0) < 1e-14);
    CHECK(std::abs(op[i]) < 1e-14);
  }
}

TEST_CASE("decomposition matches the brute-force oracle") {
  std::mt19937_64 rng(11);
  for (int rep = 0; rep < 10; ++rep) {
    for (std::size_t n : {4u, 6u, 8u}) {
      const Tensor x = oracle::uniform({2, n, n}, rng);
      const Tensor oa = oracle::amplitude(x), op = oracle::phase(x);
      for (auto path : {DftPath::Direct, DftPath::Auto}) {
        const Spectrum s = dft_decompose(x, path);
        CHECK(max_abs_diff(s.amplitude, oa) < 1e-9);
        for (std::size_t i = 0; i < x.numel(); ++i) {
          if (oa[i] > 1e-9) CHECK(oracle::wrapped(s.phase[i], op[i]) < 1e-9);
        }
      }
    }
  }
}

TEST_CASE("non-square and odd sizes use the direct path") {
  std::mt19937_64 rng(12);
  const Tensor x = oracle::uniform({1, 5, 6}, rng);
  const Spectrum s = dft_decompose(x);
  CHECK(max_abs_diff(s.amplitude, oracle::amplitude(x)) < 1e-9);
  CHECK(max_abs_diff(idft_recombine(s.amplitude, s.phase), x) < 1e-12);
}

TEST_CASE("phase lies in (-pi, pi]") {
  std::mt19937_64 rng(13);
  const Spectrum s = dft_decompose(oracle::uniform({3, 8, 8}, rng, -1, 1));
  for (double p : s.phase.vec()) {
    CHECK(p > -std::numbers::pi);
    CHECK(p <= std::numbers::pi);
  }
}

TEST_CASE("real input gives a conjugate-symmetric spectrum") {
  std::mt19937_64 rng(14);
  const Tensor x = oracle::uniform({3, 8, 8}, rng);
  const Spectrum s = dft_decompose(x);
  CHECK(symmetry_defect(s.amplitude) < 1e-12);
  for (std::size_t c = 0; c < 3; ++c) {
    for (std::size_t u = 0; u < 8; ++u) {
      for (std::size_t v = 0; v < 8; ++v) {
        const std::size_t i = (c * 8 + u) * 8 + v, j = (c * 8 + (8 - u) % 8) * 8 + (8 - v) % 8;
        if (s.amplitude[i] < 1e-9) continue;
        // P(-u,-v) = -P(u,v), up to the pi/-pi wrap.
        CHECK(oracle::wrapped(s.phase[i], -s.phase[j]) < 1e-9);
      }
    }
  }
}

TEST_CASE("round trip and inverse of the constant example") {
  std::mt19937_64 rng(15);
  const Tensor x = oracle::uniform({3, 8, 8}, rng);
  const Spectrum s = dft_decompose(x);
  CHECK(max_abs_diff(idft_recombine(s.amplitude, s.phase), x) < 1e-12);
  Tensor amp({1, 2, 2}, 0.0), phase({1, 2, 2}, 0.0);
  amp[0] = 4.0;
  CHECK(max_abs_diff(idft_recombine(amp, phase), Tensor({1, 2, 2}, 1.0)) < 1e-15);
}

TEST_CASE("recombination matches the oracle inverse") {
  std::mt19937_64 rng(16);
  const Tensor a = oracle::uniform({2, 4, 4}, rng), b = oracle::uniform({2, 4, 4}, rng);
  const Spectrum sa = dft_decompose(a), sb = dft_decompose(b);
  const Tensor mixed = idft_recombine(sa.amplitude, sb.phase);
  CHECK(max_abs_diff(mixed, oracle::idft(sa.amplitude, sb.phase)) < 1e-12);
}

TEST_CASE("swap keeps the phase of the phase donor") {
  std::mt19937_64 rng(17);
  for (int rep = 0; rep < 20; ++rep) {
    const Tensor x1 = oracle::uniform({1, 4, 4}, rng), x2 = oracle::uniform({1, 4, 4}, rng);
    const Spectrum s1 = dft_decompose(x1), s2 = dft_decompose(x2);
    const Tensor swapped = idft_recombine(s1.amplitude, s2.phase);
    const Tensor p = oracle::phase(swapped);
    for (std::size_t i = 0; i < 16; ++i) {
      if (s1.amplitude[i] > 1e-6) CHECK(oracle::wrapped(p[i], s2.phase[i]) < 1e-3);
    }
  }
}

TEST_CASE("asymmetric product keeps the real part") {
  Tensor amp({1, 4, 4}, 1.0), phase({1, 4, 4}, 0.0);
  phase[1] = 1.0;  // partner (0,3) keeps phase 0
  CHECK(max_abs_diff(idft_recombine(amp, phase), oracle::idft(amp, phase)) < 1e-12);
  CHECK_THROWS_AS(idft_recombine(Tensor({1, 4, 4}, -1.0), Tensor({1, 4, 4}, 0.0)), ContractError);
  CHECK_THROWS_AS(idft_recombine(Tensor({1, 4, 4}, 1.0), Tensor({1, 4, 2}, 0.0)), ContractError);
}

TEST_CASE("clamped recombination stays in the unit interval") {
  Tensor amp({1, 4, 4}, 0.0), phase({1, 4, 4}, 0.0);
  amp[0] = 40.0;  // constant 2.5
  const Tensor y = idft_recombine(amp, phase, {.clamp_to_unit = true});
  for (double v : y.vec()) CHECK(v == 1.0);
}

TEST_CASE("mix examples") {
  const Tensor p({2, 2}, 2.0), o({2, 2}, 4.0);
  CHECK(mix_amplitudes(p, o, 0.0) == p);
  CHECK(mix_amplitudes(p, o, 1.0) == o);
  CHECK(mix_amplitudes(p, o, 0.5) == Tensor({2, 2}, 3.0));
  CHECK_THROWS_AS(mix_amplitudes(p, o, 1.5), ContractError);
  CHECK_THROWS_AS(mix_amplitudes(p, Tensor({2, 2}, -1.0), 0.5), ContractError);
}

TEST_CASE("expand half examples") {
  std::mt19937_64 rng(18);
  // 2x2: both columns pair with themselves; a symmetric half is kept as is.
  Tensor half2({1, 2, 2}, {1.0, 2.0, 3.0, 4.0});
  CHECK(expand_half_amplitude(half2, 2, 2) == half2);

  Tensor half4 = oracle::uniform({1, 4, 3}, rng);
  const Tensor full = expand_half_amplitude(half4, 4, 4);
  CHECK(full[1 * 4 + 1] == half4[1 * 3 + 1]);
  CHECK(full[3 * 4 + 3] == half4[1 * 3 + 1]);
  CHECK(symmetry_defect(full) == 0.0);

  // Round trip on an already symmetric half.
  const Tensor sym = extract_half(full);
  CHECK(extract_half(expand_half_amplitude(sym, 4, 4)) == sym);
  CHECK_THROWS_AS(expand_half_amplitude(half4, 4, 6), ContractError);
}

TEST_CASE("extract half examples") {
  std::mt19937_64 rng(19);
  const Tensor x = oracle::uniform({2, 4, 4}, rng);
  const Tensor full = dft_decompose(x).amplitude;
  const Tensor half = extract_half(full);
  CHECK(half.shape() == Shape{2, 4, 3});
  CHECK(max_abs_diff(expand_half_amplitude(half, 4, 4), full) < 1e-6);
  const Tensor oa = oracle::amplitude(x);
  for (std::size_t c = 0; c < 2; ++c) {
    for (std::size_t u = 0; u < 4; ++u) {
      for (std::size_t v = 0; v < 3; ++v) {
        CHECK(std::abs(half[(c * 4 + u) * 3 + v] - oa[(c * 4 + u) * 4 + v]) < 1e-9);
      }
    }
  }
  CHECK(extract_half(Tensor({1, 4, 4}, 0.0)) == Tensor({1, 4, 3}, 0.0));
  Tensor bad = full;
  bad[1] += 1.0;
  CHECK_THROWS_AS(extract_half(bad), ContractError);
}

TEST_CASE("direct and fast paths agree") {
  std::mt19937_64 rng(20);
  const Tensor x = oracle::uniform({3, 16, 16}, rng);
  const Spectrum d = dft_decompose(x, DftPath::Direct), f = dft_decompose(x, DftPath::Fast);
  CHECK(max_abs_diff(d.amplitude, f.amplitude) < 1e-9);
  CHECK_THROWS_AS(dft_decompose(oracle::uniform({1, 6, 6}, rng), DftPath::Fast), ConfigError);
}

TEST_CASE("angle distance wraps") {
  CHECK(angle_distance(std::numbers::pi, -std::numbers::pi) < 1e-15);
  CHECK(angle_distance(0.1, -0.1) == doctest::Approx(0.2));
  CHECK(angle_distance(3.0, -3.0) == doctest::Approx(2.0 * std::numbers::pi - 6.0));
}
