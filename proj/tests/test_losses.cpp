#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "datk/error.hpp"
#include "datk/losses.hpp"
#include "oracle.hpp"

using namespace datk;
namespace L = datk::losses;

namespace {

const double kLn2 = std::numbers::ln2;

Tensor probs(std::initializer_list<double> v) { return Tensor({1, v.size()}, std::vector<double>(v)); }

// Logits whose softmax is exactly p.
Tensor logits_of(std::initializer_list<double> p) {
  std::vector<double> z;
  for (double v : p) z.push_back(std::log(v));
  return Tensor({1, z.size()}, z);
}

double graph_value(const std::function<Var(Graph&)>& f) {
  Graph g;
  return g.value(f(g))[0];
}

}  // namespace

TEST_CASE("cross-entropy examples") {
  const std::vector<int> y0 = {0};
  CHECK(L::cross_entropy(Tensor({1, 10}, 0.3), y0) == doctest::Approx(std::log(10.0)).epsilon(1e-12));
  Tensor sat({1, 3}, 0.0);
  sat[0] = 1000.0;
  CHECK(L::cross_entropy(sat, y0) < 1e-12);
  CHECK(L::cross_entropy(Tensor({1, 2}, {1.0, 0.0}), y0) == doctest::Approx(0.313262).epsilon(1e-6));
  const std::vector<int> bad = {3};
  CHECK_THROWS_AS(L::cross_entropy(Tensor({1, 3}, 0.0), bad), ContractError);
}

TEST_CASE("kl examples") {
  CHECK(std::abs(L::kl_divergence(probs({1.0, 0.0}), probs({0.5, 0.5})) - kLn2) < 1e-6);
  CHECK(std::abs(L::kl_divergence(probs({0.5, 0.5}), probs({0.25, 0.75})) - 0.143841) < 1e-6);
  CHECK(std::abs(0.5 * kLn2 + 0.5 * std::log(2.0 / 3.0) - 0.143841) < 1e-6);
  CHECK(std::abs(L::kl_divergence(probs({0.2, 0.3, 0.5}), probs({0.2, 0.3, 0.5}))) < 1e-9);
}

TEST_CASE("js examples") {
  CHECK(std::abs(L::js_divergence(probs({1.0, 0.0}), probs({0.0, 1.0})) - kLn2) < 1e-6);
  CHECK(std::abs(L::js_divergence(probs({0.3, 0.7}), probs({0.3, 0.7}))) < 1e-9);
  std::mt19937_64 rng(1);
  for (int i = 0; i < 50; ++i) {
    const Tensor p = L::softmax(oracle::uniform({4, 5}, rng, -3, 3));
    const Tensor q = L::softmax(oracle::uniform({4, 5}, rng, -3, 3));
    CHECK(L::js_divergence(p, q) == L::js_divergence(q, p));
  }
}

TEST_CASE("graph losses agree with the value helpers") {
  std::mt19937_64 rng(2);
  const Tensor a = oracle::uniform({3, 4}, rng, -2, 2), b = oracle::uniform({3, 4}, rng, -2, 2);
  const std::vector<int> y = {0, 3, 1};
  const double kl = graph_value([&](Graph& g) {
    return L::kl_divergence(g, L::softmax_probs(g, g.input(a)), L::softmax_probs(g, g.input(b)));
  });
  CHECK(kl == doctest::Approx(L::kl_divergence(L::softmax(a), L::softmax(b))).epsilon(1e-12));
  const double js = graph_value([&](Graph& g) {
    return L::js_divergence(g, L::softmax_probs(g, g.input(a)), L::softmax_probs(g, g.input(b)));
  });
  CHECK(js == doctest::Approx(L::js_divergence(L::softmax(a), L::softmax(b))).epsilon(1e-12));
  const double ce = graph_value([&](Graph& g) { return L::cross_entropy(g, g.input(a), y); });
  CHECK(ce == doctest::Approx(L::cross_entropy(a, y)).epsilon(1e-12));
}

TEST_CASE("loss_ae and loss_at hand compositions") {
  const std::vector<int> y = {0};
  const Tensor lx = logits_of({0.25, 0.75}), ladv = logits_of({0.5, 0.5});
  const double kl = 0.5 * kLn2 + 0.5 * std::log(2.0 / 3.0);
  const double ae = graph_value([&](Graph& g) { return L::loss_ae(g, g.input(lx), g.input(ladv), y, 15.0); });
  CHECK(ae == doctest::Approx(kLn2 + 15.0 * kl).epsilon(1e-9));
  const double at = graph_value([&](Graph& g) { return L::loss_at(g, g.input(lx), g.input(ladv), y, 15.0); });
  CHECK(at == doctest::Approx(-std::log(0.25) + 15.0 * kl).epsilon(1e-9));
  const double tr = graph_value([&](Graph& g) { return L::loss_trades(g, g.input(lx), g.input(ladv), y, 15.0); });
  CHECK(tr == at);

  // Degenerate cases.
  const double same = graph_value([&](Graph& g) { return L::loss_ae(g, g.input(lx), g.input(lx), y, 15.0); });
  CHECK(same == doctest::Approx(L::cross_entropy(lx, y)).epsilon(1e-9));
  const double b0 = graph_value([&](Graph& g) { return L::loss_ae(g, g.input(lx), g.input(ladv), y, 0.0); });
  CHECK(b0 == L::cross_entropy(ladv, y));
  const double at0 = graph_value([&](Graph& g) { return L::loss_at(g, g.input(lx), g.input(ladv), y, 0.0); });
  CHECK(at0 == L::cross_entropy(lx, y));
  CHECK_THROWS_AS(graph_value([&](Graph& g) { return L::loss_at(g, g.input(lx), g.input(ladv), y, -1.0); }),
                  ContractError);
}

TEST_CASE("loss_dat hand composition and degenerate cases") {
  const std::vector<int> y = {1};
  const Tensor lx = logits_of({0.25, 0.75}), lxa = logits_of({0.5, 0.5}), lh = logits_of({0.6, 0.4}),
               lha = logits_of({0.1, 0.9});
  const double beta = 15.0, omega = 2.0;
  auto kl = [](double p0, double q0) { return p0 * std::log(p0 / q0) + (1 - p0) * std::log((1 - p0) / (1 - q0)); };
  const double at_x = -std::log(0.75) + beta * kl(0.5, 0.25);
  const double at_h = -std::log(0.4) + beta * kl(0.1, 0.6);
  const double m = (0.25 + 0.6) / 2.0;
  const double js = 0.5 * (kl(0.25, m) + kl(0.6, m));
  const double expect = 0.5 * (at_x + at_h) + omega * js;

  Graph g;
  const auto d = L::loss_dat(g, g.input(lx), g.input(lxa), g.input(lh), g.input(lha), y, beta, omega);
  CHECK(g.value(d.total)[0] == doctest::Approx(expect).epsilon(1e-9));
  CHECK(g.value(d.at_benign)[0] == doctest::Approx(at_x).epsilon(1e-9));
  CHECK(g.value(d.at_recombined)[0] == doctest::Approx(at_h).epsilon(1e-9));
  CHECK(g.value(d.js)[0] == doctest::Approx(js).epsilon(1e-9));

  Graph g2;
  const auto same = L::loss_dat(g2, g2.input(lx), g2.input(lxa), g2.input(lx), g2.input(lxa), y, beta, omega);
  const double at_only = graph_value([&](Graph& g3) { return L::loss_at(g3, g3.input(lx), g3.input(lxa), y, beta); });
  CHECK(g2.value(same.total)[0] == doctest::Approx(at_only).epsilon(1e-12));

  Graph g4;
  const auto w0 = L::loss_dat(g4, g4.input(lx), g4.input(lxa), g4.input(lh), g4.input(lha), y, beta, 0.0);
  CHECK(g4.value(w0.total)[0] == doctest::Approx(0.5 * (at_x + at_h)).epsilon(1e-9));

  Graph g5;
  CHECK_THROWS_AS(L::loss_dat(g5, g5.input(lx), g5.input(lxa), g5.input(lh), g5.input(lha), y, beta, -1.0),
                  ContractError);
}

TEST_CASE("divergences are non-negative and vanish on equal inputs") {
  std::mt19937_64 rng(3);
  for (int i = 0; i < 200; ++i) {
    const Tensor p = L::softmax(oracle::uniform({2, 6}, rng, -5, 5));
    const Tensor q = L::softmax(oracle::uniform({2, 6}, rng, -5, 5));
    CHECK(L::kl_divergence(p, q) >= 0.0);
    CHECK(L::js_divergence(p, q) >= 0.0);
    CHECK(std::abs(L::kl_divergence(p, p)) < 1e-9);
    CHECK(std::abs(L::js_divergence(p, p)) < 1e-9);
  }
}

TEST_CASE("dat component identity on random inputs") {
  std::mt19937_64 rng(4);
  std::uniform_int_distribution<int> label(0, 4);
  for (int i = 0; i < 50; ++i) {
    std::vector<Tensor> t;
    for (int k = 0; k < 4; ++k) t.push_back(oracle::uniform({3, 5}, rng, -4, 4));
    const std::vector<int> y = {label(rng), label(rng), label(rng)};
    Graph g;
    const auto d = L::loss_dat(g, g.input(t[0]), g.input(t[1]), g.input(t[2]), g.input(t[3]), y, 15.0, 2.0);
    const double recomposed =
        0.5 * (g.value(d.at_benign)[0] + g.value(d.at_recombined)[0]) + 2.0 * g.value(d.js)[0];
    CHECK(std::abs(g.value(d.total)[0] - recomposed) < 1e-9);
  }
}

TEST_CASE("softmax shift invariance of every loss") {
  std::mt19937_64 rng(5);
  const std::vector<int> y = {2, 0};
  for (int i = 0; i < 20; ++i) {
    const Tensor a = oracle::uniform({2, 4}, rng, -3, 3), b = oracle::uniform({2, 4}, rng, -3, 3);
    Tensor as = a, bs = b;
    for (std::size_t r = 0; r < 2; ++r) {
      for (std::size_t c = 0; c < 4; ++c) {
        as[r * 4 + c] += 7.5 * static_cast<double>(r + 1);
        bs[r * 4 + c] -= 3.25;
      }
    }
    for (auto f : {&L::loss_ae, &L::loss_at, &L::loss_trades}) {
      const double v0 = graph_value([&](Graph& g) { return f(g, g.input(a), g.input(b), y, 15.0); });
      const double v1 = graph_value([&](Graph& g) { return f(g, g.input(as), g.input(bs), y, 15.0); });
      CHECK(std::abs(v0 - v1) < 1e-9);
    }
    CHECK(std::abs(L::cross_entropy(a, y) - L::cross_entropy(as, y)) < 1e-9);
  }
}

TEST_CASE("floor and renormalize") {
  const Tensor p = L::floor_renormalize(probs({1.0, 0.0}));
  CHECK(p[1] > 0.0);
  CHECK(p[0] + p[1] == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(p[1] == doctest::Approx(L::kProbFloor).epsilon(1e-6));
}

TEST_CASE("per-sample cross-entropy") {
  const std::vector<int> y = {0, 1};
  const auto v = L::cross_entropy_per_sample(Tensor({2, 2}, {1.0, 0.0, 1.0, 0.0}), y);
  REQUIRE(v.size() == 2);
  CHECK(v[0] == doctest::Approx(0.313262).epsilon(1e-6));
  CHECK(v[1] == doctest::Approx(1.313262).epsilon(1e-6));
}
