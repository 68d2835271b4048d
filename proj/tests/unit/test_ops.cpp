#include <doctest.h>

#include <cmath>

#include "blm/latent.hpp"
#include "blm/ops.hpp"
#include "blm/optim.hpp"
#include "helpers.hpp"

using namespace blm;
using testutil::random_tensor;

namespace {

// Scalar probe: sum(r * op(x)) with a fixed random r.
Var probe(Graph<double>& g, Var y, std::uint64_t seed) {
  Rng rng(seed);
  Tensor<double> r = random_tensor<double>(g.value(y).shape(), rng);
  return ops::sum(g, ops::mul_const(g, y, r));
}

// Naive valid cross-correlation, independent of the im2col implementation.
Tensor<double> naive_conv3d(const Tensor<double>& x, const Tensor<double>& w, const Tensor<double>& b) {
  const std::size_t B = x.dim(0), Ci = x.dim(1), S = x.dim(2), N = x.dim(3), M = x.dim(4);
  const std::size_t Co = w.dim(0), ks = w.dim(2), kn = w.dim(3), km = w.dim(4);
  const std::size_t So = S - ks + 1, No = N - kn + 1, Mo = M - km + 1;
  Tensor<double> y({B, Co, So, No, Mo});
  for (std::size_t bb = 0; bb < B; ++bb)
    for (std::size_t o = 0; o < Co; ++o)
      for (std::size_t s = 0; s < So; ++s)
        for (std::size_t n = 0; n < No; ++n)
          for (std::size_t m = 0; m < Mo; ++m) {
            double acc = b[o];
            for (std::size_t c = 0; c < Ci; ++c)
              for (std::size_t a = 0; a < ks; ++a)
                for (std::size_t p = 0; p < kn; ++p)
                  for (std::size_t q = 0; q < km; ++q)
                    acc += w[(((o * Ci + c) * ks + a) * kn + p) * km + q] *
                           x[(((bb * Ci + c) * S + s + a) * N + n + p) * M + m + q];
            y[(((bb * Co + o) * So + s) * No + n) * Mo + m] = acc;
          }
  return y;
}

}  // namespace

TEST_CASE("linear matches the hand product") {
  Graph<double> g;
  Var x = g.constant(Tensor<double>({2, 3}, {1, 2, 3, 4, 5, 6}));
  Var w = g.constant(Tensor<double>({3, 2}, {1, 0, 0, 1, 1, 1}));
  Var b = g.constant(Tensor<double>({2}, {10, 20}));
  const auto& y = g.value(ops::linear(g, x, w, b));
  CHECK(y.shape() == Shape{2, 2});
  CHECK(y[0] == 14);
  CHECK(y[1] == 25);
  CHECK(y[2] == 20);
  CHECK(y[3] == 31);
}

TEST_CASE("conv3d and conv2d match naive loops") {
  Rng rng(1);
  const auto x = random_tensor<double>({2, 2, 4, 6, 5}, rng);
  const auto w = random_tensor<double>({3, 2, 2, 3, 2}, rng);
  const auto b = random_tensor<double>({3}, rng);
  Graph<double> g;
  const auto& y = g.value(ops::conv3d(g, g.constant(x), g.constant(w), g.constant(b)));
  const auto want = naive_conv3d(x, w, b);
  REQUIRE(y.shape() == want.shape());
  for (std::size_t k = 0; k < y.size(); ++k) REQUIRE(y[k] == doctest::Approx(want[k]).epsilon(1e-12));

  const auto x2 = random_tensor<double>({2, 1, 7, 6}, rng);
  const auto w2 = random_tensor<double>({2, 1, 3, 4}, rng);
  const auto b2 = random_tensor<double>({2}, rng);
  Graph<double> g2;
  const auto& y2 = g2.value(ops::conv2d(g2, g2.constant(x2), g2.constant(w2), g2.constant(b2)));
  const auto want2 = naive_conv3d(x2.reshaped({2, 1, 1, 7, 6}), w2.reshaped({2, 1, 1, 3, 4}), b2);
  REQUIRE(y2.size() == want2.size());
  CHECK(y2.shape() == Shape{2, 2, 5, 3});
  for (std::size_t k = 0; k < y2.size(); ++k) REQUIRE(y2[k] == doctest::Approx(want2[k]).epsilon(1e-12));
}

TEST_CASE("conv3d rejects mismatched shapes") {
  Graph<double> g;
  Var x = g.constant(Tensor<double>({1, 1, 2, 4, 4}));
  Var w = g.constant(Tensor<double>({1, 1, 3, 3, 3}));
  Var b = g.constant(Tensor<double>({1}));
  CHECK_THROWS_AS(ops::conv3d(g, x, w, b), ShapeError);
}

TEST_CASE("gradients of the building blocks") {
  Rng rng(2);
  auto check = [](const GradCheckResult& r) {
    CHECK(r.checked > 0);
    CHECK(r.max_rel_error < 1e-6);
  };
  const auto w = random_tensor<double>({4, 3}, rng);
  const auto b = random_tensor<double>({3}, rng);
  check(grad_check(
      [&](Graph<double>& g, Var x) { return probe(g, ops::linear(g, x, g.constant(w), g.constant(b)), 5); },
      random_tensor<double>({2, 4}, rng)));
  const auto x0 = random_tensor<double>({2, 4}, rng);
  check(grad_check(
      [&](Graph<double>& g, Var wv) { return probe(g, ops::linear(g, g.constant(x0), wv, g.constant(b)), 5); },
      w));

  const auto cw = random_tensor<double>({2, 1, 2, 3, 3}, rng);
  const auto cb = random_tensor<double>({2}, rng);
  const auto cx = random_tensor<double>({2, 1, 3, 5, 4}, rng);
  check(grad_check(
      [&](Graph<double>& g, Var x) { return probe(g, ops::conv3d(g, x, g.constant(cw), g.constant(cb)), 6); }, cx));
  check(grad_check(
      [&](Graph<double>& g, Var wv) { return probe(g, ops::conv3d(g, g.constant(cx), wv, g.constant(cb)), 6); }, cw));
  check(grad_check(
      [&](Graph<double>& g, Var bv) { return probe(g, ops::conv3d(g, g.constant(cx), g.constant(cw), bv), 6); }, cb));

  // smooth away from zero so the kink is never crossed
  Tensor<double> rx = random_tensor<double>({3, 4}, rng);
  for (auto& v : rx.vec()) v += v > 0 ? 0.1 : -0.1;
  check(grad_check([&](Graph<double>& g, Var x) { return probe(g, ops::relu(g, x), 7); }, rx));

  const auto head = random_tensor<double>({3, 7}, rng, 0.5);
  check(grad_check(
      [&](Graph<double>& g, Var h) {
        Var a = ops::slice_cols(g, h, 0, 2);
        Var c = ops::slice_cols(g, h, 4, 7);
        return probe(g, ops::concat_cols(g, std::vector<Var>{c, a, ops::scale(g, a, 2.0)}), 8);
      },
      head));
  const auto noise = random_tensor<double>({3, 2}, rng);
  check(grad_check(
      [&](Graph<double>& g, Var h) {
        Var mu = ops::slice_cols(g, h, 0, 2);
        Var ls = ops::slice_cols(g, h, 2, 4);
        Var z = ops::gaussian_sample(g, mu, ls, noise);
        return ops::add(g, probe(g, z, 9), ops::sum(g, ops::kl_gaussian(g, mu, ls)));
      },
      head));
  Tensor<double> gn({3, 3});
  for (auto& v : gn.vec()) v = rng.gumbel();
  check(grad_check(
      [&](Graph<double>& g, Var h) {
        Var logits = ops::slice_cols(g, h, 4, 7);
        Var y = ops::gumbel_softmax(g, logits, gn, 0.5);
        return ops::add(g, probe(g, y, 10), ops::mean(g, ops::kl_categorical_uniform(g, logits)));
      },
      head));
}

TEST_CASE("latent ops agree with the value-level latent functions") {
  Rng rng(3);
  const auto mu = random_tensor<double>({1, 4}, rng);
  const auto ls = random_tensor<double>({1, 4}, rng, 0.3);
  const auto noise = random_tensor<double>({1, 4}, rng);
  Tensor<double> gn({1, 3});
  for (auto& v : gn.vec()) v = rng.gumbel();
  const auto logits = random_tensor<double>({1, 3}, rng);

  Graph<double> g;
  Var vmu = g.constant(mu), vls = g.constant(ls), vl = g.constant(logits);
  const auto& z = g.value(ops::gaussian_sample(g, vmu, vls, noise));
  const auto zz = gaussian_sample(mu.vec(), ls.vec(), noise.vec());
  for (std::size_t k = 0; k < 4; ++k) CHECK(z[k] == doctest::Approx(zz[k]).epsilon(1e-14));
  CHECK(g.value(ops::kl_gaussian(g, vmu, vls))[0] == doctest::Approx(kl_gaussian(mu.vec(), ls.vec())).epsilon(1e-14));
  const auto& y = g.value(ops::gumbel_softmax(g, vl, gn, 0.7));
  const auto yy = gumbel_softmax_sample(logits.vec(), 0.7, gn.vec());
  for (std::size_t k = 0; k < 3; ++k) CHECK(y[k] == doctest::Approx(yy[k]).epsilon(1e-12));
  CHECK(g.value(ops::kl_categorical_uniform(g, vl))[0] ==
        doctest::Approx(kl_categorical_uniform(softmax(logits.vec()))).epsilon(1e-12));
  CHECK_THROWS_AS(ops::gumbel_softmax(g, vl, gn, 0.0), ConfigError);
}

TEST_CASE("max-margin op matches the scalar loss and its gradient") {
  Rng rng(4);
  std::vector<ops::AnswerSet<double>> sets(2);
  for (auto& s : sets) {
    s.embeddings = random_tensor<double>({4, 6}, rng);
    s.correct = 1;
  }
  const auto pred = random_tensor<double>({2, 6}, rng);
  Graph<double> g;
  const auto& l = g.value(ops::max_margin<double>(g, g.constant(pred), sets));
  for (std::size_t b = 0; b < 2; ++b) {
    std::vector<std::vector<double>> errors;
    for (std::size_t a : {0u, 2u, 3u})
      errors.emplace_back(sets[b].embeddings.vec().begin() + a * 6, sets[b].embeddings.vec().begin() + (a + 1) * 6);
    std::vector<double> correct(sets[b].embeddings.vec().begin() + 6, sets[b].embeddings.vec().begin() + 12);
    std::vector<double> p(pred.vec().begin() + b * 6, pred.vec().begin() + (b + 1) * 6);
    CHECK(l[b] == doctest::Approx(max_margin_loss(p, correct, errors)).epsilon(1e-12));
  }
  const auto r = grad_check([&](Graph<double>& gg, Var p) { return ops::sum(gg, ops::max_margin<double>(gg, p, sets)); },
                            pred);
  CHECK(r.max_rel_error < 1e-6);
}

TEST_CASE("backward only reaches inputs that need gradients") {
  Graph<double> g;
  Var c = g.constant(Tensor<double>({2}, {1, 2}));
  Var l = g.leaf(Tensor<double>({2}, {3, 4}));
  Var y = ops::sum(g, ops::add(g, ops::scale(g, c, 2.0), ops::scale(g, l, 3.0)));
  CHECK_FALSE(g.requires_grad(ops::scale(g, c, 1.0)));
  g.backward(y);
  CHECK(g.grad(l)[0] == 3.0);
  CHECK(g.grad(l)[1] == 3.0);
  CHECK(g.grad_buffer(c) == nullptr);
  CHECK_THROWS_AS(g.backward(l), ShapeError);
}
