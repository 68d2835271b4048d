#include <doctest.h>

#include <cmath>

#include "blm/model.hpp"
#include "blm/optim.hpp"
#include "helpers.hpp"

using namespace blm;

namespace {

std::vector<InstanceTensors> tiny_tensors(std::size_t count, const ModelConfig& cfg, std::uint64_t seed = 1) {
  const auto data = synth_generate(testutil::tiny_synth(count), seed);
  std::vector<InstanceTensors> xs;
  for (const auto& x : data.instances) xs.push_back(assemble_instance(x, data.store, cfg.shape));
  return xs;
}

}  // namespace

TEST_CASE("encoder-decoder parameter layout") {
  ModelConfig c;
  Model<float> m(c);
  const auto& p = m.params();
  REQUIRE(p.size() == 8);
  CHECK(p[0].value.shape() == Shape{16, 1, 3, 15, 15});
  // conv output 16 x 5 x 18 x 10, head = 2*5 + 2
  CHECK(p[2].value.shape() == Shape{16 * 5 * 18 * 10, 12});
  // decoder linear lands on 46 x 38 before the 15 x 15 conv
  CHECK(p[4].value.shape() == Shape{7, 46 * 38});
  CHECK(p[6].value.shape() == Shape{1, 1, 15, 15});
  CHECK(m.param_index("dec.conv.b") == 7);
  CHECK_THROWS_AS(m.param_index("nope"), LookupError);

  ModelConfig b;
  b.kind = ModelKind::baseline;
  Model<float> base(b);
  CHECK(base.params()[0].value.shape() == Shape{5376, 1024});
  CHECK(base.params()[2].value.shape() == Shape{1024, 768});
  CHECK(base.params()[4].value.shape() == Shape{768, 768});

  auto wrong = m.params();
  wrong.pop_back();
  CHECK_THROWS_AS(Model<float>(c, wrong), ShapeError);
}

TEST_CASE("initialization is seeded and bounded") {
  auto c = testutil::tiny_config();
  c.init_seed = 4;
  Model<float> a(c), b(c);
  CHECK(a.params()[0].value == b.params()[0].value);
  c.init_seed = 5;
  Model<float> d(c);
  CHECK_FALSE(a.params()[0].value == d.params()[0].value);
  const double bound = std::sqrt(6.0 / 27.0);
  for (float v : a.params()[0].value.vec()) CHECK(std::abs(v) <= bound);
  for (float v : a.params()[1].value.vec()) CHECK(v == 0.0f);
}

TEST_CASE("zero context gives a centred latent with zero KL") {
  const auto c = testutil::tiny_config("d1x2+c3");
  Model<double> m(c);
  Graph<double> g;
  const auto r = m.forward(g, Tensor<double>({2, 7, 6, 5}));
  for (double v : g.value(r.mu).vec()) CHECK(v == 0.0);
  for (double v : g.value(r.kl_continuous).vec()) CHECK(v == 0.0);
  for (double v : g.value(r.kl_discrete).vec()) CHECK(v == doctest::Approx(0.0));
  CHECK(g.value(r.pred).shape() == Shape{2, 30});
  CHECK_THROWS_AS(m.forward(g, Tensor<double>({2, 7, 5, 6})), ShapeError);
}

TEST_CASE("cosine score and max-margin loss hand values") {
  const std::vector<double> a{1, 0}, b{0, 2}, c{3, 3};
  CHECK(score(a, b) == doctest::Approx(0.0));
  CHECK(score(a, c) == doctest::Approx(std::sqrt(0.5)).epsilon(1e-12));
  CHECK(score(c, std::vector<double>{-1, -1}) == doctest::Approx(-1.0));
  CHECK_THROWS_AS(score(a, std::vector<double>{0, 0}), NumericError);
  CHECK_THROWS_AS(score(a, std::vector<double>{1}), ShapeError);
  // pred = a: cos(correct) = 1, cos(e1 = b) = 0 -> 0, cos(e2 = c) = .707 -> .707
  CHECK(max_margin_loss(a, a, {b, c}) == doctest::Approx(std::sqrt(0.5)).epsilon(1e-12));
  CHECK(max_margin_loss(a, std::vector<double>{-1, 0}, {a}) == doctest::Approx(3.0));
  CHECK(max_margin_loss(a, a, {std::vector<double>{-1, 0}}) == 0.0);
  CHECK_THROWS_AS(max_margin_loss(a, a, {}), ValidationError);
}

TEST_CASE("argmax resolves ties to the lowest index") {
  CHECK(argmax_lowest(std::vector<double>{0.1, 0.5, 0.5, 0.2}) == 1);
  CHECK(argmax_lowest(std::vector<double>{0.3, 0.3}) == 0);
  CHECK(argmax_lowest(std::vector<double>{-2.0}) == 0);
  CHECK_THROWS_AS(argmax_lowest(std::vector<double>{}), ValidationError);

  InstanceTensors x;
  x.shape = {1, 2};
  x.answers = {{{1, 0}, AnswerLabel::WN1}, {{2, 0}, AnswerLabel::Correct}, {{0, 1}, AnswerLabel::AE}};
  const auto p = choose_answer(std::vector<float>{1, 0}, x);
  CHECK(p.chosen_index == 0);
  CHECK(p.chosen_label == AnswerLabel::WN1);
}

TEST_CASE("total loss gradient matches central differences") {
  auto c = testutil::tiny_config("d1x2+c3");
  c.init_seed = 3;
  c.beta = 0.7;
  const Model<double> base(c);
  const auto xs = tiny_tensors(3, c);
  const auto ctx = context_batch<double>(xs);
  const auto sets = answer_sets<double>(xs);
  std::vector<Rng> rngs{Rng(1), Rng(2), Rng(3)};
  const auto noise = LatentNoise<double>::draw(c.latent, rngs);
  ForwardOptions<double> opt;
  opt.noise = &noise;

  for (const char* name : {"enc.conv.w", "enc.head.w", "enc.head.b", "dec.linear.w", "dec.conv.w", "dec.conv.b"}) {
    CAPTURE(name);
    const std::size_t idx = base.param_index(name);
    auto with = [&](const Tensor<double>& w) {
      Model<double> m = base;
      m.params()[idx].value = w;
      return m;
    };
    auto value = [&](const Tensor<double>& w) {
      Graph<double> g;
      return g.value(with(w).total_loss(g, ctx, sets, opt).total)[0];
    };
    auto grad = [&](const Tensor<double>& w) {
      const Model<double> m = with(w);
      Graph<double> g;
      const auto l = m.total_loss(g, ctx, sets, opt);
      g.backward(l.total);
      auto grads = zero_grads(m.params());
      g.accumulate_param_grads(grads);
      return grads[idx];
    };
    const auto& point = base.params()[idx].value;
    std::vector<std::size_t> coords;
    Rng pick(11);
    for (int k = 0; k < 40; ++k) coords.push_back(pick.below(point.size()));
    const auto r = grad_check(value, grad, point, 1e-6, coords, 1e-6);
    CHECK(r.max_rel_error < 1e-4);
  }
}

TEST_CASE("float and double models agree") {
  auto c = testutil::tiny_config();
  c.init_seed = 8;
  const Model<double> md(c);
  const Model<float> mf(c, cast_params<float>(md.params()));
  const auto xs = tiny_tensors(5, c);
  const auto pd = md.predict_batch(xs);
  const auto pf = mf.predict_batch(xs);
  for (std::size_t i = 0; i < xs.size(); ++i) {
    CHECK(pd[i].chosen_index == pf[i].chosen_index);
    for (std::size_t k = 0; k < pd[i].scores.size(); ++k) CHECK(pd[i].scores[k] == doctest::Approx(pf[i].scores[k]).epsilon(1e-4));
  }
}

TEST_CASE("batched prediction equals one-at-a-time prediction") {
  auto c = testutil::tiny_config();
  c.init_seed = 2;
  const Model<float> m(c);
  const auto xs = tiny_tensors(230, c);
  const auto batch = m.predict_batch(xs);
  REQUIRE(batch.size() == 230);
  for (std::size_t i : {0u, 99u, 100u, 101u, 229u}) {
    const auto one = m.predict(xs[i]);
    CHECK(one.chosen_index == batch[i].chosen_index);
    REQUIRE(one.predicted_embedding.size() == batch[i].predicted_embedding.size());
    for (std::size_t k = 0; k < one.predicted_embedding.size(); ++k)
      CHECK(one.predicted_embedding[k] == doctest::Approx(batch[i].predicted_embedding[k]).epsilon(1e-5));
  }
}

TEST_CASE("value-level encode/decode agree with the graph path") {
  auto c = testutil::tiny_config("d1x2+c3");
  c.init_seed = 6;
  const Model<double> m(c);
  const auto xs = tiny_tensors(1, c);
  const auto code = m.encode(xs[0], nullptr);
  const auto y = m.decode(code);
  const auto p = m.predict(xs[0]);
  REQUIRE(y.size() == p.predicted_embedding.size());
  for (std::size_t k = 0; k < y.size(); ++k) CHECK(static_cast<float>(y[k]) == doctest::Approx(p.predicted_embedding[k]));

  // masking the discrete block through the value path equals predict_batch with a mask
  const auto masked = m.decode(mask_latent(code, c.latent, MaskTarget::discrete(0)));
  const auto pm = m.predict_batch(xs, MaskTarget::discrete(0));
  for (std::size_t k = 0; k < masked.size(); ++k)
    CHECK(static_cast<float>(masked[k]) == doctest::Approx(pm[0].predicted_embedding[k]));

  ModelConfig b = testutil::tiny_config();
  b.kind = ModelKind::baseline;
  const Model<double> mb(b);
  CHECK_THROWS_AS(mb.encode(xs[0], nullptr), ConfigError);
  CHECK_THROWS_AS(mb.predict_batch(xs, MaskTarget::continuous(0)), ConfigError);
  CHECK(mb.predict(xs[0]).scores.size() == 6);
}

TEST_CASE("model config validation and json") {
  auto c = testutil::tiny_config();
  c.encoder_kernel = {3, 7, 3};
  CHECK_THROWS_AS(c.validate(), ShapeError);
  c = testutil::tiny_config();
  c.beta = -1;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = testutil::tiny_config("d2x2+c4");
  c.init_seed = 77;
  const auto back = ModelConfig::from_json(c.to_json());
  CHECK(back.latent == c.latent);
  CHECK(back.shape == c.shape);
  CHECK(back.init_seed == 77);
  CHECK(back.encoder_kernel == c.encoder_kernel);
  CHECK_THROWS_AS(ModelConfig::from_json("{"), FormatError);
  CHECK_THROWS_AS(parse_model_kind("cnn"), UsageError);
}
