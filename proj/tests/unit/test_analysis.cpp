#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "blm/analysis.hpp"
#include "helpers.hpp"

using namespace blm;

namespace {

// Contingency-table kappa over categories 0..K-1.
double table_kappa(const std::vector<int>& a, const std::vector<int>& b, int K) {
  std::vector<std::vector<double>> t(static_cast<std::size_t>(K), std::vector<double>(static_cast<std::size_t>(K), 0.0));
  for (std::size_t i = 0; i < a.size(); ++i) t[static_cast<std::size_t>(a[i])][static_cast<std::size_t>(b[i])] += 1.0;
  const double n = static_cast<double>(a.size());
  double po = 0.0, pe = 0.0;
  for (int i = 0; i < K; ++i) {
    double row = 0.0, col = 0.0;
    for (int j = 0; j < K; ++j) {
      row += t[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
      col += t[static_cast<std::size_t>(j)][static_cast<std::size_t>(i)];
    }
    po += t[static_cast<std::size_t>(i)][static_cast<std::size_t>(i)] / n;
    pe += row * col / (n * n);
  }
  return (po - pe) / (1.0 - pe);
}

EvalResult eval_with(Dataset d, std::size_t n, std::map<AnswerLabel, std::size_t> errors) {
  EvalResult r;
  r.dataset = d;
  r.n_instances = n;
  std::size_t wrong = 0;
  for (const auto& [l, c] : errors) wrong += c;
  r.n_correct = n - wrong;
  r.f1 = static_cast<double>(r.n_correct) / static_cast<double>(n);
  r.per_label_error_counts = std::move(errors);
  return r;
}

std::vector<std::vector<std::string>> read_csv(const std::filesystem::path& p) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(testutil::slurp(p));
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::stringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    rows.push_back(cells);
  }
  return rows;
}

Model<float> trained_tiny(const SynthData& d, const std::string& latent) {
  auto cfg = testutil::tiny_train(2);
  cfg.model = testutil::tiny_config(latent);
  DatasetSplit s;
  s.train.assign(d.instances.begin(), d.instances.begin() + 30);
  s.dev.assign(d.instances.begin() + 30, d.instances.end());
  return model_from_checkpoint(train(s, d.store, cfg, 3).checkpoint);
}

}  // namespace

TEST_CASE("kappa hand case") {
  // 50% observed agreement, 50% chance agreement on balanced binary labels -> 0
  const std::vector<int> a{0, 0, 1, 1}, b{0, 1, 0, 1};
  CHECK(cohens_kappa<int>(a, b) == doctest::Approx(0.0));
  // po = 0.75, pe = 0.5 -> 0.5
  const std::vector<int> c{0, 0, 1, 1}, e{0, 0, 1, 0};
  CHECK(cohens_kappa<int>(c, e) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(cohens_kappa<int>(c, c) == 1.0);
  const std::vector<int> flip{1, 1, 0, 0};
  CHECK(cohens_kappa<int>(c, flip) == doctest::Approx(-1.0));
}

TEST_CASE("kappa matches the contingency table on random pairs") {
  Rng rng(5);
  for (int t = 0; t < 100; ++t) {
    const int K = 2 + static_cast<int>(rng.below(6));
    const std::size_t n = 2 + rng.below(200);
    std::vector<int> a(n), b(n);
    for (std::size_t i = 0; i < n; ++i) {
      a[i] = static_cast<int>(rng.below(static_cast<std::uint64_t>(K)));
      b[i] = rng.uniform() < 0.5 ? a[i] : static_cast<int>(rng.below(static_cast<std::uint64_t>(K)));
    }
    const bool constant = std::all_of(a.begin(), a.end(), [&](int v) { return v == a[0]; }) &&
                          std::all_of(b.begin(), b.end(), [&](int v) { return v == a[0]; });
    if (constant) continue;
    const double k = cohens_kappa<int>(a, b);
    REQUIRE(k == doctest::Approx(table_kappa(a, b, K)).epsilon(1e-12).scale(1.0));
    REQUIRE(k == doctest::Approx(cohens_kappa<int>(b, a)).epsilon(1e-12).scale(1.0));
    REQUIRE(k <= 1.0 + 1e-12);
    // relabelling categories consistently leaves kappa unchanged
    std::vector<int> pa(n), pb(n);
    for (std::size_t i = 0; i < n; ++i) {
      pa[i] = K - 1 - a[i];
      pb[i] = K - 1 - b[i];
    }
    REQUIRE(cohens_kappa<int>(pa, pb) == doctest::Approx(k).epsilon(1e-12).scale(1.0));
  }
}

TEST_CASE("kappa degenerate inputs") {
  const std::vector<int> same{2, 2, 2};
  CHECK(cohens_kappa<int>(same, same) == 1.0);
  const std::vector<int> other{2, 2, 3};
  CHECK(cohens_kappa<int>(same, other) == doctest::Approx(0.0));
  const std::vector<int> shorter{1, 2};
  CHECK_THROWS_AS(cohens_kappa<int>(same, shorter), ValidationError);
  CHECK_THROWS_AS(cohens_kappa<int>(std::vector<int>{}, std::vector<int>{}), ValidationError);
  CHECK_THROWS_AS(kappa_matrix({}), ValidationError);
}

TEST_CASE("error breakdown percentages") {
  const std::vector<EvalResult> one{eval_with(Dataset::agreement_fr, 100, {{AnswerLabel::WN2, 7}})};
  const auto b = error_breakdown(one);
  REQUIRE(b.rows.size() == 5);
  CHECK(b.rows.back().label == AnswerLabel::WN2);
  CHECK(b.rows.back().percentage == doctest::Approx(7.0));
  CHECK(b.rows.front().percentage == 0.0);
  CHECK(b.mean_f1 == doctest::Approx(0.93));

  const std::vector<EvalResult> two{eval_with(Dataset::alt_atl, 50, {{AnswerLabel::NoEmb, 5}, {AnswerLabel::SSM, 1}}),
                                    eval_with(Dataset::atl_alt, 100, {{AnswerLabel::NoEmb, 4}})};
  const auto c = error_breakdown(two);
  CHECK(c.rows.size() == 7);
  CHECK(c.runs == 2);
  for (const auto& r : c.rows) {
    if (r.label == AnswerLabel::NoEmb) {
      CHECK(r.percentage == doctest::Approx(7.0));
      CHECK(r.lexical);
    }
    if (r.label == AnswerLabel::SSM) {
      CHECK(r.percentage == doctest::Approx(1.0));
      CHECK_FALSE(r.lexical);
    }
  }

  const std::vector<EvalResult> mixed{one[0], two[0]};
  CHECK_THROWS_AS(error_breakdown(mixed), ValidationError);
  const std::vector<EvalResult> foreign{eval_with(Dataset::agreement_fr, 10, {{AnswerLabel::SSM, 1}})};
  CHECK_THROWS_AS(error_breakdown(foreign), ValidationError);
  CHECK_THROWS_AS(error_breakdown({}), ValidationError);
}

TEST_CASE("error percentages sum to 100 (1 - F1)") {
  Rng rng(8);
  for (int t = 0; t < 50; ++t) {
    std::vector<EvalResult> runs;
    const std::size_t n_runs = 1 + rng.below(5);
    for (std::size_t r = 0; r < n_runs; ++r) {
      const std::size_t n = 10 + rng.below(300);
      std::map<AnswerLabel, std::size_t> errs;
      std::size_t left = n;
      for (AnswerLabel l : labels_for(Dataset::alt_atl)) {
        if (l == AnswerLabel::Correct) continue;
        const std::size_t c = rng.below(left / 4 + 1);
        if (c) errs[l] = c;
        left -= c;
      }
      runs.push_back(eval_with(Dataset::alt_atl, n, errs));
    }
    const auto b = error_breakdown(runs);
    double total = 0;
    for (const auto& r : b.rows) total += r.percentage;
    REQUIRE(total == doctest::Approx(100.0 * (1.0 - b.mean_f1)).epsilon(1e-9).scale(1.0));
  }
}

TEST_CASE("masking analysis variants") {
  const auto d = synth_generate(testutil::tiny_synth(40), 2);
  const auto model = trained_tiny(d, "d1x2+c5");
  const auto runs = masking_analysis(model, d.instances, d.store);
  REQUIRE(runs.size() == 7);
  CHECK(runs[0].variant == "base");
  CHECK(runs[1].variant == "mask_discrete_1");
  CHECK(runs[6].variant == "mask_continuous_5");
  for (const auto& r : runs) CHECK(r.predictions.size() == 40);
  CHECK(runs[0].eval.f1 == evaluate(model, d.instances, d.store).f1);

  const auto k = kappa_matrix(runs);
  REQUIRE(k.variants.size() == 7);
  for (std::size_t i = 0; i < 7; ++i) {
    CHECK(k.kappa[i][i] == 1.0);
    for (std::size_t j = 0; j < 7; ++j) CHECK(k.kappa[i][j] == k.kappa[j][i]);
  }
  CHECK(k.at("base", "mask_discrete_1") == k.kappa[0][1]);
  CHECK_THROWS_AS(k.at("base", "nope"), LookupError);

  const auto back = masking_from_json(masking_to_json(runs, k));
  REQUIRE(back.size() == 7);
  CHECK(back[3].variant == runs[3].variant);
  CHECK(back[3].eval.f1 == runs[3].eval.f1);
  CHECK(back[3].predictions.size() == 40);

  CHECK_THROWS_AS(masking_analysis(trained_tiny(d, "c3"), d.instances, d.store), ConfigError);
  try {
    masking_analysis(trained_tiny(d, "d1x2"), d.instances, d.store);
    FAIL("accepted");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()) == "masking analysis requires joint spec");
  }
}

TEST_CASE("masking a dead unit changes nothing") {
  const auto d = synth_generate(testutil::tiny_synth(40), 3);
  auto model = trained_tiny(d, "d1x2+c3");
  auto& w = model.params()[model.param_index("dec.linear.w")].value;
  const std::size_t cols = w.dim(1);
  for (std::size_t k = 0; k < cols; ++k) w[1 * cols + k] = 0.0f;  // continuous unit 2
  const auto runs = masking_analysis(model, d.instances, d.store);
  const auto& b = runs[0];
  const auto& dead = runs[3];
  REQUIRE(dead.variant == "mask_continuous_2");
  for (std::size_t i = 0; i < b.predictions.size(); ++i) CHECK(dead.predictions[i].chosen_index == b.predictions[i].chosen_index);
  CHECK(kappa_matrix(runs).at("base", "mask_continuous_2") == 1.0);
}

TEST_CASE("report files") {
  testutil::TempDir dir("report");
  const std::vector<EvalResult> evals{eval_with(Dataset::agreement_fr, 300, {{AnswerLabel::WN2, 7}, {AnswerLabel::AE, 1}})};
  SettingSummary s{"type I/I", 0.973333, 0.01, 1, error_breakdown(evals)};
  const std::vector<SettingSummary> settings{s};
  KappaMatrix k;
  k.variants = {"base", "mask_discrete_1", "mask_continuous_1"};
  k.kappa = {{1, 0.25, 1.0 / 3.0}, {0.25, 1, 0.5}, {1.0 / 3.0, 0.5, 1}};
  const auto files = emit_report(settings, &k, dir.path);
  CHECK(files.size() == 6);

  const auto errs = read_csv(dir.path / "errors_type_I_I.csv");
  REQUIRE(errs.size() == 6);
  CHECK(errs[0] == std::vector<std::string>{"label", "percentage", "group"});
  CHECK(errs[5][0] == "WN2");
  CHECK(std::stod(errs[5][1]) == doctest::Approx(7.0 / 3.0).epsilon(1e-6));
  CHECK(errs[5][1] == "2.333333");
  CHECK(errs[5][2] == "structural");

  const auto kc = read_csv(dir.path / "kappa.csv");
  REQUIRE(kc.size() == 4);
  CHECK(kc[0] == std::vector<std::string>{"variant", "base", "mask_discrete_1", "mask_continuous_1"});
  CHECK(kc[1][3] == "0.333333");
  for (std::size_t i = 1; i < 4; ++i) CHECK(kc[i].size() == 4);

  const auto f1 = read_csv(dir.path / "f1_summary.csv");
  CHECK(f1[1] == std::vector<std::string>{"type I/I", "0.973333", "0.010000", "1"});
  CHECK(testutil::slurp(dir.path / "kappa.svg").find("<svg") == 0);

  KappaMatrix empty;
  try {
    emit_report(settings, &empty, dir.path);
    FAIL("accepted");
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()) == "no masking runs");
  }
}
