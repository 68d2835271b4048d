#include "blm/analysis.hpp"

#include <json.hpp>

namespace blm {

using nlohmann::json;

ErrorBreakdown error_breakdown(std::span<const EvalResult> results) {
  if (results.empty()) throw ValidationError("error breakdown needs at least one result");
  ErrorBreakdown b;
  b.dataset = results[0].dataset;
  b.runs = results.size();
  for (const auto& r : results) {
    if (is_alternation(r.dataset) != is_alternation(b.dataset))
      throw ValidationError("error breakdown over mixed label sets (" + std::string(to_string(b.dataset)) + " and " +
                            std::string(to_string(r.dataset)) + ")");
    if (r.n_instances == 0) throw ValidationError("error breakdown over an empty evaluation");
    for (const auto& [label, n] : r.per_label_error_counts)
      if (!label_allowed(label, b.dataset))
        throw ValidationError("label " + std::string(to_string(label)) + " is not part of the " +
                              std::string(to_string(b.dataset)) + " label set");
    b.mean_f1 += r.f1;
  }
  b.mean_f1 /= static_cast<double>(results.size());
  for (AnswerLabel l : labels_for(b.dataset)) {
    if (l == AnswerLabel::Correct) continue;
    BreakdownRow row{l, 0.0, is_lexical_error(l)};
    for (const auto& r : results) {
      auto it = r.per_label_error_counts.find(l);
      const double c = it == r.per_label_error_counts.end() ? 0.0 : static_cast<double>(it->second);
      row.percentage += 100.0 * c / static_cast<double>(r.n_instances);
    }
    row.percentage /= static_cast<double>(results.size());
    b.rows.push_back(row);
  }
  return b;
}

std::vector<MaskingRun> masking_analysis(const Model<float>& model, std::span<const BLMInstance> instances,
                                         const EmbeddingStore& store) {
  const auto& cfg = model.config();
  if (cfg.kind != ModelKind::encdec || !cfg.latent.is_joint())
    throw ConfigError("masking analysis requires joint spec");
  if (instances.empty()) throw DataError("masking analysis over an empty instance list");
  check_coverage(instances, store);
  std::vector<InstanceTensors> xs;
  xs.reserve(instances.size());
  for (const auto& x : instances) xs.push_back(assemble_instance(x, store, cfg.shape));

  std::vector<std::optional<MaskTarget>> targets{std::nullopt};
  for (std::size_t j = 0; j < cfg.latent.categories.size(); ++j) targets.push_back(MaskTarget::discrete(j));
  for (std::size_t k = 0; k < cfg.latent.continuous_dim; ++k) targets.push_back(MaskTarget::continuous(k));

  std::vector<MaskingRun> runs;
  for (const auto& t : targets) {
    MaskingRun run;
    run.variant = t ? t->name() : "base";
    run.target = t;
    run.eval = score_predictions(instances, model.predict_batch(xs, t));
    run.predictions = run.eval.predictions;
    runs.push_back(std::move(run));
  }
  return runs;
}

std::vector<MaskingRun> masking_analysis(const Checkpoint& ckpt, std::span<const BLMInstance> instances,
                                         const EmbeddingStore& store) {
  return masking_analysis(model_from_checkpoint(ckpt), instances, store);
}

double KappaMatrix::at(const std::string& a, const std::string& b) const {
  auto find = [&](const std::string& v) {
    for (std::size_t i = 0; i < variants.size(); ++i)
      if (variants[i] == v) return i;
    throw LookupError("no masking variant '" + v + "'");
  };
  return kappa[find(a)][find(b)];
}

KappaMatrix kappa_matrix(std::span<const MaskingRun> runs) {
  if (runs.empty()) throw ValidationError("no masking runs");
  KappaMatrix m;
  std::vector<std::vector<AnswerLabel>> labels;
  for (const auto& r : runs) {
    if (r.predictions.size() != runs[0].predictions.size())
      throw ValidationError("masking variant '" + r.variant + "' covers a different instance list");
    m.variants.push_back(r.variant);
    std::vector<AnswerLabel> l;
    for (const auto& p : r.predictions) l.push_back(p.chosen_label);
    labels.push_back(std::move(l));
  }
  const std::size_t n = runs.size();
  m.kappa.assign(n, std::vector<double>(n, 1.0));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      const double k = cohens_kappa<AnswerLabel>(labels[i], labels[j]);
      m.kappa[i][j] = m.kappa[j][i] = k;
    }
  return m;
}

std::string masking_to_json(std::span<const MaskingRun> runs, const KappaMatrix& kappa) {
  json variants = json::array();
  for (const auto& r : runs) {
    json v = json::parse(eval_result_to_json(r.eval));
    v["variant"] = r.variant;
    variants.push_back(v);
  }
  json out = {{"kappa_over", "chosen answer labels"},
              {"variants", variants},
              {"kappa", {{"variants", kappa.variants}, {"matrix", kappa.kappa}}}};
  return out.dump(2);
}

std::vector<MaskingRun> masking_from_json(const std::string& text) {
  std::vector<MaskingRun> out;
  try {
    const json j = json::parse(text);
    for (const auto& v : j.at("variants")) {
      MaskingRun r;
      r.variant = v.at("variant").get<std::string>();
      r.eval = eval_results_from_json(v.dump()).front();
      r.predictions = r.eval.predictions;
      out.push_back(std::move(r));
    }
  } catch (const json::exception& e) {
    throw FormatError(std::string("masking file: ") + e.what());
  }
  return out;
}

std::string breakdown_to_json(const ErrorBreakdown& b) {
  json rows = json::array();
  for (const auto& r : b.rows)
    rows.push_back({{"label", to_string(r.label)}, {"percentage", r.percentage},
                    {"group", r.lexical ? "lexical" : "structural"}});
  json out = {{"dataset", to_string(b.dataset)}, {"runs", b.runs}, {"mean_f1", b.mean_f1}, {"rows", rows}};
  return out.dump(2);
}

}  // namespace blm
