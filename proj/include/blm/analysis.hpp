#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "blm/error.hpp"
#include "blm/train.hpp"

namespace blm {

struct BreakdownRow {
  AnswerLabel label = AnswerLabel::Correct;
  double percentage = 0.0;  // mean over runs of 100 * count / n_instances
  bool lexical = false;
};

struct ErrorBreakdown {
  Dataset dataset = Dataset::agreement_fr;
  std::size_t runs = 0;
  double mean_f1 = 0.0;
  std::vector<BreakdownRow> rows;  // every error label of the dataset, in label order
};

ErrorBreakdown error_breakdown(std::span<const EvalResult> results);

struct MaskingRun {
  std::string variant;  // "base", "mask_discrete_<j>", "mask_continuous_<k>"
  std::optional<MaskTarget> target;
  std::vector<PredictionRecord> predictions;
  EvalResult eval;
};

// One base run plus one run per discrete block and per continuous unit, all in
// deterministic inference mode.
std::vector<MaskingRun> masking_analysis(const Model<float>& model, std::span<const BLMInstance> instances,
                                         const EmbeddingStore& store);
std::vector<MaskingRun> masking_analysis(const Checkpoint& ckpt, std::span<const BLMInstance> instances,
                                         const EmbeddingStore& store);

// Cohen's kappa between two label sequences. When p_e = 1 (both sequences use
// one and the same single category) the result is 1.0; p_e = 1 otherwise
// cannot occur.
template <class L>
double cohens_kappa(std::span<const L> a, std::span<const L> b) {
  if (a.size() != b.size())
    throw ValidationError("cohens_kappa: sequences differ in length (" + std::to_string(a.size()) + " vs " +
                          std::to_string(b.size()) + ")");
  if (a.empty()) throw ValidationError("cohens_kappa: empty sequences");
  const double n = static_cast<double>(a.size());
  std::map<L, std::pair<double, double>> marg;
  double agree = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    marg[a[i]].first += 1.0;
    marg[b[i]].second += 1.0;
    if (a[i] == b[i]) agree += 1.0;
  }
  const double po = agree / n;
  double pe = 0.0;
  for (const auto& [label, m] : marg) pe += (m.first / n) * (m.second / n);
  if (pe >= 1.0) return po >= 1.0 ? 1.0 : 0.0;
  return (po - pe) / (1.0 - pe);
}

struct KappaMatrix {
  std::vector<std::string> variants;
  std::vector<std::vector<double>> kappa;

  double at(const std::string& a, const std::string& b) const;
};

// Pairwise kappa over the chosen answer labels.
KappaMatrix kappa_matrix(std::span<const MaskingRun> runs);

std::string masking_to_json(std::span<const MaskingRun> runs, const KappaMatrix& kappa);
std::vector<MaskingRun> masking_from_json(const std::string& text);
std::string breakdown_to_json(const ErrorBreakdown& b);

struct SettingSummary {
  std::string setting;
  double mean_f1 = 0.0;
  double std_f1 = 0.0;
  std::size_t runs = 0;
  ErrorBreakdown breakdown;
};

// Writes f1_summary.csv, errors_<setting>.csv and errors_<setting>.svg per
// setting, kappa.csv and kappa.svg when `kappa` is given, and summary.json.
// Returns the written paths.
std::vector<std::filesystem::path> emit_report(std::span<const SettingSummary> settings, const KappaMatrix* kappa,
                                               const std::filesystem::path& out_dir);

}  // namespace blm
