#include "blm/data.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <sstream>
#include <unordered_set>

#include <json.hpp>

#include "blm/error.hpp"
#include "blm/rng.hpp"

namespace blm {

using nlohmann::json;

namespace {

constexpr std::array kAgreementLabels = {AnswerLabel::Correct, AnswerLabel::Coord, AnswerLabel::WNA,
                                         AnswerLabel::AE,      AnswerLabel::WN1,   AnswerLabel::WN2};
constexpr std::array kAlternationLabels = {
    AnswerLabel::Correct, AnswerLabel::AgentAct, AnswerLabel::Alt1, AnswerLabel::Alt2,
    AnswerLabel::NoEmb,   AnswerLabel::LexPrep,  AnswerLabel::SSM,  AnswerLabel::AASSM};

constexpr std::array<std::pair<AnswerLabel, std::string_view>, 13> kLabelNames = {{
    {AnswerLabel::Correct, "Correct"},
    {AnswerLabel::Coord, "Coord"},
    {AnswerLabel::WNA, "WNA"},
    {AnswerLabel::AE, "AE"},
    {AnswerLabel::WN1, "WN1"},
    {AnswerLabel::WN2, "WN2"},
    {AnswerLabel::AgentAct, "AgentAct"},
    {AnswerLabel::Alt1, "Alt1"},
    {AnswerLabel::Alt2, "Alt2"},
    {AnswerLabel::NoEmb, "NoEmb"},
    {AnswerLabel::LexPrep, "LexPrep"},
    {AnswerLabel::SSM, "SSM"},
    {AnswerLabel::AASSM, "AASSM"},
}};

std::size_t round_half_up(double x) { return static_cast<std::size_t>(std::floor(x + 0.5)); }

}  // namespace

std::string_view to_string(Dataset d) {
  switch (d) {
    case Dataset::agreement_fr: return "agreement_fr";
    case Dataset::alt_atl: return "alt_atl";
    case Dataset::atl_alt: return "atl_alt";
  }
  return "?";
}

std::string_view to_string(TypeTier t) {
  switch (t) {
    case TypeTier::I: return "I";
    case TypeTier::II: return "II";
    case TypeTier::III: return "III";
  }
  return "?";
}

std::string_view to_string(AnswerLabel l) {
  for (const auto& [label, name] : kLabelNames)
    if (label == l) return name;
  return "?";
}

Dataset parse_dataset(std::string_view s) {
  if (s == "agreement_fr") return Dataset::agreement_fr;
  if (s == "alt_atl") return Dataset::alt_atl;
  if (s == "atl_alt") return Dataset::atl_alt;
  throw DataError("unknown dataset '" + std::string(s) + "' (expected agreement_fr|alt_atl|atl_alt)");
}

TypeTier parse_type_tier(std::string_view s) {
  if (s == "I") return TypeTier::I;
  if (s == "II") return TypeTier::II;
  if (s == "III") return TypeTier::III;
  throw DataError("unknown type tier '" + std::string(s) + "' (expected I|II|III)");
}

AnswerLabel parse_answer_label(std::string_view s) {
  for (const auto& [label, name] : kLabelNames)
    if (name == s) return label;
  throw DataError("unknown answer label '" + std::string(s) + "'");
}

bool is_alternation(Dataset d) { return d != Dataset::agreement_fr; }

std::span<const AnswerLabel> labels_for(Dataset d) {
  if (is_alternation(d)) return kAlternationLabels;
  return kAgreementLabels;
}

bool label_allowed(AnswerLabel l, Dataset d) {
  auto labels = labels_for(d);
  return std::find(labels.begin(), labels.end(), l) != labels.end();
}

bool is_lexical_error(AnswerLabel l) { return l == AnswerLabel::NoEmb || l == AnswerLabel::LexPrep; }

std::string context_sentence_id(std::string_view instance_id, int i) {
  return std::string(instance_id) + ":c" + std::to_string(i);
}

std::string answer_sentence_id(std::string_view instance_id, int j) {
  return std::string(instance_id) + ":a" + std::to_string(j);
}

void validate_instance(const BLMInstance& inst) {
  const std::string where = "instance '" + inst.id + "': ";
  if (inst.id.empty()) throw ValidationError("instance with empty id");
  if (inst.context.size() != kContextLength)
    throw ValidationError(where + "context length " + std::to_string(inst.context.size()) +
                          " != " + std::to_string(kContextLength));
  for (const auto& s : inst.context)
    if (s.text.empty()) throw ValidationError(where + "empty context sentence '" + s.id + "'");
  int n_correct = 0;
  int found = -1;
  for (std::size_t j = 0; j < inst.answers.size(); ++j) {
    const auto& a = inst.answers[j];
    if (a.sentence.text.empty()) throw ValidationError(where + "empty answer sentence '" + a.sentence.id + "'");
    if (!label_allowed(a.label, inst.dataset))
      throw ValidationError(where + "label " + std::string(to_string(a.label)) + " not allowed for dataset " +
                            std::string(to_string(inst.dataset)));
    if (a.label == AnswerLabel::Correct) {
      ++n_correct;
      found = static_cast<int>(j);
    }
  }
  if (n_correct != 1)
    throw ValidationError(where + "expected exactly one Correct answer, found " + std::to_string(n_correct));
  if (inst.correct_index != found) throw ValidationError(where + "correct_index does not point at the Correct answer");
  if (inst.answers.size() < 2) throw ValidationError(where + "answer set needs at least one erroneous answer");
}

namespace {

BLMInstance instance_from_json(const json& j, std::optional<Dataset> expected) {
  BLMInstance inst;
  inst.id = j.at("id").get<std::string>();
  inst.dataset = parse_dataset(j.at("dataset").get<std::string>());
  if (expected && *expected != inst.dataset)
    throw ValidationError("instance '" + inst.id + "': dataset " + std::string(to_string(inst.dataset)) +
                          " does not match expected " + std::string(to_string(*expected)));
  inst.type_tier = parse_type_tier(j.at("type").get<std::string>());
  const auto& ctx = j.at("context");
  if (!ctx.is_array()) throw ValidationError("instance '" + inst.id + "': context is not an array");
  for (std::size_t i = 0; i < ctx.size(); ++i)
    inst.context.push_back({context_sentence_id(inst.id, static_cast<int>(i)), ctx[i].get<std::string>(),
                            inst.dataset, inst.type_tier});
  const auto& answers = j.at("answers");
  if (!answers.is_array()) throw ValidationError("instance '" + inst.id + "': answers is not an array");
  for (std::size_t k = 0; k < answers.size(); ++k) {
    Answer a;
    a.sentence = {answer_sentence_id(inst.id, static_cast<int>(k)), answers[k].at("text").get<std::string>(),
                  inst.dataset, inst.type_tier};
    a.label = parse_answer_label(answers[k].at("label").get<std::string>());
    if (a.label == AnswerLabel::Correct && inst.correct_index < 0) inst.correct_index = static_cast<int>(k);
    inst.answers.push_back(std::move(a));
  }
  validate_instance(inst);
  return inst;
}

json instance_to_json(const BLMInstance& inst) {
  json ctx = json::array();
  for (const auto& s : inst.context) ctx.push_back(s.text);
  json answers = json::array();
  for (const auto& a : inst.answers) answers.push_back({{"text", a.sentence.text}, {"label", to_string(a.label)}});
  return {{"id", inst.id},
          {"dataset", to_string(inst.dataset)},
          {"type", to_string(inst.type_tier)},
          {"context", std::move(ctx)},
          {"answers", std::move(answers)}};
}

}  // namespace

std::vector<BLMInstance> parse_dataset_jsonl(std::string_view text, std::optional<Dataset> expected) {
  std::vector<BLMInstance> out;
  std::unordered_set<std::string> seen;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.find_first_not_of(" \t") == std::string_view::npos) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw FormatError("line " + std::to_string(line_no) + ": malformed JSON: " + e.what());
    }
    BLMInstance inst;
    try {
      inst = instance_from_json(j, expected);
    } catch (const json::exception& e) {
      throw FormatError("line " + std::to_string(line_no) + ": schema error: " + e.what());
    }
    if (!seen.insert(inst.id).second)
      throw ValidationError("line " + std::to_string(line_no) + ": duplicate instance id '" + inst.id + "'");
    out.push_back(std::move(inst));
  }
  return out;
}

std::vector<BLMInstance> load_dataset(const std::filesystem::path& path, std::optional<Dataset> expected) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open dataset file " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_dataset_jsonl(buf.str(), expected);
}

std::string dataset_to_jsonl(std::span<const BLMInstance> instances) {
  std::string out;
  for (const auto& inst : instances) {
    out += instance_to_json(inst).dump();
    out += '\n';
  }
  return out;
}

void write_dataset(const std::filesystem::path& path, std::span<const BLMInstance> instances) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write dataset file " + path.string());
  out << dataset_to_jsonl(instances);
  if (!out) throw IoError("write failed for " + path.string());
}

SplitSizes split_sizes(std::size_t n) {
  SplitSizes s;
  s.test = round_half_up(0.1 * static_cast<double>(n));
  const std::size_t pool = n - s.test;
  s.dev = round_half_up(0.2 * static_cast<double>(pool));
  s.train = pool - s.dev;
  return s;
}

DatasetSplit split_dataset(std::span<const BLMInstance> instances, std::uint64_t seed) {
  if (instances.size() < 10)
    throw DataError("dataset too small to split: " + std::to_string(instances.size()) + " instances (need >= 10)");
  std::vector<std::size_t> order(instances.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng(seed);
  for (std::size_t i = order.size() - 1; i > 0; --i) std::swap(order[i], order[rng.below(i + 1)]);

  const SplitSizes sizes = split_sizes(instances.size());
  // Membership comes from the shuffle; each part keeps file order.
  std::vector<int> part(instances.size(), 0);
  for (std::size_t k = 0; k < order.size(); ++k) {
    if (k < sizes.test) part[order[k]] = 2;
    else if (k < sizes.test + sizes.dev) part[order[k]] = 1;
  }
  DatasetSplit split;
  split.seed = seed;
  for (std::size_t i = 0; i < instances.size(); ++i) {
    switch (part[i]) {
      case 0: split.train.push_back(instances[i]); break;
      case 1: split.dev.push_back(instances[i]); break;
      default: split.test.push_back(instances[i]); break;
    }
  }
  return split;
}

std::vector<BLMInstance> filter_by_type(std::span<const BLMInstance> instances, TypeTier tier) {
  std::vector<BLMInstance> out;
  for (const auto& inst : instances)
    if (inst.type_tier == tier) out.push_back(inst);
  return out;
}

}  // namespace blm
