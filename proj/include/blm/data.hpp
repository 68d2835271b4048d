#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace blm {

inline constexpr int kContextLength = 7;

enum class Dataset { agreement_fr, alt_atl, atl_alt };
enum class TypeTier { I, II, III };

// Union of the agreement and alternation answer label sets. Which subset is
// legal depends on the dataset, see labels_for().
enum class AnswerLabel {
  Correct,
  // subject-verb agreement
  Coord,
  WNA,
  AE,
  WN1,
  WN2,
  // verb alternations
  AgentAct,
  Alt1,
  Alt2,
  NoEmb,
  LexPrep,
  SSM,
  AASSM,
};

std::string_view to_string(Dataset d);
std::string_view to_string(TypeTier t);
std::string_view to_string(AnswerLabel l);
Dataset parse_dataset(std::string_view s);
TypeTier parse_type_tier(std::string_view s);
AnswerLabel parse_answer_label(std::string_view s);

bool is_alternation(Dataset d);
// Ordered label set of a dataset, Correct first.
std::span<const AnswerLabel> labels_for(Dataset d);
bool label_allowed(AnswerLabel l, Dataset d);
// Lexical vs structural error grouping; only NoEmb and LexPrep are lexical.
bool is_lexical_error(AnswerLabel l);

struct SentenceRecord {
  std::string id;
  std::string text;
  Dataset dataset = Dataset::agreement_fr;
  TypeTier type_tier = TypeTier::I;
};

struct Answer {
  SentenceRecord sentence;
  AnswerLabel label = AnswerLabel::Correct;
};

struct BLMInstance {
  std::string id;
  Dataset dataset = Dataset::agreement_fr;
  TypeTier type_tier = TypeTier::I;
  std::vector<SentenceRecord> context;
  std::vector<Answer> answers;
  int correct_index = -1;
};

// Sentence ids are derived from the instance id: "<id>:c<i>" for context
// sentence i and "<id>:a<j>" for answer j (both zero-based).
std::string context_sentence_id(std::string_view instance_id, int i);
std::string answer_sentence_id(std::string_view instance_id, int j);

// Throws ValidationError naming the instance when an invariant does not hold.
void validate_instance(const BLMInstance& inst);

std::vector<BLMInstance> load_dataset(const std::filesystem::path& path,
                                      std::optional<Dataset> expected = std::nullopt);
std::vector<BLMInstance> parse_dataset_jsonl(std::string_view text,
                                             std::optional<Dataset> expected = std::nullopt);
void write_dataset(const std::filesystem::path& path, std::span<const BLMInstance> instances);
std::string dataset_to_jsonl(std::span<const BLMInstance> instances);

struct DatasetSplit {
  std::vector<BLMInstance> train;
  std::vector<BLMInstance> dev;
  std::vector<BLMInstance> test;
  std::uint64_t seed = 0;
};

struct SplitSizes {
  std::size_t train = 0;
  std::size_t dev = 0;
  std::size_t test = 0;
};

// test = round_half_up(0.1 N), dev = round_half_up(0.2 (N - test)).
SplitSizes split_sizes(std::size_t n);
DatasetSplit split_dataset(std::span<const BLMInstance> instances, std::uint64_t seed);

std::vector<BLMInstance> filter_by_type(std::span<const BLMInstance> instances, TypeTier tier);

}  // namespace blm
