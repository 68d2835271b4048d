#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "blm/data.hpp"

namespace blm {

struct Shape2D {
  std::size_t rows = 32;
  std::size_t cols = 24;

  std::size_t size() const { return rows * cols; }
  bool operator==(const Shape2D&) const = default;
};

// Immutable-after-build table of float32 sentence vectors keyed by sentence id.
class EmbeddingStore {
 public:
  explicit EmbeddingStore(std::size_t dim = 768) : dim_(dim) {}

  std::size_t dim() const { return dim_; }
  std::size_t count() const { return ids_.size(); }

  // Throws ValidationError on duplicate id, wrong length or non-finite entries.
  void add(std::string id, std::span<const float> vec);

  bool contains(const std::string& id) const { return index_.count(id) != 0; }
  std::size_t row_of(const std::string& id) const;  // LookupError when absent
  std::span<const float> row(std::size_t r) const { return {data_.data() + r * dim_, dim_}; }
  std::span<const float> vector(const std::string& id) const { return row(row_of(id)); }

  const std::vector<std::string>& ids() const { return ids_; }
  const std::vector<float>& data() const { return data_; }

  bool operator==(const EmbeddingStore& other) const;

 private:
  std::size_t dim_;
  std::vector<std::string> ids_;
  std::vector<float> data_;
  std::unordered_map<std::string, std::size_t> index_;
};

// Row-major 1D -> 2D reshape: element k lands at (k / cols, k % cols).
// The returned buffer is the 2D array in row-major order, so reshape and
// flatten are both the identity on the underlying storage.
std::vector<float> reshape_2d(std::span<const float> v, const Shape2D& shape);
inline std::size_t reshape_row(std::size_t k, const Shape2D& shape) { return k / shape.cols; }
inline std::size_t reshape_col(std::size_t k, const Shape2D& shape) { return k % shape.cols; }

// Binary store: "EMB1", u32 version=1, u64 count, u32 dim, count*dim float32,
// all little-endian; sidecar "<stem>.idx.json" maps id -> row.
void write_store(const EmbeddingStore& store, const std::filesystem::path& path);
EmbeddingStore read_store(const std::filesystem::path& path);
std::filesystem::path sidecar_path(const std::filesystem::path& store_path);

struct AnswerTensor {
  std::vector<float> embedding;  // rows*cols, row-major
  AnswerLabel label = AnswerLabel::Correct;
};

struct InstanceTensors {
  std::string instance_id;
  Shape2D shape;
  std::vector<float> context_stack;  // S x rows x cols
  std::vector<AnswerTensor> answers;
  int correct_index = -1;

  std::span<const float> context_slice(std::size_t i) const {
    return {context_stack.data() + i * shape.size(), shape.size()};
  }
};

InstanceTensors assemble_instance(const BLMInstance& instance, const EmbeddingStore& store, const Shape2D& shape);

// Every sentence of every instance present in the store; LookupError naming
// the first missing id otherwise.
void check_coverage(std::span<const BLMInstance> instances, const EmbeddingStore& store);

}  // namespace blm
