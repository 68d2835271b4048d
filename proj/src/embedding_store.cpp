#include "blm/embedding_store.hpp"

#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "blm/error.hpp"

namespace blm {

namespace {

constexpr std::array<char, 4> kMagic = {'E', 'M', 'B', '1'};
constexpr std::uint32_t kVersion = 1;
constexpr std::size_t kHeaderBytes = 4 + 4 + 8 + 4;

template <class U>
void put_le(std::string& out, U value) {
  for (std::size_t i = 0; i < sizeof(U); ++i) out.push_back(static_cast<char>((value >> (8 * i)) & 0xff));
}

template <class U>
U get_le(const unsigned char* p) {
  U v = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(p[i]) << (8 * i);
  return v;
}

}  // namespace

void EmbeddingStore::add(std::string id, std::span<const float> vec) {
  if (vec.size() != dim_)
    throw ValidationError("vector for '" + id + "' has length " + std::to_string(vec.size()) + ", store dim is " +
                          std::to_string(dim_));
  for (float x : vec)
    if (!std::isfinite(x)) throw ValidationError("vector for '" + id + "' has a non-finite entry");
  if (index_.count(id)) throw ValidationError("duplicate sentence id '" + id + "' in store");
  index_.emplace(id, ids_.size());
  ids_.push_back(std::move(id));
  data_.insert(data_.end(), vec.begin(), vec.end());
}

std::size_t EmbeddingStore::row_of(const std::string& id) const {
  auto it = index_.find(id);
  if (it == index_.end()) throw LookupError("sentence id not in embedding store: " + id);
  return it->second;
}

bool EmbeddingStore::operator==(const EmbeddingStore& other) const {
  if (dim_ != other.dim_ || ids_ != other.ids_ || data_.size() != other.data_.size()) return false;
  return std::memcmp(data_.data(), other.data_.data(), data_.size() * sizeof(float)) == 0;
}

std::vector<float> reshape_2d(std::span<const float> v, const Shape2D& shape) {
  if (v.size() != shape.size())
    throw ShapeError("cannot reshape vector of length " + std::to_string(v.size()) + " to " +
                     std::to_string(shape.rows) + "x" + std::to_string(shape.cols));
  return {v.begin(), v.end()};
}

std::filesystem::path sidecar_path(const std::filesystem::path& store_path) {
  auto p = store_path;
  p.replace_extension(".idx.json");
  return p;
}

void write_store(const EmbeddingStore& store, const std::filesystem::path& path) {
  std::string bytes;
  bytes.reserve(kHeaderBytes + store.data().size() * 4);
  bytes.append(kMagic.data(), kMagic.size());
  put_le<std::uint32_t>(bytes, kVersion);
  put_le<std::uint64_t>(bytes, store.count());
  put_le<std::uint32_t>(bytes, static_cast<std::uint32_t>(store.dim()));
  for (float f : store.data()) put_le<std::uint32_t>(bytes, std::bit_cast<std::uint32_t>(f));

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write embedding store " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for " + path.string());

  nlohmann::ordered_json idx = nlohmann::ordered_json::object();
  for (std::size_t r = 0; r < store.ids().size(); ++r) idx[store.ids()[r]] = r;
  const auto side = sidecar_path(path);
  std::ofstream sout(side, std::ios::binary | std::ios::trunc);
  if (!sout) throw IoError("cannot write store index " + side.string());
  sout << idx.dump() << '\n';
}

EmbeddingStore read_store(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open embedding store " + path.string());
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (bytes.size() < kHeaderBytes || std::memcmp(bytes.data(), kMagic.data(), 4) != 0)
    throw FormatError(path.string() + ": bad magic, not an EMB1 store");
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
  const auto version = get_le<std::uint32_t>(p + 4);
  if (version != kVersion) throw FormatError(path.string() + ": unsupported store version " + std::to_string(version));
  const auto count = get_le<std::uint64_t>(p + 8);
  const auto dim = get_le<std::uint32_t>(p + 16);
  const std::uint64_t expected = count * dim * 4;
  if (bytes.size() - kHeaderBytes != expected)
    throw IntegrityError(path.string() + ": payload is " + std::to_string(bytes.size() - kHeaderBytes) +
                         " bytes, header promises " + std::to_string(expected));

  const auto side = sidecar_path(path);
  std::ifstream sin(side, std::ios::binary);
  if (!sin) throw IoError("cannot open store index " + side.string());
  nlohmann::json idx;
  try {
    idx = nlohmann::json::parse(sin);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(side.string() + ": " + e.what());
  }
  if (!idx.is_object() || idx.size() != count)
    throw IntegrityError(side.string() + ": index has " + std::to_string(idx.size()) + " entries, store has " +
                         std::to_string(count) + " rows");
  std::vector<std::string> ids(count);
  std::vector<bool> filled(count, false);
  for (const auto& [id, row_json] : idx.items()) {
    const auto r = row_json.get<std::uint64_t>();
    if (r >= count || filled[r]) throw IntegrityError(side.string() + ": index is not a bijection onto rows");
    ids[r] = id;
    filled[r] = true;
  }

  EmbeddingStore store(dim);
  std::vector<float> row(dim);
  const unsigned char* payload = p + kHeaderBytes;
  for (std::uint64_t r = 0; r < count; ++r) {
    for (std::uint32_t k = 0; k < dim; ++k)
      row[k] = std::bit_cast<float>(get_le<std::uint32_t>(payload + (r * dim + k) * 4));
    store.add(std::move(ids[r]), row);
  }
  return store;
}

InstanceTensors assemble_instance(const BLMInstance& instance, const EmbeddingStore& store, const Shape2D& shape) {
  if (shape.size() != store.dim())
    throw ShapeError("shape " + std::to_string(shape.rows) + "x" + std::to_string(shape.cols) +
                     " does not match store dim " + std::to_string(store.dim()));
  InstanceTensors t;
  t.instance_id = instance.id;
  t.shape = shape;
  t.correct_index = instance.correct_index;
  t.context_stack.reserve(instance.context.size() * shape.size());
  for (const auto& s : instance.context) {
    auto v = store.vector(s.id);
    t.context_stack.insert(t.context_stack.end(), v.begin(), v.end());
  }
  for (const auto& a : instance.answers) {
    auto v = store.vector(a.sentence.id);
    t.answers.push_back({reshape_2d(v, shape), a.label});
  }
  return t;
}

void check_coverage(std::span<const BLMInstance> instances, const EmbeddingStore& store) {
  for (const auto& inst : instances) {
    for (const auto& s : inst.context)
      if (!store.contains(s.id)) throw LookupError("sentence id not in embedding store: " + s.id);
    for (const auto& a : inst.answers)
      if (!store.contains(a.sentence.id)) throw LookupError("sentence id not in embedding store: " + a.sentence.id);
  }
}

}  // namespace blm
