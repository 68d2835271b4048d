#include "blm/optim.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "blm/error.hpp"

namespace blm {

template <class T>
void adam_step(ParamSet<T>& params, const ParamGrads<T>& grads, AdamState<T>& state) {
  if (grads.size() != params.size() || state.m.size() != params.size() || state.v.size() != params.size())
    throw ShapeError("adam_step: parameter, gradient and moment counts differ");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (grads[i].size() != params[i].value.size() || state.m[i].size() != params[i].value.size())
      throw ShapeError("adam_step: gradient shape mismatch for parameter '" + params[i].name + "'");
    if (!grads[i].all_finite())
      throw NumericError("adam_step: non-finite gradient for parameter '" + params[i].name + "'");
  }
  state.step += 1;
  const double t = static_cast<double>(state.step);
  const T b1 = static_cast<T>(state.beta1), b2 = static_cast<T>(state.beta2);
  const T c1 = static_cast<T>(1.0 - std::pow(state.beta1, t));
  const T c2 = static_cast<T>(1.0 - std::pow(state.beta2, t));
  const T lr = static_cast<T>(state.lr), eps = static_cast<T>(state.eps);
  for (std::size_t i = 0; i < params.size(); ++i) {
    T* w = params[i].value.data();
    T* m = state.m[i].data();
    T* v = state.v[i].data();
    const T* g = grads[i].data();
    for (std::size_t k = 0; k < params[i].value.size(); ++k) {
      m[k] = b1 * m[k] + (T{1} - b1) * g[k];
      v[k] = b2 * v[k] + (T{1} - b2) * g[k] * g[k];
      const T mhat = m[k] / c1;
      const T vhat = v[k] / c2;
      w[k] -= lr * mhat / (std::sqrt(vhat) + eps);
    }
  }
}

template void adam_step<float>(ParamSet<float>&, const ParamGrads<float>&, AdamState<float>&);
template void adam_step<double>(ParamSet<double>&, const ParamGrads<double>&, AdamState<double>&);

GradCheckResult grad_check(const std::function<double(const Tensor<double>&)>& value,
                           const std::function<Tensor<double>(const Tensor<double>&)>& gradient,
                           const Tensor<double>& point, double h, const std::vector<std::size_t>& coords,
                           double floor) {
  const Tensor<double> analytic = gradient(point);
  if (analytic.size() != point.size()) throw ShapeError("grad_check: gradient length differs from point length");
  std::vector<std::size_t> idx = coords;
  if (idx.empty()) {
    idx.resize(point.size());
    for (std::size_t k = 0; k < idx.size(); ++k) idx[k] = k;
  }
  GradCheckResult res;
  Tensor<double> x = point;
  for (std::size_t k : idx) {
    if (k >= point.size()) throw ShapeError("grad_check: coordinate out of range");
    const double orig = x[k];
    x[k] = orig + h;
    const double fp = value(x);
    x[k] = orig - h;
    const double fm = value(x);
    x[k] = orig;
    if (!std::isfinite(fp) || !std::isfinite(fm)) throw NumericError("grad_check: function is not finite near point");
    const double central = (fp - fm) / (2.0 * h);
    const double rel = std::abs(analytic[k] - central) / std::max({std::abs(analytic[k]), std::abs(central), floor});
    if (res.checked == 0 || rel > res.max_rel_error) {
      res.max_rel_error = rel;
      res.worst_index = k;
    }
    ++res.checked;
  }
  return res;
}

GradCheckResult grad_check(const std::function<Var(Graph<double>&, Var)>& build, const Tensor<double>& point,
                           double h, const std::vector<std::size_t>& coords, double floor) {
  auto value = [&](const Tensor<double>& x) {
    Graph<double> g;
    Var out = build(g, g.constant(x));
    return g.value(out)[0];
  };
  auto gradient = [&](const Tensor<double>& x) {
    Graph<double> g;
    Var in = g.leaf(x);
    Var out = build(g, in);
    g.backward(out);
    return g.grad(in);
  };
  return grad_check(value, gradient, point, h, coords, floor);
}

namespace {

constexpr char kCkptMagic[4] = {'C', 'K', 'P', 'T'};
constexpr std::uint32_t kCkptVersion = 1;

class Writer {
 public:
  template <class U>
  void le(U v) {
    for (std::size_t i = 0; i < sizeof(U); ++i) buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
  }
  void f32(float f) { le(std::bit_cast<std::uint32_t>(f)); }
  void f64(double d) { le(std::bit_cast<std::uint64_t>(d)); }
  void bytes(const char* p, std::size_t n) { buf_.append(p, n); }
  void tensor_payload(const Tensor<float>& t) {
    for (float f : t.vec()) f32(f);
  }
  const std::string& str() const { return buf_; }

 private:
  std::string buf_;
};

class Reader {
 public:
  Reader(const std::string& buf, std::string where) : buf_(buf), where_(std::move(where)) {}
  template <class U>
  U le() {
    need(sizeof(U));
    U v = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i)
      v |= static_cast<U>(static_cast<unsigned char>(buf_[pos_ + i])) << (8 * i);
    pos_ += sizeof(U);
    return v;
  }
  float f32() { return std::bit_cast<float>(le<std::uint32_t>()); }
  double f64() { return std::bit_cast<double>(le<std::uint64_t>()); }
  std::string bytes(std::size_t n) {
    need(n);
    std::string s = buf_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  void payload(Tensor<float>& t) {
    need(t.size() * 4);
    for (auto& f : t.vec()) f = f32();
  }
  bool at_end() const { return pos_ == buf_.size(); }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > buf_.size()) throw IntegrityError(where_ + ": checkpoint truncated");
  }
  const std::string& buf_;
  std::string where_;
  std::size_t pos_ = 0;
};

}  // namespace

std::filesystem::path checkpoint_config_path(const std::filesystem::path& path) {
  auto p = path;
  p.replace_extension(".json");
  return p;
}

void write_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  Writer w;
  w.bytes(kCkptMagic, 4);
  w.le<std::uint32_t>(kCkptVersion);
  w.le<std::uint32_t>(static_cast<std::uint32_t>(ckpt.params.size()));
  for (const auto& p : ckpt.params) {
    w.le<std::uint32_t>(static_cast<std::uint32_t>(p.name.size()));
    w.bytes(p.name.data(), p.name.size());
    w.le<std::uint32_t>(static_cast<std::uint32_t>(p.value.rank()));
    for (std::size_t d : p.value.shape()) w.le<std::uint64_t>(d);
    w.tensor_payload(p.value);
  }
  const auto& a = ckpt.adam;
  w.f64(a.lr);
  w.f64(a.beta1);
  w.f64(a.beta2);
  w.f64(a.eps);
  w.le<std::uint64_t>(a.step);
  const bool has_moments = a.m.size() == ckpt.params.size() && a.v.size() == ckpt.params.size();
  w.le<std::uint8_t>(has_moments ? 1 : 0);
  if (has_moments) {
    for (const auto& m : a.m) w.tensor_payload(m);
    for (const auto& v : a.v) w.tensor_payload(v);
  }

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write checkpoint " + path.string());
  out.write(w.str().data(), static_cast<std::streamsize>(w.str().size()));
  if (!out) throw IoError("write failed for " + path.string());
  std::ofstream cfg(checkpoint_config_path(path), std::ios::binary | std::ios::trunc);
  if (!cfg) throw IoError("cannot write checkpoint config " + checkpoint_config_path(path).string());
  cfg << ckpt.config_json;
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint " + path.string());
  std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (buf.size() < 4 || std::memcmp(buf.data(), kCkptMagic, 4) != 0)
    throw FormatError(path.string() + ": bad magic, not a CKPT file");
  Reader r(buf, path.string());
  r.bytes(4);
  const auto version = r.le<std::uint32_t>();
  if (version != kCkptVersion) throw FormatError(path.string() + ": unsupported checkpoint version " + std::to_string(version));
  Checkpoint ckpt;
  const auto n = r.le<std::uint32_t>();
  for (std::uint32_t i = 0; i < n; ++i) {
    Parameter<float> p;
    p.name = r.bytes(r.le<std::uint32_t>());
    Shape shape(r.le<std::uint32_t>());
    for (auto& d : shape) d = r.le<std::uint64_t>();
    p.value = Tensor<float>(shape);
    r.payload(p.value);
    ckpt.params.push_back(std::move(p));
  }
  auto& a = ckpt.adam;
  a.lr = r.f64();
  a.beta1 = r.f64();
  a.beta2 = r.f64();
  a.eps = r.f64();
  a.step = r.le<std::uint64_t>();
  if (r.le<std::uint8_t>()) {
    for (const auto& p : ckpt.params) {
      a.m.emplace_back(p.value.shape());
      r.payload(a.m.back());
    }
    for (const auto& p : ckpt.params) {
      a.v.emplace_back(p.value.shape());
      r.payload(a.v.back());
    }
  }
  if (!r.at_end()) throw IntegrityError(path.string() + ": trailing bytes after checkpoint payload");

  const auto cfg_path = checkpoint_config_path(path);
  std::ifstream cfg(cfg_path, std::ios::binary);
  if (!cfg) throw IoError("cannot open checkpoint config " + cfg_path.string());
  std::ostringstream os;
  os << cfg.rdbuf();
  ckpt.config_json = os.str();
  return ckpt;
}

}  // namespace blm
