#include "blm/ops.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <sstream>

#include <Eigen/Core>

namespace blm {

std::string shape_string(const Shape& s) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "x" : "") << s[i];
  os << ']';
  return os.str();
}

namespace ops {

namespace {

template <class T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class T>
using MapMat = Eigen::Map<RowMat<T>>;
template <class T>
using CMapMat = Eigen::Map<const RowMat<T>>;

void require(bool ok, const std::string& msg) {
  if (!ok) throw ShapeError(msg);
}

template <class T>
void add_into(Tensor<T>* dst, const Tensor<T>& src) {
  if (!dst) return;
  for (std::size_t k = 0; k < src.size(); ++k) (*dst)[k] += src[k];
}

// Geometry of one 3D valid convolution.
struct ConvGeom {
  std::size_t batch, cin, s, n, m;     // input
  std::size_t cout, ks, kn, km;        // kernel
  std::size_t so, no, mo;              // output
  std::size_t patch() const { return cin * ks * kn * km; }
  std::size_t positions() const { return so * no * mo; }
  std::size_t in_item() const { return cin * s * n * m; }
};

ConvGeom conv_geom(const Shape& x, const Shape& w, const Shape& b) {
  require(x.size() == 5, "conv3d input must be B x C x S x N x M, got " + shape_string(x));
  require(w.size() == 5, "conv3d kernel must be Cout x Cin x kS x kN x kM, got " + shape_string(w));
  require(w[1] == x[1], "conv3d channel mismatch: input " + shape_string(x) + ", kernel " + shape_string(w));
  require(b.size() == 1 && b[0] == w[0], "conv3d bias must have Cout entries");
  require(w[2] <= x[2] && w[3] <= x[3] && w[4] <= x[4],
          "conv kernel " + shape_string(w) + " larger than input " + shape_string(x));
  ConvGeom gm{x[0], x[1], x[2], x[3], x[4], w[0], w[2], w[3], w[4], 0, 0, 0};
  gm.so = gm.s - gm.ks + 1;
  gm.no = gm.n - gm.kn + 1;
  gm.mo = gm.m - gm.km + 1;
  return gm;
}

// cols (patch x positions) for one batch item.
template <class T>
void im2col(const ConvGeom& gm, const T* x, T* cols) {
  const std::size_t P = gm.positions();
  std::size_t row = 0;
  for (std::size_t c = 0; c < gm.cin; ++c)
    for (std::size_t a = 0; a < gm.ks; ++a)
      for (std::size_t u = 0; u < gm.kn; ++u)
        for (std::size_t v = 0; v < gm.km; ++v, ++row) {
          T* dst = cols + row * P;
          for (std::size_t s = 0; s < gm.so; ++s)
            for (std::size_t r = 0; r < gm.no; ++r) {
              const T* src = x + ((c * gm.s + s + a) * gm.n + r + u) * gm.m + v;
              std::memcpy(dst, src, gm.mo * sizeof(T));
              dst += gm.mo;
            }
        }
}

template <class T>
void col2im_add(const ConvGeom& gm, const T* cols, T* dx) {
  const std::size_t P = gm.positions();
  std::size_t row = 0;
  for (std::size_t c = 0; c < gm.cin; ++c)
    for (std::size_t a = 0; a < gm.ks; ++a)
      for (std::size_t u = 0; u < gm.kn; ++u)
        for (std::size_t v = 0; v < gm.km; ++v, ++row) {
          const T* src = cols + row * P;
          for (std::size_t s = 0; s < gm.so; ++s)
            for (std::size_t r = 0; r < gm.no; ++r) {
              T* dst = dx + ((c * gm.s + s + a) * gm.n + r + u) * gm.m + v;
              for (std::size_t q = 0; q < gm.mo; ++q) dst[q] += src[q];
              src += gm.mo;
            }
        }
}

template <class T>
T dot(const T* a, const T* b, std::size_t n) {
  T acc{};
  for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

}  // namespace

template <class T>
Var linear(Graph<T>& g, Var x, Var w, Var b) {
  const auto& X = g.value(x);
  const auto& W = g.value(w);
  const auto& Bv = g.value(b);
  require(X.rank() == 2 && W.rank() == 2 && Bv.rank() == 1,
          "linear expects x: B x I, w: I x O, b: O; got " + shape_string(X.shape()) + ", " +
              shape_string(W.shape()) + ", " + shape_string(Bv.shape()));
  require(X.dim(1) == W.dim(0) && W.dim(1) == Bv.dim(0),
          "linear shape mismatch: " + shape_string(X.shape()) + " * " + shape_string(W.shape()) + " + " +
              shape_string(Bv.shape()));
  const std::size_t B = X.dim(0), I = X.dim(1), O = W.dim(1);
  Tensor<T> out({B, O});
  MapMat<T> Y(out.data(), B, O);
  Y.noalias() = CMapMat<T>(X.data(), B, I) * CMapMat<T>(W.data(), I, O);
  for (std::size_t r = 0; r < B; ++r)
    for (std::size_t o = 0; o < O; ++o) out[r * O + o] += Bv[o];

  return g.record(std::move(out), {x, w, b}, [x, w, b, B, I, O](Graph<T>& g, const Tensor<T>& dy) {
    CMapMat<T> dY(dy.data(), B, O);
    if (auto* dx = g.grad_buffer(x)) {
      MapMat<T>(dx->data(), B, I).noalias() += dY * CMapMat<T>(g.value(w).data(), I, O).transpose();
    }
    if (auto* dw = g.grad_buffer(w)) {
      MapMat<T>(dw->data(), I, O).noalias() += CMapMat<T>(g.value(x).data(), B, I).transpose() * dY;
    }
    if (auto* db = g.grad_buffer(b)) {
      for (std::size_t r = 0; r < B; ++r)
        for (std::size_t o = 0; o < O; ++o) (*db)[o] += dy[r * O + o];
    }
  });
}

template <class T>
Var conv3d(Graph<T>& g, Var x, Var w, Var b) {
  const ConvGeom gm = conv_geom(g.value(x).shape(), g.value(w).shape(), g.value(b).shape());
  const std::size_t K = gm.patch(), P = gm.positions();
  Tensor<T> out({gm.batch, gm.cout, gm.so, gm.no, gm.mo});
  std::vector<T> cols(K * P);
  {
    const auto& X = g.value(x);
    const auto& Bv = g.value(b);
    CMapMat<T> Wm(g.value(w).data(), gm.cout, K);
    for (std::size_t i = 0; i < gm.batch; ++i) {
      im2col(gm, X.data() + i * gm.in_item(), cols.data());
      MapMat<T> Y(out.data() + i * gm.cout * P, gm.cout, P);
      Y.noalias() = Wm * CMapMat<T>(cols.data(), K, P);
      for (std::size_t c = 0; c < gm.cout; ++c) Y.row(c).array() += Bv[c];
    }
  }

  return g.record(std::move(out), {x, w, b}, [x, w, b, gm](Graph<T>& g, const Tensor<T>& dy) {
    const std::size_t K = gm.patch(), P = gm.positions();
    auto* dx = g.grad_buffer(x);
    auto* dw = g.grad_buffer(w);
    auto* db = g.grad_buffer(b);
    const auto& X = g.value(x);
    CMapMat<T> Wm(g.value(w).data(), gm.cout, K);
    std::vector<T> cols(K * P);
    for (std::size_t i = 0; i < gm.batch; ++i) {
      CMapMat<T> dY(dy.data() + i * gm.cout * P, gm.cout, P);
      if (dw) {
        im2col(gm, X.data() + i * gm.in_item(), cols.data());
        MapMat<T>(dw->data(), gm.cout, K).noalias() += dY * CMapMat<T>(cols.data(), K, P).transpose();
      }
      if (db) {
        for (std::size_t c = 0; c < gm.cout; ++c) {
          T acc{};
          for (std::size_t q = 0; q < P; ++q) acc += dY(c, q);
          (*db)[c] += acc;
        }
      }
      if (dx) {
        MapMat<T>(cols.data(), K, P).noalias() = Wm.transpose() * dY;
        col2im_add(gm, cols.data(), dx->data() + i * gm.in_item());
      }
    }
  });
}

template <class T>
Var conv2d(Graph<T>& g, Var x, Var w, Var b) {
  const auto& xs = g.value(x).shape();
  const auto& ws = g.value(w).shape();
  require(xs.size() == 4, "conv2d input must be B x C x H x W, got " + shape_string(xs));
  require(ws.size() == 4, "conv2d kernel must be Cout x Cin x kH x kW, got " + shape_string(ws));
  const Shape x5{xs[0], xs[1], 1, xs[2], xs[3]};
  const Shape w5{ws[0], ws[1], 1, ws[2], ws[3]};
  Var y = conv3d(g, reshape(g, x, x5), reshape(g, w, w5), b);
  const auto& ys = g.value(y).shape();
  return reshape(g, y, {ys[0], ys[1], ys[3], ys[4]});
}

template <class T>
Var relu(Graph<T>& g, Var x) {
  Tensor<T> out = g.value(x);
  for (auto& v : out.vec()) v = v > T{0} ? v : T{0};
  return g.record(std::move(out), {x}, [x](Graph<T>& g, const Tensor<T>& dy) {
    auto* dx = g.grad_buffer(x);
    const auto& X = g.value(x);
    for (std::size_t k = 0; k < dy.size(); ++k)
      if (X[k] > T{0}) (*dx)[k] += dy[k];
  });
}

template <class T>
Var reshape(Graph<T>& g, Var x, Shape shape) {
  Tensor<T> out = g.value(x).reshaped(std::move(shape));
  return g.record(std::move(out), {x}, [x](Graph<T>& g, const Tensor<T>& dy) {
    auto* dx = g.grad_buffer(x);
    for (std::size_t k = 0; k < dy.size(); ++k) (*dx)[k] += dy[k];
  });
}

template <class T>
Var slice_cols(Graph<T>& g, Var x, std::size_t begin, std::size_t end) {
  const auto& X = g.value(x);
  require(X.rank() == 2 && begin <= end && end <= X.dim(1),
          "slice_cols [" + std::to_string(begin) + "," + std::to_string(end) + ") out of range for " +
              shape_string(X.shape()));
  const std::size_t B = X.dim(0), F = X.dim(1), W = end - begin;
  Tensor<T> out({B, W});
  for (std::size_t r = 0; r < B; ++r)
    for (std::size_t c = 0; c < W; ++c) out[r * W + c] = X[r * F + begin + c];
  return g.record(std::move(out), {x}, [x, B, F, W, begin](Graph<T>& g, const Tensor<T>& dy) {
    auto* dx = g.grad_buffer(x);
    for (std::size_t r = 0; r < B; ++r)
      for (std::size_t c = 0; c < W; ++c) (*dx)[r * F + begin + c] += dy[r * W + c];
  });
}

template <class T>
Var concat_cols(Graph<T>& g, const std::vector<Var>& parts) {
  require(!parts.empty(), "concat_cols needs at least one part");
  const std::size_t B = g.value(parts[0]).dim(0);
  std::vector<std::size_t> widths;
  std::size_t F = 0;
  for (Var p : parts) {
    const auto& v = g.value(p);
    require(v.rank() == 2 && v.dim(0) == B, "concat_cols: part shape " + shape_string(v.shape()));
    widths.push_back(v.dim(1));
    F += v.dim(1);
  }
  Tensor<T> out({B, F});
  std::size_t off = 0;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    const auto& v = g.value(parts[i]);
    for (std::size_t r = 0; r < B; ++r)
      for (std::size_t c = 0; c < widths[i]; ++c) out[r * F + off + c] = v[r * widths[i] + c];
    off += widths[i];
  }
  return g.record(std::move(out), std::span<const Var>(parts), [parts, widths, B, F](Graph<T>& g, const Tensor<T>& dy) {
    std::size_t off = 0;
    for (std::size_t i = 0; i < parts.size(); ++i) {
      if (auto* dp = g.grad_buffer(parts[i]))
        for (std::size_t r = 0; r < B; ++r)
          for (std::size_t c = 0; c < widths[i]; ++c) (*dp)[r * widths[i] + c] += dy[r * F + off + c];
      off += widths[i];
    }
  });
}

template <class T>
Var add(Graph<T>& g, Var a, Var b) {
  const auto& A = g.value(a);
  const auto& Bv = g.value(b);
  require(A.size() == Bv.size(), "add shape mismatch " + shape_string(A.shape()) + " vs " + shape_string(Bv.shape()));
  Tensor<T> out = A;
  for (std::size_t k = 0; k < out.size(); ++k) out[k] += Bv[k];
  return g.record(std::move(out), {a, b}, [a, b](Graph<T>& g, const Tensor<T>& dy) {
    add_into(g.grad_buffer(a), dy);
    add_into(g.grad_buffer(b), dy);
  });
}

template <class T>
Var scale(Graph<T>& g, Var a, T s) {
  Tensor<T> out = g.value(a);
  for (auto& v : out.vec()) v *= s;
  return g.record(std::move(out), {a}, [a, s](Graph<T>& g, const Tensor<T>& dy) {
    auto* da = g.grad_buffer(a);
    for (std::size_t k = 0; k < dy.size(); ++k) (*da)[k] += s * dy[k];
  });
}

template <class T>
Var mul_const(Graph<T>& g, Var a, const Tensor<T>& m) {
  const auto& A = g.value(a);
  require(A.size() == m.size(), "mul_const shape mismatch");
  Tensor<T> out = A;
  for (std::size_t k = 0; k < out.size(); ++k) out[k] *= m[k];
  return g.record(std::move(out), {a}, [a, m](Graph<T>& g, const Tensor<T>& dy) {
    auto* da = g.grad_buffer(a);
    for (std::size_t k = 0; k < dy.size(); ++k) (*da)[k] += m[k] * dy[k];
  });
}

template <class T>
Var sum(Graph<T>& g, Var a) {
  const auto& A = g.value(a);
  T acc{};
  for (T v : A.vec()) acc += v;
  return g.record(Tensor<T>::scalar(acc), {a}, [a](Graph<T>& g, const Tensor<T>& dy) {
    auto* da = g.grad_buffer(a);
    for (auto& v : da->vec()) v += dy[0];
  });
}

template <class T>
Var mean(Graph<T>& g, Var a) {
  const auto n = static_cast<T>(g.value(a).size());
  return scale(g, sum(g, a), T{1} / n);
}

template <class T>
Var gaussian_sample(Graph<T>& g, Var mu, Var log_sigma, const Tensor<T>& noise) {
  const auto& M = g.value(mu);
  const auto& L = g.value(log_sigma);
  require(M.shape() == L.shape() && M.size() == noise.size(), "gaussian_sample: mu, log_sigma, noise shapes differ");
  Tensor<T> z = M;
  for (std::size_t k = 0; k < z.size(); ++k) z[k] += std::exp(L[k]) * noise[k];
  return g.record(std::move(z), {mu, log_sigma}, [mu, log_sigma, noise](Graph<T>& g, const Tensor<T>& dz) {
    add_into(g.grad_buffer(mu), dz);
    if (auto* dl = g.grad_buffer(log_sigma)) {
      const auto& L = g.value(log_sigma);
      for (std::size_t k = 0; k < dz.size(); ++k) (*dl)[k] += dz[k] * std::exp(L[k]) * noise[k];
    }
  });
}

template <class T>
Var kl_gaussian(Graph<T>& g, Var mu, Var log_sigma) {
  const auto& M = g.value(mu);
  const auto& L = g.value(log_sigma);
  require(M.rank() == 2 && M.shape() == L.shape(), "kl_gaussian expects matching B x k inputs");
  const std::size_t B = M.dim(0), K = M.dim(1);
  Tensor<T> out({B});
  for (std::size_t r = 0; r < B; ++r) {
    T acc{};
    for (std::size_t k = 0; k < K; ++k) {
      const T m = M[r * K + k], l = L[r * K + k];
      acc += m * m + std::exp(T{2} * l) - T{1} - T{2} * l;
    }
    out[r] = acc / T{2};
  }
  return g.record(std::move(out), {mu, log_sigma}, [mu, log_sigma, B, K](Graph<T>& g, const Tensor<T>& dy) {
    const auto& M = g.value(mu);
    const auto& L = g.value(log_sigma);
    auto* dm = g.grad_buffer(mu);
    auto* dl = g.grad_buffer(log_sigma);
    for (std::size_t r = 0; r < B; ++r)
      for (std::size_t k = 0; k < K; ++k) {
        const std::size_t i = r * K + k;
        if (dm) (*dm)[i] += dy[r] * M[i];
        if (dl) (*dl)[i] += dy[r] * (std::exp(T{2} * L[i]) - T{1});
      }
  });
}

namespace {

template <class T>
void softmax_row(const T* in, T* out, std::size_t K) {
  T mx = in[0];
  for (std::size_t k = 1; k < K; ++k) mx = std::max(mx, in[k]);
  T z{};
  for (std::size_t k = 0; k < K; ++k) z += (out[k] = std::exp(in[k] - mx));
  for (std::size_t k = 0; k < K; ++k) out[k] /= z;
}

}  // namespace

template <class T>
Var gumbel_softmax(Graph<T>& g, Var logits, const Tensor<T>& noise, T tau) {
  if (!(tau > T{0})) throw ConfigError("gumbel-softmax temperature must be > 0");
  const auto& Lg = g.value(logits);
  require(Lg.rank() == 2 && Lg.size() == noise.size(), "gumbel_softmax expects B x K logits and matching noise");
  const std::size_t B = Lg.dim(0), K = Lg.dim(1);
  Tensor<T> y({B, K});
  std::vector<T> h(K);
  for (std::size_t r = 0; r < B; ++r) {
    // softmax is shift invariant, so log softmax(logits) may be replaced by logits
    for (std::size_t k = 0; k < K; ++k) h[k] = (noise[r * K + k] + Lg[r * K + k]) / tau;
    softmax_row(h.data(), y.data() + r * K, K);
  }
  Tensor<T> ycopy = y;
  return g.record(std::move(y), {logits}, [logits, ycopy, B, K, tau](Graph<T>& g, const Tensor<T>& dy) {
    auto* dl = g.grad_buffer(logits);
    for (std::size_t r = 0; r < B; ++r) {
      const T* yr = ycopy.data() + r * K;
      const T* dyr = dy.data() + r * K;
      const T s = dot(yr, dyr, K);
      for (std::size_t k = 0; k < K; ++k) (*dl)[r * K + k] += yr[k] * (dyr[k] - s) / tau;
    }
  });
}

template <class T>
Var kl_categorical_uniform(Graph<T>& g, Var logits) {
  const auto& Lg = g.value(logits);
  require(Lg.rank() == 2, "kl_categorical_uniform expects B x K logits");
  const std::size_t B = Lg.dim(0), K = Lg.dim(1);
  Tensor<T> probs({B, K});
  Tensor<T> out({B});
  const T logK = std::log(static_cast<T>(K));
  for (std::size_t r = 0; r < B; ++r) {
    const T* lr = Lg.data() + r * K;
    T* pr = probs.data() + r * K;
    softmax_row(lr, pr, K);
    T mx = lr[0];
    for (std::size_t k = 1; k < K; ++k) mx = std::max(mx, lr[k]);
    T z{};
    for (std::size_t k = 0; k < K; ++k) z += std::exp(lr[k] - mx);
    const T lse = mx + std::log(z);
    T acc{};
    for (std::size_t k = 0; k < K; ++k) acc += pr[k] * (lr[k] - lse);
    out[r] = acc + logK;
  }
  Tensor<T> kl = out;
  return g.record(std::move(out), {logits}, [logits, probs, kl, B, K, logK](Graph<T>& g, const Tensor<T>& dy) {
    auto* dl = g.grad_buffer(logits);
    const auto& Lg = g.value(logits);
    for (std::size_t r = 0; r < B; ++r) {
      const T* lr = Lg.data() + r * K;
      const T* pr = probs.data() + r * K;
      T mx = lr[0];
      for (std::size_t k = 1; k < K; ++k) mx = std::max(mx, lr[k]);
      T z{};
      for (std::size_t k = 0; k < K; ++k) z += std::exp(lr[k] - mx);
      const T lse = mx + std::log(z);
      // d/dl_i sum_j p_j log(p_j K) = p_i (log(p_i K) - KL)
      for (std::size_t k = 0; k < K; ++k)
        (*dl)[r * K + k] += dy[r] * pr[k] * (lr[k] - lse + logK - kl[r]);
    }
  });
}

template <class T>
Var max_margin(Graph<T>& g, Var pred, std::span<const AnswerSet<T>> answers) {
  const auto& P = g.value(pred);
  require(P.rank() == 2 && P.dim(0) == answers.size(), "max_margin: prediction rows must match answer sets");
  const std::size_t B = P.dim(0), D = P.dim(1);
  Tensor<T> out({B});
  // per row: d loss / d pred
  Tensor<T> dpred({B, D});
  for (std::size_t r = 0; r < B; ++r) {
    const auto& A = answers[r].embeddings;
    require(A.rank() == 2 && A.dim(1) == D && A.dim(0) >= 2 && answers[r].correct < A.dim(0),
            "max_margin: answer set shape " + shape_string(A.shape()));
    const T* p = P.data() + r * D;
    const T pn = std::sqrt(dot(p, p, D));
    if (!(pn > T{0})) throw NumericError("scoring error: predicted embedding has zero norm");
    const std::size_t n_ans = A.dim(0);
    std::vector<T> score(n_ans), norm(n_ans);
    for (std::size_t j = 0; j < n_ans; ++j) {
      const T* a = A.data() + j * D;
      norm[j] = std::sqrt(dot(a, a, D));
      if (!(norm[j] > T{0})) throw NumericError("scoring error: answer embedding has zero norm");
      score[j] = dot(a, p, D) / (norm[j] * pn);
    }
    const std::size_t c = answers[r].correct;
    // d cos(a, p) / dp = a / (|a||p|) - cos(a, p) p / |p|^2
    auto add_dcos = [&](std::size_t j, T sign) {
      const T* a = A.data() + j * D;
      T* d = dpred.data() + r * D;
      const T ca = sign / (norm[j] * pn);
      const T cp = sign * score[j] / (pn * pn);
      for (std::size_t k = 0; k < D; ++k) d[k] += ca * a[k] - cp * p[k];
    };
    T loss{};
    for (std::size_t j = 0; j < n_ans; ++j) {
      if (j == c) continue;
      const T term = T{1} - score[c] + score[j];
      if (term > T{0}) {
        loss += term;
        add_dcos(j, T{1});
        add_dcos(c, T{-1});
      }
    }
    out[r] = loss;
  }
  return g.record(std::move(out), {pred}, [pred, dpred, B, D](Graph<T>& g, const Tensor<T>& dy) {
    auto* dp = g.grad_buffer(pred);
    for (std::size_t r = 0; r < B; ++r)
      for (std::size_t k = 0; k < D; ++k) (*dp)[r * D + k] += dy[r] * dpred[r * D + k];
  });
}

#define BLM_INSTANTIATE_OPS(T)                                                        \
  template Var linear<T>(Graph<T>&, Var, Var, Var);                                   \
  template Var conv3d<T>(Graph<T>&, Var, Var, Var);                                   \
  template Var conv2d<T>(Graph<T>&, Var, Var, Var);                                   \
  template Var relu<T>(Graph<T>&, Var);                                               \
  template Var reshape<T>(Graph<T>&, Var, Shape);                                     \
  template Var slice_cols<T>(Graph<T>&, Var, std::size_t, std::size_t);               \
  template Var concat_cols<T>(Graph<T>&, const std::vector<Var>&);                    \
  template Var add<T>(Graph<T>&, Var, Var);                                           \
  template Var scale<T>(Graph<T>&, Var, T);                                           \
  template Var mul_const<T>(Graph<T>&, Var, const Tensor<T>&);                        \
  template Var sum<T>(Graph<T>&, Var);                                                \
  template Var mean<T>(Graph<T>&, Var);                                               \
  template Var gaussian_sample<T>(Graph<T>&, Var, Var, const Tensor<T>&);             \
  template Var kl_gaussian<T>(Graph<T>&, Var, Var);                                   \
  template Var gumbel_softmax<T>(Graph<T>&, Var, const Tensor<T>&, T);                \
  template Var kl_categorical_uniform<T>(Graph<T>&, Var);                             \
  template Var max_margin<T>(Graph<T>&, Var, std::span<const AnswerSet<T>>);

BLM_INSTANTIATE_OPS(float)
BLM_INSTANTIATE_OPS(double)

#undef BLM_INSTANTIATE_OPS

}  // namespace ops
}  // namespace blm
