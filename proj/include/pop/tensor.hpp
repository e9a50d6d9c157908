#pragma once

#include <cblas.h>

#include <cmath>
#include <string>
#include <vector>

#include <json.hpp>

#include "pop/blas_boot.hpp"
#include "pop/common.hpp"

namespace pop {

// Row-major f64 matrix. Everything in the policy/trainer path is 2-d; vectors
// are 1xN or Nx1 as convenient.
struct Mat {
  i64 r = 0, c = 0;
  std::vector<double> v;

  Mat() = default;
  Mat(i64 r_, i64 c_) : r(r_), c(c_), v(static_cast<size_t>(r_ * c_), 0.0) {}

  double& at(i64 i, i64 j) { return v[static_cast<size_t>(i * c + j)]; }
  double at(i64 i, i64 j) const { return v[static_cast<size_t>(i * c + j)]; }
  double* row(i64 i) { return v.data() + i * c; }
  const double* row(i64 i) const { return v.data() + i * c; }
  i64 size() const { return r * c; }
  void zero() { std::fill(v.begin(), v.end(), 0.0); }
  bool same_shape(const Mat& o) const { return r == o.r && c == o.c; }
};

// Learnable tensor: value, accumulated gradient, Adam moments. `group`
// selects the optimizer group (separate lr/warmup for actor vs critic).
struct Param {
  std::string name;
  int group = 0;
  Mat w, g, m, v;

  Param() = default;
  Param(std::string n, i64 r, i64 c, int grp = 0)
      : name(std::move(n)), group(grp), w(r, c), g(r, c), m(r, c), v(r, c) {}

  i64 size() const { return w.size(); }
};

namespace detail {

// OpenBLAS partitions k into panels of ~176 on this target and the panel
// split changes with m, so results for a row block would depend on how many
// other rows share the call. Chunking k at 128 keeps every call inside one
// panel, which makes row results independent of batch composition (verified
// by the batched-vs-solo bitwise test).
inline constexpr i64 kGemmChunk = 128;

inline void gemm(bool ta, bool tb, i64 m, i64 n, i64 k, double alpha, const double* a, i64 lda,
                 const double* b, i64 ldb, double beta, double* c, i64 ldc) {
  if (n == 1) {
    // BLAS routes n == 1 through a gemv-style kernel whose splitting depends
    // on m, which breaks batched-vs-solo bitwise equality for the scalar
    // heads. A sequential dot per row is row-local and cheap at these sizes.
    for (i64 i = 0; i < m; i++) {
      double acc = 0.0;
      for (i64 kk = 0; kk < k; kk++) {
        double av = ta ? a[kk * lda + i] : a[i * lda + kk];
        double bv = tb ? b[kk] : b[kk * ldb];
        acc += av * bv;
      }
      c[i * ldc] = beta == 0.0 ? alpha * acc : alpha * acc + beta * c[i * ldc];
    }
    return;
  }
  for (i64 k0 = 0; k0 < k; k0 += kGemmChunk) {
    i64 kc = std::min(kGemmChunk, k - k0);
    const double* ac = ta ? a + k0 * lda : a + k0;
    const double* bc = tb ? b + k0 : b + k0 * ldb;
    cblas_dgemm(CblasRowMajor, ta ? CblasTrans : CblasNoTrans, tb ? CblasTrans : CblasNoTrans,
                static_cast<int>(m), static_cast<int>(n), static_cast<int>(kc), alpha, ac,
                static_cast<int>(lda), bc, static_cast<int>(ldb), k0 == 0 ? beta : 1.0, c,
                static_cast<int>(ldc));
  }
}

}  // namespace detail

// Reverse-mode tape over whole-matrix ops. The graph is rebuilt every forward
// pass (shapes change with sequence length); backward() runs once per build.
// Gradients seeded by the caller on output nodes; param gradients accumulate
// into Param::g so minibatches can be split into memory-bounded chunks.
class Tape {
 public:
  enum class Op { Input, ParamRef, Linear, LayerNorm, Gelu, Tanh, Add, Attention, GatherRows };

  struct Node {
    Op op;
    int a = -1, b = -1, c = -1;
    Mat val, grad;
    std::vector<double> aux;   // layernorm stats / attention probs
    std::vector<i64> iaux;     // seq offsets / gather indices
    int heads = 0;
    bool causal = false;
    Param* pref = nullptr;
  };

  bool grad_enabled = true;

  void reset() { nodes_.clear(); }
  size_t size() const { return nodes_.size(); }

  Mat& val(int id) { return nodes_[static_cast<size_t>(id)].val; }

  Mat& grad(int id) {
    Node& n = nodes_[static_cast<size_t>(id)];
    if (n.grad.size() == 0) n.grad = Mat(n.val.r, n.val.c);
    return n.grad;
  }

  int input(Mat m) {
    Node n;
    n.op = Op::Input;
    n.val = std::move(m);
    return push(std::move(n));
  }

  int param(Param& p) {
    Node n;
    n.op = Op::ParamRef;
    n.val = p.w;
    n.pref = &p;
    return push(std::move(n));
  }

  // y = x @ W + bias (bias broadcast over rows); x [N,k], W [k,n], bias [1,n]
  int linear(int x, int W, int bias) {
    const Mat& X = val(x);
    const Mat& Wm = val(W);
    const Mat& B = val(bias);
    POP_CHECK(X.c == Wm.r && B.r == 1 && B.c == Wm.c, "linear shape mismatch");
    Node n;
    n.op = Op::Linear;
    n.a = x;
    n.b = W;
    n.c = bias;
    n.val = Mat(X.r, Wm.c);
    if (X.r > 0)
      detail::gemm(false, false, X.r, Wm.c, X.c, 1.0, X.v.data(), X.c, Wm.v.data(), Wm.c, 0.0,
                   n.val.v.data(), Wm.c);
    for (i64 i = 0; i < n.val.r; i++) {
      double* out = n.val.row(i);
      for (i64 j = 0; j < n.val.c; j++) out[j] += B.v[static_cast<size_t>(j)];
    }
    return push(std::move(n));
  }

  // row-wise layernorm with affine params g [1,C], b [1,C]
  int layernorm(int x, int gamma, int beta) {
    const Mat& X = val(x);
    const Mat& G = val(gamma);
    const Mat& Bt = val(beta);
    POP_CHECK(G.r == 1 && G.c == X.c && Bt.r == 1 && Bt.c == X.c, "layernorm shape mismatch");
    Node n;
    n.op = Op::LayerNorm;
    n.a = x;
    n.b = gamma;
    n.c = beta;
    n.val = Mat(X.r, X.c);
    n.aux.resize(static_cast<size_t>(2 * X.r));
    const double eps = 1e-5;
    const double inv = 1.0 / static_cast<double>(X.c);
    for (i64 i = 0; i < X.r; i++) {
      const double* xr = X.row(i);
      double mean = 0;
      for (i64 j = 0; j < X.c; j++) mean += xr[j];
      mean *= inv;
      double var = 0;
      for (i64 j = 0; j < X.c; j++) {
        double d = xr[j] - mean;
        var += d * d;
      }
      var *= inv;
      double rstd = 1.0 / std::sqrt(var + eps);
      n.aux[static_cast<size_t>(2 * i)] = mean;
      n.aux[static_cast<size_t>(2 * i + 1)] = rstd;
      double* yr = n.val.row(i);
      for (i64 j = 0; j < X.c; j++)
        yr[j] = (xr[j] - mean) * rstd * G.v[static_cast<size_t>(j)] + Bt.v[static_cast<size_t>(j)];
    }
    return push(std::move(n));
  }

  int gelu(int x) {
    const Mat& X = val(x);
    Node n;
    n.op = Op::Gelu;
    n.a = x;
    n.val = Mat(X.r, X.c);
    const double inv_sqrt2 = 0.70710678118654752440;
    for (i64 i = 0; i < X.size(); i++) {
      double xv = X.v[static_cast<size_t>(i)];
      n.val.v[static_cast<size_t>(i)] = 0.5 * xv * (1.0 + std::erf(xv * inv_sqrt2));
    }
    return push(std::move(n));
  }

  int tanh_(int x) {
    const Mat& X = val(x);
    Node n;
    n.op = Op::Tanh;
    n.a = x;
    n.val = Mat(X.r, X.c);
    for (i64 i = 0; i < X.size(); i++)
      n.val.v[static_cast<size_t>(i)] = std::tanh(X.v[static_cast<size_t>(i)]);
    return push(std::move(n));
  }

  int add(int x, int y) {
    const Mat& X = val(x);
    const Mat& Y = val(y);
    POP_CHECK(X.same_shape(Y), "add shape mismatch");
    Node n;
    n.op = Op::Add;
    n.a = x;
    n.b = y;
    n.val = Mat(X.r, X.c);
    for (i64 i = 0; i < X.size(); i++)
      n.val.v[static_cast<size_t>(i)] = X.v[static_cast<size_t>(i)] + Y.v[static_cast<size_t>(i)];
    return push(std::move(n));
  }

  // Multi-head softmax attention over packed sequences. q/k/v are [N, H*dh];
  // offsets (size nseq+1) delimit sequences in the row dimension. Attention is
  // bidirectional unless causal is set.
  int attention(int q, int k, int v, std::vector<i64> offsets, int heads, bool causal = false) {
    const Mat& Q = val(q);
    const Mat& K = val(k);
    const Mat& V = val(v);
    POP_CHECK(Q.same_shape(K) && Q.same_shape(V), "attention q/k/v shape mismatch");
    POP_CHECK(heads > 0 && Q.c % heads == 0, "attention head split mismatch");
    POP_CHECK(!offsets.empty() && offsets.front() == 0 && offsets.back() == Q.r,
              "attention offsets malformed");
    const i64 H = heads;
    const i64 dh = Q.c / H;
    const i64 C = Q.c;
    const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
    const i64 nseq = static_cast<i64>(offsets.size()) - 1;

    Node n;
    n.op = Op::Attention;
    n.a = q;
    n.b = k;
    n.c = v;
    n.heads = heads;
    n.causal = causal;
    n.iaux = std::move(offsets);
    n.val = Mat(Q.r, C);
    if (grad_enabled) {
      size_t tot = 0;
      for (i64 s = 0; s < nseq; s++) {
        i64 L = n.iaux[static_cast<size_t>(s + 1)] - n.iaux[static_cast<size_t>(s)];
        tot += static_cast<size_t>(L * L * H);
      }
      n.aux.resize(tot);
    }

    std::vector<double> S;
    size_t aux_pos = 0;
    for (i64 s = 0; s < nseq; s++) {
      const i64 o = n.iaux[static_cast<size_t>(s)];
      const i64 L = n.iaux[static_cast<size_t>(s + 1)] - o;
      POP_CHECK(L > 0, "attention: empty sequence");
      S.resize(static_cast<size_t>(L * L));
      for (i64 h = 0; h < H; h++) {
        const double* Qs = Q.row(o) + h * dh;
        const double* Ks = K.row(o) + h * dh;
        const double* Vs = V.row(o) + h * dh;
        detail::gemm(false, true, L, L, dh, scale, Qs, C, Ks, C, 0.0, S.data(), L);
        for (i64 i = 0; i < L; i++) {
          double* Si = S.data() + i * L;
          i64 lim = causal ? i + 1 : L;
          double mx = Si[0];
          for (i64 j = 1; j < lim; j++) mx = std::max(mx, Si[j]);
          double sum = 0;
          for (i64 j = 0; j < lim; j++) {
            Si[j] = std::exp(Si[j] - mx);
            sum += Si[j];
          }
          double rs = 1.0 / sum;
          for (i64 j = 0; j < lim; j++) Si[j] *= rs;
          for (i64 j = lim; j < L; j++) Si[j] = 0.0;
        }
        if (grad_enabled) {
          std::copy(S.begin(), S.end(), n.aux.begin() + static_cast<std::ptrdiff_t>(aux_pos));
          aux_pos += static_cast<size_t>(L * L);
        }
        detail::gemm(false, false, L, dh, L, 1.0, S.data(), L, Vs, C, 0.0, n.val.row(o) + h * dh,
                     C);
      }
    }
    return push(std::move(n));
  }

  // out[i, :] = x[rows[i], :]
  int gather_rows(int x, std::vector<i64> rows) {
    const Mat& X = val(x);
    Node n;
    n.op = Op::GatherRows;
    n.a = x;
    n.iaux = std::move(rows);
    n.val = Mat(static_cast<i64>(n.iaux.size()), X.c);
    for (i64 i = 0; i < n.val.r; i++) {
      i64 src = n.iaux[static_cast<size_t>(i)];
      POP_CHECK(src >= 0 && src < X.r, "gather_rows index out of range");
      std::copy(X.row(src), X.row(src) + X.c, n.val.row(i));
    }
    return push(std::move(n));
  }

  // Reverse sweep. Caller seeds grad() on outputs first. Param gradients are
  // added into Param::g (not overwritten).
  void backward() {
    POP_CHECK(grad_enabled, "backward on a no-grad tape");
    for (i64 id = static_cast<i64>(nodes_.size()) - 1; id >= 0; id--) {
      Node& n = nodes_[static_cast<size_t>(id)];
      if (n.grad.size() == 0) continue;  // nothing flowed here
      switch (n.op) {
        case Op::Input:
          break;
        case Op::ParamRef:
          for (i64 i = 0; i < n.grad.size(); i++)
            n.pref->g.v[static_cast<size_t>(i)] += n.grad.v[static_cast<size_t>(i)];
          break;
        case Op::Linear: {
          const Mat& X = val(n.a);
          const Mat& W = val(n.b);
          Mat& dX = grad(n.a);
          Mat& dW = grad(n.b);
          Mat& dB = grad(n.c);
          if (X.r > 0) {
            detail::gemm(false, true, X.r, X.c, W.c, 1.0, n.grad.v.data(), W.c, W.v.data(), W.c,
                         1.0, dX.v.data(), X.c);
            detail::gemm(true, false, X.c, W.c, X.r, 1.0, X.v.data(), X.c, n.grad.v.data(), W.c,
                         1.0, dW.v.data(), W.c);
          }
          for (i64 i = 0; i < n.grad.r; i++) {
            const double* gr = n.grad.row(i);
            for (i64 j = 0; j < n.grad.c; j++) dB.v[static_cast<size_t>(j)] += gr[j];
          }
          break;
        }
        case Op::LayerNorm: {
          const Mat& X = val(n.a);
          const Mat& G = val(n.b);
          Mat& dX = grad(n.a);
          Mat& dG = grad(n.b);
          Mat& dBt = grad(n.c);
          const double invc = 1.0 / static_cast<double>(X.c);
          for (i64 i = 0; i < X.r; i++) {
            const double mean = n.aux[static_cast<size_t>(2 * i)];
            const double rstd = n.aux[static_cast<size_t>(2 * i + 1)];
            const double* xr = X.row(i);
            const double* dy = n.grad.row(i);
            double* dx = dX.row(i);
            double m1 = 0, m2 = 0;
            for (i64 j = 0; j < X.c; j++) {
              double xh = (xr[j] - mean) * rstd;
              double dxh = dy[j] * G.v[static_cast<size_t>(j)];
              m1 += dxh;
              m2 += dxh * xh;
              dG.v[static_cast<size_t>(j)] += dy[j] * xh;
              dBt.v[static_cast<size_t>(j)] += dy[j];
            }
            m1 *= invc;
            m2 *= invc;
            for (i64 j = 0; j < X.c; j++) {
              double xh = (xr[j] - mean) * rstd;
              double dxh = dy[j] * G.v[static_cast<size_t>(j)];
              dx[j] += rstd * (dxh - m1 - xh * m2);
            }
          }
          break;
        }
        case Op::Gelu: {
          const Mat& X = val(n.a);
          Mat& dX = grad(n.a);
          const double inv_sqrt2 = 0.70710678118654752440;
          const double inv_sqrt2pi = 0.39894228040143267794;
          for (i64 i = 0; i < X.size(); i++) {
            double xv = X.v[static_cast<size_t>(i)];
            double cdf = 0.5 * (1.0 + std::erf(xv * inv_sqrt2));
            double pdf = inv_sqrt2pi * std::exp(-0.5 * xv * xv);
            dX.v[static_cast<size_t>(i)] += n.grad.v[static_cast<size_t>(i)] * (cdf + xv * pdf);
          }
          break;
        }
        case Op::Tanh: {
          Mat& dX = grad(n.a);
          for (i64 i = 0; i < n.val.size(); i++) {
            double y = n.val.v[static_cast<size_t>(i)];
            dX.v[static_cast<size_t>(i)] += n.grad.v[static_cast<size_t>(i)] * (1.0 - y * y);
          }
          break;
        }
        case Op::Add: {
          Mat& dA = grad(n.a);
          Mat& dB2 = grad(n.b);
          for (i64 i = 0; i < n.grad.size(); i++) {
            dA.v[static_cast<size_t>(i)] += n.grad.v[static_cast<size_t>(i)];
            dB2.v[static_cast<size_t>(i)] += n.grad.v[static_cast<size_t>(i)];
          }
          break;
        }
        case Op::Attention: {
          const Mat& Q = val(n.a);
          const Mat& K = val(n.b);
          const Mat& V = val(n.c);
          Mat& dQ = grad(n.a);
          Mat& dK = grad(n.b);
          Mat& dV = grad(n.c);
          const i64 H = n.heads;
          const i64 C = Q.c;
          const i64 dh = C / H;
          const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
          const i64 nseq = static_cast<i64>(n.iaux.size()) - 1;
          std::vector<double> dP, dS;
          size_t aux_pos = 0;
          for (i64 s = 0; s < nseq; s++) {
            const i64 o = n.iaux[static_cast<size_t>(s)];
            const i64 L = n.iaux[static_cast<size_t>(s + 1)] - o;
            dP.resize(static_cast<size_t>(L * L));
            dS.resize(static_cast<size_t>(L * L));
            for (i64 h = 0; h < H; h++) {
              const double* P = n.aux.data() + aux_pos;
              aux_pos += static_cast<size_t>(L * L);
              const double* dO = n.grad.row(o) + h * dh;
              const double* Qs = Q.row(o) + h * dh;
              const double* Ks = K.row(o) + h * dh;
              const double* Vs = V.row(o) + h * dh;
              detail::gemm(true, false, L, dh, L, 1.0, P, L, dO, C, 1.0, dV.row(o) + h * dh, C);
              detail::gemm(false, true, L, L, dh, 1.0, dO, C, Vs, C, 0.0, dP.data(), L);
              for (i64 i = 0; i < L; i++) {
                const double* Pi = P + i * L;
                const double* dPi = dP.data() + i * L;
                double dot = 0;
                for (i64 j = 0; j < L; j++) dot += Pi[j] * dPi[j];
                double* dSi = dS.data() + i * L;
                for (i64 j = 0; j < L; j++) dSi[j] = Pi[j] * (dPi[j] - dot);
              }
              detail::gemm(false, false, L, dh, L, scale, dS.data(), L, Ks, C, 1.0,
                           dQ.row(o) + h * dh, C);
              detail::gemm(true, false, L, dh, L, scale, dS.data(), L, Qs, C, 1.0,
                           dK.row(o) + h * dh, C);
            }
          }
          break;
        }
        case Op::GatherRows: {
          Mat& dX = grad(n.a);
          for (i64 i = 0; i < n.val.r; i++) {
            double* dst = dX.row(n.iaux[static_cast<size_t>(i)]);
            const double* src = n.grad.row(i);
            for (i64 j = 0; j < n.val.c; j++) dst[j] += src[j];
          }
          break;
        }
      }
    }
  }

 private:
  int push(Node n) {
    nodes_.push_back(std::move(n));
    return static_cast<int>(nodes_.size()) - 1;
  }

  std::vector<Node> nodes_;
};

// AdamW with decoupled weight decay and per-group linear LR warmup.
class AdamW {
 public:
  struct Group {
    double lr = 1e-4;
    double weight_decay = 1e-4;
    i64 warmup = 0;
    i64 t = 0;
  };

  double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;

  AdamW(std::vector<Param*> params, std::vector<Group> groups)
      : params_(std::move(params)), groups_(std::move(groups)) {
    for (Param* p : params_)
      POP_CHECK(p->group >= 0 && p->group < static_cast<int>(groups_.size()),
                "param group out of range: " + p->name);
  }

  // Global norm over every param's grad; scales in place when above max_norm.
  // Returns the pre-clip norm.
  double clip_grad_norm(double max_norm) {
    double ss = 0;
    for (Param* p : params_)
      for (i64 i = 0; i < p->g.size(); i++) {
        double g = p->g.v[static_cast<size_t>(i)];
        ss += g * g;
      }
    double norm = std::sqrt(ss);
    if (norm > max_norm && norm > 0) {
      double sc = max_norm / norm;
      for (Param* p : params_)
        for (i64 i = 0; i < p->g.size(); i++) p->g.v[static_cast<size_t>(i)] *= sc;
    }
    return norm;
  }

  void step() {
    for (auto& g : groups_) g.t++;
    for (Param* p : params_) {
      Group& gr = groups_[static_cast<size_t>(p->group)];
      double warm = gr.warmup > 0 ? std::min(1.0, static_cast<double>(gr.t) /
                                                      static_cast<double>(gr.warmup))
                                  : 1.0;
      double lr = gr.lr * warm;
      double bc1 = 1.0 - std::pow(beta1, static_cast<double>(gr.t));
      double bc2 = 1.0 - std::pow(beta2, static_cast<double>(gr.t));
      for (i64 i = 0; i < p->size(); i++) {
        size_t k = static_cast<size_t>(i);
        double g = p->g.v[k];
        p->m.v[k] = beta1 * p->m.v[k] + (1.0 - beta1) * g;
        p->v.v[k] = beta2 * p->v.v[k] + (1.0 - beta2) * g * g;
        double mhat = p->m.v[k] / bc1;
        double vhat = p->v.v[k] / bc2;
        p->w.v[k] -= lr * (mhat / (std::sqrt(vhat) + eps) + gr.weight_decay * p->w.v[k]);
      }
    }
  }

  void zero_grad() {
    for (Param* p : params_) p->g.zero();
  }

  const std::vector<Group>& groups() const { return groups_; }
  std::vector<Group>& groups() { return groups_; }
  const std::vector<Param*>& params() const { return params_; }

 private:
  std::vector<Param*> params_;
  std::vector<Group> groups_;
};

// Checkpoint: magic, u64 json length, json header, then f64 little-endian
// blob holding [w, m, v] per param in header order. x86 only (little endian).
inline void save_checkpoint(const std::string& path, const std::vector<Param*>& params,
                            const AdamW* opt, const nlohmann::json& meta) {
  nlohmann::json j;
  j["schema"] = "pop_checkpoint_v1";
  j["version"] = kVersion;
  j["meta"] = meta;
  auto arr = nlohmann::json::array();
  for (const Param* p : params)
    arr.push_back({{"name", p->name}, {"rows", p->w.r}, {"cols", p->w.c}, {"group", p->group}});
  j["params"] = arr;
  if (opt) {
    auto gs = nlohmann::json::array();
    for (const auto& g : opt->groups())
      gs.push_back({{"lr", g.lr}, {"weight_decay", g.weight_decay}, {"warmup", g.warmup}, {"t", g.t}});
    j["adamw"] = gs;
  }
  std::string header = j.dump();
  std::string out = "POPCKPT1";
  u64 len = header.size();
  out.append(reinterpret_cast<const char*>(&len), 8);
  out += header;
  for (const Param* p : params) {
    out.append(reinterpret_cast<const char*>(p->w.v.data()), static_cast<size_t>(p->w.size()) * 8);
    out.append(reinterpret_cast<const char*>(p->m.v.data()), static_cast<size_t>(p->m.size()) * 8);
    out.append(reinterpret_cast<const char*>(p->v.v.data()), static_cast<size_t>(p->v.size()) * 8);
  }
  spit(path, out);
}

inline nlohmann::json load_checkpoint(const std::string& path, const std::vector<Param*>& params,
                                      AdamW* opt) {
  std::string blob = slurp(path);
  POP_CHECK(blob.size() > 16 && blob.compare(0, 8, "POPCKPT1") == 0, "bad checkpoint magic");
  u64 len;
  std::memcpy(&len, blob.data() + 8, 8);
  POP_CHECK(blob.size() >= 16 + len, "truncated checkpoint header");
  auto j = nlohmann::json::parse(blob.substr(16, len));
  POP_CHECK(j.at("schema") == "pop_checkpoint_v1", "unknown checkpoint schema");
  const auto& arr = j.at("params");
  POP_CHECK(arr.size() == params.size(), "checkpoint param count mismatch");
  size_t pos = 16 + len;
  for (size_t i = 0; i < params.size(); i++) {
    Param* p = params[i];
    const auto& e = arr[i];
    POP_CHECK(e.at("name") == p->name && e.at("rows") == p->w.r && e.at("cols") == p->w.c,
              "checkpoint param mismatch at " + p->name);
    size_t bytes = static_cast<size_t>(p->w.size()) * 8;
    POP_CHECK(blob.size() >= pos + 3 * bytes, "truncated checkpoint blob");
    std::memcpy(p->w.v.data(), blob.data() + pos, bytes);
    pos += bytes;
    std::memcpy(p->m.v.data(), blob.data() + pos, bytes);
    pos += bytes;
    std::memcpy(p->v.v.data(), blob.data() + pos, bytes);
    pos += bytes;
  }
  POP_CHECK(pos == blob.size(), "checkpoint size mismatch");
  if (opt && j.contains("adamw")) {
    const auto& gs = j.at("adamw");
    POP_CHECK(gs.size() == opt->groups().size(), "checkpoint optimizer group mismatch");
    for (size_t i = 0; i < gs.size(); i++) {
      opt->groups()[i].lr = gs[i].at("lr");
      opt->groups()[i].weight_decay = gs[i].at("weight_decay");
      opt->groups()[i].warmup = gs[i].at("warmup");
      opt->groups()[i].t = gs[i].at("t");
    }
  }
  return j.at("meta");
}

}  // namespace pop
