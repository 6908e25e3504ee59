#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "hatebench/error.hpp"
#include "hatebench/tensor.hpp"

namespace hatebench::nn {

// ---------------------------------------------------------------------------
// Embedding. Row 0 is padding: it is gathered like any row but never receives gradient.

template <class T>
Tensor<T> embedding_forward(const Tensor<T>& table, std::span<const int> ids) {
  if (table.rank() != 2) throw Error(ErrorCode::ShapeMismatch, "embedding table must be rank 2");
  const std::size_t V = table.dim(0), D = table.dim(1);
  Tensor<T> out({ids.size(), D});
  for (std::size_t t = 0; t < ids.size(); ++t) {
    if (ids[t] < 0 || static_cast<std::size_t>(ids[t]) >= V) {
      throw Error(ErrorCode::IdOutOfRange, "id " + std::to_string(ids[t]) + " with vocabulary " + std::to_string(V));
    }
    std::copy_n(table.row(static_cast<std::size_t>(ids[t])).begin(), D, out.row(t).begin());
  }
  return out;
}

template <class T>
void embedding_backward(std::span<const int> ids, const Tensor<T>& dout, Tensor<T>& dtable) {
  const std::size_t D = dtable.dim(1);
  require_shape(dout, {ids.size(), D}, "embedding upstream gradient");
  for (std::size_t t = 0; t < ids.size(); ++t) {
    if (ids[t] == 0) continue;
    auto dst = dtable.row(static_cast<std::size_t>(ids[t]));
    auto src = dout.row(t);
    for (std::size_t d = 0; d < D; ++d) dst[d] += src[d];
  }
}

// ---------------------------------------------------------------------------
// 1-D convolution over time, full width over features, no padding.
// out[t,f] = bias[f] + sum_{i<k, d<D} x[t+i,d] * filters[f,i,d]

namespace detail {

template <class T>
std::vector<char> zero_rows(const Tensor<T>& x) {
  std::vector<char> z(x.dim(0), 1);
  for (std::size_t t = 0; t < x.dim(0); ++t) {
    for (T v : x.row(t)) {
      if (v != T(0)) {
        z[t] = 0;
        break;
      }
    }
  }
  return z;
}

}  // namespace detail

template <class T>
Tensor<T> conv1d_forward(const Tensor<T>& x, const Tensor<T>& filters, const Tensor<T>& bias) {
  if (x.rank() != 2 || filters.rank() != 3 || bias.rank() != 1) {
    throw Error(ErrorCode::ShapeMismatch, "conv1d expects x[L,D], filters[F,k,D], bias[F]");
  }
  const std::size_t L = x.dim(0), D = x.dim(1);
  const std::size_t F = filters.dim(0), k = filters.dim(1);
  if (filters.dim(2) != D || bias.dim(0) != F) {
    throw Error(ErrorCode::ShapeMismatch, "conv1d: x " + shape_string(x.shape()) + ", filters " +
                                              shape_string(filters.shape()) + ", bias " + shape_string(bias.shape()));
  }
  if (k == 0 || L < k) {
    throw Error(ErrorCode::ShapeMismatch, "conv1d: sequence length " + std::to_string(L) + " < filter size " + std::to_string(k));
  }
  const std::size_t T_out = L - k + 1;
  const auto zero = detail::zero_rows(x);
  Tensor<T> out({T_out, F});
  const T* xd = x.data().data();
  const T* wd = filters.data().data();
  for (std::size_t t = 0; t < T_out; ++t) {
    bool all_zero = true;
    for (std::size_t i = 0; i < k && all_zero; ++i) all_zero = zero[t + i] != 0;
    for (std::size_t f = 0; f < F; ++f) {
      T acc = bias[f];
      if (!all_zero) {
        // the window x[t..t+k) is contiguous and so is filter f
        const T* xw = xd + t * D;
        const T* ww = wd + f * k * D;
        const std::size_t n = k * D;
        T s = T(0);
        for (std::size_t j = 0; j < n; ++j) s += xw[j] * ww[j];
        acc += s;
      }
      out(t, f) = acc;
    }
  }
  return out;
}

/// Accumulates into dfilters/dbias and, when non-null, dx. Zero upstream entries are skipped.
template <class T>
void conv1d_backward(const Tensor<T>& x, const Tensor<T>& filters, const Tensor<T>& dout, Tensor<T>* dx,
                     Tensor<T>& dfilters, Tensor<T>& dbias) {
  const std::size_t D = x.dim(1);
  const std::size_t F = filters.dim(0), k = filters.dim(1);
  const std::size_t T_out = x.dim(0) - k + 1;
  require_shape(dout, {T_out, F}, "conv1d upstream gradient");
  if (dx) require_shape(*dx, x.shape(), "conv1d dx");
  const T* xd = x.data().data();
  const T* wd = filters.data().data();
  T* dwd = dfilters.data().data();
  T* dxd = dx ? dx->data().data() : nullptr;
  const std::size_t n = k * D;
  for (std::size_t t = 0; t < T_out; ++t) {
    for (std::size_t f = 0; f < F; ++f) {
      const T g = dout(t, f);
      if (g == T(0)) continue;
      dbias[f] += g;
      const T* xw = xd + t * D;
      T* dw = dwd + f * n;
      for (std::size_t j = 0; j < n; ++j) dw[j] += g * xw[j];
      if (dxd) {
        const T* ww = wd + f * n;
        T* dxw = dxd + t * D;
        for (std::size_t j = 0; j < n; ++j) dxw[j] += g * ww[j];
      }
    }
  }
}

// ---------------------------------------------------------------------------
// Max over time

template <class T>
struct MaxPoolResult {
  Tensor<T> out;                    // [F]
  std::vector<std::size_t> argmax;  // row chosen per column, first on ties
};

template <class T>
MaxPoolResult<T> max_pool_time(const Tensor<T>& x) {
  if (x.rank() != 2) throw Error(ErrorCode::ShapeMismatch, "max_pool_time expects [T,F]");
  const std::size_t Tn = x.dim(0), F = x.dim(1);
  if (Tn == 0) throw Error(ErrorCode::EmptyTime, "max over zero time steps");
  MaxPoolResult<T> r{Tensor<T>({F}), std::vector<std::size_t>(F, 0)};
  for (std::size_t f = 0; f < F; ++f) {
    std::size_t best = 0;
    for (std::size_t t = 1; t < Tn; ++t) {
      if (x(t, f) > x(best, f)) best = t;
    }
    r.argmax[f] = best;
    r.out[f] = x(best, f);
  }
  return r;
}

template <class T>
Tensor<T> max_pool_time_backward(std::span<const std::size_t> argmax, const Tensor<T>& dout, std::size_t time_steps) {
  const std::size_t F = argmax.size();
  require_shape(dout, {F}, "max pool upstream gradient");
  Tensor<T> dx({time_steps, F});
  for (std::size_t f = 0; f < F; ++f) dx(argmax[f], f) += dout[f];
  return dx;
}

// ---------------------------------------------------------------------------
// Elementwise activations

enum class Activation { Elu, Sigmoid, Tanh };

template <class T>
T sigmoid_scalar(T v) {
  return v >= T(0) ? T(1) / (T(1) + std::exp(-v)) : std::exp(v) / (T(1) + std::exp(v));
}

template <class T>
Tensor<T> apply_activation(Activation kind, const Tensor<T>& x) {
  Tensor<T> y(x.shape());
  auto in = x.data();
  auto out = y.data();
  for (std::size_t i = 0; i < in.size(); ++i) {
    const T v = in[i];
    switch (kind) {
      case Activation::Elu: out[i] = v > T(0) ? v : std::expm1(v); break;
      case Activation::Sigmoid: out[i] = sigmoid_scalar(v); break;
      case Activation::Tanh: out[i] = std::tanh(v); break;
    }
  }
  return y;
}

/// dx from the input `x`, the forward output `y` and upstream `dy`.
template <class T>
Tensor<T> activation_backward(Activation kind, const Tensor<T>& x, const Tensor<T>& y, const Tensor<T>& dy) {
  require_shape(dy, x.shape(), "activation upstream gradient");
  Tensor<T> dx(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) {
    T d;
    switch (kind) {
      case Activation::Elu: d = x[i] > T(0) ? T(1) : y[i] + T(1); break;
      case Activation::Sigmoid: d = y[i] * (T(1) - y[i]); break;
      case Activation::Tanh: d = T(1) - y[i] * y[i]; break;
      default: d = T(0);
    }
    dx[i] = dy[i] * d;
  }
  return dx;
}

// ---------------------------------------------------------------------------
// Dense: y = W x + b

template <class T>
Tensor<T> dense_forward(const Tensor<T>& x, const Tensor<T>& W, const Tensor<T>& b) {
  if (x.rank() != 1 || W.rank() != 2 || b.rank() != 1 || W.dim(1) != x.dim(0) || W.dim(0) != b.dim(0)) {
    throw Error(ErrorCode::ShapeMismatch, "dense: x " + shape_string(x.shape()) + ", W " + shape_string(W.shape()) +
                                              ", b " + shape_string(b.shape()));
  }
  const std::size_t m = W.dim(0), n = W.dim(1);
  Tensor<T> y({m});
  for (std::size_t i = 0; i < m; ++i) {
    T s = T(0);
    const auto w = W.row(i);
    for (std::size_t j = 0; j < n; ++j) s += w[j] * x[j];
    y[i] = s + b[i];
  }
  return y;
}

template <class T>
void dense_backward(const Tensor<T>& x, const Tensor<T>& W, const Tensor<T>& dy, Tensor<T>* dx, Tensor<T>& dW,
                    Tensor<T>& db) {
  const std::size_t m = W.dim(0), n = W.dim(1);
  require_shape(dy, {m}, "dense upstream gradient");
  for (std::size_t i = 0; i < m; ++i) {
    const T g = dy[i];
    db[i] += g;
    if (g == T(0)) continue;
    auto dw = dW.row(i);
    for (std::size_t j = 0; j < n; ++j) dw[j] += g * x[j];
    if (dx) {
      const auto w = W.row(i);
      for (std::size_t j = 0; j < n; ++j) (*dx)[j] += g * w[j];
    }
  }
}

// ---------------------------------------------------------------------------
// GRU
//   z  = sigmoid(Wz x + Uz h + bz)
//   r  = sigmoid(Wr x + Ur h + br)
//   hh = tanh(Wh x + Uh (r * h) + bh)
//   h' = (1 - z) * h + z * hh

enum GruGate : std::size_t { kUpdate = 0, kReset = 1, kCandidate = 2 };

inline constexpr std::array<const char*, 3> kGruGateNames{"z", "r", "h"};
// initial update-gate bias; negative values start units close to carrying their state
inline constexpr double kGruUpdateBias = -1.0;

template <class Ptr>
struct GruRefsT {
  std::array<Ptr, 3> W;  // [H,D]
  std::array<Ptr, 3> U;  // [H,H]
  std::array<Ptr, 3> b;  // [H]

  std::size_t hidden() const { return W[0]->dim(0); }
  std::size_t input() const { return W[0]->dim(1); }
};

template <class T>
using GruParams = GruRefsT<const Tensor<T>*>;
template <class T>
using GruGrads = GruRefsT<Tensor<T>*>;

inline std::string gru_name(const std::string& prefix, char kind, std::size_t gate) {
  return prefix + kind + "_" + kGruGateNames[gate];
}

template <class T>
void add_gru_params(ParamStore<T>& store, const std::string& prefix, std::size_t input, std::size_t hidden, Rng& rng) {
  for (std::size_t g = 0; g < 3; ++g) {
    Tensor<T> W({hidden, input});
    glorot_uniform(W, input, hidden, rng);
    store.add(gru_name(prefix, 'W', g), std::move(W));
    Tensor<T> U({hidden, hidden});
    orthogonal_fill(U, rng);
    store.add(gru_name(prefix, 'U', g), std::move(U));
    Tensor<T> b({hidden});
    if (g == kUpdate) b.fill(T(kGruUpdateBias));
    store.add(gru_name(prefix, 'b', g), std::move(b));
  }
}

template <class T>
GruParams<T> gru_params(const ParamStore<T>& store, const std::string& prefix) {
  GruParams<T> p;
  for (std::size_t g = 0; g < 3; ++g) {
    p.W[g] = &store.value(gru_name(prefix, 'W', g));
    p.U[g] = &store.value(gru_name(prefix, 'U', g));
    p.b[g] = &store.value(gru_name(prefix, 'b', g));
  }
  return p;
}

template <class T>
GruGrads<T> gru_grads(ParamStore<T>& store, const std::string& prefix) {
  GruGrads<T> p;
  for (std::size_t g = 0; g < 3; ++g) {
    p.W[g] = &store.grad(gru_name(prefix, 'W', g));
    p.U[g] = &store.grad(gru_name(prefix, 'U', g));
    p.b[g] = &store.grad(gru_name(prefix, 'b', g));
  }
  return p;
}

template <class T>
void check_gru_params(const GruParams<T>& p) {
  const std::size_t H = p.hidden(), D = p.input();
  for (std::size_t g = 0; g < 3; ++g) {
    require_shape(*p.W[g], {H, D}, "GRU W");
    require_shape(*p.U[g], {H, H}, "GRU U");
    require_shape(*p.b[g], {H}, "GRU b");
  }
}

/// Intermediate values of one step, kept for the backward pass.
template <class T>
struct GruStep {
  Tensor<T> z, r, hh, rh, h;
};

namespace detail {

// out += M v for M [rows, cols]
template <class T>
void matvec_add(const Tensor<T>& M, std::span<const T> v, std::span<T> out) {
  const std::size_t rows = M.dim(0), cols = M.dim(1);
  const T* m = M.data().data();
  for (std::size_t i = 0; i < rows; ++i) {
    T s = T(0);
    const T* mr = m + i * cols;
    for (std::size_t j = 0; j < cols; ++j) s += mr[j] * v[j];
    out[i] += s;
  }
}

// out += M^T g ; dM += g v^T
template <class T>
void matvec_backward(const Tensor<T>& M, std::span<const T> v, std::span<const T> g, Tensor<T>& dM, std::span<T> out) {
  const std::size_t rows = M.dim(0), cols = M.dim(1);
  const T* m = M.data().data();
  T* dm = dM.data().data();
  for (std::size_t i = 0; i < rows; ++i) {
    const T gi = g[i];
    if (gi == T(0)) continue;
    const T* mr = m + i * cols;
    T* dmr = dm + i * cols;
    for (std::size_t j = 0; j < cols; ++j) {
      dmr[j] += gi * v[j];
      if (!out.empty()) out[j] += gi * mr[j];
    }
  }
}

}  // namespace detail

template <class T>
GruStep<T> gru_cell_forward(std::span<const T> x, const Tensor<T>& h_prev, const GruParams<T>& p) {
  const std::size_t H = p.hidden();
  if (x.size() != p.input() || h_prev.shape() != Shape{H}) {
    throw Error(ErrorCode::ShapeMismatch, "gru_cell: input " + std::to_string(x.size()) + "/" +
                                              std::to_string(p.input()) + ", state " + shape_string(h_prev.shape()));
  }
  GruStep<T> s{Tensor<T>({H}), Tensor<T>({H}), Tensor<T>({H}), Tensor<T>({H}), Tensor<T>({H})};
  const auto hp = h_prev.data();
  for (std::size_t i = 0; i < H; ++i) {
    s.z[i] = (*p.b[kUpdate])[i];
    s.r[i] = (*p.b[kReset])[i];
    s.hh[i] = (*p.b[kCandidate])[i];
  }
  detail::matvec_add(*p.W[kUpdate], x, s.z.data());
  detail::matvec_add(*p.U[kUpdate], hp, s.z.data());
  detail::matvec_add(*p.W[kReset], x, s.r.data());
  detail::matvec_add(*p.U[kReset], hp, s.r.data());
  for (std::size_t i = 0; i < H; ++i) {
    s.z[i] = sigmoid_scalar(s.z[i]);
    s.r[i] = sigmoid_scalar(s.r[i]);
    s.rh[i] = s.r[i] * hp[i];
  }
  detail::matvec_add(*p.W[kCandidate], x, s.hh.data());
  detail::matvec_add(*p.U[kCandidate], std::span<const T>(s.rh.data()), s.hh.data());
  for (std::size_t i = 0; i < H; ++i) {
    s.hh[i] = std::tanh(s.hh[i]);
    s.h[i] = (T(1) - s.z[i]) * hp[i] + s.z[i] * s.hh[i];
  }
  return s;
}

template <class T>
Tensor<T> gru_cell(std::span<const T> x, const Tensor<T>& h_prev, const GruParams<T>& p) {
  return gru_cell_forward(x, h_prev, p).h;
}

/// Backward through one step given dL/dh'. Accumulates parameter gradients,
/// adds into `dx` (may be empty) and returns dL/dh_prev.
template <class T>
Tensor<T> gru_cell_backward(std::span<const T> x, const Tensor<T>& h_prev, const GruParams<T>& p, const GruStep<T>& s,
                            const Tensor<T>& dh, const GruGrads<T>& g, std::span<T> dx) {
  const std::size_t H = p.hidden();
  const auto hp = h_prev.data();
  Tensor<T> dh_prev({H});
  Tensor<T> da_z({H}), da_r({H}), da_h({H}), d_rh({H});
  for (std::size_t i = 0; i < H; ++i) {
    const T dz = dh[i] * (s.hh[i] - hp[i]);
    const T dhh = dh[i] * s.z[i];
    dh_prev[i] = dh[i] * (T(1) - s.z[i]);
    da_z[i] = dz * s.z[i] * (T(1) - s.z[i]);
    da_h[i] = dhh * (T(1) - s.hh[i] * s.hh[i]);
  }
  // candidate
  for (std::size_t i = 0; i < H; ++i) (*g.b[kCandidate])[i] += da_h[i];
  detail::matvec_backward(*p.W[kCandidate], x, std::span<const T>(da_h.data()), *g.W[kCandidate], dx);
  detail::matvec_backward(*p.U[kCandidate], std::span<const T>(s.rh.data()), std::span<const T>(da_h.data()),
                          *g.U[kCandidate], d_rh.data());
  for (std::size_t i = 0; i < H; ++i) {
    const T dr = d_rh[i] * hp[i];
    dh_prev[i] += d_rh[i] * s.r[i];
    da_r[i] = dr * s.r[i] * (T(1) - s.r[i]);
  }
  // gates
  for (std::size_t i = 0; i < H; ++i) {
    (*g.b[kUpdate])[i] += da_z[i];
    (*g.b[kReset])[i] += da_r[i];
  }
  detail::matvec_backward(*p.W[kUpdate], x, std::span<const T>(da_z.data()), *g.W[kUpdate], dx);
  detail::matvec_backward(*p.U[kUpdate], hp, std::span<const T>(da_z.data()), *g.U[kUpdate], dh_prev.data());
  detail::matvec_backward(*p.W[kReset], x, std::span<const T>(da_r.data()), *g.W[kReset], dx);
  detail::matvec_backward(*p.U[kReset], hp, std::span<const T>(da_r.data()), *g.U[kReset], dh_prev.data());
  return dh_prev;
}

// ---------------------------------------------------------------------------
// Bidirectional scan; both directions start from h0 = 0 and return their final states.

template <class T>
struct BiGruTrace {
  std::vector<GruStep<T>> fwd;  // fwd[t] processed x[t]
  std::vector<GruStep<T>> bwd;  // bwd[j] processed x[L-1-j]
  Tensor<T> h_fwd;
  Tensor<T> h_bwd;
};

template <class T>
BiGruTrace<T> bigru_sequence(const Tensor<T>& x, const GruParams<T>& fwd, const GruParams<T>& bwd) {
  if (x.rank() != 2) throw Error(ErrorCode::ShapeMismatch, "bigru expects x[L,D]");
  const std::size_t L = x.dim(0);
  if (L == 0) throw Error(ErrorCode::EmptySequence, "bigru over zero steps");
  BiGruTrace<T> tr;
  tr.fwd.reserve(L);
  tr.bwd.reserve(L);
  Tensor<T> h({fwd.hidden()});
  for (std::size_t t = 0; t < L; ++t) {
    tr.fwd.push_back(gru_cell_forward(x.row(t), h, fwd));
    h = tr.fwd.back().h;
  }
  tr.h_fwd = h;
  h = Tensor<T>({bwd.hidden()});
  for (std::size_t j = 0; j < L; ++j) {
    tr.bwd.push_back(gru_cell_forward(x.row(L - 1 - j), h, bwd));
    h = tr.bwd.back().h;
  }
  tr.h_bwd = h;
  return tr;
}

/// BPTT from gradients on the two final states. Accumulates parameter
/// gradients; returns dL/dx [L,D].
template <class T>
Tensor<T> bigru_backward(const Tensor<T>& x, const GruParams<T>& fwd, const GruParams<T>& bwd,
                         const BiGruTrace<T>& tr, const Tensor<T>& dh_fwd, const Tensor<T>& dh_bwd,
                         const GruGrads<T>& gfwd, const GruGrads<T>& gbwd) {
  const std::size_t L = x.dim(0);
  Tensor<T> dx(x.shape());
  Tensor<T> dh = dh_fwd;
  for (std::size_t t = L; t-- > 0;) {
    const Tensor<T> h_prev = t == 0 ? Tensor<T>({fwd.hidden()}) : tr.fwd[t - 1].h;
    dh = gru_cell_backward(x.row(t), h_prev, fwd, tr.fwd[t], dh, gfwd, dx.row(t));
  }
  dh = dh_bwd;
  for (std::size_t j = L; j-- > 0;) {
    const Tensor<T> h_prev = j == 0 ? Tensor<T>({bwd.hidden()}) : tr.bwd[j - 1].h;
    dh = gru_cell_backward(x.row(L - 1 - j), h_prev, bwd, tr.bwd[j], dh, gbwd, dx.row(L - 1 - j));
  }
  return dx;
}

// ---------------------------------------------------------------------------
// Class-weighted binary cross-entropy over the three sigmoid outputs.
// The gold coordinate's term is scaled by weight[gold]; the others by 1.

inline constexpr double kProbClamp = 1e-7;

template <class T>
double weighted_bce_loss(const Tensor<T>& p, std::size_t gold, std::span<const double> weights) {
  double loss = 0.0;
  for (std::size_t c = 0; c < p.size(); ++c) {
    const double pc = std::clamp(static_cast<double>(p[c]), kProbClamp, 1.0 - kProbClamp);
    const double w = c == gold ? weights[gold] : 1.0;
    loss -= c == gold ? w * std::log(pc) : w * std::log(1.0 - pc);
  }
  return loss;
}

/// dL/dp; zero where the clamp is active.
template <class T>
Tensor<T> weighted_bce_backward(const Tensor<T>& p, std::size_t gold, std::span<const double> weights) {
  Tensor<T> dp(p.shape());
  for (std::size_t c = 0; c < p.size(); ++c) {
    const double raw = static_cast<double>(p[c]);
    if (raw <= kProbClamp || raw >= 1.0 - kProbClamp) continue;
    const double w = c == gold ? weights[gold] : 1.0;
    dp[c] = static_cast<T>(c == gold ? -w / raw : w / (1.0 - raw));
  }
  return dp;
}

}  // namespace hatebench::nn
