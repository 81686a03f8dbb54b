#pragma once
// Independent scalar-loop re-implementation of the forward pass, written
// against the published equations with no shared code beyond parameter
// storage. Used as the ground truth for the tensor-op path.

#include <cmath>
#include <vector>

#include "nmtwp/model.hpp"

namespace oracle {

using Vec = std::vector<double>;
using nmtwp::ModelParams;
using nmtwp::Tensor;

inline double sig(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// y = M v + b over raw row-major storage.
inline Vec affine(const Tensor<double>& M, const Vec& v,
                  const Tensor<double>& b) {
  const int rows = M.dim(0), cols = M.dim(1);
  Vec y(static_cast<std::size_t>(rows));
  for (int i = 0; i < rows; ++i) {
    double acc = b.data()[static_cast<std::size_t>(i)];
    for (int j = 0; j < cols; ++j)
      acc += M.data()[static_cast<std::size_t>(i * cols + j)] * v[static_cast<std::size_t>(j)];
    y[static_cast<std::size_t>(i)] = acc;
  }
  return y;
}

inline Vec cat(const Vec& a, const Vec& b) {
  Vec out = a;
  out.insert(out.end(), b.begin(), b.end());
  return out;
}

inline Vec emb_row(const Tensor<double>& emb, int id) {
  const int d = emb.dim(1);
  Vec out(static_cast<std::size_t>(d));
  for (int j = 0; j < d; ++j)
    out[static_cast<std::size_t>(j)] = emb.data()[static_cast<std::size_t>(id * d + j)];
  return out;
}

inline Vec softmax(Vec logits) {
  double mx = logits[0];
  for (double x : logits) mx = std::max(mx, x);
  double sum = 0;
  for (double& x : logits) {
    x = std::exp(x - mx);
    sum += x;
  }
  for (double& x : logits) x /= sum;
  return logits;
}

inline Vec gru_step(const nmtwp::GruParams<double>& p, const Vec& prev,
                    const Vec& input) {
  const Vec joint = cat(input, prev);
  Vec z = affine(p.W_z, joint, p.b_z);
  Vec r = affine(p.W_r, joint, p.b_r);
  for (double& x : z) x = sig(x);
  for (double& x : r) x = sig(x);
  Vec gated = prev;
  for (std::size_t i = 0; i < gated.size(); ++i) gated[i] *= r[i];
  Vec cand = affine(p.W, cat(input, gated), p.b);
  for (double& x : cand) x = std::tanh(x);
  Vec out(prev.size());
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = (1.0 - z[i]) * prev[i] + z[i] * cand[i];
  return out;
}

struct Encoded {
  std::vector<Vec> h;
  Vec s0;
};

inline Encoded encode(const ModelParams<double>& m, const std::vector<int>& x) {
  const int n = static_cast<int>(x.size());
  const int d_hid = m.dims.d_hid;
  std::vector<Vec> fwd(static_cast<std::size_t>(n)), bwd(static_cast<std::size_t>(n));
  Vec state(static_cast<std::size_t>(d_hid), 0.0);
  for (int i = 0; i < n; ++i) {
    state = gru_step(m.encoder.fwd, state, emb_row(m.encoder.emb, x[static_cast<std::size_t>(i)]));
    fwd[static_cast<std::size_t>(i)] = state;
  }
  state.assign(static_cast<std::size_t>(d_hid), 0.0);
  for (int i = n - 1; i >= 0; --i) {
    state = gru_step(m.encoder.bwd, state, emb_row(m.encoder.emb, x[static_cast<std::size_t>(i)]));
    bwd[static_cast<std::size_t>(i)] = state;
  }
  Encoded out;
  out.h.resize(static_cast<std::size_t>(n));
  Vec mean(static_cast<std::size_t>(2 * d_hid), 0.0);
  for (int i = 0; i < n; ++i) {
    out.h[static_cast<std::size_t>(i)] = cat(fwd[static_cast<std::size_t>(i)], bwd[static_cast<std::size_t>(i)]);
    for (std::size_t j = 0; j < mean.size(); ++j)
      mean[j] += out.h[static_cast<std::size_t>(i)][j] / n;
  }
  out.s0 = affine(m.encoder.W_s, mean, m.encoder.b_s);
  for (double& v : out.s0) v = sig(v);
  return out;
}

struct Attended {
  Vec a, c;
};

inline Attended attend(const nmtwp::AttentionParams<double>& p, const Vec& query,
                       const std::vector<Vec>& h) {
  Attended out;
  out.a.resize(h.size());
  for (std::size_t i = 0; i < h.size(); ++i) {
    Vec t = affine(p.W, cat(query, h[i]), p.b);
    double score = 0;
    for (std::size_t j = 0; j < t.size(); ++j)
      score += p.v.data()[j] * std::tanh(t[j]);
    out.a[i] = score;
  }
  out.a = softmax(out.a);
  out.c.assign(h[0].size(), 0.0);
  for (std::size_t i = 0; i < h.size(); ++i)
    for (std::size_t j = 0; j < out.c.size(); ++j)
      out.c[j] += out.a[i] * h[i][j];
  return out;
}

struct Step {
  Vec state, context;
};

inline Step decoder_step(const ModelParams<double>& m, const Vec& prev_state,
                         int prev_token, const std::vector<Vec>& h) {
  Step out;
  out.context = attend(m.decoder.att, prev_state, h).c;
  out.state = gru_step(m.decoder.gru, prev_state,
                       cat(emb_row(m.decoder.emb, prev_token), out.context));
  return out;
}

inline Vec readout(const ModelParams<double>& m, const Vec& state,
                   int prev_token, const Vec& context) {
  Vec u = affine(m.decoder.W_t,
                 cat(emb_row(m.decoder.emb, prev_token), cat(state, context)),
                 m.decoder.b_t);
  for (double& x : u) x = std::tanh(x);
  return u;
}

inline Vec output_distribution(const ModelParams<double>& m, const Vec& state,
                               int prev_token, const Vec& context) {
  return softmax(affine(m.decoder.W_f, readout(m, state, prev_token, context),
                        m.decoder.b_f));
}

inline Vec wpe_distribution(const ModelParams<double>& m,
                            const std::vector<int>& x) {
  const Encoded enc = encode(m, x);
  const Vec cp = attend(m.wpe.att, enc.s0, enc.h).c;
  Vec t = affine(m.wpe.W_t, cat(enc.s0, cp), m.wpe.b_t);
  for (double& v : t) v = std::tanh(v);
  return softmax(affine(m.wpe.W_f, t, m.wpe.b_f));
}

inline Vec wpd_distribution(const ModelParams<double>& m, const Vec& state,
                            int prev_token, const Vec& context) {
  Vec u = readout(m, state, prev_token, context);
  Vec p = affine(m.wpd.W_p, u, m.wpd.b_p);
  for (double& x : p) x = std::tanh(x);
  return softmax(affine(m.decoder.W_f, p, m.decoder.b_f));
}

}  // namespace oracle
