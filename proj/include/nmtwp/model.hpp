#pragma once
// Attention-based GRU encoder-decoder. All forward ops are templated on the
// scalar type and take an optional tape, so the same code serves training
// (float), finite-difference checking (double), and plain evaluation.

#include <stdexcept>
#include <string>
#include <vector>

#include "nmtwp/rng.hpp"
#include "nmtwp/tensor.hpp"
#include "nmtwp/vocab.hpp"

namespace nmtwp {

struct ModelDims {
  int v_src = 0;
  int v_tgt = 0;
  int d_emb = 512;
  int d_hid = 1024;
  int d_att = 1024;
  int d_readout = 512;
};

template <class T>
struct GruParams {
  // Gate weights act on [input; prev], so each is [d_hid x (d_in + d_hid)].
  Tensor<T> W_z, W_r, W;
  Tensor<T> b_z, b_r, b;
};

template <class T>
struct AttentionParams {
  Tensor<T> W;  // [d_att x (d_query + d_h)]
  Tensor<T> b;  // [d_att]
  Tensor<T> v;  // [d_att], reduces the tanh layer to a scalar score
};

template <class T>
struct EncoderParams {
  Tensor<T> emb;  // [v_src x d_emb]
  GruParams<T> fwd, bwd;
  Tensor<T> W_s, b_s;  // initial decoder state from the mean representation
};

template <class T>
struct DecoderParams {
  Tensor<T> emb;  // [v_tgt x d_emb]
  GruParams<T> gru;
  AttentionParams<T> att;
  Tensor<T> W_t, b_t;  // readout over [emb; s; c]
  Tensor<T> W_f, b_f;  // output projection, one row per target token
};

template <class T>
struct WpeParams {
  AttentionParams<T> att;  // query is s0
  Tensor<T> W_t, b_t;      // readout over [s0; c_p]
  Tensor<T> W_f, b_f;      // own output projection, separate from the decoder
};

template <class T>
struct WpdParams {
  Tensor<T> W_p, b_p;  // square map on the decoder readout
};

template <class T>
struct ModelParams {
  ModelDims dims;
  EncoderParams<T> encoder;
  DecoderParams<T> decoder;
  bool has_wpe = false;
  bool has_wpd = false;
  WpeParams<T> wpe;
  WpdParams<T> wpd;

  std::vector<std::pair<std::string, Tensor<T>>> named_tensors() const;
  void set_requires_grad(bool b) const {
    for (auto& [name, t] : named_tensors()) t.set_requires_grad(b);
  }
};

// ---- initialization ----------------------------------------------------

template <class T>
Tensor<T> gaussian_tensor(Shape shape, Rng rng, double stddev = 0.01) {
  Tensor<T> t = Tensor<T>::zeros(std::move(shape));
  for (auto& x : t.data()) x = static_cast<T>(rng.gaussian(0.0, stddev));
  return t;
}

// Modified Gram-Schmidt over gaussian rows.
template <class T>
void fill_orthogonal(std::vector<std::vector<double>>& rows, Rng& rng) {
  const std::size_t n = rows.size();
  for (auto& r : rows)
    for (auto& x : r) x = rng.gaussian(0.0, 1.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < i; ++k) {
      double d = 0;
      for (std::size_t j = 0; j < n; ++j) d += rows[k][j] * rows[i][j];
      for (std::size_t j = 0; j < n; ++j) rows[i][j] -= d * rows[k][j];
    }
    double nrm = 0;
    for (std::size_t j = 0; j < n; ++j) nrm += rows[i][j] * rows[i][j];
    nrm = std::sqrt(nrm);
    for (std::size_t j = 0; j < n; ++j) rows[i][j] /= nrm;
  }
}

// Recurrent weight: gaussian input-facing block, orthogonal square block
// acting on the previous state.
template <class T>
Tensor<T> recurrent_weight(int d_hid, int d_in, Rng rng) {
  Tensor<T> t = Tensor<T>::zeros({d_hid, d_in + d_hid});
  for (int i = 0; i < d_hid; ++i)
    for (int j = 0; j < d_in; ++j)
      t.data()[static_cast<std::size_t>(i * (d_in + d_hid) + j)] =
          static_cast<T>(rng.gaussian(0.0, 0.01));
  std::vector<std::vector<double>> q(static_cast<std::size_t>(d_hid),
                                     std::vector<double>(static_cast<std::size_t>(d_hid)));
  fill_orthogonal<T>(q, rng);
  for (int i = 0; i < d_hid; ++i)
    for (int j = 0; j < d_hid; ++j)
      t.data()[static_cast<std::size_t>(i * (d_in + d_hid) + d_in + j)] =
          static_cast<T>(q[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)]);
  return t;
}

template <class T>
ModelParams<T> init_model(const ModelDims& dims, const Rng& master,
                          bool with_wpe, bool with_wpd);

// Fresh head initialization for fine-tuning from a base checkpoint; uses the
// same per-tensor-name substreams as init_model.
template <class T>
void add_wpe_head(ModelParams<T>& m, const Rng& master);
template <class T>
void add_wpd_head(ModelParams<T>& m, const Rng& master);

// ---- forward ops -------------------------------------------------------

template <class T>
struct GruTrace {
  Tensor<T> z, r, cand;
};

template <class T>
Tensor<T> gru_step(Tape<T>* tape, const GruParams<T>& p, const Tensor<T>& prev,
                   const Tensor<T>& input, GruTrace<T>* trace = nullptr) {
  Tensor<T> zin = concat(tape, {input, prev});
  Tensor<T> z = sigmoid(tape, affine(tape, p.W_z, zin, p.b_z));
  Tensor<T> r = sigmoid(tape, affine(tape, p.W_r, zin, p.b_r));
  Tensor<T> rin = concat(tape, {input, mul(tape, r, prev)});
  Tensor<T> cand = tanh(tape, affine(tape, p.W, rin, p.b));
  Tensor<T> out = add(tape, mul(tape, sub_from_one(tape, z), prev),
                      mul(tape, z, cand));
  if (trace) *trace = {z, r, cand};
  return out;
}

template <class T>
struct EncoderOutput {
  std::vector<Tensor<T>> h;  // per-position [2*d_hid]
  Tensor<T> H;               // stacked [|x| x 2*d_hid]
  Tensor<T> s0;
  std::vector<int> valid;    // 0 marks padding an attention must skip
  int len() const { return static_cast<int>(h.size()); }
};

template <class T>
EncoderOutput<T> encode(Tape<T>* tape, const EncoderParams<T>& p,
                        const std::vector<int>& x) {
  if (x.empty()) throw std::invalid_argument("encode of empty sentence");
  const int n = static_cast<int>(x.size());
  const int d_hid = p.W_s.dim(0);
  std::vector<Tensor<T>> fwd(static_cast<std::size_t>(n)), bwd(static_cast<std::size_t>(n));
  Tensor<T> prev = Tensor<T>::zeros({d_hid});
  for (int i = 0; i < n; ++i) {
    prev = gru_step(tape, p.fwd, prev, row(tape, p.emb, x[static_cast<std::size_t>(i)]));
    fwd[static_cast<std::size_t>(i)] = prev;
  }
  prev = Tensor<T>::zeros({d_hid});
  for (int i = n - 1; i >= 0; --i) {
    prev = gru_step(tape, p.bwd, prev, row(tape, p.emb, x[static_cast<std::size_t>(i)]));
    bwd[static_cast<std::size_t>(i)] = prev;
  }
  EncoderOutput<T> out;
  out.h.resize(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i)
    out.h[static_cast<std::size_t>(i)] =
        concat(tape, {fwd[static_cast<std::size_t>(i)], bwd[static_cast<std::size_t>(i)]});
  out.H = stack_rows(tape, out.h);
  out.s0 = sigmoid(tape, affine(tape, p.W_s, mean_rows(tape, out.H), p.b_s));
  out.valid.assign(static_cast<std::size_t>(n), 1);
  return out;
}

template <class T>
struct AttentionResult {
  Tensor<T> c;  // context
  Tensor<T> a;  // normalized weights
  Tensor<T> e;  // raw scores
};

template <class T>
AttentionResult<T> attention(Tape<T>* tape, const AttentionParams<T>& p,
                             const Tensor<T>& query,
                             const EncoderOutput<T>& enc) {
  bool any_valid = false;
  bool any_masked = false;
  for (int v : enc.valid) (v ? any_valid : any_masked) = true;
  if (!any_valid)
    throw std::invalid_argument("attention with all source positions masked");
  std::vector<Tensor<T>> scores;
  scores.reserve(enc.h.size());
  for (const auto& h_i : enc.h)
    scores.push_back(dot(tape, p.v,
                         tanh(tape, affine(tape, p.W, concat(tape, {query, h_i}), p.b))));
  AttentionResult<T> out;
  out.e = stack(tape, scores);
  Tensor<T> masked = out.e;
  if (any_masked) {
    Tensor<T> bias = Tensor<T>::zeros({enc.len()});
    for (int i = 0; i < enc.len(); ++i)
      if (!enc.valid[static_cast<std::size_t>(i)])
        bias.data()[static_cast<std::size_t>(i)] = T(-1e9);
    masked = add(tape, out.e, bias);
  }
  out.a = softmax(tape, masked);
  out.c = matvec_t(tape, enc.H, out.a);
  return out;
}

template <class T>
struct DecoderStep {
  Tensor<T> state;
  AttentionResult<T> att;
};

// Attention queried by the previous state, then one GRU step on [emb; c].
template <class T>
DecoderStep<T> decoder_step(Tape<T>* tape, const DecoderParams<T>& p,
                            const Tensor<T>& prev_state,
                            const Tensor<T>& prev_emb,
                            const EncoderOutput<T>& enc) {
  DecoderStep<T> out;
  out.att = attention(tape, p.att, prev_state, enc);
  out.state = gru_step(tape, p.gru, prev_state,
                       concat(tape, {prev_emb, out.att.c}));
  return out;
}

// tanh readout over [emb; s; c]; the dropout mask (training only)
// multiplies this before the output projection.
template <class T>
Tensor<T> output_readout(Tape<T>* tape, const DecoderParams<T>& p,
                         const Tensor<T>& state, const Tensor<T>& prev_emb,
                         const Tensor<T>& context) {
  return tanh(tape,
              affine(tape, p.W_t, concat(tape, {prev_emb, state, context}), p.b_t));
}

template <class T>
Tensor<T> output_logits(Tape<T>* tape, const DecoderParams<T>& p,
                        const Tensor<T>& readout) {
  return affine(tape, p.W_f, readout, p.b_f);
}

template <class T>
Tensor<T> output_distribution(Tape<T>* tape, const DecoderParams<T>& p,
                              const Tensor<T>& state, const Tensor<T>& prev_emb,
                              const Tensor<T>& context,
                              const Tensor<T>* dropout_mask = nullptr) {
  Tensor<T> u = output_readout(tape, p, state, prev_emb, context);
  if (dropout_mask) u = mul(tape, u, *dropout_mask);
  return softmax(tape, output_logits(tape, p, u));
}

// ---- parameter bookkeeping --------------------------------------------

template <class T>
void append_gru(std::vector<std::pair<std::string, Tensor<T>>>& out,
                const std::string& prefix, const GruParams<T>& g) {
  out.emplace_back(prefix + ".W_z", g.W_z);
  out.emplace_back(prefix + ".W_r", g.W_r);
  out.emplace_back(prefix + ".W", g.W);
  out.emplace_back(prefix + ".b_z", g.b_z);
  out.emplace_back(prefix + ".b_r", g.b_r);
  out.emplace_back(prefix + ".b", g.b);
}

template <class T>
void append_attention(std::vector<std::pair<std::string, Tensor<T>>>& out,
                      const std::string& prefix, const AttentionParams<T>& a) {
  out.emplace_back(prefix + ".W", a.W);
  out.emplace_back(prefix + ".b", a.b);
  out.emplace_back(prefix + ".v", a.v);
}

template <class T>
std::vector<std::pair<std::string, Tensor<T>>> ModelParams<T>::named_tensors()
    const {
  std::vector<std::pair<std::string, Tensor<T>>> out;
  out.emplace_back("encoder.emb", encoder.emb);
  append_gru(out, "encoder.fwd", encoder.fwd);
  append_gru(out, "encoder.bwd", encoder.bwd);
  out.emplace_back("encoder.W_s", encoder.W_s);
  out.emplace_back("encoder.b_s", encoder.b_s);
  out.emplace_back("decoder.emb", decoder.emb);
  append_gru(out, "decoder.gru", decoder.gru);
  append_attention(out, "decoder.att", decoder.att);
  out.emplace_back("decoder.W_t", decoder.W_t);
  out.emplace_back("decoder.b_t", decoder.b_t);
  out.emplace_back("decoder.W_f", decoder.W_f);
  out.emplace_back("decoder.b_f", decoder.b_f);
  if (has_wpe) {
    append_attention(out, "wpe.att", wpe.att);
    out.emplace_back("wpe.W_t", wpe.W_t);
    out.emplace_back("wpe.b_t", wpe.b_t);
    out.emplace_back("wpe.W_f", wpe.W_f);
    out.emplace_back("wpe.b_f", wpe.b_f);
  }
  if (has_wpd) {
    out.emplace_back("wpd.W_p", wpd.W_p);
    out.emplace_back("wpd.b_p", wpd.b_p);
  }
  return out;
}

// Every tensor draws from a substream named after it, so adding a head later
// reproduces exactly the tensors a from-scratch init would draw.
template <class T>
GruParams<T> init_gru(const std::string& prefix, int d_in, int d_hid,
                      const Rng& master) {
  GruParams<T> g;
  g.W_z = recurrent_weight<T>(d_hid, d_in, master.substream("init." + prefix + ".W_z"));
  g.W_r = recurrent_weight<T>(d_hid, d_in, master.substream("init." + prefix + ".W_r"));
  g.W = recurrent_weight<T>(d_hid, d_in, master.substream("init." + prefix + ".W"));
  g.b_z = Tensor<T>::zeros({d_hid});
  g.b_r = Tensor<T>::zeros({d_hid});
  g.b = Tensor<T>::zeros({d_hid});
  return g;
}

template <class T>
AttentionParams<T> init_attention(const std::string& prefix, int d_query,
                                  int d_h, int d_att, const Rng& master) {
  AttentionParams<T> a;
  a.W = gaussian_tensor<T>({d_att, d_query + d_h},
                           master.substream("init." + prefix + ".W"));
  a.b = Tensor<T>::zeros({d_att});
  a.v = gaussian_tensor<T>({d_att}, master.substream("init." + prefix + ".v"));
  return a;
}

// New head tensors are trainable immediately; a pre-trained host model has
// requires_grad set already, and the head must not silently stay frozen.
template <class T>
void add_wpe_head(ModelParams<T>& m, const Rng& master) {
  const ModelDims& d = m.dims;
  m.wpe.att = init_attention<T>("wpe.att", d.d_hid, 2 * d.d_hid, d.d_att, master);
  m.wpe.W_t = gaussian_tensor<T>({d.d_readout, 3 * d.d_hid},
                                 master.substream("init.wpe.W_t"));
  m.wpe.b_t = Tensor<T>::zeros({d.d_readout});
  m.wpe.W_f = gaussian_tensor<T>({d.v_tgt, d.d_readout},
                                 master.substream("init.wpe.W_f"));
  m.wpe.b_f = Tensor<T>::zeros({d.v_tgt});
  m.has_wpe = true;
  for (auto t : {m.wpe.att.W, m.wpe.att.b, m.wpe.att.v, m.wpe.W_t, m.wpe.b_t,
                 m.wpe.W_f, m.wpe.b_f})
    t.set_requires_grad(true);
}

template <class T>
void add_wpd_head(ModelParams<T>& m, const Rng& master) {
  const ModelDims& d = m.dims;
  m.wpd.W_p = gaussian_tensor<T>({d.d_readout, d.d_readout},
                                 master.substream("init.wpd.W_p"));
  m.wpd.b_p = Tensor<T>::zeros({d.d_readout});
  m.has_wpd = true;
  for (auto t : {m.wpd.W_p, m.wpd.b_p})
    t.set_requires_grad(true);
}

// Zero-valued tensors of the right shapes; checkpoint loading and precision
// mirrors fill them in.
template <class T>
ModelParams<T> alloc_model(const ModelDims& dims, bool with_wpe, bool with_wpd) {
  ModelParams<T> m;
  m.dims = dims;
  const int gru_enc = dims.d_emb + dims.d_hid;
  const int gru_dec = dims.d_emb + 2 * dims.d_hid + dims.d_hid;
  auto zero_gru = [](int cols, int d_hid) {
    GruParams<T> g;
    g.W_z = Tensor<T>::zeros({d_hid, cols});
    g.W_r = Tensor<T>::zeros({d_hid, cols});
    g.W = Tensor<T>::zeros({d_hid, cols});
    g.b_z = Tensor<T>::zeros({d_hid});
    g.b_r = Tensor<T>::zeros({d_hid});
    g.b = Tensor<T>::zeros({d_hid});
    return g;
  };
  auto zero_att = [&dims]() {
    AttentionParams<T> a;
    a.W = Tensor<T>::zeros({dims.d_att, 3 * dims.d_hid});
    a.b = Tensor<T>::zeros({dims.d_att});
    a.v = Tensor<T>::zeros({dims.d_att});
    return a;
  };
  m.encoder.emb = Tensor<T>::zeros({dims.v_src, dims.d_emb});
  m.encoder.fwd = zero_gru(gru_enc, dims.d_hid);
  m.encoder.bwd = zero_gru(gru_enc, dims.d_hid);
  m.encoder.W_s = Tensor<T>::zeros({dims.d_hid, 2 * dims.d_hid});
  m.encoder.b_s = Tensor<T>::zeros({dims.d_hid});
  m.decoder.emb = Tensor<T>::zeros({dims.v_tgt, dims.d_emb});
  m.decoder.gru = zero_gru(gru_dec, dims.d_hid);
  m.decoder.att = zero_att();
  m.decoder.W_t = Tensor<T>::zeros({dims.d_readout, dims.d_emb + 3 * dims.d_hid});
  m.decoder.b_t = Tensor<T>::zeros({dims.d_readout});
  m.decoder.W_f = Tensor<T>::zeros({dims.v_tgt, dims.d_readout});
  m.decoder.b_f = Tensor<T>::zeros({dims.v_tgt});
  if (with_wpe) {
    m.wpe.att = zero_att();
    m.wpe.W_t = Tensor<T>::zeros({dims.d_readout, 3 * dims.d_hid});
    m.wpe.b_t = Tensor<T>::zeros({dims.d_readout});
    m.wpe.W_f = Tensor<T>::zeros({dims.v_tgt, dims.d_readout});
    m.wpe.b_f = Tensor<T>::zeros({dims.v_tgt});
    m.has_wpe = true;
  }
  if (with_wpd) {
    m.wpd.W_p = Tensor<T>::zeros({dims.d_readout, dims.d_readout});
    m.wpd.b_p = Tensor<T>::zeros({dims.d_readout});
    m.has_wpd = true;
  }
  m.set_requires_grad(true);
  return m;
}

template <class To, class From>
ModelParams<To> cast_model(const ModelParams<From>& src) {
  ModelParams<To> dst = alloc_model<To>(src.dims, src.has_wpe, src.has_wpd);
  auto a = src.named_tensors();
  auto b = dst.named_tensors();
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].first != b[i].first || a[i].second.numel() != b[i].second.numel())
      throw std::logic_error("model layouts diverge at " + a[i].first);
    for (std::size_t j = 0; j < a[i].second.numel(); ++j)
      b[i].second.data()[j] = static_cast<To>(a[i].second.data()[j]);
  }
  return dst;
}

template <class T>
ModelParams<T> init_model(const ModelDims& dims, const Rng& master,
                          bool with_wpe, bool with_wpd) {
  if (dims.v_src < Vocabulary::kNumReserved || dims.v_tgt < Vocabulary::kNumReserved)
    throw std::invalid_argument("vocabulary sizes below reserved count");
  ModelParams<T> m;
  m.dims = dims;
  m.encoder.emb = gaussian_tensor<T>({dims.v_src, dims.d_emb},
                                     master.substream("init.encoder.emb"));
  m.encoder.fwd = init_gru<T>("encoder.fwd", dims.d_emb, dims.d_hid, master);
  m.encoder.bwd = init_gru<T>("encoder.bwd", dims.d_emb, dims.d_hid, master);
  m.encoder.W_s = gaussian_tensor<T>({dims.d_hid, 2 * dims.d_hid},
                                     master.substream("init.encoder.W_s"));
  m.encoder.b_s = Tensor<T>::zeros({dims.d_hid});
  m.decoder.emb = gaussian_tensor<T>({dims.v_tgt, dims.d_emb},
                                     master.substream("init.decoder.emb"));
  m.decoder.gru = init_gru<T>("decoder.gru", dims.d_emb + 2 * dims.d_hid,
                              dims.d_hid, master);
  m.decoder.att =
      init_attention<T>("decoder.att", dims.d_hid, 2 * dims.d_hid, dims.d_att, master);
  m.decoder.W_t = gaussian_tensor<T>(
      {dims.d_readout, dims.d_emb + 3 * dims.d_hid},
      master.substream("init.decoder.W_t"));
  m.decoder.b_t = Tensor<T>::zeros({dims.d_readout});
  m.decoder.W_f = gaussian_tensor<T>({dims.v_tgt, dims.d_readout},
                                     master.substream("init.decoder.W_f"));
  m.decoder.b_f = Tensor<T>::zeros({dims.v_tgt});
  if (with_wpe) add_wpe_head(m, master);
  if (with_wpd) add_wpd_head(m, master);
  m.set_requires_grad(true);
  return m;
}

}  // namespace nmtwp
