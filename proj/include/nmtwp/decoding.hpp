#pragma once
// Beam search over one model or an ensemble, with an optional restricted
// output vocabulary applied either as an additive logit mask or by slicing
// the projection rows down to the allowed set.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <string>
#include <vector>

#include "nmtwp/model.hpp"
#include "nmtwp/word_prediction.hpp"

namespace nmtwp {

struct DecodeOptions {
  int beam = 5;
  int max_len = 0;    // emitted tokens cap, 0 means 2|x| + 10
  int vocab_n = 0;    // restrict to the n predicted targets, 0 means full
  bool sliced = false;  // slice projection rows instead of masking logits
};

// Allowed target ids, ascending and unique. The end token is always kept so
// decoding can terminate.
struct VocabMask {
  int vocab = 0;
  std::vector<int> allowed;

  VocabMask(int vocab_size, std::vector<int> ids) : vocab(vocab_size) {
    ids.push_back(Vocabulary::kEos);
    std::sort(ids.begin(), ids.end());
    ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
    for (int v : ids)
      if (v < 0 || v >= vocab_size)
        throw std::out_of_range("mask id " + std::to_string(v) +
                                " outside vocabulary of " +
                                std::to_string(vocab_size));
    allowed = std::move(ids);
  }
};

// Additive logit bias: 0 on allowed ids, a large negative value elsewhere,
// which underflows to exactly zero probability after the softmax.
template <class T>
Tensor<T> mask_bias(const VocabMask& mask) {
  Tensor<T> bias = Tensor<T>::zeros({mask.vocab});
  auto& d = bias.data();
  std::fill(d.begin(), d.end(), static_cast<T>(-1e9));
  for (int v : mask.allowed) d[static_cast<std::size_t>(v)] = T(0);
  return bias;
}

struct BeamResult {
  std::vector<int> ids;  // emitted tokens, end token stripped
  double log_prob = 0.0;
  bool reached_limit = false;  // no hypothesis finished within max_len
};

struct DecodeStats {
  int sentences = 0;
  double total_ms = 0.0;
  double output_proj_ms = 0.0;
  int vocab_n = 0;

  // "sentences  total_ms  output_proj_ms  vocab_n", tab separated.
  std::string line() const {
    char buf[128];
    std::snprintf(buf, sizeof(buf), "%d\t%.3f\t%.3f\t%d", sentences, total_ms,
                  output_proj_ms, vocab_n);
    return buf;
  }
};

namespace detail {

inline double ms_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(
             std::chrono::steady_clock::now() - t0)
      .count();
}

template <class T>
struct BeamModel {
  const ModelParams<T>* m;
  EncoderOutput<T> enc;
  Tensor<T> bias;        // masked path
  Tensor<T> W_fA, b_fA;  // sliced path
};

template <class T>
struct Hyp {
  std::vector<int> ids;
  double lp = 0.0;
  std::vector<Tensor<T>> states;  // one per ensemble member
  int prev = Vocabulary::kBos;
};

struct Scored {
  double lp;
  const std::vector<int>* ids;
  int token;  // -1 compares before any real expansion
};

inline bool better(const Scored& a, const Scored& b) {
  if (a.lp != b.lp) return a.lp > b.lp;
  const auto& x = *a.ids;
  const auto& y = *b.ids;
  const std::size_t n = std::min(x.size(), y.size());
  for (std::size_t i = 0; i < n; ++i)
    if (x[i] != y[i]) return x[i] < y[i];
  if (x.size() != y.size()) return x.size() < y.size();
  return a.token < b.token;
}

}  // namespace detail

// Width-limited search, no length normalization, exact log-probability ties
// broken toward the lexicographically smaller id sequence. Ensemble members
// keep their own recurrent state; their probability vectors are averaged.
template <class T>
BeamResult beam_search(const std::vector<const ModelParams<T>*>& models,
                       const std::vector<int>& x, const DecodeOptions& opt,
                       const VocabMask* mask = nullptr,
                       DecodeStats* stats = nullptr) {
  if (models.empty()) throw std::invalid_argument("beam search needs a model");
  if (opt.beam < 1) throw std::invalid_argument("beam width must be >= 1");
  const ModelDims dims = models[0]->dims;
  for (const auto* m : models)
    if (m->dims.v_src != dims.v_src || m->dims.v_tgt != dims.v_tgt)
      throw std::invalid_argument("ensemble models disagree on vocabulary sizes");
  if (mask && mask->vocab != dims.v_tgt)
    throw std::invalid_argument("vocabulary mask size does not match the model");

  const auto t_start = std::chrono::steady_clock::now();
  const int max_len = opt.max_len > 0
                          ? opt.max_len
                          : 2 * static_cast<int>(x.size()) + 10;
  const int K = static_cast<int>(models.size());
  const bool slice = opt.sliced && mask;

  std::vector<detail::BeamModel<T>> bm;
  for (const auto* m : models) {
    detail::BeamModel<T> b{m, encode<T>(nullptr, m->encoder, x), {}, {}, {}};
    if (mask && !slice) b.bias = mask_bias<T>(*mask);
    if (slice) {
      b.W_fA = take_rows<T>(nullptr, m->decoder.W_f, mask->allowed);
      b.b_fA = take<T>(nullptr, m->decoder.b_f, mask->allowed);
    }
    bm.push_back(std::move(b));
  }

  // Token slots scored each step: either the whole vocabulary or the sliced
  // allowed list; slot i maps to token ids[i].
  const std::vector<int>* slot_ids = nullptr;
  std::vector<int> full_ids;
  if (slice) {
    slot_ids = &mask->allowed;
  } else {
    full_ids.resize(static_cast<std::size_t>(dims.v_tgt));
    for (int i = 0; i < dims.v_tgt; ++i) full_ids[static_cast<std::size_t>(i)] = i;
    slot_ids = &full_ids;
  }

  std::vector<detail::Hyp<T>> beam(1);
  for (int k = 0; k < K; ++k) beam[0].states.push_back(bm[static_cast<std::size_t>(k)].enc.s0);

  struct Finished {
    std::vector<int> ids;
    double lp;
  };
  std::vector<Finished> pool;
  double proj_ms = 0.0;

  for (int t = 1; t <= max_len && !beam.empty(); ++t) {
    struct Child {
      double lp;
      int source;  // index into beam
      int token;
    };
    std::vector<Child> children;
    std::vector<std::vector<Tensor<T>>> new_states(beam.size());
    std::vector<double> mean_p(slot_ids->size());

    for (std::size_t h = 0; h < beam.size(); ++h) {
      auto& hyp = beam[h];
      std::fill(mean_p.begin(), mean_p.end(), 0.0);
      for (int k = 0; k < K; ++k) {
        auto& b = bm[static_cast<std::size_t>(k)];
        Tensor<T> pe = row<T>(nullptr, b.m->decoder.emb, hyp.prev);
        auto step = decoder_step<T>(nullptr, b.m->decoder,
                                    hyp.states[static_cast<std::size_t>(k)], pe, b.enc);
        Tensor<T> u = output_readout<T>(nullptr, b.m->decoder, step.state, pe,
                                        step.att.c);
        const auto t0 = std::chrono::steady_clock::now();
        Tensor<T> logits = slice ? affine<T>(nullptr, b.W_fA, u, b.b_fA)
                                 : output_logits<T>(nullptr, b.m->decoder, u);
        if (mask && !slice) logits = add<T>(nullptr, logits, b.bias);
        Tensor<T> p = softmax<T>(nullptr, logits);
        proj_ms += detail::ms_since(t0);
        const auto& pd = p.data();
        for (std::size_t i = 0; i < mean_p.size(); ++i)
          mean_p[i] += static_cast<double>(pd[i]) / K;
        new_states[h].push_back(step.state);
      }
      for (std::size_t i = 0; i < mean_p.size(); ++i) {
        if (mean_p[i] <= 0.0) continue;
        children.push_back({hyp.lp + std::log(mean_p[i]), static_cast<int>(h),
                            (*slot_ids)[i]});
      }
    }

    std::sort(children.begin(), children.end(), [&](const Child& a, const Child& b) {
      return detail::better({a.lp, &beam[static_cast<std::size_t>(a.source)].ids, a.token},
                            {b.lp, &beam[static_cast<std::size_t>(b.source)].ids, b.token});
    });
    if (static_cast<int>(children.size()) > opt.beam)
      children.resize(static_cast<std::size_t>(opt.beam));

    std::vector<detail::Hyp<T>> next;
    for (const Child& c : children) {
      const auto& parent = beam[static_cast<std::size_t>(c.source)];
      if (c.token == Vocabulary::kEos) {
        pool.push_back({parent.ids, c.lp});
      } else {
        detail::Hyp<T> h;
        h.ids = parent.ids;
        h.ids.push_back(c.token);
        h.lp = c.lp;
        h.states = new_states[static_cast<std::size_t>(c.source)];
        h.prev = c.token;
        next.push_back(std::move(h));
      }
    }
    beam = std::move(next);

    if (!pool.empty() && !beam.empty()) {
      double best_pool = pool[0].lp, best_live = beam[0].lp;
      for (const auto& f : pool) best_pool = std::max(best_pool, f.lp);
      for (const auto& h : beam) best_live = std::max(best_live, h.lp);
      // Extending can only lower a score, so strictly worse live paths are done;
      // equal scores keep running so ties resolve on token ids.
      if (best_live < best_pool) break;
    }
  }

  BeamResult out;
  if (!pool.empty()) {
    const Finished* best = &pool[0];
    for (const auto& f : pool)
      if (detail::better({f.lp, &f.ids, -1}, {best->lp, &best->ids, -1})) best = &f;
    out.ids = best->ids;
    out.log_prob = best->lp;
  } else {
    if (beam.empty()) throw std::runtime_error("beam emptied without a finished hypothesis");
    const detail::Hyp<T>* best = &beam[0];
    for (const auto& h : beam)
      if (detail::better({h.lp, &h.ids, -1}, {best->lp, &best->ids, -1})) best = &h;
    out.ids = best->ids;
    out.log_prob = best->lp;
    out.reached_limit = true;
  }

  if (stats) {
    stats->sentences += 1;
    stats->total_ms += detail::ms_since(t_start);
    stats->output_proj_ms += proj_ms;
    stats->vocab_n = opt.vocab_n;
  }
  return out;
}

template <class T>
BeamResult beam_search(const ModelParams<T>& m, const std::vector<int>& x,
                       const DecodeOptions& opt, const VocabMask* mask = nullptr,
                       DecodeStats* stats = nullptr) {
  return beam_search<T>({&m}, x, opt, mask, stats);
}

template <class T>
BeamResult greedy_decode(const ModelParams<T>& m, const std::vector<int>& x,
                         int max_len = 0) {
  DecodeOptions opt;
  opt.beam = 1;
  opt.max_len = max_len;
  return beam_search<T>(m, x, opt);
}

template <class T>
struct CorpusDecode {
  std::vector<BeamResult> results;
  DecodeStats stats;
  int unfinished = 0;
};

// Decode every source sentence; with vocab_n set, each sentence gets its own
// predicted vocabulary from the ensemble members that carry a predictor.
template <class T>
CorpusDecode<T> translate_corpus(const std::vector<const ModelParams<T>*>& models,
                                 const std::vector<std::vector<int>>& sources,
                                 const DecodeOptions& opt) {
  if (models.empty()) throw std::invalid_argument("translation needs a model");
  CorpusDecode<T> out;
  if (opt.vocab_n > 0) {
    bool any = false;
    for (const auto* m : models) any |= m->has_wpe;
    if (!any)
      throw std::invalid_argument(
          "restricted decoding needs a model with a target predictor");
  }
  for (const auto& x : sources) {
    BeamResult r;
    if (opt.vocab_n > 0) {
      std::vector<int> ids;
      for (const auto* m : models) {
        if (!m->has_wpe) continue;
        auto enc = encode<T>(nullptr, m->encoder, x);
        auto p = predict_vocabulary<T>(*m, enc, opt.vocab_n);
        ids.insert(ids.end(), p.begin(), p.end());
      }
      VocabMask mask(models[0]->dims.v_tgt, std::move(ids));
      r = beam_search<T>(models, x, opt, &mask, &out.stats);
    } else {
      r = beam_search<T>(models, x, opt, nullptr, &out.stats);
    }
    out.unfinished += r.reached_limit;
    out.results.push_back(std::move(r));
  }
  return out;
}

}  // namespace nmtwp
