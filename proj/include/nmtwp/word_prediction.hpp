#pragma once
// Word-prediction heads. WP_E reads only the encoder (one position-free
// distribution per sentence); WP_D rides on the decoder readout and shares
// the decoder's output projection.

#include <algorithm>
#include <vector>

#include "nmtwp/model.hpp"

namespace nmtwp {

// Attention over the source representation queried by the initial state.
template <class T>
AttentionResult<T> wpe_context(Tape<T>* tape, const WpeParams<T>& p,
                               const EncoderOutput<T>& enc) {
  return attention(tape, p.att, enc.s0, enc);
}

template <class T>
Tensor<T> wpe_logits(Tape<T>* tape, const WpeParams<T>& p,
                     const EncoderOutput<T>& enc) {
  Tensor<T> cp = wpe_context(tape, p, enc).c;
  Tensor<T> t = tanh(tape, affine(tape, p.W_t, concat(tape, {enc.s0, cp}), p.b_t));
  return affine(tape, p.W_f, t, p.b_f);
}

template <class T>
Tensor<T> wpe_distribution(Tape<T>* tape, const WpeParams<T>& p,
                           const EncoderOutput<T>& enc) {
  return softmax(tape, wpe_logits(tape, p, enc));
}

// Sum of per-token log-probs under the one shared distribution; duplicates
// count with multiplicity and EOS is a target like any other.
template <class T>
Tensor<T> wpe_log_prob(Tape<T>* tape, const WpeParams<T>& p,
                       const EncoderOutput<T>& enc, const std::vector<int>& y) {
  if (y.empty()) throw std::invalid_argument("wpe_log_prob of empty target");
  Tensor<T> lp = log_softmax(tape, wpe_logits(tape, p, enc));
  std::vector<Tensor<T>> terms;
  terms.reserve(y.size());
  for (int tok : y) terms.push_back(pick(tape, lp, tok));
  return sum(tape, stack(tape, terms));
}

// The decoder's own readout passed through the square tanh map, then the
// decoder's output projection.
template <class T>
Tensor<T> wpd_logits(Tape<T>* tape, const DecoderParams<T>& dec,
                     const WpdParams<T>& wpd, const Tensor<T>& state,
                     const Tensor<T>& prev_emb, const Tensor<T>& context) {
  Tensor<T> u = output_readout(tape, dec, state, prev_emb, context);
  Tensor<T> p = tanh(tape, affine(tape, wpd.W_p, u, wpd.b_p));
  return output_logits(tape, dec, p);
}

template <class T>
Tensor<T> wpd_distribution(Tape<T>* tape, const DecoderParams<T>& dec,
                           const WpdParams<T>& wpd, const Tensor<T>& state,
                           const Tensor<T>& prev_emb, const Tensor<T>& context) {
  return softmax(tape, wpd_logits(tape, dec, wpd, state, prev_emb, context));
}

// Score of the positional suffix y_j..y_|y| under the single step-j
// distribution (1-based j).
template <class T>
Tensor<T> wpd_log_prob(Tape<T>* tape, const DecoderParams<T>& dec,
                       const WpdParams<T>& wpd, const Tensor<T>& state,
                       const Tensor<T>& prev_emb, const Tensor<T>& context,
                       const std::vector<int>& y, int j) {
  if (j < 1 || j > static_cast<int>(y.size()))
    throw std::out_of_range("wpd_log_prob step " + std::to_string(j) +
                            " outside 1.." + std::to_string(y.size()));
  Tensor<T> lp = log_softmax(tape, wpd_logits(tape, dec, wpd, state, prev_emb, context));
  std::vector<Tensor<T>> terms;
  for (std::size_t k = static_cast<std::size_t>(j - 1); k < y.size(); ++k)
    terms.push_back(pick(tape, lp, y[k]));
  return sum(tape, stack(tape, terms));
}

// Ids ranked by probability, ties to the lower id.
template <class T>
std::vector<int> ranked_ids(const Tensor<T>& dist) {
  std::vector<int> order(static_cast<std::size_t>(dist.numel()));
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return dist.data()[static_cast<std::size_t>(a)] > dist.data()[static_cast<std::size_t>(b)];
  });
  return order;
}

// Top-n WP_E ids plus the always-allowed specials, sorted ascending.
template <class T>
std::vector<int> predict_vocabulary(const ModelParams<T>& m,
                                    const EncoderOutput<T>& enc, int n) {
  if (!m.has_wpe) throw std::logic_error("predict_vocabulary without a WP_E head");
  if (n < 1) throw std::invalid_argument("predicted vocabulary size must be >= 1");
  n = std::min(n, m.dims.v_tgt);
  Tensor<T> dist = wpe_distribution<T>(nullptr, m.wpe, enc);
  std::vector<int> order = ranked_ids(dist);
  std::vector<int> out(order.begin(), order.begin() + n);
  for (int forced : {Vocabulary::kPad, Vocabulary::kUnk, Vocabulary::kBos,
                     Vocabulary::kEos})
    if (std::find(out.begin(), out.end(), forced) == out.end())
      out.push_back(forced);
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace nmtwp
