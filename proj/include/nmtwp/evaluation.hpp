#pragma once
// Corpus scoring: 4-gram BLEU, set precision/recall for predicted
// vocabularies, positional token accuracy, attention heatmap export.

#include <iosfwd>
#include <string>
#include <vector>

#include "nmtwp/model.hpp"
#include "nmtwp/vocab.hpp"

namespace nmtwp {

// Case-insensitive (ASCII) corpus BLEU up to 4-grams, clipped counts against
// the maximum reference count, brevity penalty from the closest reference
// length (ties go to the shorter), no smoothing: a zero n-gram precision
// zeroes the score. Returns a percentage.
double corpus_bleu(const std::vector<std::vector<std::string>>& hyps,
                   const std::vector<std::vector<std::vector<std::string>>>& refs);

// Lifts one reference per sentence into the multi-reference shape.
std::vector<std::vector<std::vector<std::string>>> as_multi_refs(
    const std::vector<std::vector<std::string>>& refs);

struct PrecisionRecall {
  double precision = 0.0;  // percentages
  double recall = 0.0;
};

// Macro-averaged set overlap between predicted target vocabularies and the
// tokens actually in the reference. PAD and BOS never count; EOS counts only
// when include_eos. Sentences whose filtered side is empty are skipped for
// that side's average.
PrecisionRecall wp_precision_recall(const std::vector<std::vector<int>>& predicted,
                                    const std::vector<std::vector<int>>& targets,
                                    bool include_eos = false);

// Mean over sentences of position-wise matches divided by the shorter
// length; two empty sequences count as a full match.
double token_accuracy(const std::vector<std::vector<int>>& hyps,
                      const std::vector<std::vector<int>>& refs);

// Tab-separated heatmap: first line the source tokens, then one line per
// target step: its label followed by the attention weights to six decimals.
void export_heatmap(std::ostream& out, const std::vector<std::string>& src_tokens,
                    const std::vector<std::string>& row_labels,
                    const std::vector<std::vector<double>>& weights);

// Ordered metric lines, serialized one per line as "name<TAB>value".
struct EvalReport {
  std::vector<std::pair<std::string, double>> entries;
  void add(const std::string& name, double value) { entries.emplace_back(name, value); }
  std::string serialize() const;
};

// Teacher-forced attention weights: one row per id in y (append the end
// token to see its row), one column per source position.
template <class T>
std::vector<std::vector<double>> attention_matrix(const ModelParams<T>& m,
                                                  const std::vector<int>& x,
                                                  const std::vector<int>& y) {
  auto enc = encode<T>(nullptr, m.encoder, x);
  Tensor<T> state = enc.s0;
  int prev = Vocabulary::kBos;
  std::vector<std::vector<double>> rows;
  for (int v : y) {
    Tensor<T> pe = row<T>(nullptr, m.decoder.emb, prev);
    auto step = decoder_step<T>(nullptr, m.decoder, state, pe, enc);
    std::vector<double> w;
    for (const T a : step.att.a.data()) w.push_back(static_cast<double>(a));
    rows.push_back(std::move(w));
    state = step.state;
    prev = v;
  }
  return rows;
}

}  // namespace nmtwp
