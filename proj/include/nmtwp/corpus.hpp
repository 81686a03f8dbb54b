#pragma once
// Parallel corpus loading, padded batching, and synthetic task generation.

#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include "nmtwp/vocab.hpp"

namespace nmtwp {

struct SentencePair {
  std::vector<int> x;  // source ids
  std::vector<int> y;  // target ids, EOS-terminated
};

// Padded id matrices with 0/1 masks; rows are sentences. Immutable once
// built, so batches can be shared freely.
struct Batch {
  int rows = 0;
  int src_len = 0;
  int tgt_len = 0;
  std::vector<int> src, tgt;          // row-major [rows x len], PAD-filled
  std::vector<int> src_mask, tgt_mask;

  int src_at(int b, int t) const { return src[static_cast<std::size_t>(b * src_len + t)]; }
  int tgt_at(int b, int t) const { return tgt[static_cast<std::size_t>(b * tgt_len + t)]; }

  // Unpadded id sequences recovered from the mask.
  std::vector<int> source_row(int b) const;
  std::vector<int> target_row(int b) const;
};

Batch make_batch(const std::vector<SentencePair>& pairs);

// Whitespace-tokenized lines; empty lines become empty token vectors.
std::vector<std::vector<std::string>> read_token_lines(const std::string& path);

// Encode aligned lines, appending EOS to each target. Pairs with an empty
// side are dropped. Line-count mismatch is an error.
std::vector<SentencePair> encode_pairs(
    const Vocabulary& src_vocab, const Vocabulary& tgt_vocab,
    const std::vector<std::vector<std::string>>& src_lines,
    const std::vector<std::vector<std::string>>& tgt_lines);

// Drops pairs longer than max_len words on either side (target EOS not
// counted), shuffles by seed, chunks; the final short batch is kept.
std::vector<Batch> make_batches(const std::vector<SentencePair>& pairs,
                                int batch_size, int max_len,
                                std::uint64_t shuffle_seed);

// Multiset {y_j .. y_|y|} for 1-based j: the still-untranslated suffix.
std::multiset<int> remaining_bag(const std::vector<int>& y, int j);

enum class SynthTask { kCopy, kReverse, kDigitShift };
SynthTask parse_synth_task(const std::string& name);

// Pairs over the canonical synthetic vocabulary (id 4+k = token "k").
// digit-shift maps digit k to (k+1) mod 10 and needs vocab_size >= 14;
// copy/reverse draw from the full non-reserved range and need >= 5.
std::vector<SentencePair> gen_synthetic(SynthTask task, int n, int vocab_size,
                                        int len_lo, int len_hi,
                                        std::uint64_t seed);

// The vocabulary gen_synthetic ids refer to.
Vocabulary synthetic_vocab(int vocab_size);

}  // namespace nmtwp
