#include "nmtwp/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "nmtwp/rng.hpp"

namespace nmtwp {

std::vector<int> Batch::source_row(int b) const {
  std::vector<int> out;
  for (int t = 0; t < src_len; ++t)
    if (src_mask[static_cast<std::size_t>(b * src_len + t)]) out.push_back(src_at(b, t));
  return out;
}

std::vector<int> Batch::target_row(int b) const {
  std::vector<int> out;
  for (int t = 0; t < tgt_len; ++t)
    if (tgt_mask[static_cast<std::size_t>(b * tgt_len + t)]) out.push_back(tgt_at(b, t));
  return out;
}

Batch make_batch(const std::vector<SentencePair>& pairs) {
  if (pairs.empty()) throw std::invalid_argument("empty batch");
  Batch b;
  b.rows = static_cast<int>(pairs.size());
  for (const auto& p : pairs) {
    if (p.x.empty() || p.y.empty())
      throw std::invalid_argument("sentence pair with empty side in batch");
    b.src_len = std::max(b.src_len, static_cast<int>(p.x.size()));
    b.tgt_len = std::max(b.tgt_len, static_cast<int>(p.y.size()));
  }
  const std::size_t ns = static_cast<std::size_t>(b.rows) * b.src_len;
  const std::size_t nt = static_cast<std::size_t>(b.rows) * b.tgt_len;
  b.src.assign(ns, Vocabulary::kPad);
  b.tgt.assign(nt, Vocabulary::kPad);
  b.src_mask.assign(ns, 0);
  b.tgt_mask.assign(nt, 0);
  for (int i = 0; i < b.rows; ++i) {
    const auto& p = pairs[static_cast<std::size_t>(i)];
    for (std::size_t t = 0; t < p.x.size(); ++t) {
      b.src[static_cast<std::size_t>(i * b.src_len) + t] = p.x[t];
      b.src_mask[static_cast<std::size_t>(i * b.src_len) + t] = 1;
    }
    for (std::size_t t = 0; t < p.y.size(); ++t) {
      b.tgt[static_cast<std::size_t>(i * b.tgt_len) + t] = p.y[t];
      b.tgt_mask[static_cast<std::size_t>(i * b.tgt_len) + t] = 1;
    }
  }
  return b;
}

std::vector<std::vector<std::string>> read_token_lines(
    const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot read corpus file " + path);
  std::vector<std::vector<std::string>> lines;
  std::string line;
  while (std::getline(f, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::istringstream ss(line);
    std::vector<std::string> toks;
    std::string tok;
    while (ss >> tok) toks.push_back(tok);
    lines.push_back(std::move(toks));
  }
  return lines;
}

std::vector<SentencePair> encode_pairs(
    const Vocabulary& src_vocab, const Vocabulary& tgt_vocab,
    const std::vector<std::vector<std::string>>& src_lines,
    const std::vector<std::vector<std::string>>& tgt_lines) {
  if (src_lines.size() != tgt_lines.size())
    throw std::runtime_error("parallel corpus line mismatch: " +
                             std::to_string(src_lines.size()) + " vs " +
                             std::to_string(tgt_lines.size()));
  std::vector<SentencePair> pairs;
  for (std::size_t i = 0; i < src_lines.size(); ++i) {
    if (src_lines[i].empty() || tgt_lines[i].empty()) continue;
    SentencePair p;
    p.x = src_vocab.encode(src_lines[i]);
    p.y = tgt_vocab.encode(tgt_lines[i]);
    p.y.push_back(Vocabulary::kEos);
    pairs.push_back(std::move(p));
  }
  return pairs;
}

std::vector<Batch> make_batches(const std::vector<SentencePair>& pairs,
                                int batch_size, int max_len,
                                std::uint64_t shuffle_seed) {
  if (batch_size < 1) throw std::invalid_argument("batch size must be >= 1");
  std::vector<std::size_t> keep;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const auto& p = pairs[i];
    const int nx = static_cast<int>(p.x.size());
    const int ny = static_cast<int>(p.y.size()) - 1;  // EOS not a word
    if (nx > max_len || ny > max_len) continue;
    keep.push_back(i);
  }
  Rng rng(shuffle_seed);
  rng.shuffle(keep);
  std::vector<Batch> batches;
  for (std::size_t at = 0; at < keep.size(); at += static_cast<std::size_t>(batch_size)) {
    const std::size_t end = std::min(keep.size(), at + static_cast<std::size_t>(batch_size));
    std::vector<SentencePair> chunk;
    for (std::size_t i = at; i < end; ++i) chunk.push_back(pairs[keep[i]]);
    batches.push_back(make_batch(chunk));
  }
  return batches;
}

std::multiset<int> remaining_bag(const std::vector<int>& y, int j) {
  if (j < 1 || j > static_cast<int>(y.size()))
    throw std::out_of_range("remaining_bag step " + std::to_string(j) +
                            " outside 1.." + std::to_string(y.size()));
  return std::multiset<int>(y.begin() + (j - 1), y.end());
}

SynthTask parse_synth_task(const std::string& name) {
  if (name == "copy") return SynthTask::kCopy;
  if (name == "reverse") return SynthTask::kReverse;
  if (name == "digit-shift") return SynthTask::kDigitShift;
  throw std::invalid_argument("unknown synthetic task " + name);
}

std::vector<SentencePair> gen_synthetic(SynthTask task, int n, int vocab_size,
                                        int len_lo, int len_hi,
                                        std::uint64_t seed) {
  const int base = 10;
  const int min_vocab =
      task == SynthTask::kDigitShift ? Vocabulary::kNumReserved + base : 5;
  if (vocab_size < min_vocab)
    throw std::invalid_argument("vocab size " + std::to_string(vocab_size) +
                                " below task minimum " +
                                std::to_string(min_vocab));
  if (len_lo < 1 || len_hi < len_lo)
    throw std::invalid_argument("bad length range");
  const int alphabet =
      task == SynthTask::kDigitShift ? base : vocab_size - Vocabulary::kNumReserved;
  Rng rng = Rng(seed).substream("synth");
  std::vector<SentencePair> pairs;
  pairs.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const int len = rng.uniform_int(len_lo, len_hi);
    SentencePair p;
    for (int t = 0; t < len; ++t)
      p.x.push_back(Vocabulary::kNumReserved + rng.uniform_int(0, alphabet - 1));
    p.y = p.x;
    switch (task) {
      case SynthTask::kCopy:
        break;
      case SynthTask::kReverse:
        std::reverse(p.y.begin(), p.y.end());
        break;
      case SynthTask::kDigitShift:
        for (int& id : p.y) {
          const int digit = id - Vocabulary::kNumReserved;
          id = Vocabulary::kNumReserved + (digit + 1) % base;
        }
        break;
    }
    p.y.push_back(Vocabulary::kEos);
    pairs.push_back(std::move(p));
  }
  return pairs;
}

Vocabulary synthetic_vocab(int vocab_size) {
  if (vocab_size < 5) throw std::invalid_argument("vocab size below 5");
  std::vector<std::vector<std::string>> corpus(1);
  // Descending repetition pins token "k" to id 4+k under frequency ranking.
  const int alphabet = vocab_size - Vocabulary::kNumReserved;
  for (int k = 0; k < alphabet; ++k)
    for (int r = 0; r < alphabet - k; ++r)
      corpus[0].push_back(std::to_string(k));
  return Vocabulary::build(corpus, vocab_size);
}

}  // namespace nmtwp
