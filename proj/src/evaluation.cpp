#include "nmtwp/evaluation.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <map>
#include <ostream>
#include <set>
#include <stdexcept>

namespace nmtwp {

namespace {

std::string lower(const std::string& s) {
  std::string out = s;
  for (char& c : out)
    c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

// n-gram counts of a lowercased token sequence, n fixed.
std::map<std::vector<std::string>, int> ngram_counts(
    const std::vector<std::string>& toks, int n) {
  std::map<std::vector<std::string>, int> counts;
  if (static_cast<int>(toks.size()) < n) return counts;
  for (std::size_t i = 0; i + static_cast<std::size_t>(n) <= toks.size(); ++i) {
    std::vector<std::string> g(toks.begin() + static_cast<std::ptrdiff_t>(i),
                               toks.begin() + static_cast<std::ptrdiff_t>(i + static_cast<std::size_t>(n)));
    ++counts[g];
  }
  return counts;
}

}  // namespace

double corpus_bleu(const std::vector<std::vector<std::string>>& hyps,
                   const std::vector<std::vector<std::vector<std::string>>>& refs) {
  if (hyps.size() != refs.size())
    throw std::invalid_argument("hypothesis and reference counts differ");
  long long hyp_len = 0, ref_len = 0;
  long long clipped[4] = {0, 0, 0, 0};
  long long total[4] = {0, 0, 0, 0};

  for (std::size_t s = 0; s < hyps.size(); ++s) {
    if (refs[s].empty())
      throw std::invalid_argument("sentence without any reference");
    std::vector<std::string> hyp;
    for (const auto& t : hyps[s]) hyp.push_back(lower(t));
    std::vector<std::vector<std::string>> rs;
    for (const auto& r : refs[s]) {
      std::vector<std::string> lr;
      for (const auto& t : r) lr.push_back(lower(t));
      rs.push_back(std::move(lr));
    }

    hyp_len += static_cast<long long>(hyp.size());
    // Closest reference length; equal distance resolves to the shorter.
    long long best = static_cast<long long>(rs[0].size());
    for (const auto& r : rs) {
      const long long len = static_cast<long long>(r.size());
      const long long d_new = std::llabs(len - static_cast<long long>(hyp.size()));
      const long long d_old = std::llabs(best - static_cast<long long>(hyp.size()));
      if (d_new < d_old || (d_new == d_old && len < best)) best = len;
    }
    ref_len += best;

    for (int n = 1; n <= 4; ++n) {
      auto hc = ngram_counts(hyp, n);
      std::map<std::vector<std::string>, int> rc;
      for (const auto& r : rs)
        for (const auto& [g, c] : ngram_counts(r, n))
          rc[g] = std::max(rc[g], c);
      for (const auto& [g, c] : hc) {
        total[n - 1] += c;
        auto it = rc.find(g);
        if (it != rc.end()) clipped[n - 1] += std::min(c, it->second);
      }
    }
  }

  if (hyp_len == 0) return 0.0;
  double log_p = 0.0;
  for (int n = 0; n < 4; ++n) {
    if (clipped[n] == 0 || total[n] == 0) return 0.0;
    log_p += 0.25 * std::log(static_cast<double>(clipped[n]) /
                             static_cast<double>(total[n]));
  }
  const double bp =
      hyp_len > ref_len
          ? 1.0
          : std::exp(1.0 - static_cast<double>(ref_len) / static_cast<double>(hyp_len));
  return 100.0 * bp * std::exp(log_p);
}

std::vector<std::vector<std::vector<std::string>>> as_multi_refs(
    const std::vector<std::vector<std::string>>& refs) {
  std::vector<std::vector<std::vector<std::string>>> wrapped;
  wrapped.reserve(refs.size());
  for (const auto& r : refs) wrapped.push_back({r});
  return wrapped;
}

PrecisionRecall wp_precision_recall(const std::vector<std::vector<int>>& predicted,
                                    const std::vector<std::vector<int>>& targets,
                                    bool include_eos) {
  if (predicted.size() != targets.size())
    throw std::invalid_argument("prediction and target counts differ");
  auto filter = [&](const std::vector<int>& ids) {
    std::set<int> out(ids.begin(), ids.end());
    out.erase(Vocabulary::kPad);
    out.erase(Vocabulary::kBos);
    if (!include_eos) out.erase(Vocabulary::kEos);
    return out;
  };
  double p_sum = 0, r_sum = 0;
  int p_n = 0, r_n = 0;
  for (std::size_t s = 0; s < predicted.size(); ++s) {
    const std::set<int> t = filter(predicted[s]);
    const std::set<int> r = filter(targets[s]);
    std::size_t hit = 0;
    for (int v : t) hit += r.count(v);
    if (!t.empty()) {
      p_sum += static_cast<double>(hit) / static_cast<double>(t.size());
      ++p_n;
    }
    if (!r.empty()) {
      r_sum += static_cast<double>(hit) / static_cast<double>(r.size());
      ++r_n;
    }
  }
  PrecisionRecall out;
  out.precision = p_n ? 100.0 * p_sum / p_n : 0.0;
  out.recall = r_n ? 100.0 * r_sum / r_n : 0.0;
  return out;
}

double token_accuracy(const std::vector<std::vector<int>>& hyps,
                      const std::vector<std::vector<int>>& refs) {
  if (hyps.size() != refs.size())
    throw std::invalid_argument("hypothesis and reference counts differ");
  if (hyps.empty()) return 0.0;
  double acc = 0.0;
  for (std::size_t s = 0; s < hyps.size(); ++s) {
    const std::size_t n = std::min(hyps[s].size(), refs[s].size());
    if (n == 0) {
      acc += hyps[s].empty() && refs[s].empty() ? 1.0 : 0.0;
      continue;
    }
    std::size_t hit = 0;
    for (std::size_t i = 0; i < n; ++i) hit += hyps[s][i] == refs[s][i];
    acc += static_cast<double>(hit) / static_cast<double>(n);
  }
  return acc / static_cast<double>(hyps.size());
}

void export_heatmap(std::ostream& out, const std::vector<std::string>& src_tokens,
                    const std::vector<std::string>& row_labels,
                    const std::vector<std::vector<double>>& weights) {
  if (row_labels.size() != weights.size())
    throw std::invalid_argument("heatmap needs one label per row");
  for (std::size_t i = 0; i < src_tokens.size(); ++i)
    out << (i ? "\t" : "") << src_tokens[i];
  out << '\n';
  char buf[32];
  for (std::size_t r = 0; r < weights.size(); ++r) {
    if (weights[r].size() != src_tokens.size())
      throw std::invalid_argument("heatmap row width does not match the source");
    out << row_labels[r];
    for (double w : weights[r]) {
      std::snprintf(buf, sizeof(buf), "%.6f", w);
      out << '\t' << buf;
    }
    out << '\n';
  }
}

std::string EvalReport::serialize() const {
  std::string out;
  char buf[64];
  for (const auto& [name, value] : entries) {
    std::snprintf(buf, sizeof(buf), "%.6f", value);
    out += name;
    out += '\t';
    out += buf;
    out += '\n';
  }
  return out;
}

}  // namespace nmtwp
