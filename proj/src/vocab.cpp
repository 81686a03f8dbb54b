#include "nmtwp/vocab.hpp"

#include <algorithm>
#include <fstream>
#include <stdexcept>

namespace nmtwp {

namespace {
const char* kReserved[Vocabulary::kNumReserved] = {"<pad>", "<unk>", "<bos>",
                                                   "<eos>"};
}

Vocabulary::Vocabulary() {
  for (const char* t : kReserved) push(t, 0);
}

void Vocabulary::push(const std::string& token, long long freq) {
  index_.emplace(token, static_cast<int>(tokens_.size()));
  tokens_.push_back(token);
  freqs_.push_back(freq);
}

Vocabulary Vocabulary::build(
    const std::vector<std::vector<std::string>>& corpus, int max_size) {
  if (max_size < kNumReserved)
    throw std::invalid_argument("vocabulary max size " +
                                std::to_string(max_size) + " below reserved " +
                                std::to_string(kNumReserved));
  std::vector<std::string> order;  // first-occurrence order
  std::unordered_map<std::string, long long> counts;
  for (const auto& line : corpus)
    for (const auto& tok : line) {
      auto it = counts.find(tok);
      if (it == counts.end()) {
        counts.emplace(tok, 1);
        order.push_back(tok);
      } else {
        ++it->second;
      }
    }
  if (order.empty()) throw std::runtime_error("empty corpus");

  // Stable sort over first-occurrence order gives the tie rule for free.
  std::stable_sort(order.begin(), order.end(),
                   [&](const std::string& a, const std::string& b) {
                     return counts[a] > counts[b];
                   });

  Vocabulary v;
  v.max_size_ = max_size;
  for (const auto& tok : order) {
    if (v.size() >= max_size) break;
    if (v.index_.count(tok)) continue;  // literal reserved spelling in data
    v.push(tok, counts[tok]);
  }
  return v;
}

int Vocabulary::id(const std::string& token) const {
  auto it = index_.find(token);
  return it == index_.end() ? kUnk : it->second;
}

bool Vocabulary::contains(const std::string& token) const {
  return index_.count(token) != 0;
}

const std::string& Vocabulary::token(int id) const {
  if (id < 0 || id >= size())
    throw std::out_of_range("token id " + std::to_string(id) +
                            " outside vocabulary of size " +
                            std::to_string(size()));
  return tokens_[static_cast<std::size_t>(id)];
}

std::vector<int> Vocabulary::encode(
    const std::vector<std::string>& tokens) const {
  std::vector<int> ids;
  ids.reserve(tokens.size());
  for (const auto& t : tokens) ids.push_back(id(t));
  return ids;
}

std::vector<std::string> Vocabulary::decode(const std::vector<int>& ids) const {
  std::vector<std::string> out;
  out.reserve(ids.size());
  for (int i : ids) out.push_back(token(i));
  return out;
}

void Vocabulary::save(const std::string& path) const {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write vocabulary file " + path);
  for (int i = 0; i < size(); ++i)
    f << tokens_[static_cast<std::size_t>(i)] << '\t'
      << freqs_[static_cast<std::size_t>(i)] << '\n';
  if (!f) throw std::runtime_error("failed writing vocabulary file " + path);
}

Vocabulary Vocabulary::load(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot read vocabulary file " + path);
  Vocabulary v;
  std::string line;
  int lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    if (line.empty()) continue;
    auto tab = line.find('\t');
    if (tab == std::string::npos)
      throw std::runtime_error("vocabulary file " + path + " line " +
                               std::to_string(lineno) + ": missing tab");
    std::string tok = line.substr(0, tab);
    long long freq = std::stoll(line.substr(tab + 1));
    if (lineno <= kNumReserved) {
      if (tok != kReserved[lineno - 1])
        throw std::runtime_error("vocabulary file " + path + " line " +
                                 std::to_string(lineno) +
                                 ": expected reserved token " +
                                 kReserved[lineno - 1] + ", got " + tok);
      v.freqs_[static_cast<std::size_t>(lineno - 1)] = freq;
    } else {
      if (v.index_.count(tok))
        throw std::runtime_error("vocabulary file " + path + " line " +
                                 std::to_string(lineno) + ": duplicate token " +
                                 tok);
      v.push(tok, freq);
    }
  }
  if (v.size() < kNumReserved)
    throw std::runtime_error("vocabulary file " + path +
                             " missing reserved tokens");
  v.max_size_ = std::max(v.size(), v.max_size_);
  return v;
}

}  // namespace nmtwp
