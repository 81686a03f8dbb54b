#pragma once
// Token <-> id bijection with four reserved specials at ids 0..3.

#include <string>
#include <unordered_map>
#include <vector>

namespace nmtwp {

class Vocabulary {
 public:
  static constexpr int kPad = 0;
  static constexpr int kUnk = 1;
  static constexpr int kBos = 2;
  static constexpr int kEos = 3;
  static constexpr int kNumReserved = 4;

  Vocabulary();  // reserved tokens only

  // Most frequent tokens first, ties broken by first occurrence in the
  // stream; the cap counts the four reserved entries.
  static Vocabulary build(const std::vector<std::vector<std::string>>& corpus,
                          int max_size = 30000);

  int size() const { return static_cast<int>(tokens_.size()); }
  int max_size() const { return max_size_; }

  int id(const std::string& token) const;  // kUnk when absent
  const std::string& token(int id) const;  // throws on out-of-range id
  bool contains(const std::string& token) const;

  std::vector<int> encode(const std::vector<std::string>& tokens) const;
  std::vector<std::string> decode(const std::vector<int>& ids) const;

  // One `token<TAB>frequency` line per entry, rank order.
  void save(const std::string& path) const;
  static Vocabulary load(const std::string& path);

 private:
  std::vector<std::string> tokens_;
  std::vector<long long> freqs_;
  std::unordered_map<std::string, int> index_;
  int max_size_ = 30000;

  void push(const std::string& token, long long freq);
};

}  // namespace nmtwp
