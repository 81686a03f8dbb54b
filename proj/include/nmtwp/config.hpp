#pragma once
// Flat key-value run configuration: file plus command-line overrides, a
// closed key registry, typed getters, and a resolved dump for run logs.

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace nmtwp {

class RunConfig {
 public:
  RunConfig();

  // `key = value` lines, '#' starts a comment, blank lines ignored.
  void load_file(const std::string& path);

  // `--key value` pairs; `--ensemble` greedily takes every following value
  // up to the next flag. Later sources win, so call after load_file.
  void apply_args(const std::vector<std::string>& args);

  void set(const std::string& key, const std::string& value);

  bool known(const std::string& key) const;
  const std::string& get(const std::string& key) const;
  int get_int(const std::string& key) const;
  std::uint64_t get_u64(const std::string& key) const;
  double get_double(const std::string& key) const;
  bool get_bool(const std::string& key) const;
  std::vector<std::string> get_list(const std::string& key) const;

  // Every known key with its effective value, one `key = value` line each,
  // in registry order.
  std::string resolved() const;

 private:
  std::map<std::string, std::string> values_;
};

}  // namespace nmtwp
