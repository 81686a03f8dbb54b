#include "nmtwp/config.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

namespace nmtwp {

namespace {

struct KeyDef {
  const char* name;
  const char* fallback;
};

// The closed registry; anything else is a configuration error.
const std::vector<KeyDef>& registry() {
  static const std::vector<KeyDef> keys = {
      {"objective", "base"},    // base | L1 | L2 | L3
      {"seed", "1"},
      {"batch", "32"},
      {"epochs", "10"},
      {"max-len", "50"},        // sentence length cap for training batches
      {"dropout", "0.5"},
      {"clip", "1.0"},
      {"patience", "3"},
      {"pretrain", ""},
      {"freeze-base", "false"},
      {"dim.emb", "512"},
      {"dim.hid", "1024"},
      {"dim.att", "0"},         // 0 follows dim.hid
      {"dim.readout", "512"},
      {"vocab-size", "30000"},
      {"beam", "5"},
      {"vocab-n", "0"},         // restricted decoding size, 0 = full
      {"max-out", "0"},         // emitted-token cap, 0 = 2|x|+10
      {"sliced", "true"},       // slice the projection when vocab-n is set
      {"eval.include-eos", "false"},
      {"train-src", ""},
      {"train-tgt", ""},
      {"val-src", ""},
      {"val-tgt", ""},
      {"src-vocab", ""},
      {"tgt-vocab", ""},
      {"out", ""},              // training output directory
      {"input", ""},            // source text to translate / predict for
      {"output", ""},
      {"model", ""},            // checkpoint path
      {"ensemble", ""},         // space-separated checkpoint list
      {"hyp", ""},
      {"ref", ""},
      {"report", ""},
      {"heatmap", ""},          // attention dump path for translate
      {"timing", ""},           // timing report path for translate
      {"task", "copy"},         // synthetic task name
      {"n", "1000"},            // synthetic pair count
      {"len-lo", "3"},
      {"len-hi", "8"},
      {"out-src", ""},
      {"out-tgt", ""},
  };
  return keys;
}

std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

}  // namespace

RunConfig::RunConfig() {
  for (const auto& k : registry()) values_[k.name] = k.fallback;
}

bool RunConfig::known(const std::string& key) const {
  return values_.count(key) != 0;
}

void RunConfig::set(const std::string& key, const std::string& value) {
  if (!known(key))
    throw std::invalid_argument("unknown configuration key: " + key);
  values_[key] = value;
}

void RunConfig::load_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot read config file " + path);
  std::string line;
  int lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw std::runtime_error(path + ":" + std::to_string(lineno) +
                               ": expected `key = value`");
    set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
}

void RunConfig::apply_args(const std::vector<std::string>& args) {
  std::size_t i = 0;
  while (i < args.size()) {
    const std::string& a = args[i];
    if (a.rfind("--", 0) != 0)
      throw std::invalid_argument("expected --key, got: " + a);
    const std::string key = a.substr(2);
    if (key == "ensemble") {
      std::string joined;
      ++i;
      while (i < args.size() && args[i].rfind("--", 0) != 0) {
        if (!joined.empty()) joined += ' ';
        joined += args[i++];
      }
      if (joined.empty())
        throw std::invalid_argument("--ensemble needs at least one checkpoint");
      set(key, joined);
      continue;
    }
    if (i + 1 >= args.size())
      throw std::invalid_argument("--" + key + " needs a value");
    set(key, args[i + 1]);
    i += 2;
  }
}

const std::string& RunConfig::get(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end())
    throw std::invalid_argument("unknown configuration key: " + key);
  return it->second;
}

int RunConfig::get_int(const std::string& key) const {
  const std::string& v = get(key);
  try {
    std::size_t used = 0;
    const int out = std::stoi(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return out;
  } catch (const std::exception&) {
    throw std::invalid_argument(key + " is not an integer: " + v);
  }
}

std::uint64_t RunConfig::get_u64(const std::string& key) const {
  const std::string& v = get(key);
  try {
    std::size_t used = 0;
    const std::uint64_t out = std::stoull(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return out;
  } catch (const std::exception&) {
    throw std::invalid_argument(key + " is not a non-negative integer: " + v);
  }
}

double RunConfig::get_double(const std::string& key) const {
  const std::string& v = get(key);
  try {
    std::size_t used = 0;
    const double out = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return out;
  } catch (const std::exception&) {
    throw std::invalid_argument(key + " is not a number: " + v);
  }
}

bool RunConfig::get_bool(const std::string& key) const {
  const std::string& v = get(key);
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw std::invalid_argument(key + " is not a boolean (true/false/1/0): " + v);
}

std::vector<std::string> RunConfig::get_list(const std::string& key) const {
  std::istringstream ss(get(key));
  std::vector<std::string> out;
  std::string item;
  while (ss >> item) out.push_back(item);
  return out;
}

std::string RunConfig::resolved() const {
  std::string out;
  for (const auto& k : registry()) {
    out += k.name;
    out += " = ";
    out += values_.at(k.name);
    out += '\n';
  }
  return out;
}

}  // namespace nmtwp
