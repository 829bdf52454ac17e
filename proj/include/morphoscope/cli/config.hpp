#pragma once

// Run configuration: a flat `key = value` file over a fixed key table, plus
// the provenance manifest written next to every run's outputs.

#include "morphoscope/errors.hpp"
#include "morphoscope/report.hpp"

#include <openssl/evp.h>

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace morphoscope::cli {

enum class KeyKind { Path, Int, Real, Bool, Text };

struct KeySpec {
  std::string_view key;
  KeyKind kind;
  std::string_view fallback;
  std::string_view help;
};

// Every key a config file may set, in emission order.
inline const std::vector<KeySpec>& config_keys() {
  static const std::vector<KeySpec> kKeys = {
      {"corpus", KeyKind::Path, "", "plain-text training corpus (UTF-8)"},
      {"words", KeyKind::Path, "", "dictionary word list, one word per line"},
      {"conllu", KeyKind::Path, "", "CoNLL-U treebank for the tagging probe"},
      {"seg", KeyKind::Path, "", "gold segmentation file (word<TAB>analysis)"},
      {"lm", KeyKind::Path, "", "language-model checkpoint"},
      {"probe", KeyKind::Path, "", "probe checkpoint"},
      {"tagger", KeyKind::Path, "", "tagging-probe checkpoint used by the suffix experiment"},
      {"bases", KeyKind::Path, "", "nonce-base file"},
      {"thresholds", KeyKind::Path, "", "real-word filter statistics (JSON)"},
      {"out", KeyKind::Path, "out", "output directory"},
      {"seed", KeyKind::Int, "1", "random seed"},
      {"train.embed", KeyKind::Int, "64", "character embedding size"},
      {"train.hidden", KeyKind::Int, "256", "LSTM hidden units"},
      {"train.lr", KeyKind::Real, "0.003", "Adam learning rate"},
      {"train.batch", KeyKind::Int, "50", "parallel stream lanes per update"},
      {"train.dropout", KeyKind::Real, "0.2", "input dropout probability"},
      {"train.bptt", KeyKind::Int, "100", "truncated BPTT length"},
      {"train.epochs", KeyKind::Int, "10", "maximum epochs"},
      {"train.patience", KeyKind::Int, "2", "epochs without dev improvement before stopping"},
      {"train.clip", KeyKind::Real, "5", "global gradient-norm clip"},
      {"train.split", KeyKind::Real, "0.9", "training fraction of the character stream"},
      {"train.save_epochs", KeyKind::Bool, "false", "also write a checkpoint after every epoch"},
      {"sample.length", KeyKind::Int, "1000", "characters to sample"},
      {"sample.temperature", KeyKind::Real, "1", "softmax temperature"},
      {"sample.prefix", KeyKind::Text, "", "text consumed before sampling"},
      {"sample.count", KeyKind::Int, "2000", "complete words sampled for the nonce rate"},
      {"units.k", KeyKind::Int, "5", "top activations kept per unit"},
      {"units.window", KeyKind::Int, "13", "context characters shown before a trigger"},
      {"units.unit", KeyKind::Int, "0", "hidden unit to trace or correlate"},
      {"units.query", KeyKind::Text, "", "text to trace"},
      {"units.limit", KeyKind::Int, "0", "use only the first N corpus characters (0 = all)"},
      {"probe.hidden", KeyKind::Int, "256", "probe LSTM hidden units"},
      {"probe.epochs", KeyKind::Int, "5", "probe training epochs"},
      {"probe.lr", KeyKind::Real, "0.003", "probe Adam learning rate"},
      {"probe.batch", KeyKind::Int, "32", "probe minibatch size"},
      {"probe.split", KeyKind::Real, "0.9", "training fraction of types or sentences"},
      {"probe.occurrences", KeyKind::Int, "15", "corpus contexts per segmentation type"},
      {"probe.window", KeyKind::Int, "15", "context tokens before each word"},
      {"probe.text", KeyKind::Text, "", "text whose tag evolution is traced"},
      {"suffix.per_category", KeyKind::Int, "50", "nonce bases wanted per category"},
      {"suffix.budget", KeyKind::Int, "1000000", "sampled-word budget for the base search"},
      {"suffix.temperature", KeyKind::Real, "1", "sampling temperature for the base search"},
      {"suffix.reference", KeyKind::Int, "1000", "real-word occurrences sampled for filter statistics"},
      {"suffix.window", KeyKind::Int, "15", "context tokens kept with each base"},
  };
  return kKeys;
}

inline const KeySpec* find_key(std::string_view key) {
  for (const auto& k : config_keys()) {
    if (k.key == key) {
      return &k;
    }
  }
  return nullptr;
}

inline std::string trim_ws(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) {
    return {};
  }
  const auto last = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(first, last - first + 1));
}

// Checks that `value` reads as the key's kind; returns the canonical text.
inline std::string canonical_value(const KeySpec& spec, const std::string& value) {
  auto bad = [&](const char* what) {
    return FormatError("config: " + std::string(spec.key) + " = '" + value + "' is not " + what);
  };
  switch (spec.kind) {
    case KeyKind::Int: {
      if (value.empty() || value.find_first_not_of("0123456789") != std::string::npos) {
        throw bad("a non-negative integer");
      }
      try {
        return std::to_string(std::stoull(value));
      } catch (const std::out_of_range&) {
        throw bad("a 64-bit integer");
      }
    }
    case KeyKind::Real: {
      std::size_t used = 0;
      double x = 0;
      try {
        x = std::stod(value, &used);
      } catch (const std::exception&) {
        throw bad("a number");
      }
      if (used != value.size() || !std::isfinite(x)) {
        throw bad("a finite number");
      }
      // Short form when it is exact, otherwise 17 digits, so emit/parse is lossless.
      if (std::strtod(fmt_num(x).c_str(), nullptr) == x) {
        return fmt_num(x);
      }
      char buf[40];
      std::snprintf(buf, sizeof buf, "%.17g", x);
      return buf;
    }
    case KeyKind::Bool:
      if (value == "true" || value == "1" || value == "yes" || value == "on") return "true";
      if (value == "false" || value == "0" || value == "no" || value == "off") return "false";
      throw bad("a boolean");
    case KeyKind::Path:
    case KeyKind::Text:
      if (value.find('\n') != std::string::npos) {
        throw bad("a single line");
      }
      return value;
  }
  return value;
}

class RunConfig {
 public:
  RunConfig() {
    for (const auto& k : config_keys()) {
      values_[std::string(k.key)] = std::string(k.fallback);
    }
  }

  // Lines are `key = value`; blank lines and lines starting with '#' are
  // skipped. Values keep interior spaces but lose surrounding ones.
  static RunConfig parse(std::istream& in) {
    RunConfig cfg;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      const std::string t = trim_ws(line);
      if (t.empty() || t[0] == '#') {
        continue;
      }
      const auto eq = t.find('=');
      if (eq == std::string::npos) {
        throw ParseError(lineno, "config: expected 'key = value'");
      }
      const std::string key = trim_ws(std::string_view(t).substr(0, eq));
      try {
        cfg.set(key, trim_ws(std::string_view(t).substr(eq + 1)));
      } catch (const FormatError& e) {
        throw ParseError(lineno, e.what());
      }
    }
    return cfg;
  }

  static RunConfig parse_text(const std::string& text) {
    std::istringstream in(text);
    return parse(in);
  }

  static RunConfig load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
      throw IoError("cannot read config " + path);
    }
    return parse(in);
  }

  void set(const std::string& key, const std::string& value) {
    const KeySpec* spec = find_key(key);
    if (!spec) {
      throw FormatError("config: unknown key '" + key + "'");
    }
    values_[key] = canonical_value(*spec, value);
  }

  const std::string& get(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) {
      throw std::invalid_argument("config: unknown key '" + key + "'");
    }
    return it->second;
  }

  std::uint64_t get_uint(const std::string& key) const { return std::stoull(get(key)); }
  std::size_t get_size(const std::string& key) const { return static_cast<std::size_t>(get_uint(key)); }
  double get_real(const std::string& key) const { return std::stod(get(key)); }
  bool get_bool(const std::string& key) const { return get(key) == "true"; }

  // All keys in table order, so emit(parse(emit(c))) == emit(c).
  std::string emit() const {
    std::ostringstream out;
    for (const auto& k : config_keys()) {
      out << k.key << " = " << values_.at(std::string(k.key)) << '\n';
    }
    return out.str();
  }

  bool operator==(const RunConfig& o) const { return values_ == o.values_; }

 private:
  std::map<std::string, std::string> values_;
};

// Lower-case hex SHA-256.
inline std::string sha256_hex(std::string_view data) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr) != 1) {
    throw std::runtime_error("sha256: digest failed");
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(kHex[md[i] >> 4]);
    out.push_back(kHex[md[i] & 15]);
  }
  return out;
}

inline std::string file_sha256(const std::string& path) { return sha256_hex(read_file(path)); }

struct ManifestInput {
  std::string key;
  std::string path;
};

// No timestamps or host details: identical runs give identical manifests.
inline Json make_manifest(const std::string& command, const RunConfig& cfg, const std::vector<ManifestInput>& inputs,
                          const std::vector<std::string>& outputs) {
  Json in = Json::object();
  for (const auto& i : inputs) {
    in[i.key] = {{"path", i.path},
                 {"sha256", file_sha256(i.path)},
                 {"bytes", static_cast<std::uint64_t>(std::filesystem::file_size(i.path))}};
  }
  return Json{{"command", command},
              {"config_sha256", sha256_hex(cfg.emit())},
              {"seed", cfg.get_uint("seed")},
              {"inputs", in},
              {"outputs", outputs}};
}

}  // namespace morphoscope::cli
