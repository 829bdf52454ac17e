#pragma once

#include "morphoscope/corpus/utf8.hpp"
#include "morphoscope/errors.hpp"

#include <istream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace morphoscope {

struct SegRecord {
  std::u32string surface;
  std::vector<std::u32string> morphs;
  std::set<std::size_t> boundaries;  // internal: character counts before each boundary, in [1, len-1]
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) {
    return {};
  }
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

// "act:act ion:+ion s:+PL, alt..." -> "act+ion+s" (first analysis, surface parts).
inline std::string normalize_labelled_analysis(const std::string& analysis) {
  std::string first = analysis.substr(0, analysis.find(','));
  std::istringstream in(first);
  std::string item, out;
  while (in >> item) {
    if (!out.empty()) {
      out.push_back('+');
    }
    out += item.substr(0, item.find(':'));
  }
  return out;
}

}  // namespace detail

// Reads `surface<TAB>morph+morph+...` records. `#` lines and blank lines are
// skipped. Labelled analyses (`morph:label morph:label, alternative`) are
// normalised to their first analysis.
inline std::vector<SegRecord> parse_segmentations(std::istream& in) {
  std::vector<SegRecord> out;
  std::string raw;
  std::size_t lineno = 0;
  while (std::getline(in, raw)) {
    ++lineno;
    if (!raw.empty() && raw.back() == '\r') {
      raw.pop_back();
    }
    if (detail::trim(raw).empty() || raw[0] == '#') {
      continue;
    }
    const auto tab = raw.find('\t');
    if (tab == std::string::npos) {
      throw ParseError(lineno, "expected surface<TAB>segmentation");
    }
    const std::string surface = detail::trim(raw.substr(0, tab));
    std::string analysis = detail::trim(raw.substr(tab + 1));
    if (surface.empty() || analysis.empty()) {
      throw ParseError(lineno, "empty surface or segmentation");
    }
    if (analysis.find(':') != std::string::npos) {
      analysis = detail::normalize_labelled_analysis(analysis);
    }
    SegRecord rec;
    rec.surface = utf8_decode(surface);
    std::size_t start = 0;
    while (true) {
      const auto plus = analysis.find('+', start);
      const std::string morph = analysis.substr(start, plus == std::string::npos ? std::string::npos : plus - start);
      if (morph.empty()) {
        throw ParseError(lineno, "empty morph in '" + analysis + "'");
      }
      rec.morphs.push_back(utf8_decode(morph));
      if (plus == std::string::npos) {
        break;
      }
      start = plus + 1;
    }
    std::u32string joined;
    for (std::size_t i = 0; i < rec.morphs.size(); ++i) {
      joined += rec.morphs[i];
      if (i + 1 < rec.morphs.size()) {
        rec.boundaries.insert(joined.size());
      }
    }
    if (joined != rec.surface) {
      throw ParseError(lineno, "morphs '" + analysis + "' do not concatenate to '" + surface + "'");
    }
    out.push_back(std::move(rec));
  }
  return out;
}

inline std::vector<SegRecord> parse_segmentations_file(const std::string& path) {
  std::istringstream in(read_file(path));
  return parse_segmentations(in);
}

}  // namespace morphoscope
