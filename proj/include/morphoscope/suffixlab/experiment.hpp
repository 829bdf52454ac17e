#pragma once

// Selectional-restriction experiment: mean suffix probability per base
// category, and whether the best category is the one the suffix selects for.

#include "morphoscope/errors.hpp"
#include "morphoscope/report.hpp"
#include "morphoscope/suffixlab/nonce.hpp"
#include "morphoscope/suffixlab/suffixes.hpp"

#include <array>
#include <sstream>
#include <thread>

namespace morphoscope {

struct CategoryArgmax {
  Category category = Category::NOUN;
  bool tie = false;
};

// Highest mean; ties resolve to the earliest category in NOUN, VERB, ADJ.
inline CategoryArgmax argmax_category(const std::array<double, 3>& means) {
  CategoryArgmax r;
  double best = means[0];
  for (std::size_t c = 1; c < 3; ++c) {
    if (means[c] > best) {
      best = means[c];
      r.category = kCategories[c];
    }
  }
  int at_best = 0;
  for (double m : means) {
    at_best += m == best;
  }
  r.tie = at_best > 1;
  return r;
}

struct SuffixRow {
  SuffixSpec suffix;
  std::array<double, 3> means{};  // indexed by Category
  CategoryArgmax argmax;
  bool match = false;
};

struct SuffixReport {
  std::vector<SuffixRow> rows;
  std::size_t match_count = 0;
  std::array<std::size_t, 3> bases_per_category{};
  std::vector<std::vector<double>> per_base;  // [suffix][base]
};

inline std::array<std::size_t, 3> count_categories(const std::vector<NonceBase>& bases) {
  std::array<std::size_t, 3> n{};
  for (const auto& b : bases) {
    ++n[static_cast<std::size_t>(b.tag)];
  }
  return n;
}

// p(suffix | base) for every suffix and base. Parallel over bases; each value
// is computed identically whatever the thread count.
inline std::vector<std::vector<double>> suffix_probability_table(const CharLM<float>& model,
                                                                 const std::vector<NonceBase>& bases,
                                                                 const std::vector<SuffixSpec>& suffixes,
                                                                 std::size_t threads = 1) {
  std::vector<std::vector<CharId>> ids;
  for (const auto& s : suffixes) {
    ids.push_back(suffix_ids(model, s.surface));
  }
  std::vector<std::vector<double>> table(suffixes.size(), std::vector<double>(bases.size()));
  auto run = [&](std::size_t b) {
    for (std::size_t s = 0; s < suffixes.size(); ++s) {
      table[s][b] = sequence_probability(model, bases[b].state, std::span<const CharId>(ids[s])).probability;
    }
  };
  threads = std::max<std::size_t>(1, std::min(threads, bases.size()));
  if (threads == 1) {
    for (std::size_t b = 0; b < bases.size(); ++b) run(b);
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < threads; ++w) {
      pool.emplace_back([&, w] {
        for (std::size_t b = w; b < bases.size(); b += threads) run(b);
      });
    }
    for (auto& th : pool) th.join();
  }
  return table;
}

inline SuffixReport run_selectional_experiment(const CharLM<float>& model, const std::vector<NonceBase>& bases,
                                               const std::vector<SuffixSpec>& suffixes, std::size_t threads = 1) {
  SuffixReport rep;
  rep.bases_per_category = count_categories(bases);
  for (Category c : kCategories) {
    if (rep.bases_per_category[static_cast<std::size_t>(c)] == 0) {
      throw UndefinedMetric(std::string("selectional experiment: no ") + category_name(c) + " bases");
    }
  }
  rep.per_base = suffix_probability_table(model, bases, suffixes, threads);
  for (std::size_t s = 0; s < suffixes.size(); ++s) {
    SuffixRow row;
    row.suffix = suffixes[s];
    std::array<double, 3> sums{};
    for (std::size_t b = 0; b < bases.size(); ++b) {
      sums[static_cast<std::size_t>(bases[b].tag)] += rep.per_base[s][b];
    }
    for (std::size_t c = 0; c < 3; ++c) {
      row.means[c] = sums[c] / static_cast<double>(rep.bases_per_category[c]);
    }
    row.argmax = argmax_category(row.means);
    row.match = row.argmax.category == row.suffix.expected();
    rep.match_count += row.match;
    rep.rows.push_back(std::move(row));
  }
  return rep;
}

inline Json suffix_report_json(const SuffixReport& rep) {
  Json rows = Json::array();
  for (const auto& r : rep.rows) {
    rows.push_back({{"surface", utf8_encode(r.suffix.surface)},
                    {"expected", category_name(r.suffix.expected())},
                    {"means", {{"NOUN", round6(r.means[0])}, {"VERB", round6(r.means[1])}, {"ADJ", round6(r.means[2])}}},
                    {"argmax", category_name(r.argmax.category)},
                    {"match", r.match},
                    {"tie", r.argmax.tie}});
  }
  return Json{{"suffixes", rows},
              {"match_count", rep.match_count},
              {"bases_per_category",
               {{"NOUN", rep.bases_per_category[0]},
                {"VERB", rep.bases_per_category[1]},
                {"ADJ", rep.bases_per_category[2]}}}};
}

// One row per (suffix, category): `suffix,category,mean`.
inline std::string suffix_report_csv(const SuffixReport& rep) {
  std::ostringstream out;
  out << "suffix,category,mean\n";
  for (const auto& r : rep.rows) {
    for (Category c : kCategories) {
      out << csv_field(utf8_encode(r.suffix.surface)) << ',' << category_name(c) << ','
          << fmt_num(r.means[static_cast<std::size_t>(c)]) << '\n';
    }
  }
  return out.str();
}

}  // namespace morphoscope
