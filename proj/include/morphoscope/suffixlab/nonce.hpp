#pragma once

// Nonce-base generation: sample words from the LM, keep those that are not
// attested, look like plausible complete words, and are confidently tagged
// as NOUN, VERB or ADJ by the tagging probe.

#include "morphoscope/charlm/sampling.hpp"
#include "morphoscope/corpus/contexts.hpp"
#include "morphoscope/errors.hpp"
#include "morphoscope/numerics/stats.hpp"
#include "morphoscope/probes/decoder.hpp"
#include "morphoscope/probes/encode.hpp"
#include "morphoscope/report.hpp"
#include "morphoscope/suffixlab/suffixes.hpp"

#include <array>
#include <fstream>
#include <memory>
#include <sstream>
#include <thread>
#include <unordered_set>

namespace morphoscope {

// Model-derived measurements of a word read in its context.
struct WordScore {
  double logprob = 0;     // mean natural-log probability per character
  double p_space = 0;     // p(' ' | state after the word)
  LabelId tag = 0;        // tagger argmax at the word's last character
  double confidence = 0;  // probability of that tag
};

// Each word is read as ' ' + context + ' ' + word (the leading space primes
// the encoder the same way tagging sentences are primed).
inline std::u32string scoring_text(const ContextedWord& cw) { return U" " + contexted_text(cw); }

template <class T>
std::vector<WordScore> score_words(const CharLM<T>& model, const ProbeDecoder<T>& tagger,
                                   const std::vector<ContextedWord>& words, std::size_t threads = 1) {
  std::vector<std::vector<CharId>> seqs;
  std::vector<std::size_t> keep;
  seqs.reserve(words.size());
  for (const auto& cw : words) {
    if (cw.word.empty()) {
      throw std::invalid_argument("score_words: empty word");
    }
    seqs.push_back(model.vocab().encode(scoring_text(cw)));
    keep.push_back(seqs.back().size());
  }
  const auto states = encode_suffix_states(model, seqs, keep, 64, threads);
  const auto space = model.vocab().find(U' ');
  const auto& P = model.params();
  std::vector<WordScore> out(words.size());
  for (std::size_t i = 0; i < words.size(); ++i) {
    const auto& ids = seqs[i];
    const auto len = static_cast<Eigen::Index>(words[i].word.size());
    const auto total = static_cast<Eigen::Index>(ids.size());
    // Row k predicts word char k; the last row is the state after the word.
    Matrix<T> probs = states[i].bottomRows(len + 1) * P.Wo.transpose();
    probs.rowwise() += P.bo.transpose();
    softmax_rows_inplace(probs);
    double lp = 0;
    for (Eigen::Index k = 0; k < len; ++k) {
      const CharId id = ids[static_cast<std::size_t>(total - len + k)];
      lp += std::log(std::max(static_cast<double>(probs(k, id)), 1e-300));
    }
    WordScore& s = out[i];
    s.logprob = lp / static_cast<double>(len);
    s.p_space = space ? static_cast<double>(probs(len, *space)) : 0.0;
    const Matrix<T> tags = decoder_probs(tagger, Matrix<T>(states[i].bottomRows(total - 1)));
    Eigen::Index best = 0;
    tags.row(total - 2).maxCoeff(&best);
    s.tag = static_cast<LabelId>(best);
    s.confidence = static_cast<double>(tags(total - 2, best));
  }
  return out;
}

struct FilterThresholds {
  MeanStd logprob;
  MeanStd p_space;
  MeanStd confidence;
  std::size_t sample_size = 0;

  // "Not more than one standard deviation below the mean".
  static bool passes(double value, const MeanStd& ref) { return value >= ref.mean - ref.std; }
};

inline constexpr std::size_t kMinReferenceSample = 100;

// `count` real lowercase word occurrences drawn uniformly (with replacement)
// from the corpus, each with its left context.
inline std::vector<ContextedWord> sample_real_words(const ContextIndex& index, std::size_t count, std::uint64_t seed,
                                                    std::size_t window = 15) {
  std::vector<std::size_t> eligible;
  const auto& toks = index.tokens();
  for (std::size_t i = 0; i < toks.size(); ++i) {
    if (is_all_lowercase(toks[i].text)) {
      eligible.push_back(i);
    }
  }
  std::vector<ContextedWord> out;
  if (eligible.empty()) {
    return out;
  }
  Rng rng(seed);
  out.reserve(count);
  for (std::size_t k = 0; k < count; ++k) {
    const std::size_t i = eligible[rng.below(eligible.size())];
    out.push_back({toks[i].text, index.left_context(i, window), i});
  }
  return out;
}

template <class T>
FilterThresholds measure_real_word_stats(const CharLM<T>& model, const ProbeDecoder<T>& tagger,
                                         const std::vector<ContextedWord>& sample, std::size_t threads = 1) {
  if (sample.size() < kMinReferenceSample) {
    throw std::invalid_argument("measure_real_word_stats: need at least " + std::to_string(kMinReferenceSample) +
                                " real word occurrences, got " + std::to_string(sample.size()));
  }
  const auto scores = score_words(model, tagger, sample, threads);
  std::vector<double> lp, ps, cf;
  for (const auto& s : scores) {
    lp.push_back(s.logprob);
    ps.push_back(s.p_space);
    cf.push_back(s.confidence);
  }
  FilterThresholds t;
  t.logprob = mean_std(std::span<const double>(lp));
  t.p_space = mean_std(std::span<const double>(ps));
  t.confidence = mean_std(std::span<const double>(cf));
  t.sample_size = sample.size();
  return t;
}

// Words a nonce base must not be: corpus tokens and dictionary entries,
// compared case-insensitively.
struct Lexicon {
  std::vector<const WordSet*> sets;

  bool known(const std::u32string& w) const {
    for (const WordSet* s : sets) {
      if (s->contains(w, CaseMode::Folded)) {
        return true;
      }
    }
    return false;
  }
};

enum class FilterStage : std::uint8_t { Dictionary, Lowercase, SuffixEnding, LogProb, SpaceProb, TagConfidence };
inline constexpr std::array<FilterStage, 6> kFilterStages = {FilterStage::Dictionary,   FilterStage::Lowercase,
                                                             FilterStage::SuffixEnding, FilterStage::LogProb,
                                                             FilterStage::SpaceProb,    FilterStage::TagConfidence};

inline const char* filter_name(FilterStage s) {
  switch (s) {
    case FilterStage::Dictionary: return "dictionary";
    case FilterStage::Lowercase: return "lowercase";
    case FilterStage::SuffixEnding: return "suffix_ending";
    case FilterStage::LogProb: return "logprob";
    case FilterStage::SpaceProb: return "p_space";
    case FilterStage::TagConfidence: return "tag_confidence";
  }
  return "?";
}

struct NonceBase {
  std::u32string surface;
  Category tag = Category::NOUN;
  double confidence = 0;
  double logprob = 0;
  double p_space = 0;
  std::u32string context;
  LstmState<float> state;  // after reading ' ' + context + ' ' + surface
};

inline LstmState<float> base_state(const CharLM<float>& model, const std::u32string& context,
                                   const std::u32string& surface) {
  auto state = model.zero_state();
  model.consume(model.vocab().encode(scoring_text({surface, context, 0})), state);
  return state;
}

// The first filter a base fails, judged on its stored measurements; nothing
// if it passes all six. The tag-confidence stage also covers the category.
inline std::optional<FilterStage> check_filters(const NonceBase& b, const FilterThresholds& t, const Lexicon& lex,
                                                const std::vector<SuffixSpec>& suffixes) {
  if (lex.known(b.surface)) return FilterStage::Dictionary;
  if (!is_all_lowercase(b.surface)) return FilterStage::Lowercase;
  if (ends_with_any_suffix(b.surface, suffixes)) return FilterStage::SuffixEnding;
  if (!FilterThresholds::passes(b.logprob, t.logprob)) return FilterStage::LogProb;
  if (!FilterThresholds::passes(b.p_space, t.p_space)) return FilterStage::SpaceProb;
  if (!FilterThresholds::passes(b.confidence, t.confidence)) return FilterStage::TagConfidence;
  return std::nullopt;
}

struct RejectionLog {
  std::size_t sampled = 0;
  std::array<std::size_t, 6> rejected{};  // indexed by FilterStage
  std::size_t other_tag = 0;              // tagged outside NOUN/VERB/ADJ
  std::size_t duplicate = 0;
  std::size_t category_full = 0;
  std::size_t accepted = 0;

  std::size_t& at(FilterStage s) { return rejected[static_cast<std::size_t>(s)]; }
  std::size_t at(FilterStage s) const { return rejected[static_cast<std::size_t>(s)]; }
};

struct NonceSearchConfig {
  std::size_t per_category = 50;
  std::size_t token_budget = 1'000'000;
  std::uint64_t seed = 0;
  double temperature = 1.0;
  std::size_t streams = 4;        // independent sampling streams, merged in stream order
  std::size_t round_words = 64;   // words per stream per round
  std::size_t context_window = 15;
  std::size_t threads = 1;
};

struct NonceSearch {
  std::vector<NonceBase> bases;
  RejectionLog log;
  std::array<std::size_t, 3> per_category{};
  bool complete = false;
  std::string warning;
};

// Runs the six-stage filter over sampled words until every category holds
// `per_category` bases or `token_budget` words have been sampled. Results do
// not depend on the thread count.
inline NonceSearch generate_nonce_bases(const CharLM<float>& model, const ProbeDecoder<float>& tagger,
                                        const FilterThresholds& thresholds, const Lexicon& lexicon,
                                        const std::vector<SuffixSpec>& suffixes, const NonceSearchConfig& cfg) {
  if (cfg.streams == 0 || cfg.round_words == 0) {
    throw std::invalid_argument("generate_nonce_bases: streams and round size must be positive");
  }
  std::vector<std::optional<Category>> label_category(tagger.labels.size());
  for (std::size_t i = 0; i < tagger.labels.size(); ++i) {
    label_category[i] = category_from_tag(tagger.labels.label(static_cast<LabelId>(i)));
  }

  std::vector<std::unique_ptr<WordSampler<float>>> samplers;
  const Rng root(cfg.seed);
  for (std::size_t s = 0; s < cfg.streams; ++s) {
    WordSampling opts;
    opts.seed = root.fork(s).next_u64();
    opts.temperature = cfg.temperature;
    opts.context_window = cfg.context_window;
    samplers.push_back(std::make_unique<WordSampler<float>>(model, opts));
  }

  NonceSearch out;
  std::unordered_set<std::u32string> seen;
  auto all_full = [&] {
    for (std::size_t n : out.per_category) {
      if (n < cfg.per_category) return false;
    }
    return true;
  };

  while (!all_full() && out.log.sampled < cfg.token_budget) {
    std::vector<std::vector<SampledWord>> drawn(cfg.streams);
    auto draw = [&](std::size_t s) {
      for (std::size_t k = 0; k < cfg.round_words; ++k) {
        if (auto w = samplers[s]->next()) {
          drawn[s].push_back(std::move(*w));
        }
      }
    };
    const std::size_t workers = std::max<std::size_t>(1, std::min(cfg.threads, cfg.streams));
    if (workers == 1) {
      for (std::size_t s = 0; s < cfg.streams; ++s) draw(s);
    } else {
      std::vector<std::thread> pool;
      for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
          for (std::size_t s = w; s < cfg.streams; s += workers) draw(s);
        });
      }
      for (auto& th : pool) th.join();
    }

    std::vector<ContextedWord> candidates;
    for (const auto& stream : drawn) {
      for (const auto& w : stream) {
        if (out.log.sampled >= cfg.token_budget) break;
        ++out.log.sampled;
        if (lexicon.known(w.text)) {
          ++out.log.at(FilterStage::Dictionary);
        } else if (!is_all_lowercase(w.text)) {
          ++out.log.at(FilterStage::Lowercase);
        } else if (ends_with_any_suffix(w.text, suffixes)) {
          ++out.log.at(FilterStage::SuffixEnding);
        } else if (!seen.insert(w.text).second) {
          ++out.log.duplicate;
        } else {
          candidates.push_back({w.text, w.context, 0});
        }
      }
    }
    if (candidates.empty()) continue;

    const auto scores = score_words(model, tagger, candidates, cfg.threads);
    for (std::size_t i = 0; i < candidates.size(); ++i) {
      const WordScore& s = scores[i];
      if (!FilterThresholds::passes(s.logprob, thresholds.logprob)) {
        ++out.log.at(FilterStage::LogProb);
        continue;
      }
      if (!FilterThresholds::passes(s.p_space, thresholds.p_space)) {
        ++out.log.at(FilterStage::SpaceProb);
        continue;
      }
      const auto cat = label_category[s.tag];
      if (!cat) {
        ++out.log.other_tag;
        continue;
      }
      if (!FilterThresholds::passes(s.confidence, thresholds.confidence)) {
        ++out.log.at(FilterStage::TagConfidence);
        continue;
      }
      auto& n = out.per_category[static_cast<std::size_t>(*cat)];
      if (n >= cfg.per_category) {
        ++out.log.category_full;
        continue;
      }
      ++n;
      ++out.log.accepted;
      NonceBase b{candidates[i].word, *cat, s.confidence, s.logprob, s.p_space, candidates[i].context, {}};
      b.state = base_state(model, b.context, b.surface);
      out.bases.push_back(std::move(b));
    }
  }
  out.complete = all_full();
  if (!out.complete) {
    std::ostringstream msg;
    msg << "sampling budget of " << cfg.token_budget << " words exhausted with NOUN=" << out.per_category[0]
        << " VERB=" << out.per_category[1] << " ADJ=" << out.per_category[2] << " of " << cfg.per_category
        << " bases per category";
    out.warning = msg.str();
  }
  return out;
}

inline Json thresholds_json(const FilterThresholds& t) {
  auto ms = [](const MeanStd& m) { return Json{{"mean", round6(m.mean)}, {"std", round6(m.std)}}; };
  return Json{{"sample_size", t.sample_size},
              {"logprob", ms(t.logprob)},
              {"p_space", ms(t.p_space)},
              {"confidence", ms(t.confidence)}};
}

inline FilterThresholds thresholds_from_json(const Json& j) {
  auto ms = [](const Json& m) { return MeanStd{m.at("mean").get<double>(), m.at("std").get<double>()}; };
  FilterThresholds t;
  t.sample_size = j.at("sample_size").get<std::size_t>();
  t.logprob = ms(j.at("logprob"));
  t.p_space = ms(j.at("p_space"));
  t.confidence = ms(j.at("confidence"));
  if (t.logprob.std < 0 || t.p_space.std < 0 || t.confidence.std < 0) {
    throw FormatError("thresholds: negative standard deviation");
  }
  return t;
}

inline Json rejection_log_json(const NonceSearch& s) {
  Json stages = Json::object();
  for (FilterStage f : kFilterStages) {
    stages[filter_name(f)] = s.log.at(f);
  }
  return Json{{"sampled", s.log.sampled},
              {"rejected", stages},
              {"other_tag", s.log.other_tag},
              {"duplicate", s.log.duplicate},
              {"category_full", s.log.category_full},
              {"accepted", s.log.accepted},
              {"per_category",
               {{"NOUN", s.per_category[0]}, {"VERB", s.per_category[1]}, {"ADJ", s.per_category[2]}}},
              {"complete", s.complete},
              {"warning", s.warning}};
}

// One base per line: surface, tag, confidence, logprob, p_space, context.
inline std::string format_nonce_bases(const std::vector<NonceBase>& bases) {
  std::ostringstream out;
  for (const auto& b : bases) {
    out << utf8_encode(b.surface) << '\t' << category_name(b.tag) << '\t' << fmt_num(b.confidence) << '\t'
        << fmt_num(b.logprob) << '\t' << fmt_num(b.p_space) << '\t' << utf8_encode(b.context) << '\n';
  }
  return out.str();
}

// Parses a base dump (the context column is optional) and recomputes each
// base's end-of-word state with `model`.
inline std::vector<NonceBase> parse_nonce_bases(std::istream& in, const CharLM<float>& model) {
  std::vector<NonceBase> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> f;
    std::size_t start = 0;
    for (;;) {
      const std::size_t tab = line.find('\t', start);
      f.push_back(line.substr(start, tab == std::string::npos ? std::string::npos : tab - start));
      if (tab == std::string::npos) break;
      start = tab + 1;
    }
    auto fail = [&](const std::string& why) {
      throw ParseError(lineno, "nonce bases: " + why);
    };
    if (f.size() != 5 && f.size() != 6) fail("expected 5 or 6 tab-separated fields");
    NonceBase b;
    b.surface = utf8_decode(f[0]);
    if (b.surface.empty()) fail("empty surface");
    const auto cat = category_from_tag(f[1]);
    if (!cat) fail("tag '" + f[1] + "' is not NOUN, VERB or ADJ");
    b.tag = *cat;
    try {
      b.confidence = std::stod(f[2]);
      b.logprob = std::stod(f[3]);
      b.p_space = std::stod(f[4]);
    } catch (const std::exception&) {
      fail("malformed number");
    }
    if (f.size() == 6) b.context = utf8_decode(f[5]);
    b.state = base_state(model, b.context, b.surface);
    out.push_back(std::move(b));
  }
  return out;
}

inline std::vector<NonceBase> load_nonce_bases(const std::string& path, const CharLM<float>& model) {
  std::ifstream in(path);
  if (!in) {
    throw IoError("cannot open nonce bases " + path);
  }
  return parse_nonce_bases(in, model);
}

}  // namespace morphoscope
