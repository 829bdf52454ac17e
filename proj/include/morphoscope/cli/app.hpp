#pragma once

// The `morphoscope` command line: one leaf subcommand per pipeline stage.
// Exit codes: 0 success, 1 usage error, 2 data or format error.

#include "morphoscope/charlm/checkpoint.hpp"
#include "morphoscope/charlm/eval.hpp"
#include "morphoscope/charlm/sampling.hpp"
#include "morphoscope/charlm/train.hpp"
#include "morphoscope/cli/config.hpp"
#include "morphoscope/corpus/conllu.hpp"
#include "morphoscope/corpus/contexts.hpp"
#include "morphoscope/corpus/segmentation.hpp"
#include "morphoscope/corpus/stream.hpp"
#include "morphoscope/corpus/wordlist.hpp"
#include "morphoscope/probes/checkpoint.hpp"
#include "morphoscope/probes/segmentation.hpp"
#include "morphoscope/probes/tagging.hpp"
#include "morphoscope/suffixlab/experiment.hpp"
#include "morphoscope/suffixlab/frequency.hpp"
#include "morphoscope/suffixlab/nonce.hpp"
#include "morphoscope/unitprobe/units.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace morphoscope::cli {

// Bad flags, missing required options, out-of-range hyperparameters.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// JSON-lines diagnostics on stderr. Logs may carry timings; artifacts never do.
class Logger {
 public:
  Logger(std::ostream& sink, bool quiet) : sink_(sink), quiet_(quiet) {}

  void info(const std::string& event, Json fields = Json::object()) { write("info", event, std::move(fields)); }
  void warn(const std::string& event, Json fields = Json::object()) { write("warn", event, std::move(fields)); }
  void error(const std::string& event, Json fields = Json::object()) {
    const bool q = quiet_;
    quiet_ = false;
    write("error", event, std::move(fields));
    quiet_ = q;
  }

 private:
  void write(const char* level, const std::string& event, Json fields) {
    if (quiet_) {
      return;
    }
    Json line{{"level", level}, {"event", event}};
    for (auto& [k, v] : fields.items()) {
      line[k] = v;
    }
    sink_ << line.dump() << '\n' << std::flush;
  }

  std::ostream& sink_;
  bool quiet_;
};

// Everything a leaf needs: resolved config, output directory and the
// provenance bookkeeping that ends up in manifest.json.
class Run {
 public:
  Run(std::string command, RunConfig cfg, std::size_t threads, Logger& log)
      : command_(std::move(command)), cfg_(std::move(cfg)), threads_(threads), log_(log) {}

  const RunConfig& cfg() const { return cfg_; }
  std::size_t threads() const { return threads_; }
  Logger& log() { return log_; }
  std::uint64_t seed() const { return cfg_.get_uint("seed"); }

  // A required input path; it was checked to exist before the leaf started.
  const std::string& input(const std::string& key) {
    const std::string& p = cfg_.get(key);
    if (std::find_if(inputs_.begin(), inputs_.end(), [&](const ManifestInput& m) { return m.key == key; }) ==
        inputs_.end()) {
      inputs_.push_back({key, p});
    }
    return p;
  }

  std::optional<std::string> optional_input(const std::string& key) {
    if (cfg_.get(key).empty()) {
      return std::nullopt;
    }
    return input(key);
  }

  std::string output(const std::string& name) {
    outputs_.push_back(name);
    return (std::filesystem::path(cfg_.get("out")) / name).string();
  }

  void write_manifest() {
    write_json_file((std::filesystem::path(cfg_.get("out")) / "manifest.json").string(),
                    make_manifest(command_, cfg_, inputs_, outputs_));
  }

 private:
  std::string command_;
  RunConfig cfg_;
  std::size_t threads_;
  Logger& log_;
  std::vector<ManifestInput> inputs_;
  std::vector<std::string> outputs_;
};

namespace detail {

inline std::string flag_for(std::string_view key) {
  std::string name(key.substr(key.rfind('.') == std::string_view::npos ? 0 : key.rfind('.') + 1));
  std::replace(name.begin(), name.end(), '_', '-');
  return "--" + name;
}

inline std::u32string corpus_text(Run& run) { return read_text_file(run.input("corpus")); }

inline CharLM<float> load_lm(Run& run) { return load_checkpoint(run.input("lm")).model; }

inline ProbeCheckpoint load_probe_for(Run& run, const std::string& key, const std::string& task) {
  auto ck = load_probe(run.input(key));
  if (ck.meta.task != task) {
    throw FormatError(run.cfg().get(key) + ": probe was trained for '" + ck.meta.task + "', expected '" + task + "'");
  }
  return ck;
}

inline TrainConfig train_config(const RunConfig& c) {
  TrainConfig t;
  t.embed = c.get_size("train.embed");
  t.hidden = c.get_size("train.hidden");
  t.lr = c.get_real("train.lr");
  t.batch = c.get_size("train.batch");
  t.dropout = c.get_real("train.dropout");
  t.bptt = c.get_size("train.bptt");
  t.epochs = c.get_size("train.epochs");
  t.patience = c.get_size("train.patience");
  t.clip = c.get_real("train.clip");
  t.seed = c.get_uint("seed");
  try {
    t.validate();
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  return t;
}

inline ProbeTrainConfig probe_config(const RunConfig& c) {
  ProbeTrainConfig p;
  p.hidden = c.get_size("probe.hidden");
  p.epochs = c.get_size("probe.epochs");
  p.lr = c.get_real("probe.lr");
  p.batch = c.get_size("probe.batch");
  p.seed = c.get_uint("seed");
  try {
    p.validate();
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  return p;
}

inline double fraction(const RunConfig& c, const std::string& key) {
  const double f = c.get_real(key);
  if (!(f > 0 && f < 1)) {
    throw UsageError(key + " must be in (0, 1)");
  }
  return f;
}

inline Json loss_json(const std::vector<double>& xs) {
  Json a = Json::array();
  for (double x : xs) {
    a.push_back(round6(x));
  }
  return a;
}

inline std::u32string limited_corpus(Run& run) {
  auto text = corpus_text(run);
  const std::size_t limit = run.cfg().get_size("units.limit");
  if (limit > 0 && text.size() > limit) {
    text.resize(limit);
  }
  return text;
}

// ---- language model -------------------------------------------------------

inline void cmd_train(Run& run) {
  const TrainConfig tc = train_config(run.cfg());
  const double frac = fraction(run.cfg(), "train.split");
  const auto text = corpus_text(run);
  const Vocab vocab = Vocab::build(text);
  const auto ids = vocab.encode(text);
  const auto split = split_stream(ids, frac, tc.seed);
  run.log().info("train.start", {{"chars", ids.size()}, {"vocab", vocab.size()}, {"train_chars", split.train.size()},
                                 {"dev_chars", split.dev.size()}});
  const bool save_epochs = run.cfg().get_bool("train.save_epochs");
  EpochCallback<float> on_epoch = [&](const EpochLog& e, const CharLM<float>& m, const OptimizerState<float>& opt) {
    run.log().info("train.epoch", {{"epoch", e.epoch}, {"train_bpc", round6(e.train_bpc)},
                                   {"dev_bpc", round6(e.dev_bpc)}, {"clipped", e.clipped}, {"seconds", e.seconds}});
    if (save_epochs) {
      save_checkpoint(run.output("lm.epoch" + std::to_string(e.epoch) + ".ckpt"),
                      Checkpoint{m, opt, {e.epoch, tc.seed, e.dev_bpc}});
    }
  };
  const auto res = train_lm<float>(tc, split, vocab, on_epoch);
  save_checkpoint(run.output("lm.ckpt"), Checkpoint{res.best, res.best_optimizer, {res.best_epoch, tc.seed, res.best_dev_bpc}});

  Json epochs = Json::array();
  for (const auto& e : res.log) {
    epochs.push_back({{"epoch", e.epoch},
                      {"train_bpc", round6(e.train_bpc)},
                      {"dev_bpc", round6(e.dev_bpc)},
                      {"updates", e.updates},
                      {"clipped", e.clipped},
                      {"max_grad_norm", round6(e.max_grad_norm)}});
  }
  Json log{{"vocab_size", vocab.size()},
           {"train_chars", split.train.size()},
           {"dev_chars", split.dev.size()},
           {"unigram_dev_bpc", round6(unigram_bits_per_char(split.train, split.dev, vocab.size()))},
           {"epochs", epochs},
           {"best_epoch", res.best_epoch},
           {"best_dev_bpc", round6(res.best_dev_bpc)}};
  write_json_file(run.output("train_log.json"), log);
}

// Re-creates the training split from the seed stored in the checkpoint.
inline void cmd_eval(Run& run) {
  const auto ck = load_checkpoint(run.input("lm"));
  const double frac = fraction(run.cfg(), "train.split");
  const auto ids = ck.model.vocab().encode(corpus_text(run));
  const auto split = split_stream(ids, frac, ck.meta.seed);
  const double bpc = bits_per_char(ck.model, split.dev);
  const double uni = unigram_bits_per_char(split.train, split.dev, ck.model.vocab_size());
  write_json_file(run.output("eval.json"), Json{{"split_seed", ck.meta.seed},
                                                {"dev_chars", split.dev.size()},
                                                {"dev_bpc", round6(bpc)},
                                                {"unigram_dev_bpc", round6(uni)},
                                                {"gain_bits", round6(uni - bpc)}});
  run.log().info("eval.done", {{"dev_bpc", round6(bpc)}, {"unigram_dev_bpc", round6(uni)}});
}

inline void cmd_sample(Run& run) {
  const auto m = load_lm(run);
  const double temp = run.cfg().get_real("sample.temperature");
  if (!(temp > 0)) {
    throw UsageError("sample.temperature must be positive");
  }
  const auto text = sample(m, run.cfg().get_size("sample.length"), temp, run.seed(),
                           utf8_decode(run.cfg().get("sample.prefix")));
  write_text_file(run.output("sample.txt"), utf8_encode(text) + "\n");
}

inline void cmd_nonce_rate(Run& run) {
  const auto m = load_lm(run);
  const WordSet corpus_tokens = token_set(corpus_text(run));
  WordSet dict;
  if (auto p = run.optional_input("words")) {
    dict = load_wordlist(*p);
  }
  const auto r = nonce_rate(m, corpus_tokens, {&dict}, run.cfg().get_size("sample.count"), run.seed());
  Json examples = Json::array();
  for (const auto& w : r.examples) {
    examples.push_back(utf8_encode(w));
  }
  write_json_file(run.output("nonce_rate.json"),
                  Json{{"sampled", r.sampled}, {"nonce", r.nonce}, {"rate", round6(r.rate)}, {"examples", examples}});
  run.log().info("nonce_rate.done", {{"rate", round6(r.rate)}, {"sampled", r.sampled}});
}

// ---- hidden units ---------------------------------------------------------

inline void cmd_units_top(Run& run) {
  const auto m = load_lm(run);
  const auto ids = m.vocab().encode(limited_corpus(run));
  const auto k = run.cfg().get_size("units.k");
  if (k == 0) {
    throw UsageError("units.k must be at least 1");
  }
  const auto trig = top_triggers(m, std::span<const CharId>(ids), k, run.cfg().get_size("units.window"));
  write_json_file(run.output("triggers.json"), trigger_report_json(trig));
}

inline std::size_t unit_index(Run& run, const CharLM<float>& m) {
  const auto u = run.cfg().get_size("units.unit");
  if (u >= m.hidden_dim()) {
    throw UsageError("units.unit must be below the hidden size " + std::to_string(m.hidden_dim()));
  }
  return u;
}

inline void cmd_units_trace(Run& run) {
  const auto m = load_lm(run);
  const auto query = utf8_decode(run.cfg().get("units.query"));
  if (query.empty()) {
    throw UsageError("--query is required");
  }
  write_text_file(run.output("trace.csv"), trace_csv(trace_unit(m, unit_index(run, m), query)));
}

inline void cmd_units_correlate(Run& run) {
  const auto m = load_lm(run);
  const auto unit = unit_index(run, m);
  const auto ids = m.vocab().encode(limited_corpus(run));
  const double r = correlate_with_space(m, std::span<const CharId>(ids), unit);
  write_json_file(run.output("correlate.json"), Json{{"unit", unit}, {"chars", ids.size()}, {"pearson_r", round6(r)}});
  run.log().info("units.correlate", {{"unit", unit}, {"pearson_r", round6(r)}});
}

inline void cmd_units_rank(Run& run) {
  const auto m = load_lm(run);
  write_json_file(run.output("ranking.json"), unit_ranking_json(rank_units_by_boundary_alignment(m, limited_corpus(run))));
}

// ---- segmentation probe ---------------------------------------------------

struct SegSetup {
  RecordSplit split;
  std::u32string corpus;
};

inline SegSetup seg_setup(Run& run, std::uint64_t seed) {
  SegSetup s;
  s.corpus = corpus_text(run);
  s.split = split_by_type(parse_segmentations_file(run.input("seg")), fraction(run.cfg(), "probe.split"), seed);
  return s;
}

inline void cmd_probe_seg_train(Run& run) {
  const ProbeTrainConfig pc = probe_config(run.cfg());
  const auto m = load_lm(run);
  const auto setup = seg_setup(run, run.seed());
  const ContextIndex index(setup.corpus);
  const auto inst = make_seg_instances(setup.split.train, index, run.cfg().get_size("probe.occurrences"),
                                       run.cfg().get_size("probe.window"));
  run.log().info("probe.seg.data", {{"train_types", setup.split.train.size()}, {"test_types", setup.split.test.size()},
                                    {"train_instances", inst.size()}});
  const auto res = train_probe<float>(segmentation_labels(), seg_sequences(m, inst, run.threads()), pc);
  save_probe(run.output("seg.ckpt"), ProbeCheckpoint{res.decoder, {"seg", pc.epochs, pc.seed}});
  write_json_file(run.output("seg_train.json"), Json{{"train_types", setup.split.train.size()},
                                                     {"test_types", setup.split.test.size()},
                                                     {"train_instances", inst.size()},
                                                     {"epoch_loss", loss_json(res.epoch_loss)}});
}

// Evaluates on the held-out types of the split the probe was trained with.
inline void cmd_probe_seg_eval(Run& run) {
  const auto m = load_lm(run);
  const auto ck = load_probe_for(run, "probe", "seg");
  const auto setup = seg_setup(run, ck.meta.seed);
  const ContextIndex index(setup.corpus);
  const auto inst = make_seg_instances(setup.split.test, index, run.cfg().get_size("probe.occurrences"),
                                       run.cfg().get_size("probe.window"));
  const auto preds = predict_segmentations(ck.decoder, inst, seg_sequences(m, inst, run.threads()));
  const WordSet corpus_words = token_set(setup.corpus);
  write_json_file(run.output("seg_eval.json"), Json{{"test_types", setup.split.test.size()},
                                                    {"test_instances", inst.size()},
                                                    {"settings", seg_report_json(preds, corpus_words)}});
  std::string tsv = "word\tgold\tpredicted\tpredicted_eow\n";
  for (const auto& p : preds) {
    tsv += utf8_encode(p.word) + '\t' + format_segmentation(p.word, p.gold) + '\t' +
           format_segmentation(p.word, p.predicted) + '\t' + (p.predicted_eow ? "1" : "0") + '\n';
  }
  write_text_file(run.output("seg_predictions.tsv"), tsv);
}

// ---- tagging probe ----------------------------------------------------------

struct PosSetup {
  std::vector<TagInstance> train;
  std::vector<TagInstance> test;
};

inline PosSetup pos_setup(Run& run, std::uint64_t seed) {
  auto [train, test] = split_sentences(parse_conllu_file(run.input("conllu")), fraction(run.cfg(), "probe.split"), seed);
  const auto labels = upos_labels();
  return {make_tag_instances(train, labels), make_tag_instances(test, labels)};
}

inline std::size_t token_total(const std::vector<TagInstance>& xs) {
  std::size_t n = 0;
  for (const auto& x : xs) {
    n += x.word_tags.size();
  }
  return n;
}

inline void cmd_probe_pos_train(Run& run) {
  const ProbeTrainConfig pc = probe_config(run.cfg());
  const auto m = load_lm(run);
  const auto setup = pos_setup(run, run.seed());
  run.log().info("probe.pos.data", {{"train_sentences", setup.train.size()}, {"test_sentences", setup.test.size()}});
  const auto res = train_probe<float>(upos_labels(), tag_sequences(m, setup.train, run.threads()), pc);
  save_probe(run.output("pos.ckpt"), ProbeCheckpoint{res.decoder, {"pos", pc.epochs, pc.seed}});
  write_json_file(run.output("pos_train.json"), Json{{"train_sentences", setup.train.size()},
                                                     {"train_tokens", token_total(setup.train)},
                                                     {"epoch_loss", loss_json(res.epoch_loss)}});
}

inline void cmd_probe_pos_eval(Run& run) {
  const auto m = load_lm(run);
  const auto ck = load_probe_for(run, "probe", "pos");
  const auto setup = pos_setup(run, ck.meta.seed);
  const auto preds = predict_tags(ck.decoder, setup.test, tag_sequences(m, setup.test, run.threads()));
  const auto metrics = tag_metrics(setup.test, preds);
  const auto base = majority_baseline(setup.train, setup.test);
  write_json_file(run.output("pos_eval.json"),
                  Json{{"test_sentences", setup.test.size()},
                       {"test_tokens", token_total(setup.test)},
                       {"char_accuracy", round6(metrics.char_accuracy)},
                       {"word_accuracy", round6(metrics.word_accuracy)},
                       {"majority_tag", upos_labels().label(base.tag)},
                       {"majority_accuracy", round6(base.accuracy)}});
  run.log().info("probe.pos.eval", {{"char_accuracy", round6(metrics.char_accuracy)},
                                    {"word_accuracy", round6(metrics.word_accuracy)}});
}

inline void cmd_probe_pos_evolve(Run& run) {
  const auto m = load_lm(run);
  const auto ck = load_probe_for(run, "probe", "pos");
  const auto text = utf8_decode(run.cfg().get("probe.text"));
  if (text.empty()) {
    throw UsageError("--text is required");
  }
  write_text_file(run.output("evolution.csv"), tag_evolution_csv(ck.decoder, tag_distributions(ck.decoder, m, text), text));
}

// ---- suffix experiment ------------------------------------------------------

inline void cmd_suffix_stats(Run& run) {
  const auto m = load_lm(run);
  const auto tagger = load_probe_for(run, "tagger", "pos");
  const ContextIndex index(corpus_text(run));
  const auto sample = sample_real_words(index, run.cfg().get_size("suffix.reference"), run.seed(),
                                        run.cfg().get_size("suffix.window"));
  write_json_file(run.output("thresholds.json"),
                  thresholds_json(measure_real_word_stats(m, tagger.decoder, sample, run.threads())));
}

inline void cmd_suffix_bases(Run& run) {
  const auto m = load_lm(run);
  const auto tagger = load_probe_for(run, "tagger", "pos");
  const auto thresholds = thresholds_from_json(Json::parse(read_file(run.input("thresholds"))));
  const WordSet corpus_tokens = token_set(corpus_text(run));
  WordSet dict;
  if (auto p = run.optional_input("words")) {
    dict = load_wordlist(*p);
  }
  NonceSearchConfig nc;
  nc.per_category = run.cfg().get_size("suffix.per_category");
  nc.token_budget = run.cfg().get_size("suffix.budget");
  nc.temperature = run.cfg().get_real("suffix.temperature");
  nc.context_window = run.cfg().get_size("suffix.window");
  nc.seed = run.seed();
  nc.threads = run.threads();
  if (nc.per_category == 0 || !(nc.temperature > 0)) {
    throw UsageError("suffix.per_category must be >= 1 and suffix.temperature positive");
  }
  const auto search =
      generate_nonce_bases(m, tagger.decoder, thresholds, Lexicon{{&corpus_tokens, &dict}}, default_suffixes(), nc);
  if (!search.complete) {
    run.log().warn("suffix.bases.incomplete", {{"message", search.warning}});
  }
  write_text_file(run.output("bases.tsv"), format_nonce_bases(search.bases));
  write_json_file(run.output("bases_log.json"), rejection_log_json(search));
}

inline void cmd_suffix_run(Run& run) {
  const auto m = load_lm(run);
  run.optional_input("tagger");  // recorded for provenance; the bases already carry their tags
  const auto bases = load_nonce_bases(run.input("bases"), m);
  const auto rep = run_selectional_experiment(m, bases, default_suffixes(), run.threads());
  write_json_file(run.output("suffix_report.json"), suffix_report_json(rep));
  write_text_file(run.output("suffix_report.csv"), suffix_report_csv(rep));
  run.log().info("suffix.run", {{"match_count", rep.match_count}, {"suffixes", rep.rows.size()}});
}

inline void cmd_freq(Run& run) {
  write_json_file(run.output("suffix_freq.json"), suffix_frequency_json(token_counts(corpus_text(run)), default_suffixes()));
}

struct Leaf {
  std::vector<std::string> path;      // e.g. {"probe", "seg", "train"}
  std::string description;
  std::vector<std::string> inputs;    // required path keys
  std::vector<std::string> optional;  // optional path keys
  std::vector<std::string> params;    // other config keys exposed as flags
  std::function<void(Run&)> run;
};

inline std::vector<std::string> keys_with_prefix(const std::string& prefix, std::vector<std::string> extra = {}) {
  for (const auto& k : config_keys()) {
    if (k.key.substr(0, prefix.size()) == prefix) {
      extra.emplace_back(k.key);
    }
  }
  return extra;
}

inline std::vector<Leaf> leaves() {
  const auto train_keys = keys_with_prefix("train.");
  const auto probe_train = keys_with_prefix("probe.", {});
  return {
      {{"train"}, "Train the character language model", {"corpus"}, {}, train_keys, cmd_train},
      {{"eval"}, "Dev-split bits per character of a checkpoint", {"lm", "corpus"}, {}, {"train.split"}, cmd_eval},
      {{"sample"}, "Sample text from a checkpoint", {"lm"}, {}, {"sample.length", "sample.temperature", "sample.prefix"},
       cmd_sample},
      {{"nonce-rate"}, "Share of sampled words that are neither corpus tokens nor dictionary words", {"lm", "corpus"},
       {"words"}, {"sample.count"}, cmd_nonce_rate},
      {{"units", "top"}, "Strongest activating contexts of every hidden unit", {"lm", "corpus"}, {},
       {"units.k", "units.window", "units.limit"}, cmd_units_top},
      {{"units", "trace"}, "One unit's activation across a query string", {"lm"}, {}, {"units.unit", "units.query"},
       cmd_units_trace},
      {{"units", "correlate"}, "Pearson correlation of a unit with the space probability", {"lm", "corpus"}, {},
       {"units.unit", "units.limit"}, cmd_units_correlate},
      {{"units", "rank"}, "Units ranked by word-boundary alignment", {"lm", "corpus"}, {}, {"units.limit"},
       cmd_units_rank},
      {{"probe", "seg", "train"}, "Train the segmentation probe", {"lm", "corpus", "seg"}, {},
       {"probe.hidden", "probe.epochs", "probe.lr", "probe.batch", "probe.split", "probe.occurrences", "probe.window"},
       cmd_probe_seg_train},
      {{"probe", "seg", "eval"}, "Boundary precision/recall/F1 on held-out types", {"lm", "probe", "corpus", "seg"}, {},
       {"probe.split", "probe.occurrences", "probe.window"}, cmd_probe_seg_eval},
      {{"probe", "pos", "train"}, "Train the tagging probe", {"lm", "conllu"}, {},
       {"probe.hidden", "probe.epochs", "probe.lr", "probe.batch", "probe.split"}, cmd_probe_pos_train},
      {{"probe", "pos", "eval"}, "Character and word tagging accuracy on held-out sentences", {"lm", "probe", "conllu"},
       {}, {"probe.split"}, cmd_probe_pos_eval},
      {{"probe", "pos", "evolve"}, "Per-character tag distributions for a text", {"lm", "probe"}, {}, {"probe.text"},
       cmd_probe_pos_evolve},
      {{"suffix", "stats"}, "Filter statistics of real corpus words", {"lm", "tagger", "corpus"}, {},
       {"suffix.reference", "suffix.window"}, cmd_suffix_stats},
      {{"suffix", "bases"}, "Search sampled text for nonce bases", {"lm", "tagger", "corpus", "thresholds"}, {"words"},
       {"suffix.per_category", "suffix.budget", "suffix.temperature", "suffix.window"}, cmd_suffix_bases},
      {{"suffix", "run"}, "Suffix probabilities after nonce bases of each category", {"lm", "bases"}, {"tagger"}, {},
       cmd_suffix_run},
      {{"freq"}, "How often suffixed words' bases occur on their own", {"corpus"}, {}, {}, cmd_freq},
  };
}

inline std::string key_help(const KeySpec& k) {
  std::string h(k.help);
  h += " [config: " + std::string(k.key);
  if (!k.fallback.empty()) {
    h += ", default: " + std::string(k.fallback);
  }
  return h + "]";
}

inline std::size_t threads_from_env() {
  const char* env = std::getenv("MORPHOSCOPE_THREADS");
  if (!env || !*env) {
    return 1;
  }
  const std::string s(env);
  if (s.find_first_not_of("0123456789") != std::string::npos || std::stoull(s) == 0) {
    throw UsageError("MORPHOSCOPE_THREADS must be a positive integer, got '" + s + "'");
  }
  return static_cast<std::size_t>(std::stoull(s));
}

}  // namespace detail

// Parses `args` (without the program name), runs the selected stage and
// returns the exit code. Help goes to `out`; diagnostics to `err`.
inline int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Probe what a character-level LSTM language model knows about words and morphology", "morphoscope"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Show help for every subcommand");

  struct Bound {
    std::string command;
    const detail::Leaf* leaf;
    CLI::App* sub;
    std::string config;
    std::size_t threads = 0;
    bool quiet = false;
    std::map<std::string, std::string> flags;
  };
  const auto all = detail::leaves();
  std::vector<std::unique_ptr<Bound>> bound;
  std::map<std::string, CLI::App*> groups;

  for (const auto& leaf : all) {
    CLI::App* parent = &app;
    std::string prefix;
    for (std::size_t i = 0; i + 1 < leaf.path.size(); ++i) {
      prefix += (prefix.empty() ? "" : " ") + leaf.path[i];
      auto it = groups.find(prefix);
      if (it == groups.end()) {
        static const std::map<std::string, std::string> kGroupHelp = {
            {"units", "Inspect individual LSTM hidden units"},
            {"probe", "Train and evaluate diagnostic probes on the frozen LM"},
            {"probe seg", "Morpheme-boundary probe"},
            {"probe pos", "Part-of-speech probe"},
            {"suffix", "Selectional-restriction experiment on nonce bases"}};
        const auto help = kGroupHelp.find(prefix);
        CLI::App* g = parent->add_subcommand(leaf.path[i], help != kGroupHelp.end() ? help->second : prefix);
        g->require_subcommand(1);
        it = groups.emplace(prefix, g).first;
      }
      parent = it->second;
    }
    auto b = std::make_unique<Bound>();
    b->command = prefix.empty() ? leaf.path.back() : prefix + " " + leaf.path.back();
    b->leaf = &leaf;
    b->sub = parent->add_subcommand(leaf.path.back(), leaf.description);
    auto* sub = b->sub;
    sub->add_option("--config", b->config, "key = value run configuration file")->check(CLI::ExistingFile);
    std::vector<std::string> keys = leaf.inputs;
    keys.insert(keys.end(), leaf.optional.begin(), leaf.optional.end());
    keys.insert(keys.end(), leaf.params.begin(), leaf.params.end());
    keys.push_back("seed");
    keys.push_back("out");
    for (const auto& key : keys) {
      const KeySpec* spec = find_key(key);
      auto* opt = sub->add_option_function<std::string>(
          detail::flag_for(key), [raw = b.get(), key](const std::string& v) { raw->flags[key] = v; },
          detail::key_help(*spec));
      switch (spec->kind) {
        case KeyKind::Path: opt->type_name("PATH"); break;
        case KeyKind::Int: opt->type_name("INT"); break;
        case KeyKind::Real: opt->type_name("NUM"); break;
        case KeyKind::Bool: opt->type_name("BOOL"); break;
        case KeyKind::Text: opt->type_name("TEXT"); break;
      }
    }
    sub->add_option("--threads", b->threads, "worker threads (fallback: MORPHOSCOPE_THREADS, default 1)")
        ->check(CLI::PositiveNumber);
    sub->add_flag("--quiet", b->quiet, "suppress informational log lines");
    bound.push_back(std::move(b));
  }

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  app.failure_message(CLI::FailureMessage::help);
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    // --help exits 0 with the selected subcommand's help on `out`.
    return app.exit(e, out, err) == 0 ? 0 : 1;
  }

  Bound* chosen = nullptr;
  for (auto& b : bound) {
    if (b->sub->parsed()) {
      chosen = b.get();
    }
  }
  Logger log(err, chosen && chosen->quiet);
  if (!chosen) {
    err << app.help();
    return 1;
  }
  try {
    RunConfig cfg = chosen->config.empty() ? RunConfig() : RunConfig::load(chosen->config);
    for (const auto& [key, value] : chosen->flags) {
      try {
        cfg.set(key, value);
      } catch (const FormatError& e) {
        throw UsageError(std::string(e.what()).substr(std::string("config: ").size()));
      }
    }
    const std::size_t threads = chosen->threads > 0 ? chosen->threads : detail::threads_from_env();
    for (const auto& key : chosen->leaf->inputs) {
      if (cfg.get(key).empty()) {
        throw UsageError("missing input: pass " + detail::flag_for(key) + " or set '" + key + "' in the config");
      }
    }
    for (const auto& group : {chosen->leaf->inputs, chosen->leaf->optional}) {
      for (const auto& key : group) {
        const auto& path = cfg.get(key);
        if (!path.empty() && !std::filesystem::is_regular_file(path)) {
          throw IoError(key + ": no such file " + path);
        }
      }
    }
    std::error_code ec;
    std::filesystem::create_directories(cfg.get("out"), ec);
    if (ec || !std::filesystem::is_directory(cfg.get("out"))) {
      throw IoError("cannot create output directory " + cfg.get("out"));
    }
    Run run(chosen->command, std::move(cfg), threads, log);
    const auto t0 = std::chrono::steady_clock::now();
    log.info("start", {{"command", chosen->command}, {"seed", run.seed()}, {"threads", threads}});
    chosen->leaf->run(run);
    run.write_manifest();
    log.info("done", {{"command", chosen->command},
                      {"seconds", std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count()}});
    return 0;
  } catch (const UsageError& e) {
    log.error("usage", {{"message", e.what()}});
    err << chosen->sub->help();
    return 1;
  } catch (const std::exception& e) {
    log.error("failed", {{"message", e.what()}});
    return 2;
  }
}

}  // namespace morphoscope::cli
