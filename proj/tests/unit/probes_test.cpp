#include "morphoscope/numerics/gradcheck.hpp"
#include "morphoscope/probes/checkpoint.hpp"
#include "morphoscope/probes/segmentation.hpp"
#include "morphoscope/probes/tagging.hpp"

#include "../support/toy_models.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <sstream>

using namespace morphoscope;

namespace {

ProbeDecoder<double> random_decoder(std::size_t labels, std::size_t enc, std::size_t m, std::uint64_t seed) {
  std::vector<std::string> names;
  for (std::size_t i = 0; i < labels; ++i) {
    names.push_back("L" + std::to_string(i));
  }
  auto d = ProbeDecoder<double>::zeros(LabelVocab(names), enc, m);
  Rng rng(seed);
  d.init(rng, 0.5);
  for (Eigen::Index i = 0; i < d.bo.size(); ++i) {
    d.bo[i] = rng.uniform(-0.5, 0.5);
  }
  return d;
}

ProbeSequence<double> random_sequence(std::size_t len, std::size_t enc, std::size_t labels, Rng& rng) {
  ProbeSequence<double> s;
  s.states.resize(static_cast<Eigen::Index>(len), static_cast<Eigen::Index>(enc));
  for (Eigen::Index i = 0; i < s.states.size(); ++i) {
    s.states.data()[i] = rng.uniform(-1, 1);
  }
  for (std::size_t t = 0; t < len; ++t) {
    s.labels.push_back(static_cast<LabelId>(rng.below(labels)));
  }
  return s;
}

SegPrediction pred(std::u32string word, std::set<std::size_t> gold, std::set<std::size_t> predicted, bool eow = true) {
  return {std::move(word), std::move(gold), std::move(predicted), eow};
}

// Sample predictions: gold segmentation vs predicted segmentation.
std::vector<SegPrediction> sample_predictions() {
  return {
      pred(U"actions", {3, 6}, {3, 6}),          // act+ion+s      / act+ion+s
      pred(U"acquisition", {8}, {8}),            // acquisit+ion   / acquisit+ion
      pred(U"antenna", {}, {3}),                 // antenna        / ant+enna
      pred(U"included", {2, 6}, {2, 7}),         // in+clud+ed     / in+clude+d
      pred(U"intensely", {2, 7}, {7}),           // in+tense+ly    / intense+ly
      pred(U"misunderstanding", {3, 8, 13}, {8, 13}),  // mis+under+stand+ing / misunder+stand+ing
      pred(U"woodwork", {4}, {4}),               // wood+work      / wood+work
  };
}

WordSet words(std::initializer_list<const char32_t*> ws) {
  WordSet s;
  for (auto w : ws) {
    s.insert(w);
  }
  return s;
}

}  // namespace

TEST(DecoderGradient, MatchesFiniteDifferences) {
  auto dec = random_decoder(3, 4, 5, 11);
  Rng rng(4);
  std::vector<ProbeSequence<double>> seqs{random_sequence(6, 4, 3, rng), random_sequence(3, 4, 3, rng),
                                          random_sequence(5, 4, 3, rng)};
  std::vector<const ProbeSequence<double>*> batch{&seqs[0], &seqs[1], &seqs[2]};
  auto grad = ProbeDecoder<double>::zeros(dec.labels, 4, 5);
  decoder_batch_loss<double>(dec, batch, &grad);
  auto loss = [&] { return decoder_batch_loss<double>(dec, batch, nullptr); };
  auto params = dec.arrays();
  auto grads = grad.arrays();
  for (std::size_t k = 0; k < 5; ++k) {
    const auto num = finite_diff_grad<double>(loss, params[k], 1e-5);
    EXPECT_LT(max_relative_error<double>(std::span<const double>(grads[k]), num, 1e-9), 1e-4) << "array " << k;
  }
}

TEST(Decoder, PaddingDoesNotChangePerSequenceLoss) {
  auto dec = random_decoder(2, 3, 4, 2);
  Rng rng(9);
  auto a = random_sequence(7, 3, 2, rng);
  auto b = random_sequence(2, 3, 2, rng);
  std::vector<const ProbeSequence<double>*> ab{&a, &b}, only_a{&a}, only_b{&b};
  const double joint = decoder_batch_loss<double>(dec, ab, nullptr);
  const double la = decoder_batch_loss<double>(dec, only_a, nullptr);
  const double lb = decoder_batch_loss<double>(dec, only_b, nullptr);
  EXPECT_NEAR(joint, (7 * la + 2 * lb) / 9, 1e-12);
}

TEST(Decoder, ProbsAreDistributionsAndZeroIsUniform) {
  auto dec = random_decoder(4, 3, 2, 5);
  Rng rng(1);
  const auto s = random_sequence(5, 3, 4, rng);
  const auto p = decoder_probs(dec, s.states);
  for (Eigen::Index r = 0; r < p.rows(); ++r) {
    EXPECT_NEAR(p.row(r).sum(), 1.0, 1e-12);
  }
  auto zero = ProbeDecoder<double>::zeros(dec.labels, 3, 2);
  EXPECT_LT((decoder_probs(zero, s.states).array() - 0.25).abs().maxCoeff(), 1e-15);
  EXPECT_THROW(decoder_probs(dec, Matrix<double>(Matrix<double>::Zero(2, 5))), std::invalid_argument);
}

TEST(Decoder, RejectsBadLabels) {
  auto dec = random_decoder(2, 3, 2, 5);
  Rng rng(1);
  auto s = random_sequence(3, 3, 2, rng);
  s.labels[1] = 2;
  std::vector<const ProbeSequence<double>*> batch{&s};
  EXPECT_THROW(decoder_batch_loss<double>(dec, batch, nullptr), std::invalid_argument);
  EXPECT_THROW(LabelVocab({"A", "A"}), std::invalid_argument);
  EXPECT_THROW(LabelVocab({"A"}).id("B"), std::invalid_argument);
}

TEST(TrainProbe, LearnsASignTask) {
  // Label = 1 iff the first feature is positive.
  Rng rng(3);
  std::vector<ProbeSequence<float>> data;
  for (int i = 0; i < 60; ++i) {
    ProbeSequence<float> s;
    s.states.resize(6, 2);
    for (Eigen::Index t = 0; t < 6; ++t) {
      s.states(t, 0) = static_cast<float>(rng.uniform(-1, 1));
      s.states(t, 1) = static_cast<float>(rng.uniform(-1, 1));
      s.labels.push_back(s.states(t, 0) > 0 ? 1 : 0);
    }
    data.push_back(std::move(s));
  }
  ProbeTrainConfig cfg;
  cfg.hidden = 8;
  cfg.epochs = 30;
  cfg.lr = 0.02;
  cfg.batch = 8;
  const auto r = train_probe(LabelVocab({"neg", "pos"}), data, cfg);
  EXPECT_LT(r.epoch_loss.back(), r.epoch_loss.front());
  std::size_t ok = 0, total = 0;
  for (const auto& s : data) {
    const auto pred = argmax_rows(decoder_probs(r.decoder, s.states));
    for (std::size_t t = 0; t < pred.size(); ++t) {
      ok += pred[t] == s.labels[t];
      ++total;
    }
  }
  EXPECT_GT(static_cast<double>(ok) / static_cast<double>(total), 0.9);
  // Same seed -> same decoder.
  const auto again = train_probe(LabelVocab({"neg", "pos"}), data, cfg);
  EXPECT_EQ(again.epoch_loss, r.epoch_loss);
}

TEST(Metrics, F1FromPublishedPrecisionRecall) {
  EXPECT_NEAR(f1_from_pr(76.6, 62.6), 68.9, 0.05);
  EXPECT_NEAR(f1_from_pr(23.1, 34.2), 27.6, 0.05);
  EXPECT_NEAR(f1_from_pr(98.5, 84.4), 90.9, 0.05);
  EXPECT_NEAR(f1_from_pr(53.6, 59.2), 56.3, 0.05);
  EXPECT_EQ(f1_from_pr(0, 0), 0);
}

TEST(Metrics, SamplePredictionsHandCount) {
  // tp: actions 2, acquisition 1, included 1, intensely 1, misunderstanding 2, woodwork 1 = 8
  // fp: antenna 1, included 1 = 2;  fn: included 1, intensely 1, misunderstanding 1 = 3
  const auto s = seg_metrics(sample_predictions(), SegSetting::ALL, WordSet{});
  EXPECT_EQ(s.tp, 8u);
  EXPECT_EQ(s.fp, 2u);
  EXPECT_EQ(s.fn, 3u);
  EXPECT_NEAR(s.precision, 80.0, 1e-12);
  EXPECT_NEAR(s.recall, 800.0 / 11.0, 1e-12);
  EXPECT_NEAR(s.f1, 2 * 80.0 * (800.0 / 11.0) / (80.0 + 800.0 / 11.0), 1e-12);
}

TEST(Metrics, WordEdgeSplitOnSamples) {
  const auto lex = words({U"act", U"action", U"ant", U"in", U"wood", U"intense", U"under", U"misunderstand"});
  // Word-edge gold: act, action, in (included), in (intensely), intense, misunderstand, wood.
  // Missed: in (intensely). False alarm: ant.
  const auto we = seg_metrics(sample_predictions(), SegSetting::WE, lex);
  EXPECT_EQ(we.tp, 6u);
  EXPECT_EQ(we.fp, 1u);
  EXPECT_EQ(we.fn, 1u);
  // Other gold: acquisit, includ, mis, misunder; found acquisit and misunder;
  // false alarm "include" (not in the lexicon).
  const auto not_we = seg_metrics(sample_predictions(), SegSetting::NOT_WE, lex);
  EXPECT_EQ(not_we.tp, 2u);
  EXPECT_EQ(not_we.fn, 2u);
  EXPECT_EQ(not_we.fp, 1u);
}

TEST(Metrics, EndOfWordIsRecallOverWords) {
  auto preds = sample_predictions();
  preds[2].predicted_eow = false;
  const auto s = seg_metrics(preds, SegSetting::EOW, WordSet{});
  EXPECT_EQ(s.tp, 6u);
  EXPECT_EQ(s.fn, 1u);
  EXPECT_EQ(s.fp, 0u);
  EXPECT_DOUBLE_EQ(s.precision, 100.0);
}

TEST(Metrics, NoPrefixDropsPrefixBoundaries) {
  const auto s = seg_metrics(sample_predictions(), SegSetting::NO_PREF, WordSet{});
  // Gold boundaries after a prefix: in (included, found), in (intensely,
  // missed), mis (missed).
  const auto all = seg_metrics(sample_predictions(), SegSetting::ALL, WordSet{});
  EXPECT_EQ(s.tp, all.tp - 1);
  EXPECT_EQ(s.fn, all.fn - 2);
  EXPECT_EQ(s.fp, all.fp);
}

TEST(Metrics, UndefinedWithoutGold) {
  std::vector<SegPrediction> p{pred(U"cat", {}, {1})};
  EXPECT_THROW(seg_metrics(p, SegSetting::ALL, WordSet{}), UndefinedMetric);
  const auto j = seg_report_json(p, WordSet{});
  EXPECT_TRUE(j["ALL"]["f1"].is_null());
  EXPECT_FALSE(j["EOW"]["f1"].is_null());
}

TEST(Metrics, MatchesBruteForceOracle) {
  Rng rng(21);
  const auto lex = words({U"ab", U"abc", U"b", U"ca"});
  const std::vector<std::u32string> prefixes{U"a", U"ca"};
  std::vector<SegPrediction> preds;
  for (int i = 0; i < 200; ++i) {
    std::u32string w;
    const std::size_t len = 2 + rng.below(6);
    for (std::size_t k = 0; k < len; ++k) {
      w.push_back(U"abc"[rng.below(3)]);
    }
    SegPrediction p{w, {}, {}, rng.below(4) != 0};
    for (std::size_t b = 1; b < len; ++b) {
      if (rng.below(3) == 0) p.gold.insert(b);
      if (rng.below(3) == 0) p.predicted.insert(b);
    }
    preds.push_back(std::move(p));
  }
  for (SegSetting setting : {SegSetting::ALL, SegSetting::WE, SegSetting::NOT_WE, SegSetting::NO_PREF}) {
    std::size_t tp = 0, fp = 0, fn = 0;
    for (const auto& p : preds) {
      for (std::size_t b = 1; b < p.word.size(); ++b) {
        const std::u32string left = p.word.substr(0, b);
        const bool is_word = lex.contains(left, CaseMode::Exact);
        const bool is_prefix = left == U"a" || left == U"ca";
        bool in = true;
        if (setting == SegSetting::WE) in = is_word;
        if (setting == SegSetting::NOT_WE) in = !is_word;
        if (setting == SegSetting::NO_PREF) in = !is_prefix;
        if (!in) continue;
        const bool g = p.gold.count(b) > 0, q = p.predicted.count(b) > 0;
        tp += g && q;
        fp += !g && q;
        fn += g && !q;
      }
    }
    const auto s = seg_metrics(preds, setting, lex, prefixes);
    EXPECT_EQ(s.tp, tp) << seg_setting_name(setting);
    EXPECT_EQ(s.fp, fp) << seg_setting_name(setting);
    EXPECT_EQ(s.fn, fn) << seg_setting_name(setting);
  }
}

TEST(Boundary, ClassifyExamples) {
  const auto lex = words({U"drink", U"agree", U"like"});
  EXPECT_EQ(classify_boundary(U"drinking", 5, lex).cls, BoundaryClass::WE);
  EXPECT_EQ(classify_boundary(U"agreement", 5, lex).cls, BoundaryClass::WE);
  EXPECT_EQ(classify_boundary(U"dislike", 3, lex).cls, BoundaryClass::NOT_WE);
  EXPECT_TRUE(classify_boundary(U"dislike", 3, lex).prefix);
  EXPECT_EQ(classify_boundary(U"intensify", 6, lex).cls, BoundaryClass::NOT_WE);
  EXPECT_EQ(classify_boundary(U"drinking", 8, lex).cls, BoundaryClass::EOW);
  EXPECT_EQ(classify_boundary(U"Drinking", 5, lex).cls, BoundaryClass::WE);
  EXPECT_THROW(classify_boundary(U"drink", 0, lex), std::invalid_argument);
  EXPECT_THROW(classify_boundary(U"drink", 6, lex), std::invalid_argument);
}

TEST(Boundary, LabelsAndFormatting) {
  const auto labels = boundary_labels(7, {3, 6});
  EXPECT_EQ(labels, (std::vector<LabelId>{0, 0, 1, 0, 0, 1, 1}));
  EXPECT_THROW(boundary_labels(3, {3}), std::invalid_argument);
  EXPECT_EQ(format_segmentation(U"actions", {3, 6}), "act+ion+s");
  SegInstance inst{{U"actions", U"", 0}, {3, 6}, labels};
  const auto p = prediction_from_labels(inst, {0, 0, 1, 0, 0, 0, 1});
  EXPECT_EQ(p.predicted, (std::set<std::size_t>{3}));
  EXPECT_TRUE(p.predicted_eow);
  EXPECT_THROW(prediction_from_labels(inst, {0, 1}), std::invalid_argument);
}

TEST(SegData, InstancesUseCorpusContexts) {
  std::istringstream in("walked\twalk+ed\nzzz\tzzz\n");
  const auto recs = parse_segmentations(in);
  const ContextIndex index(U"we walked home. they walked on. ");
  const auto inst = make_seg_instances(recs, index, 15, 15);
  ASSERT_EQ(inst.size(), 3u);
  EXPECT_EQ(inst[0].word.context, U"we");
  EXPECT_EQ(inst[1].word.context, U"we walked home they");
  EXPECT_EQ(inst[2].word.context, U"");
  EXPECT_EQ(inst[0].labels, (std::vector<LabelId>{0, 0, 0, 1, 0, 1}));
}

TEST(SegData, SplitByTypeIsDisjointAndDeduplicated) {
  std::vector<SegRecord> recs;
  for (int i = 0; i < 50; ++i) {
    SegRecord r;
    r.surface = U"w" + std::u32string(1, U'a' + static_cast<char32_t>(i % 20));
    recs.push_back(r);
  }
  const auto s = split_by_type(recs, 0.9, 7);
  EXPECT_EQ(s.train.size() + s.test.size(), 20u);
  EXPECT_EQ(s.train.size(), 18u);
  for (const auto& a : s.train) {
    for (const auto& b : s.test) {
      EXPECT_NE(a.surface, b.surface);
    }
  }
  const auto again = split_by_type(recs, 0.9, 7);
  for (std::size_t i = 0; i < s.test.size(); ++i) {
    EXPECT_EQ(s.test[i].surface, again.test[i].surface);
  }
}

TEST(Encoder, BatchedMatchesSequentialAndIsThreadInvariant) {
  const auto m = fixtures::train_small(fixtures::repeat(U"the cat sat on the mat. the dog sat on the log. ", 8), 2, 6, 10);
  std::vector<ContextedWord> ws{{U"cat", U"the", 0}, {U"mat", U"sat on the", 0}, {U"dog", U"", 0},
                                {U"log", U"the dog sat on the", 0}, {U"on", U"sat", 0}};
  const auto batched = encode_contexted_batch(m, ws, 2, 1);
  const auto threaded = encode_contexted_batch(m, ws, 2, 3);
  for (std::size_t i = 0; i < ws.size(); ++i) {
    const auto seq = encode_contexted(m, ws[i]);
    ASSERT_EQ(batched[i].rows(), static_cast<Eigen::Index>(ws[i].word.size()));
    EXPECT_LT((batched[i] - seq).cwiseAbs().maxCoeff(), 1e-5f);
    EXPECT_TRUE(batched[i] == threaded[i]);
  }
}

TEST(Encoder, ProbeTrainingLeavesEncoderUntouched) {
  const auto m = fixtures::train_small(fixtures::repeat(U"the cat sat on the mat. ", 12), 1, 4, 6);
  const auto before = m.params().arrays();
  std::vector<std::vector<float>> copy;
  for (auto a : before) copy.emplace_back(a.begin(), a.end());
  std::vector<SegInstance> inst{{{U"cat", U"the", 0}, {}, {0, 0, 1}}, {{U"mat", U"", 0}, {1}, {1, 0, 1}}};
  ProbeTrainConfig cfg;
  cfg.hidden = 4;
  cfg.epochs = 2;
  train_probe(segmentation_labels(), seg_sequences(m, inst), cfg);
  const auto after = m.params().arrays();
  for (std::size_t k = 0; k < after.size(); ++k) {
    EXPECT_TRUE(std::equal(after[k].begin(), after[k].end(), copy[k].begin()));
  }
}

TEST(Tagging, InstanceLayout) {
  const TaggedSentence s{{{U"The", "DET"}, {U"cat", "NOUN"}, {U"ran", "VERB"}}};
  const auto labels = upos_labels();
  const auto inst = make_tag_instance(s, labels);
  EXPECT_EQ(inst.text, U"The cat ran");
  EXPECT_EQ(inst.labels[3], labels.id("X"));
  EXPECT_EQ(inst.labels[4], labels.id("NOUN"));
  EXPECT_EQ(inst.word_ends, (std::vector<std::size_t>{2, 6, 10}));
  EXPECT_EQ(inst.word_tags, (std::vector<LabelId>{labels.id("DET"), labels.id("NOUN"), labels.id("VERB")}));
  EXPECT_EQ(labels.size(), 17u);
}

TEST(Tagging, WordTagIsLastCharacter) {
  const auto r = tags_from_chars({1, 2, 3, 0, 4, 5}, U"abc de");
  EXPECT_EQ(r.word_tags, (std::vector<LabelId>{3, 5}));
}

TEST(Tagging, MetricsAndMajorityBaseline) {
  const auto labels = upos_labels();
  const TaggedSentence s1{{{U"a", "DET"}, {U"dog", "NOUN"}}};
  const TaggedSentence s2{{{U"cats", "NOUN"}, {U"run", "VERB"}}};
  const auto train = make_tag_instances({s1, s2}, labels);
  const auto test = make_tag_instances({s2}, labels);
  const auto base = majority_baseline(train, test);
  EXPECT_EQ(base.tag, labels.id("NOUN"));
  EXPECT_DOUBLE_EQ(base.accuracy, 50.0);

  TagResult r;
  r.char_tags = test[0].labels;
  r.char_tags[0] = labels.id("VERB");  // 'c' wrong, word still right
  r.char_tags[4] = labels.id("NOUN");  // space: ignored
  r.word_tags = {labels.id("NOUN"), labels.id("NOUN")};
  const auto m = tag_metrics(test, {r});
  EXPECT_EQ(m.chars, 7u);
  EXPECT_NEAR(m.char_accuracy, 600.0 / 7.0, 1e-12);
  EXPECT_DOUBLE_EQ(m.word_accuracy, 50.0);
}

TEST(Tagging, MajorityTieGoesToLowerId) {
  const auto labels = upos_labels();
  const TaggedSentence s{{{U"run", "VERB"}, {U"dog", "NOUN"}}};
  const auto inst = make_tag_instances({s}, labels);
  const auto base = majority_baseline(inst, inst);
  EXPECT_EQ(base.tag, std::min(labels.id("VERB"), labels.id("NOUN")));
}

TEST(Tagging, EvolutionCsvHeader) {
  const auto m = fixtures::train_small(fixtures::repeat(U"a cat. a dog. ", 20), 1, 3, 4);
  auto dec = ProbeDecoder<float>::zeros(upos_labels(), 4, 3);
  const auto probs = tag_distributions(dec, m, U"a cat");
  ASSERT_EQ(probs.rows(), 5);
  const auto csv = tag_evolution_csv(dec, probs, U"a cat");
  EXPECT_EQ(csv.substr(0, 13), "pos,char,ADJ,");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 6);
}

TEST(ProbeCheckpoint, RoundTripIsBitExact) {
  auto d = random_decoder(3, 4, 2, 8).cast<float>();
  ProbeCheckpoint ck{d, {"seg", 5, 42}};
  std::ostringstream out(std::ios::binary);
  save_probe(out, ck);
  std::istringstream in(out.str(), std::ios::binary);
  const auto back = load_probe(in);
  EXPECT_EQ(back.decoder.labels, d.labels);
  EXPECT_EQ(back.meta.task, "seg");
  EXPECT_EQ(back.meta.seed, 42u);
  auto a = d.arrays();
  auto b = back.decoder.arrays();
  for (std::size_t k = 0; k < 5; ++k) {
    ASSERT_EQ(a[k].size(), b[k].size());
    EXPECT_EQ(std::memcmp(a[k].data(), b[k].data(), a[k].size() * sizeof(float)), 0);
  }
  std::ostringstream again(std::ios::binary);
  save_probe(again, back);
  EXPECT_EQ(again.str(), out.str());
}

TEST(ProbeCheckpoint, RejectsLmCheckpointAndTruncation) {
  const auto lm = fixtures::space_detector_model();
  std::ostringstream lm_bytes(std::ios::binary);
  save_checkpoint(lm_bytes, Checkpoint{lm, {}, {}});
  std::istringstream lm_in(lm_bytes.str(), std::ios::binary);
  EXPECT_THROW(load_probe(lm_in), FormatError);

  ProbeCheckpoint ck{random_decoder(2, 2, 2, 1).cast<float>(), {"pos", 1, 1}};
  std::ostringstream out(std::ios::binary);
  save_probe(out, ck);
  const std::string bytes = out.str();
  std::istringstream cut(bytes.substr(0, bytes.size() / 2), std::ios::binary);
  EXPECT_ANY_THROW(load_probe(cut));
}
