#include "morphoscope/charlm/checkpoint.hpp"
#include "morphoscope/charlm/eval.hpp"
#include "morphoscope/charlm/model.hpp"
#include "morphoscope/charlm/sampling.hpp"
#include "morphoscope/charlm/train.hpp"
#include "morphoscope/numerics/gradcheck.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

using namespace morphoscope;

namespace {

CharLM<double> random_model(const Vocab& v, std::size_t d, std::size_t n, std::uint64_t seed, double scale = 0.5) {
  CharLM<double> m(v, d, n);
  Rng rng(seed);
  m.init(rng, scale, 1.0);
  for (Eigen::Index i = 0; i < m.params().bo.size(); ++i) {
    m.params().bo[i] = rng.uniform(-scale, scale);
  }
  for (Eigen::Index i = 0; i < m.params().lstm.b.size(); ++i) {
    m.params().lstm.b[i] += rng.uniform(-scale, scale);
  }
  return m;
}

// A model overfit on "abab..." with plain training.
CharLM<float> train_ab(std::size_t epochs = 40) {
  std::u32string text;
  for (int i = 0; i < 1000; ++i) {
    text += U"ab";
  }
  const Vocab v = Vocab::build(text);
  const auto ids = v.encode(text);
  StreamSplit split;
  split.train.assign(ids.begin(), ids.begin() + 1800);
  split.dev.assign(ids.begin() + 1800, ids.end());
  TrainConfig cfg;
  cfg.embed = 4;
  cfg.hidden = 8;
  cfg.batch = 4;
  cfg.bptt = 10;
  cfg.dropout = 0;
  cfg.lr = 0.02;
  cfg.epochs = epochs;
  cfg.patience = epochs;
  return train_lm<float>(cfg, split, v).best;
}

std::string to_bytes(const Checkpoint& ck) {
  std::ostringstream out(std::ios::binary);
  save_checkpoint(out, ck);
  return out.str();
}

}  // namespace

TEST(LstmCell, ZeroWeightsGiveZeroState) {
  LstmWeights<double> w(3, 4);
  auto s = lstm_cell(Vector<double>::Ones(3), LstmState<double>::zeros(4), w);
  EXPECT_TRUE(s.h.isZero(0));
  EXPECT_TRUE(s.c.isZero(0));
}

TEST(LstmCell, SaturatedForgetGateKeepsMemory) {
  LstmWeights<double> w(2, 3);
  w.b.segment(3, 3).setConstant(20.0);
  LstmState<double> st = LstmState<double>::zeros(3);
  st.c << 0.7, -1.2, 3.0;
  const auto out = lstm_cell(Vector<double>::Zero(2), st, w);
  for (int k = 0; k < 3; ++k) {
    EXPECT_NEAR(out.c[k], st.c[k], 1e-8);
  }
}

TEST(LstmCell, DimensionMismatchThrows) {
  LstmWeights<double> w(2, 3);
  EXPECT_THROW(lstm_cell(Vector<double>::Zero(3), LstmState<double>::zeros(3), w), std::invalid_argument);
  EXPECT_THROW(lstm_cell(Vector<double>::Zero(2), LstmState<double>::zeros(4), w), std::invalid_argument);
}

TEST(LstmCell, BatchedForwardMatchesCell) {
  Rng rng(2);
  LstmWeights<double> w(3, 5);
  w.init_uniform(rng, 0.5, 1.0);
  Matrix<double> xs = Matrix<double>::Random(4 * 2, 3);
  const Matrix<double> zero = Matrix<double>::Zero(2, 5);
  const auto res = lstm_forward(w, xs, 2, zero, zero, nullptr);
  for (Eigen::Index lane = 0; lane < 2; ++lane) {
    auto st = LstmState<double>::zeros(5);
    for (Eigen::Index t = 0; t < 4; ++t) {
      st = lstm_cell(Vector<double>(xs.row(t * 2 + lane).transpose()), st, w);
      EXPECT_LT((res.hs.row(t * 2 + lane).transpose() - st.h).cwiseAbs().maxCoeff(), 1e-12);
    }
  }
}

// Random 3-unit cell: finite differences on all nine weight blocks (Wx, Wh, b
// for the four gates), loss = sum of random weights times (h, c).
TEST(LstmCell, GradientMatchesFiniteDifferences) {
  Rng rng(31);
  LstmWeights<double> w(2, 3);
  w.init_uniform(rng, 0.8, 0.5);
  Matrix<double> xs = Matrix<double>::Random(5, 2);
  Matrix<double> h0 = Matrix<double>::Random(1, 3) * 0.5;
  Matrix<double> c0 = Matrix<double>::Random(1, 3);
  const Matrix<double> coef = Matrix<double>::Random(5, 3);
  auto loss = [&] {
    const auto r = lstm_forward(w, xs, 1, h0, c0, nullptr);
    return (r.hs.array() * coef.array()).sum();
  };
  LstmTape<double> tape;
  const auto r = lstm_forward(w, xs, 1, h0, c0, &tape);
  LstmWeights<double> g(2, 3);
  Matrix<double> dxs;
  lstm_backward(w, tape, r.hs, coef, g, &dxs);
  for (auto [param, grad] : {std::pair{&w.Wx, &g.Wx}, std::pair{&w.Wh, &g.Wh}}) {
    const auto num = finite_diff_grad<double>(loss, as_span(*param), 1e-5);
    EXPECT_LT(max_relative_error<double>(as_span(*grad), num), 1e-4);
  }
  EXPECT_LT(max_relative_error<double>(as_span(g.b), finite_diff_grad<double>(loss, as_span(w.b), 1e-5)), 1e-4);
  EXPECT_LT(max_relative_error<double>(as_span(dxs), finite_diff_grad<double>(loss, as_span(xs), 1e-5)), 1e-4);
}

TEST(CharLMGradient, FullModelMatchesFiniteDifferences) {
  const Vocab v = Vocab::from_symbols({Vocab::kUnkSymbol, U'a', U'b', U'c', U' '});
  auto model = random_model(v, 3, 4, 17);
  const std::vector<CharId> inputs{1, 2, 4, 3, 1, 1, 2, 4, 2, 3, 3, 1, 4, 2};
  const std::vector<CharId> targets{2, 4, 3, 1, 1, 2, 0, 2, 3, 3, 1, 4, 2, 1};
  for (std::size_t batch : {1u, 2u}) {
    const Segment seg{batch, 7, std::span(inputs).first(7 * batch), std::span(targets).first(7 * batch)};
    Matrix<double> mask = Matrix<double>::Ones(7 * batch, 3);
    mask(2, 1) = 0;
    mask(5, 0) = 2;
    auto loss = [&] {
      Matrix<double> h = Matrix<double>::Zero(batch, 4), c = Matrix<double>::Zero(batch, 4);
      return model.segment_loss(seg, h, c, nullptr, &mask);
    };
    auto grad = ModelParams<double>::zeros(5, 3, 4);
    Matrix<double> h = Matrix<double>::Zero(batch, 4), c = Matrix<double>::Zero(batch, 4);
    model.segment_loss(seg, h, c, &grad, &mask);
    auto params = model.params().arrays();
    auto grads = grad.arrays();
    for (std::size_t k = 0; k < 6; ++k) {
      const auto num = finite_diff_grad<double>(loss, params[k], 1e-5);
      EXPECT_LT(max_relative_error<double>(grads[k], num, 1e-9), 1e-4)
          << ModelParams<double>::kNames[k] << " batch " << batch;
    }
  }
}

TEST(CharLM, DistributionsSumToOne) {
  const Vocab v = Vocab::build(U"hello world");
  auto m = random_model(v, 4, 6, 3).cast<float>();
  const auto r = m.forward(v.encode(U"hello world hello"), m.zero_state());
  for (Eigen::Index t = 0; t < r.probs.rows(); ++t) {
    EXPECT_NEAR(r.probs.row(t).sum(), 1.0f, 1e-6f);
  }
}

TEST(CharLM, ZeroWeightsAreUniform) {
  const Vocab v = Vocab::build(U"abcde");
  CharLM<double> m(v, 3, 4);
  const auto r = m.forward(v.encode(U"abc"), m.zero_state());
  EXPECT_TRUE((r.probs.array() - 1.0 / 6.0).abs().maxCoeff() < 1e-15);
  const auto ids = v.encode(U"abcdeabcde");
  EXPECT_NEAR(bits_per_char(m, ids), std::log2(6.0), 1e-12);
}

TEST(CharLM, OutOfRangeIndexThrows) {
  const Vocab v = Vocab::build(U"ab");
  CharLM<float> m(v, 2, 2);
  const std::vector<CharId> bad{1, 7};
  EXPECT_THROW(m.forward(bad, m.zero_state()), std::invalid_argument);
}

TEST(CharLMProperty, CarriedStateEqualsOneCall) {
  const Vocab v = Vocab::build(U"the quick brown fox");
  auto m = random_model(v, 5, 7, 8).cast<float>();
  const auto ids = v.encode(U"the quick brown fox jumps");
  const auto whole = m.forward(ids, m.zero_state());
  const auto a = m.forward(std::span(ids).first(10), m.zero_state());
  const auto b = m.forward(std::span(ids).subspan(10), a.state);
  for (Eigen::Index t = 0; t < whole.probs.rows(); ++t) {
    const auto row = t < 10 ? a.probs.row(t) : b.probs.row(t - 10);
    EXPECT_LT((whole.probs.row(t) - row).cwiseAbs().maxCoeff(), 1e-6f);
  }
}

TEST(CharLM, BitsPerCharEqualsCrossEntropyInBits) {
  const Vocab v = Vocab::build(U"abc ");
  auto m = random_model(v, 3, 5, 12);
  const auto ids = v.encode(U"abc cab bca");
  const auto r = m.forward(std::span(ids).first(ids.size() - 1), m.zero_state());
  double nats = 0;
  for (std::size_t t = 0; t + 1 < ids.size(); ++t) {
    nats += -std::log(r.probs(static_cast<Eigen::Index>(t), ids[t + 1]));
  }
  EXPECT_NEAR(bits_per_char(m, ids), nats / (ids.size() - 1) / std::log(2.0), 1e-9);
}

TEST(CharLM, HiddenStatesMatchSequentialSteps) {
  const Vocab v = Vocab::build(U"abcd");
  auto m = random_model(v, 3, 4, 5).cast<float>();
  const std::vector<std::vector<CharId>> seqs{{1, 2, 3}, {4}, {}, {2, 2, 2, 2, 1}};
  const auto hs = m.hidden_states(seqs, 3);
  for (std::size_t k = 0; k < seqs.size(); ++k) {
    ASSERT_EQ(hs[k].rows(), static_cast<Eigen::Index>(seqs[k].size()));
    auto st = m.zero_state();
    for (std::size_t t = 0; t < seqs[k].size(); ++t) {
      m.step(seqs[k][t], st);
      EXPECT_LT((hs[k].row(static_cast<Eigen::Index>(t)).transpose() - st.h).cwiseAbs().maxCoeff(), 1e-6f);
    }
  }
}

TEST(Unigram, CountingOracle) {
  // train counts a:2 b:1 (+1 smoothing over |V|=3 incl. UNK) -> p(a)=3/6, p(b)=2/6
  const std::vector<CharId> train{1, 1, 2};
  const std::vector<CharId> eval{2, 1, 2};
  const double expected = (-std::log2(3.0 / 6.0) - std::log2(2.0 / 6.0)) / 2.0;
  EXPECT_NEAR(unigram_bits_per_char(train, eval, 3), expected, 1e-12);
}

TEST(Train, OverfitsAlternatingStream) {
  const auto m = train_ab();
  const Vocab& v = m.vocab();
  auto st = m.zero_state();
  for (char32_t c : std::u32string(U"abababa")) {
    m.step(v.id(c), st);
  }
  EXPECT_GT(m.next_distribution(st)[v.id(U'b')], 0.99f);
  const auto ids = v.encode(U"abababababababababab");
  EXPECT_LT(bits_per_char(m, ids), 0.05);
}

TEST(Train, DeterministicLossTraceWithoutDropout) {
  const std::u32string text = U"the cat sat on the mat and the dog sat on the log. ";
  std::u32string big;
  for (int i = 0; i < 40; ++i) {
    big += text;
  }
  const Vocab v = Vocab::build(big);
  const auto split = split_stream(v.encode(big), 0.9, 3);
  TrainConfig cfg;
  cfg.embed = 8;
  cfg.hidden = 16;
  cfg.batch = 4;
  cfg.bptt = 20;
  cfg.dropout = 0;
  cfg.epochs = 2;
  const auto a = train_lm<float>(cfg, split, v);
  const auto b = train_lm<float>(cfg, split, v);
  ASSERT_EQ(a.loss_trace.size(), b.loss_trace.size());
  for (std::size_t i = 0; i < a.loss_trace.size(); ++i) {
    ASSERT_EQ(std::bit_cast<std::uint64_t>(a.loss_trace[i]), std::bit_cast<std::uint64_t>(b.loss_trace[i]));
  }
  EXPECT_EQ(to_bytes({a.best, a.best_optimizer, {}}), to_bytes({b.best, b.best_optimizer, {}}));

  cfg.dropout = 0.3;
  const auto c = train_lm<float>(cfg, split, v);
  const auto d = train_lm<float>(cfg, split, v);
  EXPECT_EQ(c.loss_trace, d.loss_trace);
  EXPECT_NE(c.loss_trace, a.loss_trace);
}

TEST(Train, InvalidConfigRejected) {
  TrainConfig cfg;
  cfg.dropout = 1.0;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
  cfg.dropout = 0.2;
  cfg.batch = 0;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
}

TEST(Train, DivergenceReportsDiagnostics) {
  const std::u32string text = U"abcabcabcabcabcabcabcabcabcabcabcabcabcabcabc";
  const Vocab v = Vocab::build(text);
  const auto split = split_stream(v.encode(text), 0.8, 1);
  TrainConfig cfg;
  cfg.embed = 2;
  cfg.hidden = 2;
  cfg.batch = 2;
  cfg.bptt = 4;
  cfg.dropout = 0;
  cfg.epochs = 1;
  cfg.init_scale = 1e300;  // weights overflow to inf in float
  try {
    train_lm<float>(cfg, split, v);
    FAIL() << "expected TrainingDiverged";
  } catch (const TrainingDiverged& e) {
    EXPECT_NE(std::string(e.what()).find("grad norm"), std::string::npos);
  }
}

TEST(Checkpoint, RoundTripIsBitExact) {
  const Vocab v = Vocab::build(U"héllo wörld");
  Checkpoint ck{random_model(v, 4, 6, 1).cast<float>(), std::nullopt, {3, 42, 2.5}};
  auto opt = OptimizerState<float>::for_params(ck.model.params());
  Rng rng(6);
  for (auto& s : opt.slots) {
    for (auto& x : s.m) x = static_cast<float>(rng.uniform(-1, 1));
    for (auto& x : s.v) x = static_cast<float>(rng.uniform(0, 1));
    s.t = 77;
  }
  ck.optimizer = opt;
  const std::string bytes = to_bytes(ck);
  std::istringstream in(bytes, std::ios::binary);
  const auto back = load_checkpoint(in);
  EXPECT_EQ(back.model.vocab(), ck.model.vocab());
  for (std::size_t k = 0; k < 6; ++k) {
    const auto a = ck.model.params().arrays()[k];
    const auto b = back.model.params().arrays()[k];
    ASSERT_EQ(a.size(), b.size());
    EXPECT_EQ(std::memcmp(a.data(), b.data(), a.size() * sizeof(float)), 0);
  }
  ASSERT_TRUE(back.optimizer);
  EXPECT_EQ(back.optimizer->slots[3].m, opt.slots[3].m);
  EXPECT_EQ(back.optimizer->slots[5].t, 77u);
  EXPECT_EQ(back.meta.epoch, 3u);
  EXPECT_EQ(back.meta.seed, 42u);
  EXPECT_DOUBLE_EQ(back.meta.dev_bpc, 2.5);
  EXPECT_EQ(to_bytes(back), bytes);

  const auto ids = v.encode(U"hello");
  const auto p1 = ck.model.forward(ids, ck.model.zero_state()).probs;
  const auto p2 = back.model.forward(ids, back.model.zero_state()).probs;
  EXPECT_TRUE(p1 == p2);
}

TEST(Checkpoint, LayoutHeader) {
  const Vocab v = Vocab::from_symbols({Vocab::kUnkSymbol, U'a'});
  Checkpoint ck{CharLM<float>(v, 1, 1), std::nullopt, {}};
  const std::string b = to_bytes(ck);
  EXPECT_EQ(b.substr(0, 4), "CLM1");
  EXPECT_EQ(b[4], 1);
  EXPECT_EQ(b[8], 2);                    // |V|
  EXPECT_EQ(static_cast<unsigned char>(b[12]), 0xFD);  // U+FFFD little-endian
  EXPECT_EQ(b[16], 'a');
  // header 4+4+4+8+4+4, then arrays: E 2, Wx 4, Wh 4, b 4, Wo 2, bo 2 floats, then flag
  EXPECT_EQ(b[28 + 18 * 4], 0);
}

TEST(Checkpoint, CorruptionDetected) {
  const Vocab v = Vocab::build(U"ab");
  std::string bytes = to_bytes({CharLM<float>(v, 2, 3), std::nullopt, {}});
  std::string bad = bytes;
  bad[0] = 'X';
  std::istringstream in1(bad);
  EXPECT_THROW(load_checkpoint(in1), FormatError);
  std::string wrong_version = bytes;
  wrong_version[4] = 9;
  std::istringstream in2(wrong_version);
  EXPECT_THROW(load_checkpoint(in2), FormatError);
  std::istringstream in3(bytes.substr(0, bytes.size() / 2));
  EXPECT_THROW(load_checkpoint(in3), IoError);
}

TEST(Sampling, ReproducibleAndNearArgmaxAtLowTemperature) {
  const auto m = train_ab();
  EXPECT_EQ(sample(m, 50, 1.0, 9), sample(m, 50, 1.0, 9));
  EXPECT_EQ(sample(m, 8, 1e-3, 1, U"a"), U"babababa");
  for (char32_t c : sample(m, 200, 1.0, 2)) {
    EXPECT_NE(c, Vocab::kUnkSymbol);
  }
}

TEST(Sampling, EmpiricalFrequenciesWithinThreeSigma) {
  // Zero-state-independent 2-char model: bias-only output, p(a) = sigmoid(0.8).
  const Vocab v = Vocab::from_symbols({Vocab::kUnkSymbol, U'a', U'b'});
  CharLM<double> m(v, 1, 1);
  m.params().bo << 0.0, 0.8, 0.0;
  const auto s = sample(m, 10000, 1.0, 5);
  const double p = std::exp(0.8) / (std::exp(0.8) + 1.0);
  const double count = static_cast<double>(std::count(s.begin(), s.end(), U'a'));
  EXPECT_NEAR(count, 10000 * p, 3 * std::sqrt(10000 * p * (1 - p)));
}

TEST(Sampling, CompleteWordsAreDelimiterFree) {
  const Vocab v = Vocab::build(U"the cat. a");
  auto m = random_model(v, 4, 6, 4);
  WordSampling opts;
  opts.seed = 3;
  const auto words = sample_complete_words(m, 40, opts);
  ASSERT_EQ(words.size(), 40u);
  for (const auto& w : words) {
    ASSERT_FALSE(w.text.empty());
    for (char32_t c : w.text) {
      EXPECT_FALSE(is_delimiter(c));
    }
    EXPECT_TRUE(is_delimiter(w.delimiter));
    EXPECT_LE(tokenize_words(w.context).size(), 15u);
  }
}

TEST(Sampling, MeanLogProbIsPerCharAverage) {
  const Vocab v = Vocab::build(U"ab .");
  auto m = random_model(v, 3, 5, 6);
  WordSampling opts;
  opts.seed = 11;
  const auto words = sample_complete_words(m, 5, opts);
  ASSERT_FALSE(words.empty());
  // Replay: the sampled stream starts with a space and words are separated by
  // their delimiters (runs of delimiters are collapsed in the output, so
  // replay is only exact for the first word).
  const auto& w = words.front();
  auto st = m.zero_state();
  m.step(v.id(U' '), st);
  Rng rng(11);
  // Reconstruct the prefix that precedes the first word by resampling.
  std::u32string prefix;
  while (true) {
    const CharId id = draw_next(m, st, 1.0, rng);
    if (!is_delimiter(v.symbol(id))) {
      // first word char: undo by rebuilding from scratch below
      break;
    }
    prefix.push_back(v.symbol(id));
    m.step(id, st);
  }
  auto st2 = m.zero_state();
  m.step(v.id(U' '), st2);
  for (char32_t c : prefix) {
    m.step(v.id(c), st2);
  }
  double sum = 0;
  for (char32_t c : w.text) {
    sum += std::log(m.next_distribution(st2)[v.id(c)]);
    m.step(v.id(c), st2);
  }
  EXPECT_NEAR(w.mean_logprob, sum / static_cast<double>(w.text.size()), 1e-9);
  EXPECT_NEAR(w.p_delimiter, m.next_distribution(st2)[v.id(w.delimiter)], 1e-12);
}

TEST(NonceRate, DictionaryExtremes) {
  const Vocab v = Vocab::build(U"ab a");
  auto m = random_model(v, 3, 4, 2);
  WordSet everything;
  WordSampling opts;
  opts.seed = 1;
  for (const auto& w : sample_complete_words(m, 30, opts)) {
    everything.insert(w.text);
  }
  const WordSet empty;
  EXPECT_DOUBLE_EQ(nonce_rate(m, empty, {&everything}, 30, 1).rate, 0.0);
  EXPECT_DOUBLE_EQ(nonce_rate(m, empty, {&empty}, 30, 1).rate, 1.0);
  EXPECT_DOUBLE_EQ(nonce_rate(m, everything, {&empty}, 30, 1).rate, 0.0);
}
