// Trains a small character LM on a text file and prints a sample from it.
//
//   tiny_lm [corpus.txt] [epochs]

#include "morphoscope/charlm/eval.hpp"
#include "morphoscope/charlm/sampling.hpp"
#include "morphoscope/charlm/train.hpp"
#include "morphoscope/corpus/utf8.hpp"

#include <iostream>
#include <string>

using namespace morphoscope;

int main(int argc, char** argv) {
  const std::string path = argc > 1 ? argv[1] : std::string(MORPHOSCOPE_DATA_DIR) + "/corpus.txt";
  const std::size_t epochs = argc > 2 ? std::stoul(argv[2]) : 1;

  // A 100k-character slice keeps this to a few seconds.
  const std::u32string text = read_text_file(path).substr(0, 100'000);
  const Vocab vocab = Vocab::build(text);
  const auto split = split_stream(vocab.encode(text), 0.9, 1);

  TrainConfig cfg;
  cfg.embed = 16;
  cfg.hidden = 64;
  cfg.batch = 16;
  cfg.bptt = 50;
  cfg.lr = 0.01;
  cfg.epochs = epochs;
  const auto result = train_lm<float>(cfg, split, vocab, [](const EpochLog& e, const auto&, const auto&) {
    std::cout << "epoch " << e.epoch << ": dev bpc " << e.dev_bpc << "\n";
  });

  std::cout << "unigram bpc " << unigram_bits_per_char(split.train, split.dev, vocab.size()) << "\n\n";
  std::cout << "The" << utf8_encode(sample(result.best, 300, 0.8, 7, U"The")) << "\n";
}
