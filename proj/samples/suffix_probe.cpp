// Scores derivational suffixes after a few bases with a saved LM checkpoint.
//
//   suffix_probe lm.ckpt [base ...]
//
// Prints p(suffix | " " + base) for each of the 19 suffixes, followed by the
// suffix's expected category.

#include "morphoscope/charlm/checkpoint.hpp"
#include "morphoscope/suffixlab/suffixes.hpp"

#include <cstdio>
#include <iostream>
#include <vector>

using namespace morphoscope;

int main(int argc, char** argv) {
  if (argc < 2) {
    std::cerr << "usage: suffix_probe lm.ckpt [base ...]\n";
    return 1;
  }
  const auto ck = load_checkpoint(std::string(argv[1]));
  std::vector<std::u32string> bases;
  for (int i = 2; i < argc; ++i) bases.push_back(utf8_decode(argv[i]));
  if (bases.empty()) bases = {U"danger", U"employ", U"dark"};

  std::printf("%-8s", "suffix");
  for (const auto& b : bases) std::printf(" %12s", utf8_encode(b).c_str());
  std::printf("  selects\n");
  for (const auto& s : default_suffixes()) {
    std::printf("%-8s", utf8_encode(s.surface).c_str());
    for (const auto& b : bases) {
      try {
        std::printf(" %12.3e", suffix_probability(ck.model, U" " + b, s.surface).probability);
      } catch (const std::invalid_argument&) {
        std::printf(" %12s", "n/a");  // a suffix letter the model never saw
      }
    }
    std::printf("  %s\n", category_name(s.expected()));
  }
}
