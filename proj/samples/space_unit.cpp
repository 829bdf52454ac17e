// Builds a two-unit LSTM by hand whose first unit fires on every space,
// then shows what the unit probe recovers from it: top triggers, the
// boundary-alignment ranking and a per-character trace.

#include "morphoscope/unitprobe/units.hpp"

#include <iostream>

using namespace morphoscope;

namespace {

CharLM<float> hand_built() {
  const Vocab v = Vocab::from_symbols({Vocab::kUnkSymbol, U' ', U'a', U'c'});
  auto p = ModelParams<float>::zeros(4, 2, 2);
  p.E(1, 0) = 1;  // embedding dim 0 = "is a space"
  p.E(3, 1) = 1;  // embedding dim 1 = "is a c"
  for (Eigen::Index u = 0; u < 2; ++u) {
    p.lstm.b[u] = 20;       // input gate open
    p.lstm.b[2 + u] = -20;  // forget gate shut: no memory
    p.lstm.b[6 + u] = 20;   // output gate open
  }
  p.lstm.Wx(4, 0) = 3;
  p.lstm.Wx(5, 1) = 2;
  return CharLM<float>(v, std::move(p));
}

}  // namespace

int main() {
  const auto model = hand_built();
  const std::u32string text = U"ca ac a cca acca ca a c ac";
  const auto ids = model.vocab().encode(text);

  const auto triggers = top_triggers(model, std::span<const CharId>(ids), 3, 6);
  for (std::size_t u = 0; u < triggers.size(); ++u) {
    std::cout << "unit " << u << ":\n";
    for (const auto& r : triggers[u]) {
      std::cout << "  " << r.activation << "  \"" << utf8_encode(r.context) << "\"\n";
    }
  }

  std::cout << "\nboundary alignment:\n";
  for (const auto& s : rank_units_by_boundary_alignment(model, text)) {
    std::cout << "  unit " << s.unit << " score " << s.score << "\n";
  }

  std::cout << "\n" << trace_csv(trace_unit(model, 0, U"a cat"));
}
