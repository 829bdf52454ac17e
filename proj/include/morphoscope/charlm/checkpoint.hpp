#pragma once

// LM checkpoint container ("CLM1", version 1). All integers are u32/u64
// little-endian, arrays are IEEE-754 binary32 little-endian, row-major:
//
//   "CLM1" | u32 version=1 | u32 |V| | |V| x u32 scalar | u32 d | u32 n
//   | E | W_x | W_h | b | W_o | b_o
//   | u8 flag (1: Adam state follows)
//   | [flag=1: m arrays in the order above, v arrays in the order above, u64 step]
//   | u32 length | metadata JSON {"dev_bpc", "epoch", "seed"}

#include "morphoscope/binio.hpp"
#include "morphoscope/charlm/model.hpp"
#include "morphoscope/charlm/train.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>

namespace morphoscope {

inline constexpr char kCheckpointMagic[4] = {'C', 'L', 'M', '1'};
inline constexpr std::uint32_t kLmCheckpointVersion = 1;
inline constexpr std::uint32_t kProbeCheckpointVersion = 2;

struct CheckpointMeta {
  std::uint64_t epoch = 0;
  std::uint64_t seed = 0;
  double dev_bpc = 0;
};

struct Checkpoint {
  CharLM<float> model;
  std::optional<OptimizerState<float>> optimizer;
  CheckpointMeta meta;
};

namespace detail {

inline void write_magic(std::ostream& out, std::uint32_t version) {
  out.write(kCheckpointMagic, 4);
  binio::put_u32(out, version);
}

// Returns the version after checking the magic.
inline std::uint32_t read_magic(binio::Reader& in) {
  char magic[4];
  in.raw(magic, 4);
  if (std::memcmp(magic, kCheckpointMagic, 4) != 0) {
    throw FormatError("checkpoint: bad magic (expected CLM1)");
  }
  return in.u32();
}

inline void write_vocab(std::ostream& out, const Vocab& v) {
  binio::put_u32(out, static_cast<std::uint32_t>(v.size()));
  for (char32_t c : v.symbols()) {
    binio::put_u32(out, static_cast<std::uint32_t>(c));
  }
}

inline Vocab read_vocab(binio::Reader& in) {
  const std::uint32_t n = in.u32();
  if (n == 0 || n > (1u << 21)) {
    throw FormatError("checkpoint: implausible vocabulary size " + std::to_string(n));
  }
  std::vector<char32_t> symbols(n);
  for (auto& s : symbols) {
    s = static_cast<char32_t>(in.u32());
  }
  try {
    return Vocab::from_symbols(std::move(symbols));
  } catch (const std::invalid_argument& e) {
    throw FormatError(std::string("checkpoint: ") + e.what());
  }
}

inline std::string meta_json(const CheckpointMeta& m) {
  nlohmann::json j = {{"dev_bpc", m.dev_bpc}, {"epoch", m.epoch}, {"seed", m.seed}};
  return j.dump();
}

inline CheckpointMeta parse_meta(const std::string& s) {
  try {
    auto j = nlohmann::json::parse(s);
    return {j.at("epoch").get<std::uint64_t>(), j.at("seed").get<std::uint64_t>(), j.at("dev_bpc").get<double>()};
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("checkpoint: bad metadata: ") + e.what());
  }
}

}  // namespace detail

inline void save_checkpoint(std::ostream& out, const Checkpoint& ck) {
  const auto& p = ck.model.params();
  detail::write_magic(out, kLmCheckpointVersion);
  detail::write_vocab(out, ck.model.vocab());
  binio::put_u32(out, static_cast<std::uint32_t>(p.embed_dim()));
  binio::put_u32(out, static_cast<std::uint32_t>(p.hidden_dim()));
  for (auto a : p.arrays()) {
    binio::put_f32s(out, a);
  }
  binio::put_u8(out, ck.optimizer ? 1 : 0);
  if (ck.optimizer) {
    for (const auto& s : ck.optimizer->slots) {
      binio::put_f32s(out, s.m);
    }
    for (const auto& s : ck.optimizer->slots) {
      binio::put_f32s(out, s.v);
    }
    binio::put_u64(out, ck.optimizer->slots[0].t);
  }
  binio::put_bytes(out, detail::meta_json(ck.meta));
}

inline void save_checkpoint(const std::string& path, const Checkpoint& ck) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw IoError("cannot write checkpoint " + path);
  }
  save_checkpoint(out, ck);
  if (!out) {
    throw IoError("write failed for " + path);
  }
}

inline Checkpoint load_checkpoint(std::istream& is) {
  binio::Reader in(is);
  const std::uint32_t version = detail::read_magic(in);
  if (version != kLmCheckpointVersion) {
    throw FormatError("checkpoint: version " + std::to_string(version) + " is not a language-model checkpoint");
  }
  Vocab vocab = detail::read_vocab(in);
  const std::uint32_t d = in.u32();
  const std::uint32_t n = in.u32();
  if (d == 0 || n == 0 || d > 65536 || n > 65536) {
    throw FormatError("checkpoint: implausible dimensions d=" + std::to_string(d) + " n=" + std::to_string(n));
  }
  auto params = ModelParams<float>::zeros(vocab.size(), d, n);
  for (auto a : params.arrays()) {
    in.f32s(a);
  }
  Checkpoint ck{CharLM<float>(std::move(vocab), std::move(params)), std::nullopt, {}};
  const std::uint8_t flag = in.u8();
  if (flag > 1) {
    throw FormatError("checkpoint: bad optimizer flag");
  }
  if (flag == 1) {
    auto opt = OptimizerState<float>::for_params(ck.model.params());
    for (auto& s : opt.slots) {
      in.f32s(s.m);
    }
    for (auto& s : opt.slots) {
      in.f32s(s.v);
    }
    const std::uint64_t t = in.u64();
    for (auto& s : opt.slots) {
      s.t = t;
    }
    ck.optimizer = std::move(opt);
  }
  ck.meta = detail::parse_meta(in.bytes());
  return ck;
}

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw IoError("cannot open checkpoint " + path);
  }
  return load_checkpoint(in);
}

}  // namespace morphoscope
