#pragma once

// Probe checkpoint: the LM container with version 2.
//
//   "CLM1" | u32 version=2
//   | u32 label count | per label: u32 byte length + UTF-8 bytes
//   | u32 encoder dim | u32 decoder hidden m
//   | W_x | W_h | b | W_o | b_o      (f32 LE, row-major)
//   | u32 length | metadata JSON {"task", "epochs", "seed"}

#include "morphoscope/binio.hpp"
#include "morphoscope/charlm/checkpoint.hpp"
#include "morphoscope/probes/decoder.hpp"
#include "morphoscope/report.hpp"

#include <fstream>
#include <string>

namespace morphoscope {

struct ProbeMeta {
  std::string task;  // "seg" or "pos"
  std::uint64_t epochs = 0;
  std::uint64_t seed = 0;
};

struct ProbeCheckpoint {
  ProbeDecoder<float> decoder;
  ProbeMeta meta;
};

inline void save_probe(std::ostream& out, const ProbeCheckpoint& ck) {
  const auto& d = ck.decoder;
  detail::write_magic(out, kProbeCheckpointVersion);
  binio::put_u32(out, static_cast<std::uint32_t>(d.labels.size()));
  for (const auto& l : d.labels.labels()) {
    binio::put_bytes(out, l);
  }
  binio::put_u32(out, static_cast<std::uint32_t>(d.encoder_dim()));
  binio::put_u32(out, static_cast<std::uint32_t>(d.hidden_dim()));
  for (auto a : d.arrays()) {
    binio::put_f32s(out, a);
  }
  Json meta = {{"task", ck.meta.task}, {"epochs", ck.meta.epochs}, {"seed", ck.meta.seed}};
  binio::put_bytes(out, meta.dump());
}

inline void save_probe(const std::string& path, const ProbeCheckpoint& ck) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw IoError("cannot write probe checkpoint " + path);
  }
  save_probe(out, ck);
  if (!out) {
    throw IoError("write failed for " + path);
  }
}

inline ProbeCheckpoint load_probe(std::istream& is) {
  binio::Reader in(is);
  const std::uint32_t version = detail::read_magic(in);
  if (version != kProbeCheckpointVersion) {
    throw FormatError("checkpoint: version " + std::to_string(version) + " is not a probe checkpoint");
  }
  const std::uint32_t n_labels = in.u32();
  if (n_labels == 0 || n_labels > 4096) {
    throw FormatError("probe checkpoint: implausible label count " + std::to_string(n_labels));
  }
  std::vector<std::string> labels;
  for (std::uint32_t i = 0; i < n_labels; ++i) {
    labels.push_back(in.bytes(1024));
  }
  const std::uint32_t enc = in.u32();
  const std::uint32_t m = in.u32();
  if (enc == 0 || m == 0 || enc > 65536 || m > 65536) {
    throw FormatError("probe checkpoint: implausible dimensions");
  }
  ProbeCheckpoint ck;
  try {
    ck.decoder = ProbeDecoder<float>::zeros(LabelVocab(std::move(labels)), enc, m);
  } catch (const std::invalid_argument& e) {
    throw FormatError(std::string("probe checkpoint: ") + e.what());
  }
  for (auto a : ck.decoder.arrays()) {
    in.f32s(a);
  }
  try {
    const auto j = nlohmann::json::parse(in.bytes());
    ck.meta = {j.at("task").get<std::string>(), j.at("epochs").get<std::uint64_t>(), j.at("seed").get<std::uint64_t>()};
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("probe checkpoint: bad metadata: ") + e.what());
  }
  return ck;
}

inline ProbeCheckpoint load_probe(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw IoError("cannot open probe checkpoint " + path);
  }
  return load_probe(in);
}

}  // namespace morphoscope
