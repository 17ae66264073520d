#pragma once

// `.net` network documents: versioned JSON with 1-based neuron numbering in
// the `pinned` map. Doubles are written in shortest round-trip form, so
// parse(serialize(doc)) reproduces every weight bit for bit.
//
//   {
//     "version": 1,
//     "name": "xor",
//     "layer_sizes": [2, 2, 1],
//     "weights": [[[1.0, -1.0], [-1.0, 1.0]], [[1.0, 1.0]]],
//     "pinned": {"2": 1.0},
//     "thresholds": [0.5],
//     "gate": {"kind": "xor", "threshold": 0.5},
//     "build_sheet": ["layer=2 recv=1 send=1 clamp=1.0000", ...]
//   }
//
// `weights[k]` is the row-major matrix into layer k+1 (row = receiving neuron).
// Everything after `weights` is optional.

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mnn/core.hpp"
#include "mnn/gates.hpp"
#include "mnn/training.hpp"

namespace mnn {

inline constexpr int kDocumentVersion = 1;

struct GateBlock {
  gates::GateKind kind = gates::GateKind::And;
  double threshold = 0.5;

  friend bool operator==(const GateBlock&, const GateBlock&) = default;
};

struct NetworkDocument {
  int version = kDocumentVersion;
  Network network = Network::canonical();
  std::optional<std::string> name;
  std::optional<std::string> description;
  std::vector<double> thresholds;  // optional readout threshold per output neuron
  std::optional<GateBlock> gate;
  bool embed_build_sheet = false;

  friend bool operator==(const NetworkDocument&, const NetworkDocument&) = default;
};

/// Throws ParseError on malformed JSON, unknown versions, or an invalid network.
NetworkDocument parse_document(std::string_view text);
std::string serialize_document(const NetworkDocument& doc);

NetworkDocument load_document(const std::filesystem::path& path);
void save_document(const std::filesystem::path& path, const NetworkDocument& doc);

NetworkDocument gate_document(const gates::GateSpec& spec);
/// Requires a gate block. Throws ParseError otherwise.
gates::GateSpec gate_from_document(const NetworkDocument& doc);

/// Dataset file: {"name": ..., "readout_threshold": 0.5?,
///                "samples": [{"input": [..], "target": [..]}, ...]}
training::Dataset parse_dataset(std::string_view text);
training::Dataset load_dataset(const std::filesystem::path& path);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, std::string_view text);

}  // namespace mnn
