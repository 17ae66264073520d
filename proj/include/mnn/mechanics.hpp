#pragma once

// Kinematic model of the lever-and-string machine.
//
// Units are normalized: a lever angle of +1 is full clockwise contact with the
// ground plane, a clamp arc position of +1 is the far right end of the sending
// lever. Strings are rigid and frictionless, and the model is quasi-static.

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mnn/core.hpp"

namespace mnn::mechanics {

struct NeuronId {
  std::size_t layer = 0;
  std::size_t index = 0;

  friend auto operator<=>(const NeuronId&, const NeuronId&) = default;
};

struct LeverState {
  NeuronId id;
  double angle = 0.0;  // [-1, 1] on inputs, [0, 1] on hidden/output levers

  friend bool operator==(const LeverState&, const LeverState&) = default;
};

struct ClampPosition {
  NeuronId sender;
  NeuronId receiver;
  double arc_position = 0.0;  // 0 at the fulcrum, +1 full right, -1 full left

  friend bool operator==(const ClampPosition&, const ClampPosition&) = default;
};

/// Movable-pulley tree summing the strings that feed one receiving lever.
/// Every stage halves the travel, and the output string is attached at the
/// same fraction of the lever length so the reduction cancels out.
struct PulleyAssembly {
  std::size_t fan_in = 1;
  std::size_t stages = 0;
  double attachment_fraction = 1.0;  // == reduction factor, 1 / 2^stages

  static PulleyAssembly for_fan_in(std::size_t fan_in);
  double reduction() const noexcept { return attachment_fraction; }

  friend bool operator==(const PulleyAssembly&, const PulleyAssembly&) = default;
};

struct MechanicalState {
  std::vector<std::vector<LeverState>> levers;  // [layer][neuron]
  std::vector<ClampPosition> clamps;            // ordered (receiving layer, receiver, sender)
  std::vector<double> string_displacements;     // parallel to clamps
  std::vector<std::vector<PulleyAssembly>> pulleys;   // [layer][neuron], empty for layer 0
  std::vector<std::vector<double>> pulley_outputs;    // [layer][neuron], reduced travel
  std::vector<std::vector<double>> unclipped_angles;  // pulley_output / attachment, before the stops
  std::vector<std::vector<bool>> taut;                // string F into each hidden/output lever

  const LeverState& lever(std::size_t layer, std::size_t index) const {
    return levers.at(layer).at(index);
  }

  friend bool operator==(const MechanicalState&, const MechanicalState&) = default;
};

/// Identity map from weight to normalized clamp position. Throws RangeError
/// for |w| > 1 and DomainError for non-finite w.
double weight_to_clamp(double w);
double clamp_to_weight(double arc_position);

/// (1 / 2^ceil(log2 n)) * sum. Throws ShapeError on an empty span.
double pulley_reduce(std::span<const double> displacements);

/// Propagates lever rotations through clamps, strings and pulleys.
MechanicalState mechanical_forward(const Network& net, std::span<const double> free_inputs);

inline MechanicalState mechanical_forward(const Network& net, std::initializer_list<double> x) {
  return mechanical_forward(net, std::span<const double>(x.begin(), x.size()));
}

// Build sheets ---------------------------------------------------------------

struct BuildSheetEntry {
  std::size_t layer = 1;  // receiving layer, 0-based (input layer is 0)
  std::size_t recv = 0;
  std::size_t send = 0;
  std::string sending_label;
  std::string receiving_label;
  double arc_position = 0.0;

  friend bool operator==(const BuildSheetEntry&, const BuildSheetEntry&) = default;
};

struct PinDirective {
  std::size_t input = 0;
  double value = 1.0;
  std::string directive;

  friend bool operator==(const PinDirective&, const PinDirective&) = default;
};

struct BuildSheet {
  std::vector<std::size_t> layer_sizes;
  std::vector<BuildSheetEntry> entries;
  std::vector<PinDirective> pins;

  friend bool operator==(const BuildSheet&, const BuildSheet&) = default;
};

/// Human-facing lever name: x1.., h1.. (or h<k>.<i> with several hidden
/// layers), y1... Indices in labels are 1-based.
std::string lever_label(std::size_t layer_count, std::size_t layer, std::size_t index);

BuildSheet export_build_sheet(const Network& net);

/// Exact inverse of export_build_sheet.
Network network_from_build_sheet(const BuildSheet& sheet);

/// Line format, 1-based layer and neuron numbers, clamp rounded to 4 places:
///   layer=<k> recv=<i> send=<j> clamp=<+-d.dddd>
///   pin input=<j> value=<+-d.dddd>
/// Lines starting with '#' are comments.
std::string format_build_sheet(const BuildSheet& sheet);
std::vector<std::string> build_sheet_lines(const BuildSheet& sheet);

/// Parses the text form. Layer sizes are recovered from the largest indices,
/// which is exact because every connection of a fully connected net is listed.
/// Throws ParseError.
BuildSheet parse_build_sheet(std::string_view text);

}  // namespace mnn::mechanics
