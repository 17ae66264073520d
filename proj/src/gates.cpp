#include "mnn/gates.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>

#include "mnn/error.hpp"

namespace mnn::gates {

std::string_view to_string(GateKind kind) noexcept {
  switch (kind) {
    case GateKind::And: return "and";
    case GateKind::Or: return "or";
    case GateKind::Not: return "not";
    case GateKind::Xor: return "xor";
  }
  return "?";
}

std::optional<GateKind> parse_gate_kind(std::string_view name) noexcept {
  std::string lower(name);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  for (auto kind : {GateKind::And, GateKind::Or, GateKind::Not, GateKind::Xor}) {
    if (lower == to_string(kind)) {
      return kind;
    }
  }
  return std::nullopt;
}

std::size_t arity(GateKind kind) noexcept { return kind == GateKind::Not ? 1 : 2; }

bool logic(GateKind kind, std::span<const bool> bits) {
  if (bits.size() != arity(kind)) {
    throw ShapeError(std::string(to_string(kind)) + " takes " + std::to_string(arity(kind)) + " inputs");
  }
  switch (kind) {
    case GateKind::And: return bits[0] && bits[1];
    case GateKind::Or: return bits[0] || bits[1];
    case GateKind::Not: return !bits[0];
    case GateKind::Xor: return bits[0] != bits[1];
  }
  return false;
}

TruthTable truth_table(GateKind kind) {
  TruthTable table;
  const std::size_t n = arity(kind);
  for (std::size_t code = 0; code < (std::size_t{1} << n); ++code) {
    TruthRow row;
    for (std::size_t b = 0; b < n; ++b) {
      // x1 is the most significant bit so rows come out as 00, 01, 10, 11.
      row.inputs.push_back(((code >> (n - 1 - b)) & 1U) != 0);
    }
    std::array<bool, 2> buf{};
    std::copy(row.inputs.begin(), row.inputs.end(), buf.begin());
    row.expected = logic(kind, std::span<const bool>(buf.data(), n));
    table.rows.push_back(std::move(row));
  }
  return table;
}

GateSpec make_gate(GateKind kind) {
  GateSpec spec;
  spec.kind = kind;
  spec.arity = arity(kind);
  switch (kind) {
    case GateKind::And:
    case GateKind::Or:
      spec.network = Network({2, 1, 1}, {Matrix::from_rows({{0.5, 0.5}}), Matrix::from_rows({{1.0}})});
      spec.threshold = kind == GateKind::And ? 1.0 : 0.5;
      break;
    case GateKind::Not:
      spec.network = Network({2, 1, 1}, {Matrix::from_rows({{-1.0, 1.0}}), Matrix::from_rows({{1.0}})}, {{1, 1.0}});
      spec.threshold = 0.5;
      break;
    case GateKind::Xor:
      spec.network = Network({2, 2, 1}, {Matrix::from_rows({{1.0, -1.0}, {-1.0, 1.0}}), Matrix::from_rows({{1.0, 1.0}})});
      spec.threshold = 0.5;
      break;
  }
  return spec;
}

GateSpec make_not_gate_figure_labels() {
  GateSpec spec = make_gate(GateKind::Not);
  spec.network = Network({2, 1, 1}, {Matrix::from_rows({{1.0, -1.0}}), Matrix::from_rows({{1.0}})}, {{1, 1.0}});
  return spec;
}

namespace {

double readout(const Network& net, std::span<const bool> bits) {
  std::vector<double> x(bits.size());
  std::transform(bits.begin(), bits.end(), x.begin(), [](bool b) { return b ? 1.0 : 0.0; });
  return forward(net, x).output().front();
}

}  // namespace

double gate_output(const GateSpec& spec, std::span<const bool> bits) {
  if (bits.size() != spec.arity) {
    throw ShapeError(std::string(to_string(spec.kind)) + " gate expects " + std::to_string(spec.arity) +
                     " bits, got " + std::to_string(bits.size()));
  }
  return readout(spec.network, bits);
}

bool evaluate_gate(const GateSpec& spec, std::span<const bool> bits) {
  return gate_output(spec, bits) >= spec.threshold;
}

bool GateReport::passed() const noexcept { return pass_count() == rows.size(); }

std::size_t GateReport::pass_count() const noexcept {
  return static_cast<std::size_t>(std::count_if(rows.begin(), rows.end(), [](const GateRow& r) { return r.pass; }));
}

GateReport verify_gate(const Network& net, GateKind kind, double threshold) {
  if (net.free_input_count() != arity(kind)) {
    throw ShapeError(std::string(to_string(kind)) + " needs " + std::to_string(arity(kind)) +
                     " free input levers, network has " + std::to_string(net.free_input_count()));
  }
  GateReport report{kind, threshold, {}};
  for (const auto& row : truth_table(kind).rows) {
    std::array<bool, 2> buf{};
    std::copy(row.inputs.begin(), row.inputs.end(), buf.begin());
    GateRow out;
    out.inputs = row.inputs;
    out.raw = readout(net, std::span<const bool>(buf.data(), row.inputs.size()));
    out.actual = out.raw >= threshold;
    out.expected = row.expected;
    out.pass = out.actual == out.expected;
    report.rows.push_back(std::move(out));
  }
  return report;
}

GateReport verify_gate(const GateSpec& spec) { return verify_gate(spec.network, spec.kind, spec.threshold); }

SeparabilityReport single_layer_search(GateKind kind, double resolution, bool with_bias) {
  if (arity(kind) != 2) {
    throw ShapeError("single-layer search covers two-input gates only");
  }
  if (!(resolution > 0.0) || !std::isfinite(resolution)) {
    throw RangeError("resolution must be a positive real");
  }
  const double steps = 1.0 / resolution;
  const long m = std::lround(steps);
  if (m < 1 || std::abs(steps - static_cast<double>(m)) > 1e-9 * steps) {
    throw RangeError("resolution must divide [0, 1] into whole steps");
  }

  SeparabilityReport report;
  report.kind = kind;
  report.resolution = resolution;
  report.with_bias = with_bias;

  // Everything is counted in grid units (multiples of 1/m) so boundary cases
  // such as 0.7 + 0.2 >= 0.9 are decided exactly. In these units the lever
  // output is clamp(sum, 0, m).
  const auto table = truth_table(kind);
  const double md = static_cast<double>(m);
  const long bias_lo = with_bias ? -m : 0;
  const long bias_hi = with_bias ? m : 0;
  for (long a = -m; a <= m; ++a) {
    for (long b = -m; b <= m; ++b) {
      for (long c = bias_lo; c <= bias_hi; ++c) {
        std::array<long, 4> outs{};
        for (std::size_t r = 0; r < table.rows.size(); ++r) {
          const long x1 = table.rows[r].inputs[0] ? 1 : 0;
          const long x2 = table.rows[r].inputs[1] ? 1 : 0;
          outs[r] = std::clamp(a * x1 + b * x2 + c, 0L, m);
        }
        for (long t = 1; t <= m; ++t) {
          ++report.configurations;
          bool ok = true;
          for (std::size_t r = 0; r < table.rows.size() && ok; ++r) {
            ok = (outs[r] >= t) == table.rows[r].expected;
          }
          if (ok) {
            if (report.solutions == 0) {
              report.example_weights = with_bias ? std::vector<double>{a / md, b / md, c / md}
                                                 : std::vector<double>{a / md, b / md};
              report.example_threshold = t / md;
            }
            ++report.solutions;
          }
        }
      }
    }
  }
  return report;
}

}  // namespace mnn::gates
