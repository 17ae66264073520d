#include "mnn/mechanics.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>
#include <tuple>

#include "mnn/error.hpp"

namespace mnn::mechanics {

namespace {

std::string fixed4(double v) {
  char buf[32];
  // Avoid printing "-0.0000" for tiny negatives that round to zero.
  double rounded = std::round(v * 1e4) / 1e4;
  if (rounded == 0.0) {
    rounded = 0.0;
  }
  std::snprintf(buf, sizeof buf, "%.4f", rounded);
  return buf;
}

std::size_t parse_index(std::string_view token, std::string_view key, std::size_t line_no) {
  std::size_t v = 0;
  auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), v);
  if (ec != std::errc{} || ptr != token.data() + token.size() || v == 0) {
    throw ParseError("build sheet line " + std::to_string(line_no) + ": bad " + std::string(key) +
                     " '" + std::string(token) + "'");
  }
  return v;
}

double parse_real(std::string_view token, std::string_view key, std::size_t line_no) {
  double v = 0.0;
  if (!token.empty() && token.front() == '+') {
    token.remove_prefix(1);
  }
  auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), v);
  if (ec != std::errc{} || ptr != token.data() + token.size()) {
    throw ParseError("build sheet line " + std::to_string(line_no) + ": bad " + std::string(key) +
                     " '" + std::string(token) + "'");
  }
  return v;
}

std::map<std::string, std::string, std::less<>> key_values(std::istringstream& in) {
  std::map<std::string, std::string, std::less<>> kv;
  std::string tok;
  while (in >> tok) {
    auto eq = tok.find('=');
    if (eq == std::string::npos) {
      kv[tok] = "";
    } else {
      kv[tok.substr(0, eq)] = tok.substr(eq + 1);
    }
  }
  return kv;
}

std::string_view require(const std::map<std::string, std::string, std::less<>>& kv, std::string_view key,
                         std::size_t line_no) {
  auto it = kv.find(key);
  if (it == kv.end()) {
    throw ParseError("build sheet line " + std::to_string(line_no) + ": missing '" + std::string(key) + "'");
  }
  return it->second;
}

std::string pin_directive(const std::string& label, double value) {
  if (value == 1.0) {
    return "rotate " + label + " fully clockwise and leave it";
  }
  if (value == -1.0) {
    return "rotate " + label + " fully counterclockwise and leave it";
  }
  return "hold " + label + " at " + fixed4(value);
}

}  // namespace

PulleyAssembly PulleyAssembly::for_fan_in(std::size_t fan_in) {
  if (fan_in == 0) {
    throw ShapeError("pulley assembly needs at least one input string");
  }
  PulleyAssembly p;
  p.fan_in = fan_in;
  p.stages = static_cast<std::size_t>(std::bit_width(fan_in - 1));  // ceil(log2(fan_in))
  p.attachment_fraction = std::ldexp(1.0, -static_cast<int>(p.stages));
  return p;
}

double weight_to_clamp(double w) {
  if (!std::isfinite(w)) {
    throw DomainError("weight is not finite");
  }
  if (w < -1.0 || w > 1.0) {
    throw RangeError("weight " + std::to_string(w) + " has no clamp position on the lever");
  }
  return w;
}

double clamp_to_weight(double arc_position) { return weight_to_clamp(arc_position); }

double pulley_reduce(std::span<const double> displacements) {
  if (displacements.empty()) {
    throw ShapeError("pulley_reduce: no input strings");
  }
  const auto pulley = PulleyAssembly::for_fan_in(displacements.size());
  double sum = 0.0;
  for (double d : displacements) {
    sum += d;
  }
  return pulley.reduction() * sum;
}

MechanicalState mechanical_forward(const Network& net, std::span<const double> free_inputs) {
  MechanicalState state;
  const std::size_t layers = net.layer_count();
  state.levers.resize(layers);
  state.pulleys.resize(layers);
  state.pulley_outputs.resize(layers);
  state.unclipped_angles.resize(layers);
  state.taut.resize(layers);

  const std::vector<double> inputs = net.input_layer(free_inputs);
  for (std::size_t j = 0; j < inputs.size(); ++j) {
    state.levers[0].push_back({{0, j}, inputs[j]});
  }

  for (std::size_t k = 1; k < layers; ++k) {
    const Matrix& w = net.weights_into(k);
    const auto& senders = state.levers[k - 1];
    std::vector<double> strings(w.cols());
    for (std::size_t i = 0; i < w.rows(); ++i) {
      for (std::size_t j = 0; j < w.cols(); ++j) {
        const double arc = weight_to_clamp(w(i, j));
        // Travel of the string equals clamp offset times lever rotation on the
        // arc-shaped lever; it is zero for a horizontal lever wherever the clamp sits.
        strings[j] = arc * senders[j].angle;
        state.clamps.push_back({{k - 1, j}, {k, i}, arc});
        state.string_displacements.push_back(strings[j]);
      }
      const auto pulley = PulleyAssembly::for_fan_in(w.cols());
      const double reduced = pulley_reduce(strings);
      const double unclipped = reduced / pulley.attachment_fraction;
      state.pulleys[k].push_back(pulley);
      state.pulley_outputs[k].push_back(reduced);
      state.unclipped_angles[k].push_back(unclipped);
      state.taut[k].push_back(!(unclipped < 0.0));
      state.levers[k].push_back({{k, i}, dorelu(unclipped)});
    }
  }
  return state;
}

std::string lever_label(std::size_t layer_count, std::size_t layer, std::size_t index) {
  const std::string n = std::to_string(index + 1);
  if (layer == 0) {
    return "x" + n;
  }
  if (layer + 1 == layer_count) {
    return "y" + n;
  }
  if (layer_count == 3) {
    return "h" + n;
  }
  return "h" + std::to_string(layer) + "." + n;
}

BuildSheet export_build_sheet(const Network& net) {
  BuildSheet sheet;
  sheet.layer_sizes = net.layer_sizes();
  const std::size_t layers = net.layer_count();
  for (std::size_t k = 1; k < layers; ++k) {
    const Matrix& w = net.weights_into(k);
    for (std::size_t i = 0; i < w.rows(); ++i) {
      for (std::size_t j = 0; j < w.cols(); ++j) {
        sheet.entries.push_back({k, i, j, lever_label(layers, k - 1, j), lever_label(layers, k, i),
                                 weight_to_clamp(w(i, j))});
      }
    }
  }
  for (const auto& [index, value] : net.pinned()) {
    sheet.pins.push_back({index, value, pin_directive(lever_label(layers, 0, index), value)});
  }
  return sheet;
}

Network network_from_build_sheet(const BuildSheet& sheet) {
  Network zero = Network::zeros(sheet.layer_sizes);
  std::vector<Matrix> weights = zero.weights();
  std::vector<std::vector<bool>> seen;
  for (const auto& m : weights) {
    seen.emplace_back(m.size(), false);
  }
  for (const auto& e : sheet.entries) {
    if (e.layer == 0 || e.layer >= sheet.layer_sizes.size() || e.recv >= weights[e.layer - 1].rows() ||
        e.send >= weights[e.layer - 1].cols()) {
      throw ParseError("build sheet entry addresses a connection outside the network");
    }
    Matrix& m = weights[e.layer - 1];
    const std::size_t flat = e.recv * m.cols() + e.send;
    if (seen[e.layer - 1][flat]) {
      throw ParseError("build sheet lists connection " + e.sending_label + " -> " + e.receiving_label + " twice");
    }
    seen[e.layer - 1][flat] = true;
    m(e.recv, e.send) = clamp_to_weight(e.arc_position);
  }
  for (const auto& s : seen) {
    if (std::find(s.begin(), s.end(), false) != s.end()) {
      throw ParseError("build sheet is missing connections");
    }
  }
  std::map<std::size_t, double> pinned;
  for (const auto& p : sheet.pins) {
    pinned[p.input] = p.value;
  }
  return Network(sheet.layer_sizes, std::move(weights), std::move(pinned));
}

std::vector<std::string> build_sheet_lines(const BuildSheet& sheet) {
  std::vector<std::string> lines;
  for (const auto& e : sheet.entries) {
    lines.push_back("layer=" + std::to_string(e.layer + 1) + " recv=" + std::to_string(e.recv + 1) +
                    " send=" + std::to_string(e.send + 1) + " clamp=" + fixed4(e.arc_position));
  }
  for (const auto& p : sheet.pins) {
    lines.push_back("pin input=" + std::to_string(p.input + 1) + " value=" + fixed4(p.value));
  }
  return lines;
}

std::string format_build_sheet(const BuildSheet& sheet) {
  std::ostringstream out;
  out << "# build sheet, layers";
  for (std::size_t k = 0; k < sheet.layer_sizes.size(); ++k) {
    out << (k == 0 ? " " : "-") << sheet.layer_sizes[k];
  }
  out << '\n';
  std::size_t n = 0;
  for (const auto& line : build_sheet_lines(sheet)) {
    if (n < sheet.entries.size()) {
      const auto& e = sheet.entries[n];
      out << line << "  # " << e.sending_label << " -> " << e.receiving_label << '\n';
    } else {
      const auto& p = sheet.pins[n - sheet.entries.size()];
      out << line << "  # " << p.directive << '\n';
    }
    ++n;
  }
  return out.str();
}

BuildSheet parse_build_sheet(std::string_view text) {
  struct RawEntry {
    std::size_t layer, recv, send;
    double clamp;
  };
  std::vector<RawEntry> raw;
  std::vector<PinDirective> pins;

  std::istringstream lines{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(lines, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) {
      line.erase(hash);
    }
    std::istringstream in(line);
    std::string first;
    if (!(in >> first)) {
      continue;
    }
    if (first == "pin") {
      auto kv = key_values(in);
      const std::size_t input = parse_index(require(kv, "input", line_no), "input", line_no) - 1;
      const double value = parse_real(require(kv, "value", line_no), "value", line_no);
      pins.push_back({input, value, {}});
      continue;
    }
    std::istringstream whole(line);
    auto kv = key_values(whole);
    const std::size_t layer = parse_index(require(kv, "layer", line_no), "layer", line_no) - 1;
    if (layer == 0) {
      throw ParseError("build sheet line " + std::to_string(line_no) + ": layer 1 has no incoming clamps");
    }
    raw.push_back({layer, parse_index(require(kv, "recv", line_no), "recv", line_no) - 1,
                   parse_index(require(kv, "send", line_no), "send", line_no) - 1,
                   parse_real(require(kv, "clamp", line_no), "clamp", line_no)});
  }
  if (raw.empty()) {
    throw ParseError("build sheet has no clamp lines");
  }

  std::size_t max_layer = 0;
  for (const auto& r : raw) {
    max_layer = std::max(max_layer, r.layer);
  }
  BuildSheet sheet;
  sheet.layer_sizes.assign(max_layer + 1, 0);
  for (const auto& r : raw) {
    sheet.layer_sizes[r.layer] = std::max(sheet.layer_sizes[r.layer], r.recv + 1);
    sheet.layer_sizes[r.layer - 1] = std::max(sheet.layer_sizes[r.layer - 1], r.send + 1);
  }
  const std::size_t layers = sheet.layer_sizes.size();
  for (const auto& r : raw) {
    sheet.entries.push_back({r.layer, r.recv, r.send, lever_label(layers, r.layer - 1, r.send),
                             lever_label(layers, r.layer, r.recv), r.clamp});
  }
  std::sort(sheet.entries.begin(), sheet.entries.end(), [](const auto& a, const auto& b) {
    return std::tie(a.layer, a.recv, a.send) < std::tie(b.layer, b.recv, b.send);
  });
  for (auto& p : pins) {
    p.directive = pin_directive(lever_label(layers, 0, p.input), p.value);
  }
  std::sort(pins.begin(), pins.end(), [](const auto& a, const auto& b) { return a.input < b.input; });
  sheet.pins = std::move(pins);

  // Validate by building the network once.
  try {
    network_from_build_sheet(sheet);
  } catch (const ParseError&) {
    throw;
  } catch (const Error& e) {
    throw ParseError(std::string("build sheet describes an invalid network: ") + e.what());
  }
  return sheet;
}

}  // namespace mnn::mechanics
