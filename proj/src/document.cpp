#include "mnn/document.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "mnn/error.hpp"
#include "mnn/mechanics.hpp"

namespace mnn {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

template <typename T>
T field(const json& j, const char* key) {
  if (!j.contains(key)) {
    throw ParseError(std::string("missing field '") + key + "'");
  }
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ParseError(std::string("field '") + key + "': " + e.what());
  }
}

// Like dump(2), but arrays of scalars stay on one line so a weight row reads
// as a row.
void pretty(const ordered_json& j, int indent, std::string& out) {
  const auto pad = [&](int n) { out.append(static_cast<std::size_t>(n), ' '); };
  if (j.is_object()) {
    if (j.empty()) {
      out += "{}";
      return;
    }
    out += "{\n";
    std::size_t n = 0;
    for (const auto& [key, value] : j.items()) {
      pad(indent + 2);
      out += ordered_json(key).dump() + ": ";
      pretty(value, indent + 2, out);
      out += ++n < j.size() ? ",\n" : "\n";
    }
    pad(indent);
    out += '}';
  } else if (j.is_array() && std::any_of(j.begin(), j.end(), [](const auto& e) { return e.is_structured(); })) {
    out += "[\n";
    for (std::size_t i = 0; i < j.size(); ++i) {
      pad(indent + 2);
      pretty(j[i], indent + 2, out);
      out += i + 1 < j.size() ? ",\n" : "\n";
    }
    pad(indent);
    out += ']';
  } else if (j.is_array()) {
    out += '[';
    for (std::size_t i = 0; i < j.size(); ++i) {
      if (i) out += ", ";
      out += j[i].dump();
    }
    out += ']';
  } else {
    out += j.dump();
  }
}

json parse_json(std::string_view text) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("not valid JSON: ") + e.what());
  }
}

}  // namespace

NetworkDocument parse_document(std::string_view text) {
  const json j = parse_json(text);
  if (!j.is_object()) {
    throw ParseError("network document must be a JSON object");
  }
  NetworkDocument doc;
  doc.version = field<int>(j, "version");
  if (doc.version != kDocumentVersion) {
    throw ParseError("unsupported document version " + std::to_string(doc.version));
  }

  auto sizes = field<std::vector<std::size_t>>(j, "layer_sizes");
  auto raw = field<std::vector<std::vector<std::vector<double>>>>(j, "weights");
  std::map<std::size_t, double> pinned;
  if (j.contains("pinned")) {
    for (const auto& [key, value] : field<std::map<std::string, double>>(j, "pinned")) {
      std::size_t index = 0;
      try {
        std::size_t used = 0;
        index = std::stoul(key, &used);
        if (used != key.size() || index == 0) {
          throw std::invalid_argument(key);
        }
      } catch (const std::exception&) {
        throw ParseError("pinned key '" + key + "' is not a 1-based neuron number");
      }
      pinned[index - 1] = value;
    }
  }

  try {
    std::vector<Matrix> weights;
    for (const auto& rows : raw) {
      weights.push_back(Matrix::from_rows(rows));
    }
    // An empty row list means a zero-column matrix only if the layer is empty,
    // which the network rejects anyway.
    doc.network = Network(std::move(sizes), std::move(weights), std::move(pinned));
  } catch (const ParseError&) {
    throw;
  } catch (const Error& e) {
    throw ParseError(std::string("invalid network: ") + e.what());
  }

  if (j.contains("name")) {
    doc.name = field<std::string>(j, "name");
  }
  if (j.contains("description")) {
    doc.description = field<std::string>(j, "description");
  }
  if (j.contains("thresholds")) {
    doc.thresholds = field<std::vector<double>>(j, "thresholds");
    if (doc.thresholds.size() != doc.network.output_count()) {
      throw ParseError("thresholds must list one value per output neuron");
    }
  }
  if (j.contains("gate")) {
    const json& g = j.at("gate");
    if (!g.is_object()) {
      throw ParseError("gate block must be an object");
    }
    auto kind = gates::parse_gate_kind(field<std::string>(g, "kind"));
    if (!kind) {
      throw ParseError("unknown gate kind '" + field<std::string>(g, "kind") + "'");
    }
    const double t = field<double>(g, "threshold");
    if (!(t > 0.0 && t <= 1.0)) {
      throw ParseError("gate threshold must lie in (0, 1]");
    }
    doc.gate = GateBlock{*kind, t};
  }
  if (j.contains("build_sheet")) {
    // Informational copy; it must agree with the weights to its 4 printed places.
    std::string text_sheet;
    for (const auto& line : field<std::vector<std::string>>(j, "build_sheet")) {
      text_sheet += line + "\n";
    }
    const auto sheet = mechanics::parse_build_sheet(text_sheet);
    const Network from_sheet = mechanics::network_from_build_sheet(sheet);
    if (from_sheet.layer_sizes() != doc.network.layer_sizes() || from_sheet.pinned().size() != doc.network.pinned().size()) {
      throw ParseError("embedded build sheet does not match the network layout");
    }
    for (std::size_t k = 0; k < from_sheet.weights().size(); ++k) {
      auto a = from_sheet.weights()[k].data();
      auto b = doc.network.weights()[k].data();
      for (std::size_t n = 0; n < a.size(); ++n) {
        if (std::abs(a[n] - b[n]) > 5e-5 + 1e-12) {
          throw ParseError("embedded build sheet disagrees with the weights");
        }
      }
    }
    doc.embed_build_sheet = true;
  }
  return doc;
}

std::string serialize_document(const NetworkDocument& doc) {
  ordered_json j;
  j["version"] = doc.version;
  if (doc.name) {
    j["name"] = *doc.name;
  }
  if (doc.description) {
    j["description"] = *doc.description;
  }
  j["layer_sizes"] = doc.network.layer_sizes();
  ordered_json weights = ordered_json::array();
  for (const auto& m : doc.network.weights()) {
    weights.push_back(m.to_rows());
  }
  j["weights"] = std::move(weights);
  if (!doc.network.pinned().empty()) {
    ordered_json pinned = ordered_json::object();
    for (const auto& [index, value] : doc.network.pinned()) {
      pinned[std::to_string(index + 1)] = value;
    }
    j["pinned"] = std::move(pinned);
  }
  if (!doc.thresholds.empty()) {
    j["thresholds"] = doc.thresholds;
  }
  if (doc.gate) {
    j["gate"] = {{"kind", std::string(gates::to_string(doc.gate->kind))}, {"threshold", doc.gate->threshold}};
  }
  if (doc.embed_build_sheet) {
    j["build_sheet"] = mechanics::build_sheet_lines(mechanics::export_build_sheet(doc.network));
  }
  std::string out;
  pretty(j, 0, out);
  return out + "\n";
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw ParseError("cannot open " + path.string());
  }
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::filesystem::path& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw Error("cannot write " + path.string());
  }
  out << text;
}

NetworkDocument load_document(const std::filesystem::path& path) { return parse_document(read_text_file(path)); }

void save_document(const std::filesystem::path& path, const NetworkDocument& doc) {
  write_text_file(path, serialize_document(doc));
}

NetworkDocument gate_document(const gates::GateSpec& spec) {
  NetworkDocument doc;
  doc.network = spec.network;
  doc.name = std::string(gates::to_string(spec.kind));
  doc.thresholds = std::vector<double>(spec.network.output_count(), spec.threshold);
  doc.gate = GateBlock{spec.kind, spec.threshold};
  return doc;
}

gates::GateSpec gate_from_document(const NetworkDocument& doc) {
  if (!doc.gate) {
    throw ParseError("document has no gate block");
  }
  gates::GateSpec spec;
  spec.kind = doc.gate->kind;
  spec.threshold = doc.gate->threshold;
  spec.arity = gates::arity(spec.kind);
  spec.network = doc.network;
  if (spec.network.free_input_count() != spec.arity) {
    throw ParseError("gate network has " + std::to_string(spec.network.free_input_count()) +
                     " free inputs, " + std::string(gates::to_string(spec.kind)) + " needs " +
                     std::to_string(spec.arity));
  }
  return spec;
}

training::Dataset parse_dataset(std::string_view text) {
  const json j = parse_json(text);
  if (!j.is_object()) {
    throw ParseError("dataset must be a JSON object");
  }
  training::Dataset data;
  data.name = j.contains("name") ? field<std::string>(j, "name") : std::string("custom");
  if (j.contains("readout_threshold")) {
    data.readout_threshold = field<double>(j, "readout_threshold");
  }
  if (!j.contains("samples") || !j.at("samples").is_array()) {
    throw ParseError("dataset needs a 'samples' array");
  }
  for (const auto& s : j.at("samples")) {
    data.samples.push_back({field<std::vector<double>>(s, "input"), field<std::vector<double>>(s, "target")});
  }
  if (data.samples.empty()) {
    throw ParseError("dataset has no samples");
  }
  return data;
}

training::Dataset load_dataset(const std::filesystem::path& path) { return parse_dataset(read_text_file(path)); }

}  // namespace mnn
