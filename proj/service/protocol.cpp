#include "mnn/protocol.hpp"

#include <cmath>

namespace mnn::service {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

ordered_json neuron_ref(const mechanics::NeuronId& id) { return {{"layer", id.layer + 1}, {"index", id.index + 1}}; }

ordered_json weights_json(const Network& net) {
  ordered_json out = ordered_json::array();
  for (const auto& m : net.weights()) {
    out.push_back(m.to_rows());
  }
  return out;
}

ordered_json pinned_json(const Network& net) {
  ordered_json out = ordered_json::object();
  for (const auto& [index, value] : net.pinned()) {
    out[std::to_string(index + 1)] = value;
  }
  return out;
}

std::size_t one_based(const json& edit, const char* key) {
  if (!edit.contains(key) || !edit.at(key).is_number_integer() || edit.at(key).get<long long>() < 1) {
    throw InvalidEdit(key, std::string(key) + " must be a positive integer");
  }
  return static_cast<std::size_t>(edit.at(key).get<long long>() - 1);
}

double real(const json& edit, const char* key) {
  if (!edit.contains(key) || !edit.at(key).is_number()) {
    throw InvalidEdit(key, std::string(key) + " must be a number");
  }
  return edit.at(key).get<double>();
}

gates::GateKind gate_kind(const json& j, const char* key) {
  if (!j.contains(key) || !j.at(key).is_string()) {
    throw InvalidEdit(key, std::string(key) + " must name a gate (and, or, not, xor)");
  }
  auto kind = gates::parse_gate_kind(j.at(key).get<std::string>());
  if (!kind) {
    throw InvalidEdit(key, "unknown gate '" + j.at(key).get<std::string>() + "'");
  }
  return *kind;
}

std::string string_field(const json& msg, const char* key) {
  if (msg.contains(key) && msg.at(key).is_string()) {
    return msg.at(key).get<std::string>();
  }
  return {};
}

}  // namespace

ordered_json to_json(const ForwardTrace& trace) {
  ordered_json layers = ordered_json::array();
  for (const auto& layer : trace.layers) {
    ordered_json neurons = ordered_json::array();
    for (const auto& n : layer) {
      ordered_json j;
      if (n.net) {
        j["net"] = *n.net;
      }
      j["out"] = n.out;
      if (n.net) {
        j["slack"] = n.slack;
      }
      neurons.push_back(std::move(j));
    }
    layers.push_back(std::move(neurons));
  }
  return {{"layers", std::move(layers)}};
}

ordered_json to_json(const mechanics::MechanicalState& state) {
  ordered_json levers = ordered_json::array();
  for (const auto& layer : state.levers) {
    ordered_json angles = ordered_json::array();
    for (const auto& l : layer) {
      angles.push_back(l.angle);
    }
    levers.push_back(std::move(angles));
  }
  ordered_json clamps = ordered_json::array();
  for (std::size_t c = 0; c < state.clamps.size(); ++c) {
    const auto& clamp = state.clamps[c];
    clamps.push_back({{"layer", clamp.receiver.layer + 1},
                      {"send", clamp.sender.index + 1},
                      {"recv", clamp.receiver.index + 1},
                      {"position", clamp.arc_position},
                      {"displacement", state.string_displacements[c]}});
  }
  ordered_json pulleys = ordered_json::array();
  for (std::size_t k = 0; k < state.pulleys.size(); ++k) {
    ordered_json row = ordered_json::array();
    for (std::size_t i = 0; i < state.pulleys[k].size(); ++i) {
      const auto& p = state.pulleys[k][i];
      row.push_back({{"fan_in", p.fan_in},
                     {"stages", p.stages},
                     {"attachment_fraction", p.attachment_fraction},
                     {"output", state.pulley_outputs[k][i]},
                     {"taut", static_cast<bool>(state.taut[k][i])}});
    }
    pulleys.push_back(std::move(row));
  }
  return {{"levers", std::move(levers)}, {"clamps", std::move(clamps)}, {"pulleys", std::move(pulleys)}};
}

ordered_json to_json(const MechanicalDelta& delta) {
  ordered_json levers = ordered_json::array();
  for (const auto& l : delta.levers) {
    auto j = neuron_ref(l.id);
    j["angle"] = l.angle;
    levers.push_back(std::move(j));
  }
  ordered_json clamps = ordered_json::array();
  for (const auto& c : delta.clamps) {
    clamps.push_back({{"layer", c.receiver.layer + 1},
                      {"send", c.sender.index + 1},
                      {"recv", c.receiver.index + 1},
                      {"position", c.arc_position}});
  }
  ordered_json taut = ordered_json::array();
  for (const auto& id : delta.taut_changed) {
    taut.push_back(neuron_ref(id));
  }
  return {{"full", delta.full}, {"levers", std::move(levers)}, {"clamps", std::move(clamps)}, {"taut_changed", std::move(taut)}};
}

ordered_json to_json(const gates::GateReport& report) {
  ordered_json rows = ordered_json::array();
  for (const auto& r : report.rows) {
    rows.push_back({{"inputs", r.inputs}, {"raw", r.raw}, {"actual", r.actual}, {"expected", r.expected}, {"pass", r.pass}});
  }
  return {{"kind", std::string(gates::to_string(report.kind))},
          {"threshold", report.threshold},
          {"rows", std::move(rows)},
          {"passed", report.pass_count()},
          {"total", report.rows.size()},
          {"solved", report.passed()}};
}

ordered_json to_json(const gates::GateSpec& spec) {
  return {{"kind", std::string(gates::to_string(spec.kind))},
          {"threshold", spec.threshold},
          {"layer_sizes", spec.network.layer_sizes()},
          {"weights", weights_json(spec.network)},
          {"pinned", pinned_json(spec.network)}};
}

ordered_json state_update(const SessionState& state, const MechanicalDelta* delta) {
  ordered_json payload;
  payload["layer_sizes"] = state.network.layer_sizes();
  payload["weights"] = weights_json(state.network);
  payload["pinned"] = pinned_json(state.network);
  payload["input_levers"] = state.input_levers;
  payload["challenge"] = state.challenge ? ordered_json(std::string(gates::to_string(*state.challenge))) : ordered_json(nullptr);
  payload["threshold"] = state.threshold;
  payload["trace"] = to_json(state.trace);
  payload["mechanical"] = to_json(state.mechanical);
  MechanicalDelta full;
  full.full = true;
  payload["delta"] = to_json(delta ? *delta : full);
  return {{"type", "state_update"}, {"session_id", state.id}, {"revision", state.revision}, {"payload", std::move(payload)}};
}

ordered_json error_message(std::string_view code, const std::string& message, const std::string& session_id,
                           std::uint64_t revision, const std::string& field) {
  ordered_json payload{{"code", std::string(code)}, {"message", message}};
  if (!field.empty()) {
    payload["field"] = field;
  }
  return {{"type", "error"}, {"session_id", session_id}, {"revision", revision}, {"payload", std::move(payload)}};
}

EditCommand edit_from_json(const json& edit, std::uint64_t expected_revision) {
  if (!edit.is_object() || !edit.contains("kind") || !edit.at("kind").is_string()) {
    throw InvalidEdit("kind", "edit needs a string 'kind'");
  }
  const std::string kind = edit.at("kind").get<std::string>();
  EditCommand cmd;
  cmd.expected_revision = expected_revision;
  if (kind == "set_clamp") {
    cmd.edit = SetClamp{one_based(edit, "layer"), one_based(edit, "send"), one_based(edit, "recv"), real(edit, "position")};
  } else if (kind == "set_input_lever") {
    cmd.edit = SetInputLever{one_based(edit, "index"), real(edit, "angle")};
  } else if (kind == "pin_input") {
    PinInput pin{one_based(edit, "index"), std::nullopt};
    if (edit.contains("value") && !edit.at("value").is_null()) {
      pin.value = real(edit, "value");
    }
    cmd.edit = pin;
  } else if (kind == "load_gate") {
    cmd.edit = LoadGate{gate_kind(edit, "gate")};
  } else if (kind == "set_challenge") {
    SetChallenge c;
    if (edit.contains("gate") && !edit.at("gate").is_null()) {
      c.kind = gate_kind(edit, "gate");
    }
    if (edit.contains("threshold") && !edit.at("threshold").is_null()) {
      c.threshold = real(edit, "threshold");
    }
    cmd.edit = c;
  } else if (kind == "reset") {
    cmd.edit = Reset{};
  } else {
    throw InvalidEdit("kind", "unknown edit kind '" + kind + "'");
  }
  return cmd;
}

ordered_json Protocol::create_session(const json& payload) {
  Network net = Network::canonical();
  if (payload.contains("layer_sizes")) {
    try {
      net = Network::zeros(payload.at("layer_sizes").get<std::vector<std::size_t>>());
    } catch (const json::exception& e) {
      throw InvalidEdit("layer_sizes", std::string("layer_sizes: ") + e.what());
    } catch (const Error& e) {
      throw InvalidEdit("layer_sizes", e.what());
    }
  }
  if (payload.contains("gate") && !payload.at("gate").is_null()) {
    net = gates::make_gate(gate_kind(payload, "gate")).network;
  }
  std::optional<gates::GateKind> challenge;
  if (payload.contains("challenge") && !payload.at("challenge").is_null()) {
    challenge = gate_kind(payload, "challenge");
  }
  auto session = sessions_.create(std::move(net), challenge);
  return state_update(session->snapshot(), nullptr);
}

ordered_json Protocol::apply_edit(const std::string& id, std::uint64_t revision, const json& payload) {
  auto session = sessions_.find(id);
  if (!payload.contains("edit")) {
    throw InvalidEdit("edit", "apply_edit payload needs an 'edit' object");
  }
  const EditCommand cmd = edit_from_json(payload.at("edit"), revision);
  ordered_json response;
  session->apply(cmd, [&](const EditOutcome& outcome) {
    response = state_update(outcome.state, &outcome.delta);
    sessions_.publish(id, response.dump());
  });
  return response;
}

ordered_json Protocol::check_challenge(const std::string& id, const json& payload) {
  auto session = sessions_.find(id);
  const bool reveal = payload.contains("reveal") && payload.at("reveal").is_boolean() && payload.at("reveal").get<bool>();
  const auto state = session->snapshot();
  const auto result = session->check_challenge(reveal);
  ordered_json out{{"report", to_json(result.report)}};
  if (result.canonical) {
    out["canonical"] = to_json(*result.canonical);
  }
  return {{"type", "check_challenge"}, {"session_id", id}, {"revision", state.revision}, {"payload", std::move(out)}};
}

ordered_json Protocol::handle(const json& message) {
  std::string id;
  std::uint64_t current = 0;
  try {
    if (!message.is_object() || !message.contains("type") || !message.at("type").is_string()) {
      return error_message("bad_request", "message must be an object with a string 'type'");
    }
    const std::string type = message.at("type").get<std::string>();
    id = string_field(message, "session_id");
    const json payload = message.contains("payload") ? message.at("payload") : json::object();
    if (!payload.is_object()) {
      return error_message("bad_request", "payload must be an object", id);
    }
    if (type != "create_session") {
      if (id.empty()) {
        return error_message("bad_request", type + " needs a session_id");
      }
      current = sessions_.find(id)->snapshot().revision;
    }

    if (type == "create_session") {
      return create_session(payload);
    }
    if (type == "apply_edit") {
      if (!message.contains("revision") || !message.at("revision").is_number_integer() ||
          message.at("revision").get<std::int64_t>() < 0) {
        return error_message("bad_request", "apply_edit needs the expected revision", id, current, "revision");
      }
      return apply_edit(id, message.at("revision").get<std::uint64_t>(), payload);
    }
    if (type == "check_challenge") {
      return check_challenge(id, payload);
    }
    if (type == "get_state") {
      return state_update(sessions_.find(id)->snapshot(), nullptr);
    }
    if (type == "export_document") {
      return {{"type", "document"},
              {"session_id", id},
              {"revision", current},
              {"payload", {{"document", serialize_document(sessions_.find(id)->export_document())}}}};
    }
    if (type == "close_session") {
      sessions_.remove(id);
      return {{"type", "closed"}, {"session_id", id}, {"revision", current}, {"payload", ordered_json::object()}};
    }
    return error_message("bad_request", "unknown message type '" + type + "'", id, current);
  } catch (const RevisionConflict& e) {
    return error_message("revision_conflict", e.what(), id, e.current());
  } catch (const InvalidEdit& e) {
    return error_message("invalid_edit", e.what(), id, current, e.field());
  } catch (const UnknownSession& e) {
    return error_message("unknown_session", e.what(), id);
  } catch (const NoChallenge& e) {
    return error_message("no_challenge", e.what(), id, current);
  } catch (const ShapeError& e) {
    return error_message("challenge_shape", e.what(), id, current);
  } catch (const std::exception& e) {
    return error_message("internal", e.what(), id, current);
  }
}

std::string Protocol::handle_text(std::string_view text) {
  json message;
  try {
    message = json::parse(text);
  } catch (const json::parse_error& e) {
    return error_message("bad_request", std::string("invalid JSON: ") + e.what()).dump();
  }
  return handle(message).dump();
}

}  // namespace mnn::service
