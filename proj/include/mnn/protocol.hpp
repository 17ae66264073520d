#pragma once

// JSON message layer shared by every transport. Messages are objects
// {type, session_id, revision, payload}; neuron and layer numbers on the wire
// are 1-based. docs/protocol.md is the reference for the schemas.

#include <string>
#include <string_view>

#include <json.hpp>

#include "mnn/service.hpp"

namespace mnn::service {

inline constexpr int kProtocolVersion = 1;

nlohmann::ordered_json to_json(const ForwardTrace& trace);
nlohmann::ordered_json to_json(const mechanics::MechanicalState& state);
nlohmann::ordered_json to_json(const MechanicalDelta& delta);
nlohmann::ordered_json to_json(const gates::GateReport& report);
nlohmann::ordered_json to_json(const gates::GateSpec& spec);

/// Full state message. `delta` may be null for a fresh snapshot.
nlohmann::ordered_json state_update(const SessionState& state, const MechanicalDelta* delta);

nlohmann::ordered_json error_message(std::string_view code, const std::string& message,
                                     const std::string& session_id = {}, std::uint64_t revision = 0,
                                     const std::string& field = {});

/// Decodes an `edit` payload object. Throws InvalidEdit with the offending field.
EditCommand edit_from_json(const nlohmann::json& edit, std::uint64_t expected_revision);

class Protocol {
 public:
  explicit Protocol(SessionManager& sessions) : sessions_(sessions) {}

  /// Handles one request and returns the response message; never throws.
  /// Accepted edits are also published to the session's subscribers.
  nlohmann::ordered_json handle(const nlohmann::json& message);
  std::string handle_text(std::string_view text);

  SessionManager& sessions() noexcept { return sessions_; }

 private:
  nlohmann::ordered_json create_session(const nlohmann::json& payload);
  nlohmann::ordered_json apply_edit(const std::string& id, std::uint64_t revision, const nlohmann::json& payload);
  nlohmann::ordered_json check_challenge(const std::string& id, const nlohmann::json& payload);

  SessionManager& sessions_;
};

}  // namespace mnn::service
