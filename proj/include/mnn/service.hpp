#pragma once

// Live sessions behind the classroom front end. Each session owns one network,
// the current input lever angles and the derived trace and mechanical state.
// Edits are applied one at a time under the session's write lock and are
// guarded by an expected revision (optimistic concurrency).

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <variant>
#include <vector>

#include "mnn/core.hpp"
#include "mnn/document.hpp"
#include "mnn/error.hpp"
#include "mnn/gates.hpp"
#include "mnn/mechanics.hpp"

namespace mnn::service {

// Edit commands use 0-based indices; the wire protocol converts from 1-based.
struct SetClamp {
  std::size_t layer = 1;  // receiving layer
  std::size_t send = 0;
  std::size_t recv = 0;
  double position = 0.0;
};
struct SetInputLever {
  std::size_t index = 0;
  double angle = 0.0;
};
struct PinInput {
  std::size_t index = 0;
  std::optional<double> value;  // nullopt releases the lever
};
struct LoadGate {
  gates::GateKind kind = gates::GateKind::Xor;
};
struct SetChallenge {
  std::optional<gates::GateKind> kind;  // nullopt clears the challenge
  std::optional<double> threshold;      // defaults to the canonical gate threshold
};
struct Reset {};

using Edit = std::variant<SetClamp, SetInputLever, PinInput, LoadGate, SetChallenge, Reset>;

struct EditCommand {
  Edit edit;
  std::uint64_t expected_revision = 0;
};

struct SessionState {
  std::string id;
  Network network = Network::canonical();
  std::vector<double> input_levers;  // every input lever, pinned ones at their pin
  std::optional<gates::GateKind> challenge;
  double threshold = 0.5;
  std::uint64_t revision = 0;
  ForwardTrace trace;
  mechanics::MechanicalState mechanical;

  std::vector<double> free_inputs() const;

  friend bool operator==(const SessionState&, const SessionState&) = default;
};

struct MechanicalDelta {
  bool full = false;  // layout changed; clients should redraw from the full state
  std::vector<mechanics::LeverState> levers;
  std::vector<mechanics::ClampPosition> clamps;
  std::vector<mechanics::NeuronId> taut_changed;
};

MechanicalDelta diff(const mechanics::MechanicalState& before, const mechanics::MechanicalState& after);

struct EditOutcome {
  SessionState state;
  MechanicalDelta delta;
};

struct ChallengeReport {
  gates::GateReport report;
  std::optional<gates::GateSpec> canonical;  // only when reveal was requested
};

class InvalidEdit : public Error {
 public:
  InvalidEdit(std::string field, const std::string& message) : Error(message), field_(std::move(field)) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

class RevisionConflict : public Error {
 public:
  RevisionConflict(std::uint64_t expected, std::uint64_t current)
      : Error("expected revision " + std::to_string(expected) + " but session is at " + std::to_string(current)),
        current_(current) {}
  std::uint64_t current() const noexcept { return current_; }

 private:
  std::uint64_t current_;
};

class UnknownSession : public Error {
 public:
  using Error::Error;
};

class NoChallenge : public Error {
 public:
  using Error::Error;
};

class Session {
 public:
  Session(std::string id, Network network, std::optional<gates::GateKind> challenge = std::nullopt);

  const std::string& id() const noexcept { return id_; }
  SessionState snapshot() const;

  /// Applies the edit or throws (InvalidEdit, RevisionConflict) leaving the
  /// state untouched. `on_commit` runs under the write lock, so observers see
  /// commits in revision order.
  EditOutcome apply(const EditCommand& cmd, const std::function<void(const EditOutcome&)>& on_commit = {});

  /// Verifies the live network against the current challenge at the current
  /// threshold. Throws NoChallenge, or ShapeError when the free inputs do not
  /// match the gate arity.
  ChallengeReport check_challenge(bool reveal) const;

  NetworkDocument export_document() const;

 private:
  SessionState next_state(const SessionState& current, const Edit& edit) const;

  const std::string id_;
  const std::vector<std::size_t> initial_sizes_;
  mutable std::shared_mutex mutex_;
  SessionState state_;
};

/// Queue of pushed messages for one listener.
class Subscription {
 public:
  void push(std::string message);
  std::optional<std::string> next(std::chrono::milliseconds timeout);
  void close();
  bool closed() const;

 private:
  mutable std::mutex mutex_;
  std::condition_variable cv_;
  std::deque<std::string> queue_;
  bool closed_ = false;
};

class SessionManager {
 public:
  std::shared_ptr<Session> create(Network network, std::optional<gates::GateKind> challenge = std::nullopt);
  /// Throws UnknownSession.
  std::shared_ptr<Session> find(const std::string& id) const;
  bool remove(const std::string& id);
  std::size_t size() const;

  std::shared_ptr<Subscription> subscribe(const std::string& session_id);
  void publish(const std::string& session_id, const std::string& message);

 private:
  std::string new_id();

  mutable std::mutex mutex_;
  std::map<std::string, std::shared_ptr<Session>> sessions_;
  std::multimap<std::string, std::weak_ptr<Subscription>> listeners_;
  std::uint64_t counter_ = 0;
};

}  // namespace mnn::service
