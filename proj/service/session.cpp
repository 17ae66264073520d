#include <cmath>
#include <iomanip>
#include <random>
#include <sstream>

#include "mnn/service.hpp"

namespace mnn::service {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

void require_range(const std::string& field, double v, double lo, double hi) {
  if (!std::isfinite(v) || v < lo || v > hi) {
    std::ostringstream os;
    os << field << " must lie in [" << lo << ", " << hi << "], got " << v;
    throw InvalidEdit(field, os.str());
  }
}

void require_index(const std::string& field, std::size_t v, std::size_t count) {
  if (v >= count) {
    throw InvalidEdit(field, field + " " + std::to_string(v + 1) + " is out of range (1.." + std::to_string(count) + ")");
  }
}

void recompute(SessionState& s) {
  const auto x = s.free_inputs();
  s.trace = forward(s.network, x);
  s.mechanical = mechanics::mechanical_forward(s.network, x);
}

}  // namespace

std::vector<double> SessionState::free_inputs() const {
  std::vector<double> x;
  for (std::size_t j = 0; j < input_levers.size(); ++j) {
    if (!network.is_pinned(j)) {
      x.push_back(input_levers[j]);
    }
  }
  return x;
}

MechanicalDelta diff(const mechanics::MechanicalState& before, const mechanics::MechanicalState& after) {
  MechanicalDelta delta;
  bool same_layout = before.levers.size() == after.levers.size() && before.clamps.size() == after.clamps.size();
  for (std::size_t k = 0; same_layout && k < before.levers.size(); ++k) {
    same_layout = before.levers[k].size() == after.levers[k].size();
  }
  if (!same_layout) {
    delta.full = true;
    return delta;
  }
  for (std::size_t k = 0; k < after.levers.size(); ++k) {
    for (std::size_t i = 0; i < after.levers[k].size(); ++i) {
      if (before.levers[k][i] != after.levers[k][i]) {
        delta.levers.push_back(after.levers[k][i]);
      }
      if (k > 0 && before.taut[k][i] != after.taut[k][i]) {
        delta.taut_changed.push_back({k, i});
      }
    }
  }
  for (std::size_t c = 0; c < after.clamps.size(); ++c) {
    if (before.clamps[c] != after.clamps[c]) {
      delta.clamps.push_back(after.clamps[c]);
    }
  }
  return delta;
}

Session::Session(std::string id, Network network, std::optional<gates::GateKind> challenge)
    : id_(std::move(id)), initial_sizes_(network.layer_sizes()) {
  state_.id = id_;
  state_.input_levers.assign(network.input_count(), 0.0);
  for (const auto& [index, value] : network.pinned()) {
    state_.input_levers[index] = value;
  }
  state_.network = std::move(network);
  state_.challenge = challenge;
  if (challenge) {
    state_.threshold = gates::make_gate(*challenge).threshold;
  }
  recompute(state_);
}

SessionState Session::snapshot() const {
  std::shared_lock lock(mutex_);
  return state_;
}

SessionState Session::next_state(const SessionState& current, const Edit& edit) const {
  SessionState next = current;
  std::visit(
      overloaded{
          [&](const SetClamp& e) {
            const auto& sizes = next.network.layer_sizes();
            if (e.layer == 0 || e.layer >= sizes.size()) {
              throw InvalidEdit("layer", "layer " + std::to_string(e.layer + 1) + " has no clamps feeding it");
            }
            require_index("recv", e.recv, sizes[e.layer]);
            require_index("send", e.send, sizes[e.layer - 1]);
            require_range("position", e.position, -1.0, 1.0);
            next.network = next.network.with_weight(e.layer, e.recv, e.send, mechanics::clamp_to_weight(e.position));
          },
          [&](const SetInputLever& e) {
            require_index("index", e.index, next.input_levers.size());
            if (next.network.is_pinned(e.index)) {
              throw InvalidEdit("index", "input lever " + std::to_string(e.index + 1) + " is pinned");
            }
            require_range("angle", e.angle, -1.0, 1.0);
            next.input_levers[e.index] = e.angle;
          },
          [&](const PinInput& e) {
            require_index("index", e.index, next.input_levers.size());
            if (e.value) {
              require_range("value", *e.value, -1.0, 1.0);
              next.network = next.network.pin_input(e.index, *e.value);
              next.input_levers[e.index] = *e.value;
            } else {
              // The released lever stays where the pin left it.
              next.network = next.network.unpin_input(e.index);
            }
          },
          [&](const LoadGate& e) {
            const auto spec = gates::make_gate(e.kind);
            next.network = spec.network;
            next.threshold = spec.threshold;
            next.input_levers.assign(spec.network.input_count(), 0.0);
            for (const auto& [index, value] : spec.network.pinned()) {
              next.input_levers[index] = value;
            }
          },
          [&](const SetChallenge& e) {
            next.challenge = e.kind;
            if (e.threshold) {
              if (!(*e.threshold > 0.0 && *e.threshold <= 1.0)) {
                throw InvalidEdit("threshold", "threshold must lie in (0, 1]");
              }
              next.threshold = *e.threshold;
            } else if (e.kind) {
              next.threshold = gates::make_gate(*e.kind).threshold;
            }
          },
          [&](const Reset&) {
            next.network = Network::zeros(initial_sizes_);
            next.input_levers.assign(next.network.input_count(), 0.0);
          },
      },
      edit);
  recompute(next);
  return next;
}

EditOutcome Session::apply(const EditCommand& cmd, const std::function<void(const EditOutcome&)>& on_commit) {
  std::unique_lock lock(mutex_);
  if (cmd.expected_revision != state_.revision) {
    throw RevisionConflict(cmd.expected_revision, state_.revision);
  }
  SessionState next;
  try {
    next = next_state(state_, cmd.edit);
  } catch (const InvalidEdit&) {
    throw;
  } catch (const Error& e) {
    throw InvalidEdit("edit", e.what());
  }
  next.revision = state_.revision + 1;
  EditOutcome outcome{next, diff(state_.mechanical, next.mechanical)};
  state_ = std::move(next);
  if (on_commit) {
    on_commit(outcome);
  }
  return outcome;
}

ChallengeReport Session::check_challenge(bool reveal) const {
  const SessionState s = snapshot();
  if (!s.challenge) {
    throw NoChallenge("session " + s.id + " has no challenge set");
  }
  ChallengeReport out{gates::verify_gate(s.network, *s.challenge, s.threshold), std::nullopt};
  if (reveal) {
    out.canonical = gates::make_gate(*s.challenge);
  }
  return out;
}

NetworkDocument Session::export_document() const {
  const SessionState s = snapshot();
  NetworkDocument doc;
  doc.network = s.network;
  doc.name = "session " + s.id + " revision " + std::to_string(s.revision);
  if (s.challenge) {
    doc.gate = GateBlock{*s.challenge, s.threshold};
  }
  return doc;
}

void Subscription::push(std::string message) {
  {
    std::lock_guard lock(mutex_);
    if (closed_) {
      return;
    }
    queue_.push_back(std::move(message));
  }
  cv_.notify_one();
}

std::optional<std::string> Subscription::next(std::chrono::milliseconds timeout) {
  std::unique_lock lock(mutex_);
  cv_.wait_for(lock, timeout, [&] { return closed_ || !queue_.empty(); });
  if (queue_.empty()) {
    return std::nullopt;
  }
  std::string msg = std::move(queue_.front());
  queue_.pop_front();
  return msg;
}

void Subscription::close() {
  {
    std::lock_guard lock(mutex_);
    closed_ = true;
  }
  cv_.notify_all();
}

bool Subscription::closed() const {
  std::lock_guard lock(mutex_);
  return closed_;
}

std::string SessionManager::new_id() {
  static thread_local std::mt19937_64 rng{std::random_device{}()};
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << rng() << '-' << ++counter_;
  return os.str();
}

std::shared_ptr<Session> SessionManager::create(Network network, std::optional<gates::GateKind> challenge) {
  std::lock_guard lock(mutex_);
  std::string id = new_id();
  auto session = std::make_shared<Session>(id, std::move(network), challenge);
  sessions_.emplace(std::move(id), session);
  return session;
}

std::shared_ptr<Session> SessionManager::find(const std::string& id) const {
  std::lock_guard lock(mutex_);
  auto it = sessions_.find(id);
  if (it == sessions_.end()) {
    throw UnknownSession("no session '" + id + "'");
  }
  return it->second;
}

bool SessionManager::remove(const std::string& id) {
  std::lock_guard lock(mutex_);
  auto [lo, hi] = listeners_.equal_range(id);
  for (auto it = lo; it != hi; ++it) {
    if (auto sub = it->second.lock()) {
      sub->close();
    }
  }
  listeners_.erase(lo, hi);
  return sessions_.erase(id) > 0;
}

std::size_t SessionManager::size() const {
  std::lock_guard lock(mutex_);
  return sessions_.size();
}

std::shared_ptr<Subscription> SessionManager::subscribe(const std::string& session_id) {
  find(session_id);
  auto sub = std::make_shared<Subscription>();
  std::lock_guard lock(mutex_);
  listeners_.emplace(session_id, sub);
  return sub;
}

void SessionManager::publish(const std::string& session_id, const std::string& message) {
  std::lock_guard lock(mutex_);
  auto [lo, hi] = listeners_.equal_range(session_id);
  for (auto it = lo; it != hi;) {
    if (auto sub = it->second.lock(); sub && !sub->closed()) {
      sub->push(message);
      ++it;
    } else {
      it = listeners_.erase(it);
    }
  }
}

}  // namespace mnn::service
