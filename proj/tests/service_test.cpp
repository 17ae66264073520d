#include "mnn/service.hpp"

#include <atomic>
#include <random>
#include <thread>

#include <gtest/gtest.h>
#include <httplib.h>

#include "mnn/protocol.hpp"
#include "mnn/server.hpp"

namespace mnn::service {
namespace {

using gates::GateKind;
using nlohmann::json;

EditCommand at(std::uint64_t rev, Edit e) { return EditCommand{std::move(e), rev}; }

void expect_consistent(const SessionState& s) {
  const auto x = s.free_inputs();
  EXPECT_EQ(s.trace, forward(s.network, x));
  EXPECT_EQ(s.mechanical, mechanics::mechanical_forward(s.network, x));
}

TEST(Session, XorInputLever) {
  Session s("t", gates::make_gate(GateKind::Xor).network);
  const auto out = s.apply(at(0, SetInputLever{0, 1.0}));
  EXPECT_EQ(out.state.revision, 1u);
  EXPECT_EQ(out.state.trace.output().front(), 1.0);
  EXPECT_FALSE(out.state.mechanical.taut[1][1]);
  expect_consistent(out.state);
  // x1, h1 and y move; h2 goes slack (net -1).
  EXPECT_FALSE(out.delta.full);
  EXPECT_EQ(out.delta.levers.size(), 3u);
  ASSERT_EQ(out.delta.taut_changed.size(), 1u);
  EXPECT_EQ(out.delta.taut_changed[0], (mechanics::NeuronId{1, 1}));
}

TEST(Session, ZeroClampsZeroOutputs) {
  Session s("t", gates::make_gate(GateKind::Xor).network);
  std::uint64_t rev = s.apply(at(0, SetInputLever{0, 1.0})).state.revision;
  rev = s.apply(at(rev, SetInputLever{1, -0.4})).state.revision;
  const auto sizes = s.snapshot().network.layer_sizes();
  for (std::size_t k = 1; k < sizes.size(); ++k)
    for (std::size_t i = 0; i < sizes[k]; ++i)
      for (std::size_t j = 0; j < sizes[k - 1]; ++j) rev = s.apply(at(rev, SetClamp{k, j, i, 0.0})).state.revision;
  for (double x1 : {-1.0, 0.0, 0.3, 1.0}) {
    rev = s.apply(at(rev, SetInputLever{0, x1})).state.revision;
    for (double y : s.snapshot().trace.output()) EXPECT_EQ(y, 0.0);
  }
}

TEST(Session, RevisionConflictLeavesStateUntouched) {
  Session s("t", Network::canonical());
  s.apply(at(0, SetInputLever{0, 0.5}));
  const auto before = s.snapshot();
  try {
    s.apply(at(0, SetInputLever{0, 1.0}));
    FAIL() << "stale revision accepted";
  } catch (const RevisionConflict& e) {
    EXPECT_EQ(e.current(), 1u);
  }
  EXPECT_EQ(s.snapshot(), before);
}

TEST(Session, InvalidEditsNameTheField) {
  Session s("t", Network::canonical());
  const auto before = s.snapshot();
  auto field_of = [&](Edit e) {
    try {
      s.apply(at(0, std::move(e)));
    } catch (const InvalidEdit& err) {
      return err.field();
    }
    return std::string("accepted");
  };
  EXPECT_EQ(field_of(SetClamp{1, 0, 0, 1.5}), "position");
  EXPECT_EQ(field_of(SetClamp{0, 0, 0, 0.5}), "layer");
  EXPECT_EQ(field_of(SetClamp{1, 5, 0, 0.5}), "send");
  EXPECT_EQ(field_of(SetClamp{2, 0, 2, 0.5}), "recv");
  EXPECT_EQ(field_of(SetInputLever{0, -1.2}), "angle");
  EXPECT_EQ(field_of(SetInputLever{2, 0.0}), "index");
  EXPECT_EQ(field_of(PinInput{0, 3.0}), "value");
  EXPECT_EQ(field_of(SetChallenge{GateKind::And, 0.0}), "threshold");
  EXPECT_EQ(s.snapshot(), before);
}

TEST(Session, PinnedLeverCannotBeMoved) {
  Session s("t", Network::canonical());
  auto out = s.apply(at(0, PinInput{1, 1.0}));
  EXPECT_EQ(out.state.input_levers[1], 1.0);
  EXPECT_EQ(out.state.free_inputs().size(), 1u);
  EXPECT_THROW(s.apply(at(1, SetInputLever{1, 0.0})), InvalidEdit);
  out = s.apply(at(1, PinInput{1, std::nullopt}));
  EXPECT_FALSE(out.state.network.is_pinned(1));
  EXPECT_EQ(out.state.input_levers[1], 1.0);
}

TEST(Session, LoadGateAndReset) {
  Session s("t", Network::canonical());
  auto out = s.apply(at(0, LoadGate{GateKind::Not}));
  EXPECT_TRUE(out.delta.full);
  EXPECT_EQ(out.state.network, gates::make_gate(GateKind::Not).network);
  EXPECT_EQ(out.state.input_levers, (std::vector<double>{0.0, 1.0}));
  EXPECT_EQ(out.state.trace.output().front(), 1.0);
  out = s.apply(at(1, Reset{}));
  EXPECT_EQ(out.state.network, Network::canonical());
  EXPECT_EQ(out.state.revision, 2u);
}

TEST(Session, RandomEditsStayConsistentAndRevisionsIncrease) {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> val(-1.2, 1.2);
  std::uniform_int_distribution<int> pick(0, 9);
  Session s("t", Network::canonical());
  std::uint64_t rev = 0;
  std::size_t accepted = 0;
  for (int n = 0; n < 2000; ++n) {
    const auto sizes = s.snapshot().network.layer_sizes();
    Edit e;
    switch (pick(rng)) {
      case 0: case 1: case 2: case 3: {
        const std::size_t k = 1 + rng() % (sizes.size() - 1);
        e = SetClamp{k, rng() % sizes[k - 1], rng() % sizes[k], val(rng)};
        break;
      }
      case 4: case 5: case 6: e = SetInputLever{rng() % 2, val(rng)}; break;
      case 7: e = PinInput{rng() % 2, (rng() % 2) ? std::optional<double>(val(rng)) : std::nullopt}; break;
      case 8: e = LoadGate{static_cast<GateKind>(rng() % 4)}; break;
      default: e = Reset{}; break;
    }
    const auto before = s.snapshot();
    try {
      const auto out = s.apply(at(rev, e));
      EXPECT_EQ(out.state.revision, rev + 1);
      rev = out.state.revision;
      ++accepted;
      expect_consistent(out.state);
      EXPECT_EQ(out.state, s.snapshot());
    } catch (const InvalidEdit&) {
      EXPECT_EQ(s.snapshot(), before);
    }
  }
  EXPECT_GT(accepted, 1000u);
}

TEST(Session, ConcurrentWritersNeverShareARevision) {
  Session s("t", Network::canonical());
  std::atomic<int> accepted{0}, conflicts{0};
  std::vector<std::thread> threads;
  for (int t = 0; t < 8; ++t) {
    threads.emplace_back([&, t] {
      for (int n = 0; n < 200; ++n) {
        const auto rev = s.snapshot().revision;
        try {
          s.apply(at(rev, SetInputLever{0, (t % 2) ? 0.25 : -0.25}));
          ++accepted;
        } catch (const RevisionConflict&) {
          ++conflicts;
        }
      }
    });
  }
  for (auto& th : threads) th.join();
  EXPECT_EQ(s.snapshot().revision, static_cast<std::uint64_t>(accepted.load()));
  EXPECT_EQ(accepted + conflicts, 1600);
}

TEST(Challenge, StudentReproducesXor) {
  Session s("t", Network::zeros({2, 2, 1}), GateKind::Xor);
  std::uint64_t rev = 0;
  const double w1[2][2] = {{1, -1}, {-1, 1}};
  for (std::size_t i = 0; i < 2; ++i)
    for (std::size_t j = 0; j < 2; ++j) rev = s.apply(at(rev, SetClamp{1, j, i, w1[i][j]})).state.revision;
  rev = s.apply(at(rev, SetClamp{2, 0, 0, 1.0})).state.revision;
  rev = s.apply(at(rev, SetClamp{2, 1, 0, 1.0})).state.revision;
  const auto r = s.check_challenge(false);
  EXPECT_EQ(r.report.pass_count(), 4u);
  EXPECT_FALSE(r.canonical.has_value());
}

TEST(Challenge, EmptyNetworkPassesOnlyFalseRows) {
  for (auto kind : {GateKind::And, GateKind::Or, GateKind::Xor}) {
    Session s("t", Network::canonical(), kind);
    const auto r = s.check_challenge(false).report;
    for (const auto& row : r.rows) EXPECT_EQ(row.pass, !row.expected);
  }
  Session n("t", Network::canonical().pin_input(1, 1.0), GateKind::Not);
  const auto r = n.check_challenge(false).report;
  for (const auto& row : r.rows) EXPECT_EQ(row.pass, !row.expected);
}

TEST(Challenge, RevealAndErrors) {
  Session s("t", Network::canonical(), GateKind::Or);
  const auto r = s.check_challenge(true);
  ASSERT_TRUE(r.canonical.has_value());
  EXPECT_EQ(r.canonical->network, gates::make_gate(GateKind::Or).network);
  Session none("u", Network::canonical());
  EXPECT_THROW(none.check_challenge(false), NoChallenge);
  Session not_gate("v", Network::canonical(), GateKind::Not);
  EXPECT_THROW(not_gate.check_challenge(false), ShapeError);
  EXPECT_EQ(s.snapshot().threshold, 0.5);
  Session a("w", Network::canonical(), GateKind::And);
  EXPECT_EQ(a.snapshot().threshold, 1.0);
}

class ProtocolTest : public ::testing::Test {
 protected:
  SessionManager sessions;
  Protocol protocol{sessions};

  json send(const json& msg) { return json::parse(protocol.handle(msg).dump()); }
  json create(json payload = json::object()) { return send({{"type", "create_session"}, {"payload", payload}}); }
};

TEST_F(ProtocolTest, CreateEditAndStream) {
  const auto created = create({{"gate", "xor"}, {"challenge", "xor"}});
  ASSERT_EQ(created["type"], "state_update");
  const std::string id = created["session_id"];
  EXPECT_EQ(created["revision"], 0);
  EXPECT_EQ(created["payload"]["delta"]["full"], true);

  auto sub = sessions.subscribe(id);
  const auto updated = send({{"type", "apply_edit"},
                             {"session_id", id},
                             {"revision", 0},
                             {"payload", {{"edit", {{"kind", "set_input_lever"}, {"index", 1}, {"angle", 1.0}}}}}});
  ASSERT_EQ(updated["type"], "state_update") << updated.dump();
  EXPECT_EQ(updated["revision"], 1);
  EXPECT_EQ(updated["payload"]["trace"]["layers"][2][0]["out"], 1.0);
  EXPECT_EQ(updated["payload"]["mechanical"]["levers"][2][0], 1.0);
  const auto pushed = sub->next(std::chrono::milliseconds(100));
  ASSERT_TRUE(pushed.has_value());
  EXPECT_EQ(json::parse(*pushed), updated);

  const auto report = send({{"type", "check_challenge"}, {"session_id", id}, {"payload", {{"reveal", true}}}});
  EXPECT_EQ(report["type"], "check_challenge");
  EXPECT_EQ(report["payload"]["report"]["passed"], 4);
  EXPECT_EQ(report["payload"]["canonical"]["weights"][0][0][1], -1.0);
}

TEST_F(ProtocolTest, ErrorCodes) {
  const std::string id = create()["session_id"];
  auto edit = [&](std::uint64_t rev, json e) {
    return send({{"type", "apply_edit"}, {"session_id", id}, {"revision", rev}, {"payload", {{"edit", e}}}});
  };
  auto conflict = edit(7, {{"kind", "reset"}});
  EXPECT_EQ(conflict["payload"]["code"], "revision_conflict");
  EXPECT_EQ(conflict["revision"], 0);
  auto bad = edit(0, {{"kind", "set_clamp"}, {"layer", 2}, {"send", 1}, {"recv", 1}, {"position", 2.0}});
  EXPECT_EQ(bad["payload"]["code"], "invalid_edit");
  EXPECT_EQ(bad["payload"]["field"], "position");
  EXPECT_EQ(edit(0, {{"kind", "set_clamp"}, {"layer", 0}, {"send", 1}, {"recv", 1}, {"position", 0}})["payload"]["field"], "layer");
  EXPECT_EQ(edit(0, {{"kind", "teleport"}})["payload"]["field"], "kind");
  EXPECT_EQ(send({{"type", "check_challenge"}, {"session_id", id}})["payload"]["code"], "no_challenge");
  EXPECT_EQ(send({{"type", "get_state"}, {"session_id", "nope"}})["payload"]["code"], "unknown_session");
  EXPECT_EQ(send({{"type", "dance"}, {"session_id", id}})["payload"]["code"], "bad_request");
  EXPECT_EQ(json::parse(protocol.handle_text("{oops"))["payload"]["code"], "bad_request");
  EXPECT_EQ(send({{"type", "get_state"}, {"session_id", id}})["revision"], 0);
}

TEST_F(ProtocolTest, SetChallengeAndExport) {
  const std::string id = create({{"layer_sizes", {2, 2, 1}}})["session_id"];
  auto r = send({{"type", "apply_edit"},
                 {"session_id", id},
                 {"revision", 0},
                 {"payload", {{"edit", {{"kind", "set_challenge"}, {"gate", "and"}}}}}});
  EXPECT_EQ(r["payload"]["challenge"], "and");
  EXPECT_EQ(r["payload"]["threshold"], 1.0);
  const auto doc = send({{"type", "export_document"}, {"session_id", id}});
  const auto parsed = parse_document(doc["payload"]["document"].get<std::string>());
  EXPECT_EQ(parsed.network, Network::zeros({2, 2, 1}));
  ASSERT_TRUE(parsed.gate.has_value());
  EXPECT_EQ(parsed.gate->kind, GateKind::And);
}

TEST(HttpServer, MessagesAndEventStream) {
  SessionManager sessions;
  Server server(sessions);
  const int port = server.bind_to_any_port("127.0.0.1");
  ASSERT_GT(port, 0);
  server.start_background();

  httplib::Client client("127.0.0.1", port);
  auto health = client.Get("/v1/health");
  ASSERT_TRUE(health);
  EXPECT_EQ(health->body, "ok");

  auto created = client.Post("/v1/messages", R"({"type":"create_session","payload":{"gate":"xor"}})", "application/json");
  ASSERT_TRUE(created);
  const std::string id = json::parse(created->body)["session_id"];

  std::vector<json> events;
  std::thread listener([&] {
    httplib::Client stream("127.0.0.1", port);
    std::string buffer;
    stream.Get("/v1/sessions/" + id + "/events", [&](const char* data, std::size_t len) {
      buffer.append(data, len);
      std::size_t end;
      while ((end = buffer.find("\n\n")) != std::string::npos) {
        const std::string event = buffer.substr(0, end);
        buffer.erase(0, end + 2);
        if (event.rfind("data: ", 0) == 0) events.push_back(json::parse(event.substr(6)));
      }
      return events.size() < 2;
    });
  });

  // Wait for the initial snapshot before editing.
  for (int n = 0; n < 100 && events.empty(); ++n) std::this_thread::sleep_for(std::chrono::milliseconds(10));
  const json edit = {{"type", "apply_edit"},
                     {"session_id", id},
                     {"revision", 0},
                     {"payload", {{"edit", {{"kind", "set_input_lever"}, {"index", 1}, {"angle", 1.0}}}}}};
  auto updated = client.Post("/v1/messages", edit.dump(), "application/json");
  ASSERT_TRUE(updated);
  listener.join();
  ASSERT_EQ(events.size(), 2u);
  EXPECT_EQ(events[0]["revision"], 0);
  EXPECT_EQ(events[1], json::parse(updated->body));
  EXPECT_EQ(events[1]["payload"]["trace"]["layers"][2][0]["out"], 1.0);

  auto missing = client.Get("/v1/sessions/nope/events");
  ASSERT_TRUE(missing);
  EXPECT_EQ(missing->status, 404);
  server.stop();
}

}  // namespace
}  // namespace mnn::service
