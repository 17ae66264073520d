#include "mnn/document.hpp"

#include <filesystem>
#include <random>

#include <gtest/gtest.h>

#include "mnn/error.hpp"
#include "test_util.hpp"

namespace mnn {
namespace {

TEST(Document, RoundTripRandomNetworks) {
  std::mt19937_64 rng(77);
  for (int s = 0; s < 100; ++s) {
    NetworkDocument doc;
    doc.network = testing::random_network(rng, {2, 4, 2});
    if (s % 4 == 0) doc.network = doc.network.pin_input(s % 2, 1.0);
    if (s % 5 == 0) doc.name = "sample " + std::to_string(s);
    const std::string text = serialize_document(doc);
    const NetworkDocument back = parse_document(text);
    EXPECT_EQ(back, doc);
    EXPECT_EQ(serialize_document(back), text);
  }
}

TEST(Document, GateDocuments) {
  for (auto kind : {gates::GateKind::And, gates::GateKind::Or, gates::GateKind::Not, gates::GateKind::Xor}) {
    const auto spec = gates::make_gate(kind);
    const auto doc = parse_document(serialize_document(gate_document(spec)));
    const auto back = gate_from_document(doc);
    EXPECT_EQ(back.network, spec.network);
    EXPECT_EQ(back.threshold, spec.threshold);
    EXPECT_EQ(back.kind, kind);
  }
}

TEST(Document, PinnedKeysAreOneBased) {
  const auto text = serialize_document(gate_document(gates::make_gate(gates::GateKind::Not)));
  EXPECT_NE(text.find("\"pinned\": {\n    \"2\": 1.0"), std::string::npos) << text;
  EXPECT_NE(text.find("\"version\": 1"), std::string::npos);
}

TEST(Document, EmbeddedBuildSheet) {
  NetworkDocument doc = gate_document(gates::make_gate(gates::GateKind::Xor));
  doc.embed_build_sheet = true;
  const auto text = serialize_document(doc);
  EXPECT_NE(text.find("layer=2 recv=1 send=2 clamp=-1.0000"), std::string::npos);
  EXPECT_EQ(parse_document(text), doc);
}

TEST(Document, Rejections) {
  EXPECT_THROW(parse_document("not json"), ParseError);
  EXPECT_THROW(parse_document("[]"), ParseError);
  EXPECT_THROW(parse_document(R"({"version": 2, "layer_sizes": [1,1], "weights": [[[0]]]})"), ParseError);
  EXPECT_THROW(parse_document(R"({"version": 1, "layer_sizes": [1,1]})"), ParseError);
  EXPECT_THROW(parse_document(R"({"version": 1, "layer_sizes": [1,1], "weights": [[[1.5]]]})"), ParseError);
  EXPECT_THROW(parse_document(R"({"version": 1, "layer_sizes": [2,1], "weights": [[[0]]]})"), ParseError);
  EXPECT_THROW(parse_document(R"({"version": 1, "layer_sizes": [1,1], "weights": [[[0]]], "pinned": {"0": 1}})"),
               ParseError);
  EXPECT_THROW(parse_document(R"({"version": 1, "layer_sizes": [1,1], "weights": [[[0]]], "gate": {"kind": "nand", "threshold": 0.5}})"),
               ParseError);
  EXPECT_THROW(parse_document(R"({"version": 1, "layer_sizes": [1,1], "weights": [[[0]]], "build_sheet": ["layer=2 recv=1 send=1 clamp=0.5000"]})"),
               ParseError);
  EXPECT_NO_THROW(parse_document(R"({"version": 1, "layer_sizes": [1,1], "weights": [[[0.5]]], "build_sheet": ["layer=2 recv=1 send=1 clamp=0.5000"]})"));
}

TEST(Document, ShippedFilesRoundTrip) {
  const std::filesystem::path dir = "data";
  ASSERT_TRUE(std::filesystem::exists(dir / "gates" / "xor.net"));
  int count = 0;
  for (const auto& entry : std::filesystem::recursive_directory_iterator(dir)) {
    if (entry.path().extension() != ".net") continue;
    const std::string text = read_text_file(entry.path());
    const auto doc = parse_document(text);
    EXPECT_EQ(parse_document(serialize_document(doc)), doc) << entry.path();
    EXPECT_EQ(serialize_document(doc), text) << entry.path() << " is not in canonical form";
    ++count;
  }
  EXPECT_GE(count, 4);
}

TEST(Dataset, ParseFile) {
  const auto data = parse_dataset(R"({"name": "half", "samples": [{"input": [1, 0], "target": [0.5]}]})");
  EXPECT_EQ(data.name, "half");
  EXPECT_FALSE(data.readout_threshold.has_value());
  EXPECT_EQ(data.samples.front().target.front(), 0.5);
  EXPECT_THROW(parse_dataset(R"({"samples": []})"), ParseError);
  EXPECT_THROW(parse_dataset(R"({"samples": [{"input": [1]}]})"), ParseError);
}

}  // namespace
}  // namespace mnn
