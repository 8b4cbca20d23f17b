#include <gtest/gtest.h>

#include <random>

#include "fieldscope/protocol.hpp"
#include "support.hpp"

using namespace fieldscope;
using nlohmann::json;

TEST(Framing, BigEndianLengthPrefix) {
  EXPECT_EQ(encode_frame(""), std::string("\0\0\0\0", 4));
  EXPECT_EQ(encode_frame("abc"), std::string("\0\0\0\3abc", 7));
  const std::string body(0x010203, 'x');
  const auto frame = encode_frame(body);
  EXPECT_EQ(frame.substr(0, 4), std::string("\0\1\2\3", 4));
  EXPECT_EQ(frame.size(), body.size() + 4);
}

TEST(Framing, EncodeMessageLayout) {
  const auto frame = encode_message({7, "ListHistory", json::object()});
  EXPECT_EQ(frame.substr(4), R"({"id":7,"payload":{},"type":"ListHistory"})");
}

TEST(Framing, DecoderHandlesArbitrarySplits) {
  std::string stream;
  std::vector<std::string> bodies;
  for (int i = 0; i < 50; ++i) {
    bodies.push_back(std::string(static_cast<std::size_t>(i * 7), static_cast<char>('a' + i % 26)));
    stream += encode_frame(bodies.back());
  }
  std::mt19937 rng(3);
  FrameDecoder dec;
  std::vector<std::string> got;
  std::size_t pos = 0;
  while (pos < stream.size()) {
    const std::size_t n = std::min<std::size_t>(stream.size() - pos, 1 + rng() % 40);
    dec.feed(std::string_view(stream).substr(pos, n));
    pos += n;
    while (auto b = dec.next()) got.push_back(*b);
  }
  EXPECT_EQ(got, bodies);
}

TEST(Framing, OversizedLengthRejected) {
  FrameDecoder dec;
  dec.feed(std::string("\x7f\xff\xff\xff", 4));
  EXPECT_THROW(dec.next(), Error);
}

TEST(Envelope, ParsesAndRejects) {
  const auto m = wire_from_json(json::parse(R"({"id":3,"type":"X","payload":{"a":1}})"));
  EXPECT_EQ(m.id, 3);
  EXPECT_EQ(m.type, "X");
  EXPECT_EQ(m.payload.at("a"), 1);
  EXPECT_EQ(wire_from_json(json::parse(R"({"id":3,"type":"X"})")).payload, json::object());
  EXPECT_THROW(wire_from_json(json::parse(R"([1,2])")), Error);
  EXPECT_THROW(wire_from_json(json::parse(R"({"id":"3","type":"X"})")), Error);
  EXPECT_THROW(wire_from_json(json::parse(R"({"id":1.5,"type":"X"})")), Error);
  EXPECT_THROW(wire_from_json(json::parse(R"({"id":3,"type":5})")), Error);
}

namespace {

class ControllerTest : public ::testing::Test {
 protected:
  testsupport::TempDir dir;
  Controller ctl{testsupport::demo_source(dir), testsupport::counting_clock()};

  Reply send(std::int64_t id, const std::string& type, json payload = json::object()) {
    return ctl.handle({id, type, std::move(payload)});
  }

  static std::string error_code(const Reply& r) {
    EXPECT_EQ(r.response.type, "Error");
    return r.response.payload.value("code", "");
  }
};

}  // namespace

TEST_F(ControllerTest, ListHistoryOnEmptySession) {
  const auto r = send(1, "ListHistory");
  EXPECT_EQ(r.response.id, 1);
  EXPECT_EQ(r.response.type, "HistoryUpdate");
  EXPECT_EQ(r.response.payload.at("history"), json::array());
  EXPECT_EQ(r.response.payload.at("active"), json::array());
  EXPECT_EQ(r.response.payload.at("time_step"), 0);
  EXPECT_EQ(r.response.payload.at("time_steps"), 5);
  EXPECT_EQ(r.response.payload.at("dataset_name"), "demo");
  EXPECT_TRUE(r.broadcast.empty());
}

TEST_F(ControllerTest, ApplyIsosurface) {
  const auto r = send(2, "ApplyOp", {{"op", visop_json(IsosurfaceOp{"phi", 0.5})}});
  ASSERT_EQ(r.response.type, "GeometryUpdate") << r.response.payload.dump();
  const auto& item = r.response.payload.at("items").at(0);
  EXPECT_EQ(item.at("op_id"), 1);
  EXPECT_EQ(item.at("step"), 0);
  EXPECT_EQ(item.at("geometry").at("kind"), "mesh");
  EXPECT_EQ(item.at("hash"), hex64(fnv1a64(item.at("geometry").dump())));
  ASSERT_EQ(r.broadcast.size(), 1u);
  EXPECT_EQ(r.broadcast[0].id, 0);
  EXPECT_EQ(r.broadcast[0].type, "HistoryUpdate");
  EXPECT_EQ(r.broadcast[0].payload.at("history").size(), 1u);
}

TEST_F(ControllerTest, ErrorsCarryCodes) {
  EXPECT_EQ(error_code(send(1, "Frobnicate")), "unknown_type");
  EXPECT_EQ(error_code(send(2, "ApplyOp", {{"op", {{"method", "Isosurface"}, {"scalar", "zzz"}, {"level", 1}}}})),
            "unknown_field");
  EXPECT_EQ(error_code(send(3, "ApplyOp", {{"op", {{"method", "Nope"}}}})), "parse_error");
  EXPECT_EQ(error_code(send(4, "ApplyOp", json::array())), "parse_error");
  EXPECT_EQ(error_code(send(5, "DeactivateOp", {{"op_id", 42}})), "unknown_op");
  EXPECT_EQ(error_code(send(6, "DeactivateOp", {{"op_id", "x"}})), "parse_error");
  EXPECT_EQ(error_code(send(7, "SetTimeStep", {{"step", 99}})), "invalid_argument");
  EXPECT_EQ(error_code(send(8, "SetTimeStep", {{"step", -1}})), "parse_error");
  EXPECT_EQ(error_code(send(9, "Steer", {{"op_id", 1}, {"beam", {{"a", 1}}}})), "parse_error");
  EXPECT_EQ(error_code(send(9, "Steer", {{"op_id", 1}, {"beam", json{{"a", {0, 0, 0}}}}})), "bad_payload");
  EXPECT_EQ(error_code(send(9, "Animate", {{"op_id", -3}, {"first", 0}, {"count", 1}})), "parse_error");
  EXPECT_EQ(error_code(send(10, "LoadState", {{"state", {{"schema_version", 2}}}})), "schema_version");
  EXPECT_EQ(send(11, "Frobnicate").response.id, 11);
  // Failed requests leave nothing behind.
  EXPECT_TRUE(ctl.session().history().empty());
  EXPECT_EQ(ctl.session().rejected().size(), 1u);
}

TEST_F(ControllerTest, DeactivateAndTimeStep) {
  send(1, "ApplyOp", {{"op", visop_json(IsosurfaceOp{"phi", 0.5})}});
  send(2, "ApplyOp", {{"op", visop_json(testsupport::field_lines())}});
  const auto d = send(3, "DeactivateOp", {{"op_id", 1}});
  EXPECT_EQ(d.response.payload.at("removed"), json::array({1}));
  EXPECT_EQ(d.broadcast.at(0).payload.at("active"), json::array({2}));
  const auto t = send(4, "SetTimeStep", {{"step", 2}});
  EXPECT_EQ(t.response.payload.at("time_step"), 2);
  ASSERT_EQ(t.response.payload.at("items").size(), 1u);
  EXPECT_EQ(t.response.payload.at("items").at(0).at("op_id"), 2);
  EXPECT_EQ(t.response.payload.at("items").at(0).at("step"), 2);
}

TEST_F(ControllerTest, AnimateReturnsEveryFrame) {
  send(1, "ApplyOp", {{"op", visop_json(testsupport::test_particle())}});
  const auto r = send(2, "Animate", {{"op_id", 1}, {"first", 1}, {"count", 3}});
  ASSERT_EQ(r.response.type, "GeometryUpdate") << r.response.payload.dump();
  const auto& items = r.response.payload.at("items");
  ASSERT_EQ(items.size(), 3u);
  for (std::size_t n = 0; n < 3; ++n) EXPECT_EQ(items[n].at("step"), n + 1);
  EXPECT_TRUE(r.broadcast.empty());
}

TEST_F(ControllerTest, SteerAcksThenBroadcastsGeometry) {
  send(1, "ApplyOp", {{"op", visop_json(testsupport::beam_op())}});
  const json beam = {{"a", {-0.3, -0.2, -0.4}}, {"b", {-0.1, 0.2, -0.4}}, {"n", 3}};
  const auto r = send(2, "Steer", {{"op_id", 1}, {"beam", beam}});
  EXPECT_EQ(r.response.type, "Steer");
  EXPECT_EQ(r.response.payload.at("superseded"), false);
  ASSERT_EQ(r.broadcast.size(), 1u);
  EXPECT_EQ(r.broadcast[0].type, "GeometryUpdate");
  EXPECT_EQ(r.broadcast[0].id, 0);

  auto direct = testsupport::beam_op();
  direct.beam = {{-0.3, -0.2, -0.4}, {-0.1, 0.2, -0.4}, 3};
  const auto d = send(3, "ApplyOp", {{"op", visop_json(direct)}});
  EXPECT_EQ(d.response.payload.at("items").at(0).at("hash"), r.broadcast[0].payload.at("items").at(0).at("hash"));
  EXPECT_EQ(superseded_steer_ack(5, 1).payload.at("superseded"), true);
}

TEST_F(ControllerTest, SaveAndLoadStateInline) {
  send(1, "ApplyOp", {{"op", visop_json(IsosurfaceOp{"phi", 0.5})}});
  send(2, "SetTimeStep", {{"step", 3}});
  const auto saved = send(3, "SaveState");
  ASSERT_EQ(saved.response.type, "SaveState");
  const json state = saved.response.payload.at("state");
  EXPECT_EQ(state.at("schema_version"), kStateSchemaVersion);

  send(4, "ApplyOp", {{"op", visop_json(testsupport::field_lines())}});
  const auto loaded = send(5, "LoadState", {{"state", state}});
  ASSERT_EQ(loaded.response.type, "HistoryUpdate") << loaded.response.payload.dump();
  EXPECT_EQ(loaded.response.payload.at("history").size(), 1u);
  EXPECT_EQ(loaded.response.payload.at("time_step"), 3);
  EXPECT_EQ(loaded.response.payload.at("unresolved"), json::array());
  EXPECT_EQ(loaded.broadcast.at(0).type, "HistoryUpdate");
  EXPECT_EQ(send(6, "SaveState").response.payload.at("state"), state);
}

TEST_F(ControllerTest, RandomPayloadsNeverThrow) {
  std::mt19937 rng(11);
  const char* types[] = {"ApplyOp", "DeactivateOp", "SetTimeStep", "Animate", "Steer", "LoadState", "ListHistory", "??"};
  const json junk[] = {json(), json(1), json("s"), json::array({1, 2}), json::object(), json{{"op_id", 1}},
                       json{{"op", json::object()}}, json{{"step", 1.5}}, json{{"state", 3}}, json{{"beam", "x"}}};
  for (int i = 0; i < 500; ++i) {
    const auto r = send(i, types[rng() % 8], junk[rng() % 10]);
    EXPECT_EQ(r.response.id, i);
    if (r.response.type == "Error") {
      EXPECT_TRUE(r.response.payload.at("message").is_string());
      EXPECT_NE(r.response.payload.at("code"), "internal") << r.response.payload.dump();
    }
  }
}
