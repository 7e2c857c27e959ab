#include <doctest.h>

#include <algorithm>
#include <cstring>

#include "detrace/wire.hpp"

using namespace detrace;

TEST_CASE("golden hello frame bytes") {
    std::string body = encode_message(ControlRequest(Hello{1, 1}));
    CHECK(body == "{\"node\":1,\"proto_version\":1,\"type\":\"hello\"}");
    REQUIRE(body.size() == 43);

    std::string frame = encode_frame(body);
    REQUIRE(frame.size() == 47);
    CHECK(static_cast<unsigned char>(frame[0]) == 0x00);
    CHECK(static_cast<unsigned char>(frame[1]) == 0x00);
    CHECK(static_cast<unsigned char>(frame[2]) == 0x00);
    CHECK(static_cast<unsigned char>(frame[3]) == 0x2B);
    CHECK(frame.substr(4) == body);
}

TEST_CASE("request round-trips") {
    ActionReq req;
    req.phase = Phase::Atomic;
    req.kind = ActionKind::Output;
    req.name = "RequestVote";
    req.node = 2;
    CanonValue::Map payload;
    payload.emplace("term", 1);
    req.payload = CanonValue(std::move(payload));
    State observed;
    observed.vars.emplace("term_2", 1);
    req.observed = observed;

    ControlRequest back = decode_request(encode_message(ControlRequest(req)));
    CHECK(std::get<ActionReq>(back) == req);

    ActionReq drive;
    drive.kind = ActionKind::Input;
    drive.name = "Deliver";
    drive.node = 1;
    drive.mode = MatchMode::Drive;
    CHECK(std::get<ActionReq>(decode_request(
              encode_message(ControlRequest(drive)))) == drive);

    CHECK(std::get<Hello>(decode_request(
              encode_message(ControlRequest(Hello{7, 1})))) == Hello{7, 1});
    CHECK(std::get<Bye>(decode_request(encode_message(ControlRequest(Bye{3})))) ==
          Bye{3});
}

TEST_CASE("response round-trips") {
    Pass pass;
    pass.step_index = 4;
    pass.payload = CanonValue("driven");
    State expected;
    expected.vars.emplace("x", 1);
    pass.expected_state = expected;
    CHECK(std::get<Pass>(decode_response(encode_message(ControlResponse(pass)))) ==
          pass);

    Fail fail;
    fail.reason = "timeout";
    fail.detail = "no matching request";
    fail.expected_action = Action{ActionKind::Internal, "Timeout", 1, nullptr};
    CHECK(std::get<Fail>(decode_response(encode_message(ControlResponse(fail)))) ==
          fail);

    CHECK(std::holds_alternative<Done>(
        decode_response(encode_message(ControlResponse(Done{})))));
}

TEST_CASE("schema violations are rejected") {
    // Internal actions must use begin/end, not atomic.
    ActionReq internal_atomic;
    internal_atomic.phase = Phase::Atomic;
    internal_atomic.kind = ActionKind::Internal;
    internal_atomic.name = "Step";
    CHECK_THROWS_AS(encode_message(ControlRequest(internal_atomic)), SchemaError);

    // begin/end only apply to internal actions.
    ActionReq begin_input;
    begin_input.phase = Phase::Begin;
    begin_input.kind = ActionKind::Input;
    begin_input.name = "Deliver";
    CHECK_THROWS_AS(encode_message(ControlRequest(begin_input)), SchemaError);

    // Drive mode is for inputs only.
    ActionReq drive_output;
    drive_output.kind = ActionKind::Output;
    drive_output.name = "Send";
    drive_output.mode = MatchMode::Drive;
    CHECK_THROWS_AS(encode_message(ControlRequest(drive_output)), SchemaError);

    Fail bad_reason;
    bad_reason.reason = "bored";
    CHECK_THROWS_AS(encode_message(ControlResponse(bad_reason)), SchemaError);

    CHECK_THROWS_AS(decode_request("{\"type\":\"mystery\"}"), SchemaError);
    CHECK_THROWS_AS(decode_response("{\"type\":\"hello\"}"), SchemaError);
    CHECK_THROWS_AS(decode_request("{\"no_type\":1}"), SchemaError);
}

TEST_CASE("decoding tolerates unknown extra keys") {
    ControlRequest req = decode_request(
        "{\"node\":5,\"proto_version\":1,\"type\":\"hello\",\"zz_future\":true}");
    CHECK(std::get<Hello>(req).node == 5);
}

TEST_CASE("frame reader reassembles from arbitrary chunking") {
    std::string wire;
    wire += encode_frame(encode_message(ControlRequest(Hello{1, 1})));
    wire += encode_frame(encode_message(ControlRequest(Bye{1})));

    for (std::size_t chunk : {std::size_t{1}, std::size_t{3}, wire.size()}) {
        std::size_t pos = 0;
        StreamReader reader = [&](char* buf, std::size_t len) {
            std::size_t take = std::min({chunk, len, wire.size() - pos});
            std::memcpy(buf, wire.data() + pos, take);
            pos += take;
            return take;
        };
        auto first = read_frame(reader);
        REQUIRE(first.has_value());
        CHECK(std::holds_alternative<Hello>(decode_request(*first)));
        auto second = read_frame(reader);
        REQUIRE(second.has_value());
        CHECK(std::holds_alternative<Bye>(decode_request(*second)));
        CHECK(!read_frame(reader).has_value());  // clean EOF at boundary
    }
}

TEST_CASE("frame reader errors") {
    // EOF in the middle of a frame body.
    std::string partial = encode_frame("{\"type\":\"bye\",\"node\":1}");
    partial.resize(partial.size() - 3);
    std::size_t pos = 0;
    StreamReader truncated = [&](char* buf, std::size_t len) {
        std::size_t take = std::min(len, partial.size() - pos);
        std::memcpy(buf, partial.data() + pos, take);
        pos += take;
        return take;
    };
    CHECK_THROWS_AS(read_frame(truncated), FrameError);

    // Oversize length prefix.
    std::string huge = {'\x7f', '\x00', '\x00', '\x00'};
    std::size_t hpos = 0;
    StreamReader oversize = [&](char* buf, std::size_t len) {
        std::size_t take = std::min(len, huge.size() - hpos);
        std::memcpy(buf, huge.data() + hpos, take);
        hpos += take;
        return take;
    };
    CHECK_THROWS_AS(read_frame(oversize), FrameError);
}

TEST_CASE("phase names") {
    CHECK(phase_from("atomic") == Phase::Atomic);
    CHECK(phase_from("begin") == Phase::Begin);
    CHECK(phase_from("end") == Phase::End);
    CHECK_THROWS_AS(phase_from("middle"), SchemaError);
}
