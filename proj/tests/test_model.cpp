#include <doctest.h>

#include "detrace/model.hpp"

using namespace detrace;

namespace {

std::uint64_t ref_fnv(std::string_view bytes) {
    std::uint64_t h = 14695981039346656037ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

State make_state(std::initializer_list<std::pair<const char*, CanonValue>> kvs) {
    State s;
    for (auto& [k, v] : kvs) s.vars.emplace(k, v);
    return s;
}

}  // namespace

TEST_CASE("action kind names") {
    CHECK(std::string(to_string(ActionKind::Input)) == "input");
    CHECK(std::string(to_string(ActionKind::Output)) == "output");
    CHECK(std::string(to_string(ActionKind::Internal)) == "internal");
    CHECK(action_kind_from("input") == ActionKind::Input);
    CHECK(action_kind_from("output") == ActionKind::Output);
    CHECK(action_kind_from("internal") == ActionKind::Internal);
    CHECK_THROWS_AS(action_kind_from("INPUT"), ParseError);
    CHECK_THROWS_AS(action_kind_from(""), ParseError);
}

TEST_CASE("action name validity") {
    CHECK(valid_action_name("Timeout"));
    CHECK(valid_action_name("_x9"));
    CHECK(valid_action_name("HandleRequestVote"));
    CHECK(!valid_action_name(""));
    CHECK(!valid_action_name("9x"));
    CHECK(!valid_action_name("has space"));
    CHECK(!valid_action_name("dash-ed"));
}

TEST_CASE("action encoding golden and round-trip") {
    Action a{ActionKind::Internal, "Timeout", 1, CanonValue(nullptr)};
    CHECK(a.encode() ==
          "{\"kind\":\"internal\",\"name\":\"Timeout\",\"node\":1,\"payload\":null}");
    Action b = Action::from_value(a.to_value());
    CHECK(b == a);

    CanonValue::Map bad;
    bad.emplace("kind", "internal");
    CHECK_THROWS_AS(Action::from_value(CanonValue(std::move(bad))), ParseError);
}

TEST_CASE("state hash is the 63-bit FNV of the canonical encoding") {
    State s = make_state({{"x", CanonValue(1)}});
    CHECK(s.encode() == "{\"x\":1}");
    CHECK(state_hash(s) == (ref_fnv("{\"x\":1}") & 0x7fffffffffffffffULL));
    CHECK(state_hash(s) == 4455138911048122326ULL);  // frozen
    // Key order in vars does not matter; the encoding is canonical.
    State t;
    t.vars.emplace("b", 2);
    t.vars.emplace("a", 1);
    CHECK(state_hash(t) == (ref_fnv("{\"a\":1,\"b\":2}") & 0x7fffffffffffffffULL));
}

TEST_CASE("action matching modes") {
    Action expected{ActionKind::Input, "Deliver", 2, CanonValue("payload")};
    Action same = expected;
    Action other_payload = expected;
    other_payload.payload = CanonValue("different");
    Action other_node = expected;
    other_node.node = 3;

    CHECK(action_matches(same, expected, MatchMode::Verify));
    CHECK(!action_matches(other_payload, expected, MatchMode::Verify));
    CHECK(action_matches(other_payload, expected, MatchMode::Drive));
    CHECK(!action_matches(other_node, expected, MatchMode::Drive));
}

TEST_CASE("observed state projection matching") {
    State expected = make_state({{"x", CanonValue(1)}, {"y", CanonValue(2)}});

    CHECK(state_matches(make_state({{"x", CanonValue(1)}}), expected).ok);
    CHECK(state_matches(make_state({}), expected).ok);
    CHECK(state_matches(expected, expected).ok);

    MatchResult wrong = state_matches(make_state({{"x", CanonValue(9)}}), expected);
    CHECK(!wrong.ok);
    CHECK(!wrong.mismatches.empty());

    // Observing a variable the expected state does not track is a mismatch.
    CHECK(!state_matches(make_state({{"z", CanonValue(0)}}), expected).ok);
}

TEST_CASE("graph structural validation") {
    State s0 = make_state({{"x", CanonValue(0)}});
    State s1 = make_state({{"x", CanonValue(1)}});
    StateGraph g;
    g.states.emplace(state_hash(s0), s0);
    g.states.emplace(state_hash(s1), s1);
    g.initial.insert(state_hash(s0));
    g.transitions.push_back(
        {state_hash(s0), Action{ActionKind::Internal, "step", 1, nullptr},
         state_hash(s1)});
    CHECK_NOTHROW(g.validate());

    StateGraph bad = g;
    bad.initial.insert(12345);
    CHECK_THROWS_AS(bad.validate(), ParseError);

    StateGraph dangling = g;
    dangling.transitions.push_back(
        {state_hash(s1), Action{ActionKind::Internal, "step", 1, nullptr}, 999});
    CHECK_THROWS_AS(dangling.validate(), ParseError);

    StateGraph dup = g;
    dup.transitions.push_back(dup.transitions.front());
    CHECK_THROWS_AS(dup.validate(), ParseError);
}
