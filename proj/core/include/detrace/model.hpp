#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "detrace/canon.hpp"

namespace detrace {

// Owner of a task partition; stable for a whole test run.
using NodeId = std::int64_t;

enum class ActionKind { Input, Output, Internal };

const char* to_string(ActionKind kind);
ActionKind action_kind_from(std::string_view text);  // throws ParseError

bool valid_action_name(std::string_view name);  // [A-Za-z_][A-Za-z0-9_]*

// One action signature instance. Equality is structural over all four
// fields; payload comparison goes through canonical encoding.
struct Action {
    ActionKind kind = ActionKind::Internal;
    std::string name;
    NodeId node = 0;
    CanonValue payload;

    CanonValue to_value() const;
    static Action from_value(const CanonValue& v);  // throws ParseError
    std::string encode() const { return to_value().encode(); }

    friend bool operator==(const Action& a, const Action& b) = default;
};

struct State {
    CanonValue::Map vars;

    std::string encode() const { return CanonValue(vars).encode(); }
    friend bool operator==(const State& a, const State& b) = default;
};

// Content hash of a state's canonical encoding. FNV-1a 64 masked to 63
// bits so every id fits the canonical signed-integer domain; collisions
// are detected at graph insertion by full-state comparison.
using StateId = std::uint64_t;
StateId state_hash(const State& s);

struct Transition {
    StateId from = 0;
    Action action;
    StateId to = 0;

    friend bool operator==(const Transition& a, const Transition& b) = default;
};

struct StateGraph {
    std::map<StateId, State> states;
    std::set<StateId> initial;
    std::vector<Transition> transitions;

    // Checks the structural invariants (initial and transition endpoints
    // refer to stored states, no duplicate transitions). Throws ParseError
    // on breach.
    void validate() const;
};

struct TraceStep {
    Action action;
    State post;

    friend bool operator==(const TraceStep& a, const TraceStep& b) = default;
};

// Alternating sequence s0, pi1, s1, ..., pin, sn; the unit of replay.
struct Trace {
    State initial;
    std::vector<TraceStep> steps;

    friend bool operator==(const Trace& a, const Trace& b) = default;
};

enum class MatchMode { Verify, Drive };

// Verify: structural equality of all four fields. Drive: kind, name and
// node must match; the payload is ignored because the player supplies it.
bool action_matches(const Action& requested, const Action& expected, MatchMode mode);

struct MatchResult {
    bool ok = true;
    std::vector<std::string> mismatches;
};

// Partial-projection comparison: every variable present in observed must
// match expected (a variable absent from expected is itself a mismatch);
// expected variables missing from observed are skipped.
MatchResult state_matches(const State& observed, const State& expected);

}  // namespace detrace
