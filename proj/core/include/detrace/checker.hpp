#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "detrace/model.hpp"

namespace detrace {

class ModelError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class UnknownModel : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class BadParams : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// A programmatic protocol model. next must be a pure function of its
// input state (same state, same successor list in the same order) and
// every emitted action must be fully populated.
struct Model {
    std::string name;
    CanonValue params;
    std::function<std::vector<State>()> init;
    std::function<std::vector<std::pair<Action, State>>(const State&)> next;
    std::vector<std::pair<std::string, std::function<bool(const State&)>>> invariants;
};

struct ExploreBounds {
    std::size_t max_states = 100000;
    std::size_t max_depth = 0;  // 0 = unlimited
};

// Counterexample: replaying path through Model::next from an initial
// state reproduces the violating state.
struct Violation {
    std::string invariant_name;
    State state;
    std::vector<std::pair<Action, State>> path;
};

struct ExploreResult {
    StateGraph graph;
    std::vector<Violation> violations;
    bool truncated = false;
};

// Breadth-first exploration from all initial states. States deduplicate
// by state_hash with a full-state collision check; successors at each
// state are ordered by canonical action encoding, so the same model and
// bounds always produce the same graph.
ExploreResult explore(const Model& model, const ExploreBounds& bounds);

struct ElectionParams {
    std::int64_t node_count = 3;
    std::int64_t max_term = 1;

    static ElectionParams from_value(const CanonValue& params);  // throws BadParams
    CanonValue to_value() const;
};

// Raft-style single-term leader election over an in-flight message
// multiset. Safety invariant: AtMostOneLeaderPerTerm.
Model election_model(const ElectionParams& params, bool double_vote_bug = false);

// name in {"election"}; params per ElectionParams.
Model builtin_model(const std::string& name, const CanonValue& params);

// Variant of the builtin election model whose vote handler grants even
// when voted_for is already set to a different candidate. Used to build
// the buggy implementation twin and the negative exploration test.
Model inject_bug(const Model& model);

}  // namespace detrace
