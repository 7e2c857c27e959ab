#include "detrace/checker.hpp"

#include <algorithm>
#include <deque>
#include <optional>
#include <unordered_map>

namespace detrace {

namespace {

struct Discovered {
    StateId pred = 0;
    Action via;
    bool is_initial = false;
    std::size_t depth = 0;
};

std::vector<std::pair<Action, State>> reconstruct_path(
    const StateGraph& graph, const std::unordered_map<StateId, Discovered>& meta,
    StateId id) {
    std::vector<std::pair<Action, State>> path;
    StateId cur = id;
    while (!meta.at(cur).is_initial) {
        const Discovered& d = meta.at(cur);
        path.emplace_back(d.via, graph.states.at(cur));
        cur = d.pred;
    }
    std::reverse(path.begin(), path.end());
    return path;
}

}  // namespace

ExploreResult explore(const Model& model, const ExploreBounds& bounds) {
    if (bounds.max_states < 1) throw BadParams("max_states must be >= 1");
    if (!model.init || !model.next) throw ModelError("model missing init or next");

    ExploreResult result;
    StateGraph& graph = result.graph;
    std::unordered_map<StateId, Discovered> meta;
    std::deque<StateId> frontier;
    std::set<std::tuple<StateId, std::string, StateId>> seen_transitions;

    auto check_invariants = [&](const State& s, StateId id) {
        for (const auto& [name, pred] : model.invariants) {
            if (!pred(s)) {
                result.violations.push_back(
                    Violation{name, s, reconstruct_path(graph, meta, id)});
            }
        }
    };

    // Returns the id if the state was stored (new or known), or nullopt
    // when max_states is hit and the state is new.
    auto intern = [&](const State& s, const Discovered& d) -> std::optional<StateId> {
        StateId id = state_hash(s);
        auto it = graph.states.find(id);
        if (it != graph.states.end()) {
            if (!(it->second == s)) {
                throw ModelError("state hash collision at id " + std::to_string(id));
            }
            return id;
        }
        if (graph.states.size() >= bounds.max_states) {
            result.truncated = true;
            return std::nullopt;
        }
        graph.states.emplace(id, s);
        meta.emplace(id, d);
        check_invariants(s, id);
        frontier.push_back(id);
        return id;
    };

    // Initial states in canonical order for reproducibility.
    std::vector<State> inits = model.init();
    std::sort(inits.begin(), inits.end(), [](const State& a, const State& b) {
        return a.encode() < b.encode();
    });
    for (const State& s : inits) {
        Discovered d;
        d.is_initial = true;
        if (auto id = intern(s, d)) graph.initial.insert(*id);
    }
    if (graph.initial.empty()) throw ModelError("model has no initial states");

    while (!frontier.empty()) {
        StateId id = frontier.front();
        frontier.pop_front();
        std::size_t depth = meta.at(id).depth;

        std::vector<std::pair<Action, State>> succ = model.next(graph.states.at(id));
        for (const auto& [action, state] : succ) {
            if (!valid_action_name(action.name) || action.node < 0) {
                throw ModelError("model emitted malformed action \"" + action.name + "\"");
            }
        }
        if (bounds.max_depth != 0 && depth >= bounds.max_depth) {
            if (!succ.empty()) result.truncated = true;
            continue;
        }
        std::sort(succ.begin(), succ.end(),
                  [](const std::pair<Action, State>& a, const std::pair<Action, State>& b) {
                      std::string ea = a.first.encode();
                      std::string eb = b.first.encode();
                      if (ea != eb) return ea < eb;
                      return a.second.encode() < b.second.encode();
                  });

        for (const auto& [action, state] : succ) {
            Discovered d;
            d.pred = id;
            d.via = action;
            d.depth = depth + 1;
            auto to = intern(state, d);
            if (!to) continue;  // truncated; drop the edge to keep the graph closed
            if (seen_transitions.emplace(id, action.encode(), *to).second) {
                graph.transitions.push_back(Transition{id, action, *to});
            }
        }
    }

    return result;
}

Model builtin_model(const std::string& name, const CanonValue& params) {
    if (name == "election") {
        return election_model(ElectionParams::from_value(params));
    }
    throw UnknownModel("unknown builtin model \"" + name + "\"");
}

Model inject_bug(const Model& model) {
    if (model.name != "election") {
        throw BadParams("inject_bug applies to the builtin election model only");
    }
    return election_model(ElectionParams::from_value(model.params), true);
}

}  // namespace detrace
