#include "detrace/model.hpp"

namespace detrace {

const char* to_string(ActionKind kind) {
    switch (kind) {
        case ActionKind::Input: return "input";
        case ActionKind::Output: return "output";
        case ActionKind::Internal: return "internal";
    }
    return "internal";
}

ActionKind action_kind_from(std::string_view text) {
    if (text == "input") return ActionKind::Input;
    if (text == "output") return ActionKind::Output;
    if (text == "internal") return ActionKind::Internal;
    throw ParseError("unknown action kind \"" + std::string(text) + "\"");
}

bool valid_action_name(std::string_view name) {
    if (name.empty()) return false;
    auto head = [](char c) {
        return c == '_' || (c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z');
    };
    if (!head(name[0])) return false;
    for (char c : name.substr(1)) {
        if (!head(c) && !(c >= '0' && c <= '9')) return false;
    }
    return true;
}

CanonValue Action::to_value() const {
    CanonValue::Map m;
    m.emplace("kind", to_string(kind));
    m.emplace("name", name);
    m.emplace("node", node);
    m.emplace("payload", payload);
    return CanonValue(std::move(m));
}

Action Action::from_value(const CanonValue& v) {
    Action a;
    a.kind = action_kind_from(v.at("kind").as_string());
    a.name = v.at("name").as_string();
    a.node = v.at("node").as_int();
    a.payload = v.at("payload");
    if (!valid_action_name(a.name)) {
        throw ParseError("invalid action name \"" + a.name + "\"");
    }
    if (a.node < 0) throw ParseError("negative node id");
    return a;
}

StateId state_hash(const State& s) {
    return fnv1a64(s.encode()) & 0x7fffffffffffffffULL;
}

void StateGraph::validate() const {
    for (StateId id : initial) {
        if (!states.contains(id)) throw ParseError("initial state not stored");
    }
    std::set<std::tuple<StateId, std::string, StateId>> seen;
    for (const auto& t : transitions) {
        if (!states.contains(t.from) || !states.contains(t.to)) {
            throw ParseError("transition endpoint not stored");
        }
        if (!seen.emplace(t.from, t.action.encode(), t.to).second) {
            throw ParseError("duplicate transition");
        }
    }
}

bool action_matches(const Action& requested, const Action& expected, MatchMode mode) {
    if (requested.kind != expected.kind) return false;
    if (requested.name != expected.name) return false;
    if (requested.node != expected.node) return false;
    if (mode == MatchMode::Drive) return true;
    return requested.payload == expected.payload;
}

MatchResult state_matches(const State& observed, const State& expected) {
    MatchResult r;
    for (const auto& [key, value] : observed.vars) {
        auto it = expected.vars.find(key);
        if (it == expected.vars.end()) {
            r.mismatches.push_back(key + ": observed " + value.encode() +
                                   ", not present in expected state");
        } else if (!(it->second == value)) {
            r.mismatches.push_back(key + ": observed " + value.encode() +
                                   " != expected " + it->second.encode());
        }
    }
    r.ok = r.mismatches.empty();
    return r;
}

}  // namespace detrace
