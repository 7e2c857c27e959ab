#include <algorithm>

#include "detrace/checker.hpp"

namespace detrace {

namespace {

std::string var(const char* base, NodeId i) {
    return std::string(base) + "_" + std::to_string(i);
}

CanonValue rv_msg(NodeId from, NodeId to, std::int64_t term) {
    CanonValue::Map m;
    m.emplace("from", from);
    m.emplace("kind", "rv");
    m.emplace("term", term);
    m.emplace("to", to);
    return CanonValue(std::move(m));
}

CanonValue resp_msg(NodeId from, NodeId to, std::int64_t term, bool granted) {
    CanonValue::Map m;
    m.emplace("from", from);
    m.emplace("granted", granted);
    m.emplace("kind", "resp");
    m.emplace("term", term);
    m.emplace("to", to);
    return CanonValue(std::move(m));
}

void insert_sorted(CanonValue::List& list, CanonValue v) {
    auto it = std::lower_bound(list.begin(), list.end(), v);
    list.insert(it, std::move(v));
}

// Per-node view of the flat variable map.
struct NodeView {
    std::int64_t term;
    CanonValue voted_for;  // null or node id
    std::string role;
    CanonValue::List votes;    // sorted node ids granted in current term
    CanonValue::List pending;  // peers still owed a RequestVote, send order
    CanonValue::List outbox;   // vote responses not yet sent, FIFO
};

struct ElectionView {
    std::int64_t n;
    std::vector<NodeView> nodes;  // index 0 = node 1
    CanonValue::List msgs;        // in-flight multiset, sorted

    static ElectionView load(const State& s, std::int64_t n) {
        ElectionView v;
        v.n = n;
        v.nodes.resize(static_cast<std::size_t>(n));
        for (std::int64_t i = 1; i <= n; ++i) {
            NodeView& nd = v.nodes[static_cast<std::size_t>(i - 1)];
            nd.term = s.vars.at(var("term", i)).as_int();
            nd.voted_for = s.vars.at(var("voted_for", i));
            nd.role = s.vars.at(var("role", i)).as_string();
            nd.votes = s.vars.at(var("votes", i)).as_list();
            nd.pending = s.vars.at(var("pending", i)).as_list();
            nd.outbox = s.vars.at(var("outbox", i)).as_list();
        }
        v.msgs = s.vars.at("msgs").as_list();
        return v;
    }

    State store() const {
        State s;
        for (std::int64_t i = 1; i <= n; ++i) {
            const NodeView& nd = nodes[static_cast<std::size_t>(i - 1)];
            s.vars.emplace(var("term", i), nd.term);
            s.vars.emplace(var("voted_for", i), nd.voted_for);
            s.vars.emplace(var("role", i), nd.role);
            s.vars.emplace(var("votes", i), nd.votes);
            s.vars.emplace(var("pending", i), nd.pending);
            s.vars.emplace(var("outbox", i), nd.outbox);
        }
        s.vars.emplace("msgs", msgs);
        return s;
    }

    NodeView& node(NodeId i) { return nodes[static_cast<std::size_t>(i - 1)]; }

    void remove_msg(const CanonValue& m) {
        auto it = std::find(msgs.begin(), msgs.end(), m);
        msgs.erase(it);
    }
};

}  // namespace

ElectionParams ElectionParams::from_value(const CanonValue& params) {
    ElectionParams p;
    try {
        p.node_count = params.at("node_count").as_int();
        p.max_term = params.at("max_term").as_int();
    } catch (const ParseError& e) {
        throw BadParams(std::string("election params: ") + e.what());
    }
    if (p.node_count < 2) throw BadParams("node_count must be >= 2");
    if (p.max_term < 1) throw BadParams("max_term must be >= 1");
    return p;
}

CanonValue ElectionParams::to_value() const {
    CanonValue::Map m;
    m.emplace("node_count", node_count);
    m.emplace("max_term", max_term);
    return CanonValue(std::move(m));
}

Model election_model(const ElectionParams& params, bool double_vote_bug) {
    const std::int64_t n = params.node_count;
    const std::int64_t max_term = params.max_term;

    Model model;
    model.name = "election";
    model.params = params.to_value();

    model.init = [n]() {
        ElectionView v;
        v.n = n;
        v.nodes.resize(static_cast<std::size_t>(n));
        for (auto& nd : v.nodes) {
            nd.term = 0;
            nd.voted_for = nullptr;
            nd.role = "follower";
        }
        return std::vector<State>{v.store()};
    };

    model.next = [n, max_term, double_vote_bug](const State& s) {
        ElectionView view = ElectionView::load(s, n);
        std::vector<std::pair<Action, State>> out;

        for (NodeId i = 1; i <= n; ++i) {
            const NodeView& nd = view.node(i);

            // Timeout: start (or restart) a candidacy. A candidate may only
            // re-arm after its send queue has drained, matching a sequential
            // per-node candidacy task.
            if (nd.role != "leader" && nd.term < max_term && nd.pending.empty()) {
                ElectionView next = view;
                NodeView& me = next.node(i);
                me.term += 1;
                me.voted_for = CanonValue(i);
                me.role = "candidate";
                me.votes = {CanonValue(i)};
                me.pending.clear();
                for (NodeId j = 1; j <= n; ++j) {
                    if (j != i) me.pending.push_back(CanonValue(j));
                }
                out.emplace_back(
                    Action{ActionKind::Internal, "Timeout", i, CanonValue(nullptr)},
                    next.store());
            }

            // RequestVote: send to the next peer in the queue.
            if (nd.role == "candidate" && !nd.pending.empty()) {
                ElectionView next = view;
                NodeView& me = next.node(i);
                NodeId to = me.pending.front().as_int();
                me.pending.erase(me.pending.begin());
                insert_sorted(next.msgs, rv_msg(i, to, me.term));
                CanonValue::Map payload;
                payload.emplace("from", i);
                payload.emplace("term", nd.term);
                payload.emplace("to", to);
                out.emplace_back(
                    Action{ActionKind::Output, "RequestVote", i, CanonValue(std::move(payload))},
                    next.store());
            }

            // VoteResp: flush the oldest queued response.
            if (!nd.outbox.empty()) {
                ElectionView next = view;
                NodeView& me = next.node(i);
                CanonValue resp = me.outbox.front();
                me.outbox.erase(me.outbox.begin());
                insert_sorted(next.msgs, resp);
                out.emplace_back(Action{ActionKind::Output, "VoteResp", i, resp},
                                 next.store());
            }
        }

        // Message delivery: any in-flight message may arrive next. Identical
        // duplicates collapse to one transition.
        const CanonValue* prev = nullptr;
        for (const CanonValue& m : view.msgs) {
            if (prev && *prev == m) continue;
            prev = &m;
            NodeId to = m.at("to").as_int();
            std::int64_t term = m.at("term").as_int();
            const std::string& kind = m.at("kind").as_string();

            if (kind == "rv") {
                // A node takes the next request only once its previous
                // response has been sent (sequential handler task).
                if (!view.node(to).outbox.empty()) continue;
                ElectionView next = view;
                next.remove_msg(m);
                NodeView& me = next.node(to);
                NodeId from = m.at("from").as_int();
                bool granted = false;
                if (term > me.term) {
                    me.term = term;
                    me.role = "follower";
                    me.voted_for = CanonValue(from);
                    me.votes.clear();
                    me.pending.clear();
                    granted = true;
                } else if (term == me.term &&
                           (me.voted_for.is_null() || me.voted_for == CanonValue(from) ||
                            double_vote_bug)) {
                    me.voted_for = CanonValue(from);
                    granted = true;
                }
                me.outbox.push_back(resp_msg(to, from, term, granted));
                out.emplace_back(Action{ActionKind::Input, "HandleRequestVote", to, m},
                                 next.store());
            } else {
                ElectionView next = view;
                next.remove_msg(m);
                NodeView& me = next.node(to);
                if (me.role == "candidate" && term == me.term &&
                    m.at("granted").as_bool()) {
                    CanonValue from = m.at("from");
                    if (std::find(me.votes.begin(), me.votes.end(), from) ==
                        me.votes.end()) {
                        insert_sorted(me.votes, from);
                    }
                }
                out.emplace_back(Action{ActionKind::Input, "HandleVoteResp", to, m},
                                 next.store());
            }
        }

        // BecomeLeader: candidate with a strict majority.
        for (NodeId i = 1; i <= n; ++i) {
            const NodeView& nd = view.node(i);
            if (nd.role == "candidate" &&
                2 * static_cast<std::int64_t>(nd.votes.size()) > n) {
                ElectionView next = view;
                next.node(i).role = "leader";
                out.emplace_back(
                    Action{ActionKind::Internal, "BecomeLeader", i, CanonValue(nullptr)},
                    next.store());
            }
        }

        return out;
    };

    model.invariants.emplace_back(
        "AtMostOneLeaderPerTerm", [n](const State& s) {
            std::set<std::int64_t> leader_terms;
            for (NodeId i = 1; i <= n; ++i) {
                if (s.vars.at(var("role", i)).as_string() == "leader") {
                    std::int64_t t = s.vars.at(var("term", i)).as_int();
                    if (!leader_terms.insert(t).second) return false;
                }
            }
            return true;
        });

    return model;
}

}  // namespace detrace
