#include "detrace/election_node.hpp"

#include <algorithm>
#include <chrono>
#include <thread>

namespace detrace {

namespace {

std::string var(const char* base, NodeId i) {
    return std::string(base) + "_" + std::to_string(i);
}

std::string role_name(ElectionNode::Role r) {
    switch (r) {
        case ElectionNode::Role::Follower: return "follower";
        case ElectionNode::Role::Candidate: return "candidate";
        case ElectionNode::Role::Leader: return "leader";
    }
    return "follower";
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

CanonValue rv_msg(NodeId from, NodeId to, std::int64_t term) {
    CanonValue::Map m;
    m.emplace("from", from);
    m.emplace("kind", "rv");
    m.emplace("term", term);
    m.emplace("to", to);
    return CanonValue(std::move(m));
}

}  // namespace

void MessageBus::send(NodeId to, CanonValue msg) {
    {
        std::lock_guard lock(mu_);
        queues_[to].push_back(std::move(msg));
    }
    cv_.notify_all();
}

std::optional<CanonValue> MessageBus::receive(NodeId node, std::int64_t timeout_ms) {
    std::unique_lock lock(mu_);
    cv_.wait_for(lock, std::chrono::milliseconds(timeout_ms),
                 [&] { return !queues_[node].empty(); });
    auto& q = queues_[node];
    if (q.empty()) return std::nullopt;
    CanonValue m = std::move(q.front());
    q.pop_front();
    return m;
}

ElectionNode::ElectionNode(NodeId id, std::int64_t node_count, bool double_vote_bug)
    : id_(id), node_count_(node_count), double_vote_bug_(double_vote_bug) {}

ElectionNode::Role ElectionNode::role() const {
    std::lock_guard lock(mu_);
    return role_;
}

std::int64_t ElectionNode::term() const {
    std::lock_guard lock(mu_);
    return term_;
}

std::optional<NodeId> ElectionNode::voted_for() const {
    std::lock_guard lock(mu_);
    return voted_for_;
}

void ElectionNode::start_candidacy() {
    std::lock_guard lock(mu_);
    term_ += 1;
    voted_for_ = id_;
    role_ = Role::Candidate;
    votes_ = {id_};
    pending_.clear();
    for (NodeId j = 1; j <= node_count_; ++j) {
        if (j != id_) pending_.push_back(j);
    }
}

std::optional<NodeId> ElectionNode::next_peer() const {
    std::lock_guard lock(mu_);
    if (pending_.empty()) return std::nullopt;
    return pending_.front();
}

void ElectionNode::pop_peer() {
    std::lock_guard lock(mu_);
    if (!pending_.empty()) pending_.pop_front();
}

CanonValue ElectionNode::request_vote_payload(NodeId to) const {
    std::lock_guard lock(mu_);
    CanonValue::Map m;
    m.emplace("from", id_);
    m.emplace("term", term_);
    m.emplace("to", to);
    return CanonValue(std::move(m));
}

CanonValue ElectionNode::handle_request_vote(const CanonValue& msg) {
    NodeId from = msg.at("from").as_int();
    std::int64_t term = msg.at("term").as_int();
    std::lock_guard lock(mu_);
    bool granted = false;
    if (term > term_) {
        term_ = term;
        role_ = Role::Follower;
        voted_for_ = from;
        votes_.clear();
        pending_.clear();
        granted = true;
    } else if (term == term_ &&
               (!voted_for_ || *voted_for_ == from || double_vote_bug_)) {
        voted_for_ = from;
        granted = true;
    }
    return resp_msg(id_, from, term, granted);
}

void ElectionNode::handle_vote_resp(const CanonValue& msg) {
    std::int64_t term = msg.at("term").as_int();
    bool granted = msg.at("granted").as_bool();
    NodeId from = msg.at("from").as_int();
    std::lock_guard lock(mu_);
    if (role_ == Role::Candidate && term == term_ && granted) {
        votes_.insert(from);
    }
}

bool ElectionNode::ready_to_lead() const {
    std::lock_guard lock(mu_);
    return role_ == Role::Candidate &&
           2 * static_cast<std::int64_t>(votes_.size()) > node_count_;
}

void ElectionNode::become_leader() {
    std::lock_guard lock(mu_);
    role_ = Role::Leader;
}

State ElectionNode::observed_full() const {
    std::lock_guard lock(mu_);
    State s;
    s.vars.emplace(var("term", id_), term_);
    s.vars.emplace(var("voted_for", id_),
                   voted_for_ ? CanonValue(*voted_for_) : CanonValue(nullptr));
    s.vars.emplace(var("role", id_), role_name(role_));
    return s;
}

State ElectionNode::observed_basic() const {
    std::lock_guard lock(mu_);
    State s;
    s.vars.emplace(var("term", id_), term_);
    s.vars.emplace(var("voted_for", id_),
                   voted_for_ ? CanonValue(*voted_for_) : CanonValue(nullptr));
    return s;
}

namespace {

// Swallow replay-control exceptions: each means "this task is finished",
// whether the run passed, failed, or the player went away.
template <typename Fn>
void replay_task(Fn&& fn) {
    try {
        fn();
    } catch (const ReplayDone&) {
    } catch (const ReplayFail&) {
    } catch (const ConnectError&) {
    } catch (const HandshakeError&) {
    } catch (const ConnectionLost&) {
    }
}

void run_node_replay(ElectionNode& node, AnchorHandle& anchors) {
    std::vector<std::thread> tasks;

    // Candidacy: time out, then send RequestVote to each peer in order.
    tasks.emplace_back([&] {
        replay_task([&] {
            for (;;) {
                anchors.begin_internal("Timeout");
                node.start_candidacy();
                anchors.end_internal("Timeout", node.observed_full());
                while (auto to = node.next_peer()) {
                    anchors.output("RequestVote", node.request_vote_payload(*to),
                                   node.observed_basic());
                    node.pop_peer();
                }
            }
        });
    });

    // Vote-request handler: one request at a time, reply before the next.
    tasks.emplace_back([&] {
        replay_task([&] {
            for (;;) {
                CanonValue msg = anchors.input("HandleRequestVote", std::nullopt);
                CanonValue resp = node.handle_request_vote(msg);
                anchors.output("VoteResp", resp, node.observed_basic());
            }
        });
    });

    // Vote-response handler.
    tasks.emplace_back([&] {
        replay_task([&] {
            for (;;) {
                CanonValue msg = anchors.input("HandleVoteResp", std::nullopt);
                node.handle_vote_resp(msg);
            }
        });
    });

    // Promotion.
    tasks.emplace_back([&] {
        replay_task([&] {
            for (;;) {
                anchors.begin_internal("BecomeLeader");
                node.become_leader();
                anchors.end_internal("BecomeLeader", node.observed_full());
            }
        });
    });

    for (auto& t : tasks) t.join();
}

void run_node_free(ElectionNode& node, AnchorHandle& anchors, MessageBus& bus,
                   std::atomic<bool>& stop, std::int64_t candidacy_delay_ms) {
    std::thread timer;
    if (candidacy_delay_ms >= 0) {
        timer = std::thread([&, candidacy_delay_ms] {
            auto deadline = std::chrono::steady_clock::now() +
                            std::chrono::milliseconds(candidacy_delay_ms);
            while (!stop.load() && std::chrono::steady_clock::now() < deadline) {
                std::this_thread::sleep_for(std::chrono::milliseconds(1));
            }
            if (stop.load()) return;
            anchors.begin_internal("Timeout");
            node.start_candidacy();
            anchors.end_internal("Timeout", node.observed_full());
            while (auto to = node.next_peer()) {
                CanonValue payload = node.request_vote_payload(*to);
                anchors.output("RequestVote", payload, node.observed_basic());
                bus.send(*to, rv_msg(node.id(), *to, payload.at("term").as_int()));
                node.pop_peer();
            }
        });
    }

    while (!stop.load()) {
        std::optional<CanonValue> msg = bus.receive(node.id(), 20);
        if (!msg) continue;
        if (msg->at("kind").as_string() == "rv") {
            CanonValue in = anchors.input("HandleRequestVote", *msg);
            CanonValue resp = node.handle_request_vote(in);
            anchors.output("VoteResp", resp, node.observed_basic());
            bus.send(resp.at("to").as_int(), resp);
        } else {
            CanonValue in = anchors.input("HandleVoteResp", *msg);
            node.handle_vote_resp(in);
            if (node.ready_to_lead()) {
                anchors.begin_internal("BecomeLeader");
                node.become_leader();
                anchors.end_internal("BecomeLeader", node.observed_full());
            }
        }
    }

    if (timer.joinable()) timer.join();
}

}  // namespace

void run_node(ElectionNode& node, AnchorHandle& anchors, MessageBus& bus,
              std::atomic<bool>& stop, std::int64_t candidacy_delay_ms) {
    if (anchors.enabled()) {
        run_node_replay(node, anchors);
    } else {
        run_node_free(node, anchors, bus, stop, candidacy_delay_ms);
    }
}

SuiteReport run_suite(const std::string& graph_file, const std::string& trace_file,
                      std::int64_t node_count, const SuiteOptions& options) {
    GraphFile gf = read_graph(graph_file);
    TraceSet ts = read_traces(trace_file);
    if (ts.graph_digest != gf.digest) {
        throw FormatError("trace file digest does not match the graph file");
    }

    SuiteReport suite;
    std::size_t count = ts.traces.size();
    if (options.trace_limit) count = std::min(count, *options.trace_limit);

    for (std::size_t i = 0; i < count; ++i) {
        PlayerOptions popts;
        popts.listen_addr = "127.0.0.1:0";
        popts.step_timeout_ms = options.step_timeout_ms;
        Player player(ts.traces[i], popts, static_cast<std::int64_t>(i));
        player.start();
        std::string addr = "127.0.0.1:" + std::to_string(player.port());

        MessageBus bus;
        std::atomic<bool> stop{false};
        std::vector<std::thread> threads;
        for (NodeId id = 1; id <= node_count; ++id) {
            threads.emplace_back([&, id, addr] {
                ElectionNode node(id, node_count, options.inject_bug);
                AnchorConfig cfg;
                cfg.enabled = true;
                cfg.player_addr = addr;
                cfg.node = id;
                AnchorHandle anchors(cfg);
                run_node(node, anchors, bus, stop);
            });
        }

        RunReport report = player.wait();
        stop.store(true);
        for (auto& t : threads) t.join();

        suite.traces_run += 1;
        if (!report.pass && suite.passed) {
            suite.passed = false;
            suite.first_failed_trace = static_cast<std::int64_t>(i);
        }
        bool failed = !report.pass;
        if (!failed) {
            // Keep per-action logs only for failures; a full suite holds
            // thousands of reports.
            report.received_actions.clear();
            report.granted_actions.clear();
        }
        suite.reports.push_back(std::move(report));
        if (failed && options.stop_on_failure) break;
    }
    return suite;
}

FreeRunResult run_free_election(std::int64_t node_count, std::int64_t budget_ms) {
    MessageBus bus;
    std::atomic<bool> stop{false};
    std::vector<std::unique_ptr<ElectionNode>> nodes;
    std::vector<std::unique_ptr<AnchorHandle>> anchors;
    for (NodeId id = 1; id <= node_count; ++id) {
        nodes.push_back(std::make_unique<ElectionNode>(id, node_count));
        AnchorConfig cfg;
        cfg.enabled = false;
        cfg.node = id;
        anchors.push_back(std::make_unique<AnchorHandle>(cfg));
    }

    std::vector<std::thread> threads;
    for (NodeId id = 1; id <= node_count; ++id) {
        auto idx = static_cast<std::size_t>(id - 1);
        // Node 1's election timer fires first; the rest never time out.
        std::int64_t delay = (id == 1) ? 20 : -1;
        threads.emplace_back([&, idx, delay] {
            run_node(*nodes[idx], *anchors[idx], bus, stop, delay);
        });
    }

    FreeRunResult result;
    auto deadline = std::chrono::steady_clock::now() +
                    std::chrono::milliseconds(budget_ms);
    while (std::chrono::steady_clock::now() < deadline) {
        for (auto& n : nodes) {
            if (n->role() == ElectionNode::Role::Leader) result.leader = n->id();
        }
        if (result.leader) break;
        std::this_thread::sleep_for(std::chrono::milliseconds(5));
    }
    stop.store(true);
    for (auto& t : threads) t.join();

    for (auto& a : anchors) result.control_connections += a->connections_opened();
    return result;
}

}  // namespace detrace
