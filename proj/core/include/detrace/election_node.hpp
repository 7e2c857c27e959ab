#pragma once

#include <atomic>
#include <condition_variable>
#include <deque>
#include <map>
#include <memory>
#include <optional>
#include <set>

#include "detrace/anchor.hpp"
#include "detrace/player.hpp"

namespace detrace {

// In-memory transport for the free-running (anchors disabled) election.
// The bus imposes no ordering guarantees of its own; under replay the
// delivery order is dictated entirely by anchor grants.
class MessageBus {
public:
    void send(NodeId to, CanonValue msg);
    std::optional<CanonValue> receive(NodeId node, std::int64_t timeout_ms);

private:
    std::mutex mu_;
    std::condition_variable cv_;
    std::map<NodeId, std::deque<CanonValue>> queues_;
};

// Implementation twin of the builtin election model: one node of a
// Raft-style leader election, instrumented with action anchors.
class ElectionNode {
public:
    enum class Role { Follower, Candidate, Leader };

    ElectionNode(NodeId id, std::int64_t node_count, bool double_vote_bug = false);

    NodeId id() const { return id_; }
    Role role() const;
    std::int64_t term() const;
    std::optional<NodeId> voted_for() const;

    // Protocol transitions. Each matches one model action.
    void start_candidacy();                              // Timeout
    std::optional<NodeId> next_peer() const;             // head of the send queue
    void pop_peer();
    CanonValue request_vote_payload(NodeId to) const;    // RequestVote
    CanonValue handle_request_vote(const CanonValue& msg);  // returns the response
    void handle_vote_resp(const CanonValue& msg);        // HandleVoteResp
    bool ready_to_lead() const;                          // candidate with majority
    void become_leader();                                // BecomeLeader

    // Observed-state projections reported through anchors. The full
    // projection (term, voted_for, role) is only safe at points where no
    // concurrent same-node grant can intervene, i.e. internal ends; atomic
    // anchors report the role-free subset.
    State observed_full() const;
    State observed_basic() const;

private:
    NodeId id_;
    std::int64_t node_count_;
    bool double_vote_bug_;

    mutable std::mutex mu_;
    std::int64_t term_ = 0;
    std::optional<NodeId> voted_for_;
    Role role_ = Role::Follower;
    std::set<NodeId> votes_;
    std::deque<NodeId> pending_;
};

// Runs one node until its trace replay finishes (anchors enabled) or the
// stop flag is raised (anchors disabled, real timers and bus delivery).
// candidacy_delay_ms only applies to the free-running mode.
void run_node(ElectionNode& node, AnchorHandle& anchors, MessageBus& bus,
              std::atomic<bool>& stop, std::int64_t candidacy_delay_ms = 0);

struct SuiteOptions {
    bool inject_bug = false;
    std::int64_t step_timeout_ms = 2000;
    bool stop_on_failure = true;
    std::optional<std::size_t> trace_limit;
};

struct SuiteReport {
    std::vector<RunReport> reports;
    bool passed = true;
    std::int64_t first_failed_trace = -1;
    std::size_t traces_run = 0;
};

// Replays every trace in the file against a fresh set of instrumented
// nodes, one player per trace on an ephemeral port. Throws FormatError if
// the trace file's graph digest does not match the graph file.
SuiteReport run_suite(const std::string& graph_file, const std::string& trace_file,
                      std::int64_t node_count, const SuiteOptions& options = {});

struct FreeRunResult {
    std::optional<NodeId> leader;
    std::size_t control_connections = 0;
};

// Free-running election with anchors disabled and no player: node 1 times
// out first and should win. Used to demonstrate disabled-anchor
// transparency.
FreeRunResult run_free_election(std::int64_t node_count, std::int64_t budget_ms);

}  // namespace detrace
