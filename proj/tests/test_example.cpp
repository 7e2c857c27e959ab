#include <doctest.h>

#include "detrace/checker.hpp"
#include "detrace/election_node.hpp"
#include "detrace/tracegen.hpp"
#include "test_util.hpp"

using namespace detrace;
using testutil::TempDir;

namespace {

// Explore the election model and write graph + traces to disk, returning
// the file paths.
std::pair<std::string, std::string> build_fixture(const TempDir& dir,
                                                  std::int64_t nodes,
                                                  std::size_t max_traces) {
    Model model = election_model(ElectionParams{nodes, 1});
    ExploreResult result = explore(model, {});
    REQUIRE(result.violations.empty());
    std::string graph_path = dir.file("graph.jsonl");
    write_graph(result.graph, model.name, graph_path);

    TraceGenLimits limits;
    limits.max_traces = max_traces;
    TraceSet set = enumerate_traces(result.graph, limits);
    set.graph_digest = graph_digest(result.graph, model.name);
    std::string trace_path = dir.file("traces.jsonl");
    write_traces(set, trace_path);
    return {graph_path, trace_path};
}

}  // namespace

TEST_CASE("node transition rules mirror the model") {
    ElectionNode node(2, 3);
    CHECK(node.role() == ElectionNode::Role::Follower);

    // Vote granted for an equal-term first request.
    node.start_candidacy();
    CHECK(node.term() == 1);
    CHECK(node.voted_for() == 2);
    CHECK(node.role() == ElectionNode::Role::Candidate);
    CHECK(node.next_peer() == 1);

    CanonValue::Map rv;
    rv.emplace("from", 1);
    rv.emplace("kind", "rv");
    rv.emplace("term", 1);
    rv.emplace("to", 2);
    CanonValue resp = node.handle_request_vote(CanonValue(rv));
    CHECK(!resp.at("granted").as_bool());  // already voted for itself

    // A higher-term request forces a step-down and grants.
    CanonValue::Map rv2 = rv;
    rv2.insert_or_assign("term", CanonValue(2));
    CanonValue resp2 = node.handle_request_vote(CanonValue(std::move(rv2)));
    CHECK(resp2.at("granted").as_bool());
    CHECK(node.term() == 2);
    CHECK(node.role() == ElectionNode::Role::Follower);
    CHECK(!node.next_peer().has_value());  // pending cleared by step-down
}

TEST_CASE("double-vote bug grants conflicting votes") {
    ElectionNode buggy(3, 3, true);
    CanonValue::Map rv;
    rv.emplace("from", 1);
    rv.emplace("kind", "rv");
    rv.emplace("term", 1);
    rv.emplace("to", 3);
    CHECK(buggy.handle_request_vote(CanonValue(rv)).at("granted").as_bool());
    CanonValue::Map rv2 = rv;
    rv2.insert_or_assign("from", CanonValue(2));
    CHECK(buggy.handle_request_vote(CanonValue(std::move(rv2))).at("granted").as_bool());
}

TEST_CASE("vote counting and promotion") {
    ElectionNode node(1, 3);
    node.start_candidacy();
    CHECK(!node.ready_to_lead());
    CanonValue::Map resp;
    resp.emplace("from", 2);
    resp.emplace("granted", true);
    resp.emplace("kind", "resp");
    resp.emplace("term", 1);
    resp.emplace("to", 1);
    node.handle_vote_resp(CanonValue(resp));
    CHECK(node.ready_to_lead());
    node.become_leader();
    CHECK(node.role() == ElectionNode::Role::Leader);
}

TEST_CASE("every two-node trace replays against the implementation") {
    TempDir dir;
    auto [graph_path, trace_path] = build_fixture(dir, 2, 10000);
    SuiteReport suite = run_suite(graph_path, trace_path, 2);
    CHECK(suite.passed);
    CHECK(suite.traces_run == 212);
    CHECK(suite.first_failed_trace == -1);
}

TEST_CASE("the buggy implementation fails a correct-model trace") {
    TempDir dir;
    auto [graph_path, trace_path] = build_fixture(dir, 2, 10000);
    SuiteOptions options;
    options.inject_bug = true;
    options.step_timeout_ms = 1000;
    SuiteReport suite = run_suite(graph_path, trace_path, 2, options);
    CHECK(!suite.passed);
    CHECK(suite.first_failed_trace >= 0);
    const RunReport& failed =
        suite.reports[static_cast<std::size_t>(suite.first_failed_trace)];
    REQUIRE(failed.reason.has_value());
    CHECK((*failed.reason == "state_mismatch" || *failed.reason == "timeout"));
}

TEST_CASE("digest mismatch between graph and traces is rejected") {
    TempDir dir;
    auto [graph_path, trace_path] = build_fixture(dir, 2, 50);
    TraceSet set = read_traces(trace_path);
    set.graph_digest ^= 1;
    write_traces(set, trace_path);
    CHECK_THROWS_AS(run_suite(graph_path, trace_path, 2), FormatError);
}

TEST_CASE("free-running election elects a leader with zero control traffic") {
    FreeRunResult result = run_free_election(3, 5000);
    REQUIRE(result.leader.has_value());
    CHECK(*result.leader == 1);
    CHECK(result.control_connections == 0);
}
