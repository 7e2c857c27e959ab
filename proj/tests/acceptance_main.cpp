// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion
// and exits non-zero if any fail. argv[1] must be the path to the CLI
// binary (used by the standalone-player and pipeline-determinism checks).

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <thread>

#include <sys/wait.h>

#include "dag_oracle.hpp"
#include "detrace/checker.hpp"
#include "detrace/election_node.hpp"
#include "detrace/player.hpp"
#include "detrace/tracegen.hpp"
#include "test_util.hpp"

using namespace detrace;
using Clock = std::chrono::steady_clock;

namespace {

std::int64_t ms_since(Clock::time_point start) {
    return std::chrono::duration_cast<std::chrono::milliseconds>(Clock::now() -
                                                                 start)
        .count();
}

bool check(bool ok, const char* what) {
    if (!ok) std::printf("  failed: %s\n", what);
    return ok;
}

// --- 1: canonical encoding round-trip + goldens -------------------------

CanonValue random_value(std::mt19937& rng, int depth) {
    std::uniform_int_distribution<int> pick(0, depth >= 3 ? 3 : 5);
    switch (pick(rng)) {
        case 0: return CanonValue(nullptr);
        case 1: return CanonValue(rng() % 2 == 0);
        case 2: {
            std::uniform_int_distribution<std::int64_t> d(
                std::numeric_limits<std::int64_t>::min(),
                std::numeric_limits<std::int64_t>::max());
            return CanonValue(d(rng));
        }
        case 3: {
            std::string s;
            std::uniform_int_distribution<int> len(0, 16);
            int n = len(rng);
            static const char pool[] = "abcXYZ 019_\"\\\n\t\x01\x1f[]{}:,";
            for (int i = 0; i < n; ++i) s.push_back(pool[rng() % (sizeof(pool) - 1)]);
            return CanonValue(std::move(s));
        }
        case 4: {
            CanonValue::List l;
            std::uniform_int_distribution<int> len(0, 4);
            int n = len(rng);
            for (int i = 0; i < n; ++i) l.push_back(random_value(rng, depth + 1));
            return CanonValue(std::move(l));
        }
        default: {
            CanonValue::Map m;
            std::uniform_int_distribution<int> len(0, 4);
            int n = len(rng);
            for (int i = 0; i < n; ++i) {
                m.insert_or_assign("k" + std::to_string(rng() % 50),
                                   random_value(rng, depth + 1));
            }
            return CanonValue(std::move(m));
        }
    }
}

bool criterion1() {
    bool ok = true;
    std::mt19937 rng(20260823);
    for (int i = 0; i < 1000 && ok; ++i) {
        CanonValue v = random_value(rng, 0);
        std::string enc = v.encode();
        CanonValue back = CanonValue::decode(enc);
        ok = check(back == v && back.encode() == enc, "round-trip case");
    }
    CanonValue::Map m;
    m.emplace("b", 1);
    m.emplace("a", 2);
    ok &= check(CanonValue(std::move(m)).encode() == "{\"a\":2,\"b\":1}",
                "golden sorted map");
    ok &= check(CanonValue(std::string("a\"\\\n\x01")).encode() ==
                    "\"a\\\"\\\\\\n\\u0001\"",
                "golden escapes");
    ok &= check(CanonValue(std::numeric_limits<std::int64_t>::min()).encode() ==
                    "-9223372036854775808",
                "golden int64 min");
    ok &= check(encode_message(ControlRequest(Hello{1, 1})) ==
                    "{\"node\":1,\"proto_version\":1,\"type\":\"hello\"}",
                "golden hello body");
    return ok;
}

// --- 2: DAG enumeration vs brute force ----------------------------------

bool criterion2() {
    auto start = Clock::now();
    std::mt19937 rng(0xACCE55);
    bool ok = true;
    for (int i = 0; i < 100 && ok; ++i) {
        StateGraph g = dagtest::random_dag(rng, 12, 20);
        // Dedup off: the oracle enumerates raw maximal paths, and two
        // edge-free initial states legitimately share the empty sequence.
        TraceGenLimits limits;
        limits.dedup = false;
        TraceSet set = enumerate_traces(g, limits);
        std::vector<Trace> oracle = dagtest::brute_force_maximal_paths(g);
        ok = check(set.traces.size() == oracle.size(), "trace count equals oracle");
        ok &= check(dagtest::sorted_encodings(set.traces) ==
                        dagtest::sorted_encodings(oracle),
                    "trace contents equal oracle");
    }
    ok &= check(ms_since(start) < 10000, "runtime under 10s");
    return ok;
}

// --- 3: reorder enforcement ---------------------------------------------

State xstate(std::int64_t x) {
    State s;
    s.vars.emplace("x", x);
    return s;
}

Trace trace_of(const std::vector<Action>& actions) {
    Trace t;
    t.initial = xstate(0);
    std::int64_t x = 1;
    for (const Action& a : actions) t.steps.push_back({a, xstate(x++)});
    return t;
}

ActionReq req_for(const Action& a) {
    ActionReq r;
    r.kind = a.kind;
    r.name = a.name;
    r.node = a.node;
    r.payload = a.payload;
    return r;
}

PlayerOptions ephemeral(std::int64_t timeout_ms) {
    PlayerOptions o;
    o.listen_addr = "127.0.0.1:0";
    o.step_timeout_ms = timeout_ms;
    return o;
}

bool replay_permutation(const std::vector<Action>& actions,
                        const std::vector<std::size_t>& order) {
    Player player(trace_of(actions), ephemeral(10000));
    player.start();
    std::vector<std::unique_ptr<testutil::TestClient>> clients;
    for (const Action& a : actions) {
        clients.push_back(
            std::make_unique<testutil::TestClient>(player.port(), a.node));
    }
    std::size_t sent = 0;
    for (std::size_t idx : order) {
        clients[idx]->send(req_for(actions[idx]));
        ++sent;
        while (player.received_count() < sent) std::this_thread::yield();
    }
    bool ok = true;
    for (std::size_t i = 0; i < actions.size(); ++i) {
        auto resp = clients[i]->recv();
        const Pass* pass = std::get_if<Pass>(&resp);
        ok &= pass && pass->step_index == static_cast<std::int64_t>(i);
    }
    RunReport report = player.wait();
    return ok && report.pass && report.granted_actions == actions;
}

bool criterion3() {
    auto start = Clock::now();

    // pi2 issued strictly before pi1 must still be granted second.
    std::vector<Action> two = {
        Action{ActionKind::Output, "pi1", 1, CanonValue(1)},
        Action{ActionKind::Output, "pi2", 2, CanonValue(2)},
    };
    bool ok = check(replay_permutation(two, {1, 0}), "two-action reorder");

    std::vector<Action> five;
    for (std::int64_t i = 0; i < 5; ++i) {
        five.push_back(Action{ActionKind::Output, "a" + std::to_string(i), i + 1,
                              CanonValue(i)});
    }
    std::vector<std::size_t> order = {0, 1, 2, 3, 4};
    int count = 0;
    do {
        ok &= check(replay_permutation(five, order), "five-action permutation");
        ++count;
    } while (ok && std::next_permutation(order.begin(), order.end()));
    ok &= check(!ok || count == 120, "all 120 permutations exercised");
    ok &= check(ms_since(start) < 30000, "runtime under 30s");
    return ok;
}

// --- 4: timeout inconsistency via the standalone player -----------------

bool criterion4(const std::string& cli) {
    testutil::TempDir dir;
    Action wanted{ActionKind::Output, "wanted", 1, CanonValue(1)};
    TraceSet set;
    set.traces.push_back(trace_of({wanted}));
    set.graph_digest = 0;
    write_traces(set, dir.file("t.jsonl"));

    std::mt19937 rng(static_cast<unsigned>(::getpid()));
    std::uint16_t port = static_cast<std::uint16_t>(20000 + rng() % 20000);
    const std::int64_t timeout_ms = 1000;
    std::string cmd = cli + " player --traces " + dir.file("t.jsonl") +
                      " --trace-index 0 --listen 127.0.0.1:" +
                      std::to_string(port) + " --timeout-ms " +
                      std::to_string(timeout_ms) + " >/dev/null 2>&1";

    auto start = Clock::now();
    std::FILE* proc = popen(cmd.c_str(), "r");
    if (!check(proc != nullptr, "player process started")) return false;

    // Connect (with retries while the player binds), then issue an action
    // that is not in the trace.
    bool ok = false;
    for (int attempt = 0; attempt < 100; ++attempt) {
        try {
            testutil::TestClient client(port, 1);
            auto resp = client.call(
                req_for(Action{ActionKind::Output, "unwanted", 1, CanonValue(1)}));
            const Fail* fail = std::get_if<Fail>(&resp);
            ok = check(fail != nullptr, "fail response received") &&
                 check(fail->reason == "timeout", "reason is timeout") &&
                 check(fail->expected_action.has_value(),
                       "expected_action populated") &&
                 check(*fail->expected_action == wanted, "expected_action value");
            break;
        } catch (const std::exception&) {
            std::this_thread::sleep_for(std::chrono::milliseconds(20));
        }
    }

    int status = pclose(proc);
    ok &= check(WIFEXITED(status) && WEXITSTATUS(status) == 1, "player exited 1");
    ok &= check(ms_since(start) < timeout_ms + 2000, "exit within timeout + 2s");
    return ok;
}

// --- 5: end-to-end refinement -------------------------------------------

bool criterion5() {
    auto start = Clock::now();
    testutil::TempDir dir;
    bool ok = true;
    std::size_t trace_count = 0;
    {
        // Scoped so the in-memory graph and trace set are released before
        // the replay loads its own copy of the trace file.
        Model model = election_model(ElectionParams{3, 1});
        ExploreResult result = explore(model, {});
        ok = check(result.violations.empty(), "zero invariant violations");
        write_graph(result.graph, model.name, dir.file("g.jsonl"));

        TraceGenLimits limits;  // max_traces = 10000
        TraceSet set = enumerate_traces(result.graph, limits);
        set.graph_digest = graph_digest(result.graph, model.name);
        write_traces(set, dir.file("t.jsonl"));
        trace_count = set.traces.size();
    }

    SuiteOptions options;
    options.step_timeout_ms = 5000;
    options.stop_on_failure = true;
    SuiteReport suite = run_suite(dir.file("g.jsonl"), dir.file("t.jsonl"), 3,
                                  options);
    ok &= check(suite.passed, "all traces replay");
    ok &= check(suite.traces_run == trace_count, "every trace was run");
    ok &= check(ms_since(start) < 300000, "runtime under 5 minutes");
    std::printf("  replayed %zu traces in %lld ms\n", suite.traces_run,
                static_cast<long long>(ms_since(start)));
    return ok;
}

// --- 6: bug detection ----------------------------------------------------

bool criterion6() {
    Model buggy = inject_bug(election_model(ElectionParams{3, 1}));
    ExploreResult r = explore(buggy, {});
    bool violation_found = false;
    for (const Violation& v : r.violations) {
        violation_found |= v.invariant_name == "AtMostOneLeaderPerTerm";
    }
    bool ok = check(violation_found, "buggy model violates AtMostOneLeaderPerTerm");

    testutil::TempDir dir;
    {
        Model model = election_model(ElectionParams{3, 1});
        ExploreResult correct = explore(model, {});
        write_graph(correct.graph, model.name, dir.file("g.jsonl"));
        TraceSet set = enumerate_traces(correct.graph, {});
        set.graph_digest = graph_digest(correct.graph, model.name);
        write_traces(set, dir.file("t.jsonl"));
    }

    SuiteOptions options;
    options.inject_bug = true;
    options.step_timeout_ms = 1500;
    options.stop_on_failure = true;
    SuiteReport suite = run_suite(dir.file("g.jsonl"), dir.file("t.jsonl"), 3,
                                  options);
    ok &= check(!suite.passed, "buggy implementation fails a trace");
    if (!suite.passed) {
        const RunReport& failed =
            suite.reports[static_cast<std::size_t>(suite.first_failed_trace)];
        ok &= check(failed.reason == "state_mismatch" || failed.reason == "timeout",
                    "failure is state_mismatch or timeout");
    }
    return ok;
}

// --- 7: disabled-anchor transparency ------------------------------------

bool criterion7() {
    setenv("DETRACE_ENABLED", "0", 1);
    bool ok = check(!AnchorConfig::from_env().enabled, "env disables anchors");
    unsetenv("DETRACE_ENABLED");

    FreeRunResult result = run_free_election(3, 5000);
    ok &= check(result.leader.has_value(), "a node became leader");
    ok &= check(result.control_connections == 0, "zero control connections");
    return ok;
}

// --- 8: pipeline determinism --------------------------------------------

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

bool criterion8(const std::string& cli) {
    testutil::TempDir a, b;
    bool ok = true;
    for (const testutil::TempDir* dir : {&a, &b}) {
        std::string cmd = cli + " check-model --model election --nodes 2" +
                          " --max-term 1 --out " + dir->file("g.jsonl") +
                          " >/dev/null 2>&1 && " + cli + " tracegen --graph " +
                          dir->file("g.jsonl") + " --out " + dir->file("t.jsonl") +
                          " >/dev/null 2>&1";
        ok &= check(std::system(cmd.c_str()) == 0, "pipeline run succeeded");
    }
    ok &= check(!slurp(a.file("g.jsonl")).empty(), "graph file non-empty");
    ok &= check(slurp(a.file("g.jsonl")) == slurp(b.file("g.jsonl")),
                "graph files byte-identical");
    ok &= check(slurp(a.file("t.jsonl")) == slurp(b.file("t.jsonl")),
                "trace files byte-identical");
    return ok;
}

}  // namespace

int main(int argc, char** argv) {
    if (argc < 2) {
        std::fprintf(stderr, "usage: %s <path-to-cli-binary>\n", argv[0]);
        return 2;
    }
    std::string cli = argv[1];

    struct Criterion {
        const char* name;
        std::function<bool()> run;
    };
    const Criterion criteria[] = {
        {"1 canonical encoding round-trip and goldens", criterion1},
        {"2 trace enumeration matches brute-force oracle", criterion2},
        {"3 reorder enforcement across arrival permutations", criterion3},
        {"4 timeout failure with expected action", [&] { return criterion4(cli); }},
        {"5 end-to-end refinement of the election model", criterion5},
        {"6 double-vote bug detection", criterion6},
        {"7 disabled-anchor transparency", criterion7},
        {"8 pipeline determinism", [&] { return criterion8(cli); }},
    };

    int failures = 0;
    for (const Criterion& c : criteria) {
        bool ok = false;
        try {
            ok = c.run();
        } catch (const std::exception& e) {
            std::printf("  exception: %s\n", e.what());
        }
        std::printf("criterion %s: %s\n", c.name, ok ? "PASS" : "FAIL");
        if (!ok) ++failures;
    }
    return failures == 0 ? 0 : 1;
}
