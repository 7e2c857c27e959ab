#include <cstdio>
#include <string>

#include <CLI11.hpp>

#include "detrace/checker.hpp"
#include "detrace/election_node.hpp"
#include "detrace/player.hpp"
#include "detrace/tracegen.hpp"

namespace {

using namespace detrace;

void print_violation(const Violation& v) {
    std::printf("violation: %s\n", v.invariant_name.c_str());
    std::printf("counterexample (%zu steps):\n", v.path.size());
    for (const auto& [action, state] : v.path) {
        std::printf("  %s -> %s\n", action.encode().c_str(), state.encode().c_str());
    }
}

int cmd_check_model(const std::string& model_name, std::int64_t nodes,
                    std::int64_t max_term, bool buggy, std::size_t max_states,
                    const std::string& out, const std::string& sqlite_out) {
    CanonValue::Map params;
    params.emplace("node_count", nodes);
    params.emplace("max_term", max_term);
    Model model = builtin_model(model_name, CanonValue(std::move(params)));
    if (buggy) model = inject_bug(model);

    ExploreBounds bounds;
    bounds.max_states = max_states;
    ExploreResult result = explore(model, bounds);

    std::printf("model: %s\n", model.name.c_str());
    std::printf("states: %zu\n", result.graph.states.size());
    std::printf("transitions: %zu\n", result.graph.transitions.size());
    std::printf("truncated: %s\n", result.truncated ? "true" : "false");

    if (!out.empty()) {
        write_graph(result.graph, model.name, out);
        std::printf("graph written to %s\n", out.c_str());
    }
    if (!sqlite_out.empty()) {
        export_graph_sqlite(result.graph, model.name, sqlite_out);
        std::printf("graph database written to %s\n", sqlite_out.c_str());
    }

    if (!result.violations.empty()) {
        std::printf("violations: %zu\n", result.violations.size());
        print_violation(result.violations.front());
        return 1;
    }
    std::printf("violations: 0\n");
    return 0;
}

int cmd_tracegen(const std::string& graph_path, const std::string& graph_db,
                 const std::string& out, std::size_t max_depth,
                 std::size_t max_traces, bool no_dedup) {
    GraphFile gf = graph_db.empty() ? read_graph(graph_path)
                                    : import_graph_sqlite(graph_db);
    TraceGenLimits limits;
    limits.max_depth = max_depth;
    limits.max_traces = max_traces;
    limits.dedup = !no_dedup;
    TraceSet set = enumerate_traces(gf.graph, limits);
    set.graph_digest = gf.digest;
    write_traces(set, out);
    std::printf("traces: %zu\n", set.traces.size());
    std::printf("truncated: %s\n", set.truncated ? "true" : "false");
    return 0;
}

int cmd_player(const PlayerConfig& config) {
    RunReport report = serve(config);
    std::printf("%s\n", report.encode().c_str());
    return report.pass ? 0 : 1;
}

int cmd_run_example(std::string graph_path, std::string trace_path,
                    std::int64_t nodes, std::int64_t max_term, bool fresh,
                    bool bug, std::int64_t timeout_ms,
                    const std::string& report_path) {
    if (fresh) {
        CanonValue::Map params;
        params.emplace("node_count", nodes);
        params.emplace("max_term", max_term);
        Model model = builtin_model("election", CanonValue(std::move(params)));
        ExploreResult result = explore(model, {});
        if (!result.violations.empty()) {
            std::fprintf(stderr, "model has invariant violations; not generating traces\n");
            return 2;
        }
        write_graph(result.graph, model.name, graph_path);
        TraceSet set = enumerate_traces(result.graph, {});
        set.graph_digest = graph_digest(result.graph, model.name);
        write_traces(set, trace_path);
        std::printf("generated %zu traces\n", set.traces.size());
    }

    SuiteOptions options;
    options.inject_bug = bug;
    options.step_timeout_ms = timeout_ms;
    SuiteReport suite = run_suite(graph_path, trace_path, nodes, options);

    for (const RunReport& r : suite.reports) {
        if (r.pass) {
            std::printf("trace %lld: pass\n", static_cast<long long>(r.trace_index));
        } else {
            std::printf("trace %lld: FAIL (%s at step %lld: %s)\n",
                        static_cast<long long>(r.trace_index),
                        r.reason ? r.reason->c_str() : "unknown",
                        static_cast<long long>(r.failed_step.value_or(-1)),
                        r.detail.c_str());
        }
    }
    std::size_t pass_count = 0;
    for (const RunReport& r : suite.reports) {
        if (r.pass) ++pass_count;
    }
    std::printf("%zu/%zu traces passed\n", pass_count, suite.traces_run);
    std::printf("result: %s\n", suite.passed ? "pass" : "fail");

    if (!report_path.empty()) {
        CanonValue::List reports;
        for (const RunReport& r : suite.reports) reports.push_back(r.to_value());
        CanonValue::Map m;
        m.emplace("passed", suite.passed);
        m.emplace("traces_run", static_cast<std::int64_t>(suite.traces_run));
        m.emplace("first_failed_trace", suite.first_failed_trace);
        m.emplace("reports", std::move(reports));
        std::FILE* f = std::fopen(report_path.c_str(), "wb");
        if (!f) throw IoError("cannot write report file: " + report_path);
        std::string body = CanonValue(std::move(m)).encode();
        std::fwrite(body.data(), 1, body.size(), f);
        std::fputc('\n', f);
        std::fclose(f);
    }
    return suite.passed ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"detrace: model checking, trace generation, and deterministic replay"};
    app.require_subcommand(1);

    // check-model
    std::string cm_model = "election";
    std::int64_t cm_nodes = 3, cm_max_term = 1;
    bool cm_buggy = false;
    std::size_t cm_max_states = 100000;
    std::string cm_out, cm_sqlite_out;
    auto* check = app.add_subcommand("check-model", "explore a builtin model and report invariant violations");
    check->add_option("--model", cm_model, "builtin model name")->capture_default_str();
    check->add_option("--nodes", cm_nodes, "node count")->capture_default_str();
    check->add_option("--max-term", cm_max_term, "maximum election term")->capture_default_str();
    check->add_flag("--buggy", cm_buggy, "use the double-vote bug variant");
    check->add_option("--max-states", cm_max_states, "state budget")->capture_default_str();
    check->add_option("--out", cm_out, "graph file to write");
    check->add_option("--sqlite-out", cm_sqlite_out, "graph database to write");

    // tracegen
    std::string tg_graph, tg_graph_db, tg_out;
    std::size_t tg_max_depth = 64, tg_max_traces = 10000;
    bool tg_no_dedup = false;
    auto* tracegen = app.add_subcommand("tracegen", "enumerate traces from a state graph");
    auto* tg_g = tracegen->add_option("--graph", tg_graph, "graph file to read");
    tracegen->add_option("--graph-db", tg_graph_db, "graph database to read")->excludes(tg_g);
    tracegen->add_option("--out", tg_out, "trace file to write")->required();
    tracegen->add_option("--max-depth", tg_max_depth, "maximum trace length")->capture_default_str();
    tracegen->add_option("--max-traces", tg_max_traces, "trace budget")->capture_default_str();
    tracegen->add_flag("--no-dedup", tg_no_dedup, "keep duplicate action sequences");

    // player
    PlayerConfig pc;
    std::string pl_report;
    auto* player = app.add_subcommand("player", "replay one trace against connecting clients");
    player->add_option("--traces", pc.trace_file, "trace file")->required();
    player->add_option("--trace-index", pc.trace_index, "trace to replay")->capture_default_str();
    player->add_option("--listen", pc.listen_addr, "host:port to listen on")->capture_default_str();
    player->add_option("--timeout-ms", pc.step_timeout_ms, "per-step stall budget")->capture_default_str();
    player->add_option("--report", pl_report, "report file to write");

    // run-example
    std::string re_graph, re_traces, re_report;
    std::int64_t re_nodes = 3, re_max_term = 1, re_timeout = 2000;
    bool re_fresh = false, re_bug = false;
    auto* run = app.add_subcommand("run-example", "replay a trace set against the instrumented election nodes");
    run->add_option("--graph", re_graph, "graph file")->required();
    run->add_option("--traces", re_traces, "trace file")->required();
    run->add_option("--nodes", re_nodes, "node count")->capture_default_str();
    run->add_option("--max-term", re_max_term, "maximum election term (with --fresh)")->capture_default_str();
    run->add_flag("--fresh", re_fresh, "regenerate the graph and trace files first");
    run->add_flag("--inject-bug", re_bug, "run the double-vote buggy implementation");
    run->add_option("--timeout-ms", re_timeout, "per-step stall budget")->capture_default_str();
    run->add_option("--report", re_report, "report file to write");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (check->parsed()) {
            return cmd_check_model(cm_model, cm_nodes, cm_max_term, cm_buggy,
                                   cm_max_states, cm_out, cm_sqlite_out);
        }
        if (tracegen->parsed()) {
            if (tg_graph.empty() && tg_graph_db.empty()) {
                std::fprintf(stderr, "tracegen: --graph or --graph-db is required\n");
                return 2;
            }
            return cmd_tracegen(tg_graph, tg_graph_db, tg_out, tg_max_depth,
                                tg_max_traces, tg_no_dedup);
        }
        if (player->parsed()) {
            if (!pl_report.empty()) pc.report_path = pl_report;
            return cmd_player(pc);
        }
        if (run->parsed()) {
            return cmd_run_example(re_graph, re_traces, re_nodes, re_max_term,
                                   re_fresh, re_bug, re_timeout, re_report);
        }
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
    return 2;
}
