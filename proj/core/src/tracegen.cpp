#include "detrace/tracegen.hpp"

#include <algorithm>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>

namespace detrace {

namespace {

constexpr std::uint64_t kDigestMask = 0x7fffffffffffffffULL;

CanonValue state_record(StateId id, bool initial, const State& s) {
    CanonValue::Map m;
    m.emplace("id", static_cast<std::int64_t>(id));
    m.emplace("initial", initial);
    m.emplace("type", "state");
    m.emplace("vars", CanonValue(s.vars));
    return CanonValue(std::move(m));
}

CanonValue transition_record(const Transition& t) {
    CanonValue::Map m;
    m.emplace("action", t.action.to_value());
    m.emplace("from", static_cast<std::int64_t>(t.from));
    m.emplace("to", static_cast<std::int64_t>(t.to));
    m.emplace("type", "transition");
    return CanonValue(std::move(m));
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void write_file(const std::string& path, const std::string& bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path);
    out << bytes;
    if (!out) throw IoError("write failed for " + path);
}

std::vector<std::string> split_lines(const std::string& bytes) {
    std::vector<std::string> lines;
    std::size_t pos = 0;
    while (pos < bytes.size()) {
        std::size_t nl = bytes.find('\n', pos);
        if (nl == std::string::npos) nl = bytes.size();
        if (nl > pos) lines.push_back(bytes.substr(pos, nl - pos));
        pos = nl + 1;
    }
    return lines;
}

CanonValue trace_record(std::int64_t index, const Trace& t) {
    CanonValue::Map m;
    m.emplace("index", index);
    m.emplace("initial", CanonValue(t.initial.vars));
    CanonValue::List steps;
    for (const TraceStep& step : t.steps) {
        CanonValue::Map sm;
        sm.emplace("action", step.action.to_value());
        sm.emplace("post", CanonValue(step.post.vars));
        steps.emplace_back(std::move(sm));
    }
    m.emplace("steps", std::move(steps));
    m.emplace("type", "trace");
    return CanonValue(std::move(m));
}

Trace trace_from_record(const CanonValue& rec) {
    Trace t;
    t.initial.vars = rec.at("initial").as_map();
    for (const CanonValue& sv : rec.at("steps").as_list()) {
        TraceStep step;
        step.action = Action::from_value(sv.at("action"));
        step.post.vars = sv.at("post").as_map();
        t.steps.push_back(std::move(step));
    }
    return t;
}

}  // namespace

TraceSet enumerate_traces(const StateGraph& graph, const TraceGenLimits& limits) {
    if (limits.max_depth < 1 || limits.max_traces < 1) {
        throw FormatError("trace limits must be >= 1");
    }
    if (graph.initial.empty()) throw EmptyGraph("graph has no initial states");

    // Outgoing edges per state, sorted by canonical action encoding.
    std::map<StateId, std::vector<const Transition*>> out_edges;
    for (const Transition& t : graph.transitions) out_edges[t.from].push_back(&t);
    for (auto& [id, edges] : out_edges) {
        std::sort(edges.begin(), edges.end(),
                  [](const Transition* a, const Transition* b) {
                      std::string ea = a->action.encode();
                      std::string eb = b->action.encode();
                      if (ea != eb) return ea < eb;
                      return a->to < b->to;
                  });
    }

    TraceSet result;
    std::set<std::string> seen_action_seqs;
    std::vector<TraceStep> path;
    std::set<StateId> on_path;
    bool stop = false;

    auto emit = [&](const State& initial) {
        if (stop) return;
        if (limits.dedup) {
            std::string key;
            for (const TraceStep& s : path) key += s.action.encode();
            if (!seen_action_seqs.insert(std::move(key)).second) return;
        }
        if (result.traces.size() >= limits.max_traces) {
            result.truncated = true;
            stop = true;
            return;
        }
        result.traces.push_back(Trace{initial, path});
    };

    std::function<void(StateId, const State&)> dfs = [&](StateId id,
                                                         const State& initial) {
        if (stop) return;
        auto it = out_edges.find(id);
        if (it == out_edges.end() || path.size() >= limits.max_depth) {
            emit(initial);
            return;
        }
        for (const Transition* t : it->second) {
            if (stop) return;
            path.push_back(TraceStep{t->action, graph.states.at(t->to)});
            if (on_path.contains(t->to)) {
                emit(initial);  // simple-path cycle cut, closing step included
            } else {
                on_path.insert(t->to);
                dfs(t->to, initial);
                on_path.erase(t->to);
            }
            path.pop_back();
        }
    };

    for (StateId id : graph.initial) {
        const State& initial = graph.states.at(id);
        on_path = {id};
        path.clear();
        dfs(id, initial);
    }
    return result;
}

bool validate_trace(const Trace& trace, const StateGraph& graph) {
    StateId cur = state_hash(trace.initial);
    if (!graph.initial.contains(cur)) return false;
    auto stored = graph.states.find(cur);
    if (stored == graph.states.end() || !(stored->second == trace.initial)) return false;

    std::set<std::tuple<StateId, std::string, StateId>> edges;
    for (const Transition& t : graph.transitions) {
        edges.emplace(t.from, t.action.encode(), t.to);
    }
    for (const TraceStep& step : trace.steps) {
        StateId to = state_hash(step.post);
        auto it = graph.states.find(to);
        if (it == graph.states.end() || !(it->second == step.post)) return false;
        if (!edges.contains({cur, step.action.encode(), to})) return false;
        cur = to;
    }
    return true;
}

std::string serialize_graph(const StateGraph& graph, const std::string& model) {
    CanonValue::Map header;
    header.emplace("format", "detrace-graph");
    header.emplace("model", model);
    header.emplace("version", std::int64_t{1});
    std::string out = CanonValue(std::move(header)).encode() + "\n";

    for (const auto& [id, state] : graph.states) {
        out += state_record(id, graph.initial.contains(id), state).encode() + "\n";
    }
    std::vector<const Transition*> ts;
    ts.reserve(graph.transitions.size());
    for (const Transition& t : graph.transitions) ts.push_back(&t);
    std::sort(ts.begin(), ts.end(), [](const Transition* a, const Transition* b) {
        if (a->from != b->from) return a->from < b->from;
        std::string ea = a->action.encode();
        std::string eb = b->action.encode();
        if (ea != eb) return ea < eb;
        return a->to < b->to;
    });
    for (const Transition* t : ts) out += transition_record(*t).encode() + "\n";
    return out;
}

std::uint64_t graph_digest(const StateGraph& graph, const std::string& model) {
    return fnv1a64(serialize_graph(graph, model)) & kDigestMask;
}

void write_graph(const StateGraph& graph, const std::string& model,
                 const std::string& path) {
    write_file(path, serialize_graph(graph, model));
}

GraphFile read_graph(const std::string& path) {
    std::string bytes = read_file(path);
    std::vector<std::string> lines = split_lines(bytes);
    if (lines.empty()) throw FormatError("empty graph file");

    CanonValue header;
    try {
        header = CanonValue::decode(lines[0]);
    } catch (const ParseError& e) {
        throw FormatError(std::string("bad graph header: ") + e.what());
    }
    if (!header.has("format") || header.at("format").as_string() != "detrace-graph") {
        throw FormatError("not a detrace graph file");
    }
    if (header.at("version").as_int() != 1) {
        throw FormatError("unsupported graph format version");
    }

    GraphFile gf;
    gf.model = header.at("model").as_string();
    gf.digest = fnv1a64(bytes) & kDigestMask;
    try {
        for (std::size_t i = 1; i < lines.size(); ++i) {
            CanonValue rec = CanonValue::decode(lines[i]);
            const std::string& type = rec.at("type").as_string();
            if (type == "state") {
                StateId id = static_cast<StateId>(rec.at("id").as_int());
                State s;
                s.vars = rec.at("vars").as_map();
                gf.graph.states.emplace(id, std::move(s));
                if (rec.at("initial").as_bool()) gf.graph.initial.insert(id);
            } else if (type == "transition") {
                Transition t;
                t.from = static_cast<StateId>(rec.at("from").as_int());
                t.to = static_cast<StateId>(rec.at("to").as_int());
                t.action = Action::from_value(rec.at("action"));
                gf.graph.transitions.push_back(std::move(t));
            } else {
                throw FormatError("unknown record type \"" + type + "\"");
            }
        }
        gf.graph.validate();
    } catch (const ParseError& e) {
        throw FormatError(std::string("bad graph record: ") + e.what());
    }
    return gf;
}

std::string serialize_traces(const TraceSet& set) {
    CanonValue::Map header;
    header.emplace("format", "detrace-traces");
    header.emplace("graph_digest", static_cast<std::int64_t>(set.graph_digest));
    header.emplace("truncated", set.truncated);
    header.emplace("version", std::int64_t{1});
    std::string out = CanonValue(std::move(header)).encode() + "\n";
    for (std::size_t i = 0; i < set.traces.size(); ++i) {
        out += trace_record(static_cast<std::int64_t>(i), set.traces[i]).encode() + "\n";
    }
    return out;
}

void write_traces(const TraceSet& set, const std::string& path) {
    write_file(path, serialize_traces(set));
}

TraceSet read_traces(const std::string& path) {
    std::string bytes = read_file(path);
    std::vector<std::string> lines = split_lines(bytes);
    if (lines.empty()) throw FormatError("empty trace file");

    TraceSet set;
    try {
        CanonValue header = CanonValue::decode(lines[0]);
        if (!header.has("format") ||
            header.at("format").as_string() != "detrace-traces") {
            throw FormatError("not a detrace trace file");
        }
        if (header.at("version").as_int() != 1) {
            throw FormatError("unsupported trace format version");
        }
        set.graph_digest = static_cast<std::uint64_t>(header.at("graph_digest").as_int());
        set.truncated = header.at("truncated").as_bool();
        for (std::size_t i = 1; i < lines.size(); ++i) {
            CanonValue rec = CanonValue::decode(lines[i]);
            if (rec.at("type").as_string() != "trace") {
                throw FormatError("unknown record type in trace file");
            }
            set.traces.push_back(trace_from_record(rec));
        }
    } catch (const ParseError& e) {
        throw FormatError(std::string("bad trace file: ") + e.what());
    }
    return set;
}

}  // namespace detrace
