#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "detrace/model.hpp"

namespace detrace {

class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class FormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class EmptyGraph : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct TraceGenLimits {
    std::size_t max_depth = 64;
    std::size_t max_traces = 10000;
    bool dedup = true;
};

struct TraceSet {
    std::uint64_t graph_digest = 0;
    std::vector<Trace> traces;
    bool truncated = false;

    friend bool operator==(const TraceSet& a, const TraceSet& b) = default;
};

// Depth-first enumeration from each initial state, children in canonical
// action-encoding order. A trace is emitted at a terminal state, at
// max_depth, or when the next transition would revisit a state already on
// the current path (the closing step is included). Stops after max_traces
// traces with truncated=true.
TraceSet enumerate_traces(const StateGraph& graph, const TraceGenLimits& limits);

// True iff the trace starts at an initial state of the graph and every
// consecutive (state, action, post_state) triple is a graph transition.
bool validate_trace(const Trace& trace, const StateGraph& graph);

// --- graph files (line-oriented canonical records) ---

struct GraphFile {
    StateGraph graph;
    std::string model;
    std::uint64_t digest = 0;  // 63-bit hash of the serialized bytes
};

std::string serialize_graph(const StateGraph& graph, const std::string& model);
std::uint64_t graph_digest(const StateGraph& graph, const std::string& model);

void write_graph(const StateGraph& graph, const std::string& model,
                 const std::string& path);
GraphFile read_graph(const std::string& path);

// --- trace files ---

std::string serialize_traces(const TraceSet& set);
void write_traces(const TraceSet& set, const std::string& path);
TraceSet read_traces(const std::string& path);

// --- optional single-file relational mirror of the graph records ---

void export_graph_sqlite(const StateGraph& graph, const std::string& model,
                         const std::string& path);
GraphFile import_graph_sqlite(const std::string& path);

}  // namespace detrace
