#include <benchmark/benchmark.h>

#include "detrace/checker.hpp"
#include "detrace/tracegen.hpp"

using namespace detrace;

namespace {

CanonValue sample_value() {
    CanonValue::Map m;
    for (int i = 0; i < 10; ++i) {
        CanonValue::List l;
        for (int j = 0; j < 5; ++j) l.push_back(CanonValue(i * 10 + j));
        m.emplace("key_" + std::to_string(i), std::move(l));
    }
    m.emplace("name", "benchmark");
    m.emplace("flag", true);
    return CanonValue(std::move(m));
}

void BM_CanonEncode(benchmark::State& state) {
    CanonValue v = sample_value();
    for (auto _ : state) benchmark::DoNotOptimize(v.encode());
}
BENCHMARK(BM_CanonEncode);

void BM_CanonDecode(benchmark::State& state) {
    std::string enc = sample_value().encode();
    for (auto _ : state) benchmark::DoNotOptimize(CanonValue::decode(enc));
}
BENCHMARK(BM_CanonDecode);

void BM_StateHash(benchmark::State& state) {
    State s;
    s.vars = sample_value().as_map();
    for (auto _ : state) benchmark::DoNotOptimize(state_hash(s));
}
BENCHMARK(BM_StateHash);

void BM_ExploreElection(benchmark::State& state) {
    ElectionParams params{state.range(0), 1};
    Model model = election_model(params);
    for (auto _ : state) benchmark::DoNotOptimize(explore(model, {}));
}
BENCHMARK(BM_ExploreElection)->Arg(2)->Arg(3)->Unit(benchmark::kMillisecond);

void BM_EnumerateTraces(benchmark::State& state) {
    Model model = election_model(ElectionParams{2, 1});
    StateGraph graph = explore(model, {}).graph;
    for (auto _ : state) benchmark::DoNotOptimize(enumerate_traces(graph, {}));
}
BENCHMARK(BM_EnumerateTraces)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
