#include <benchmark/benchmark.h>

#include <string>

#include "rtlforge/bench.hpp"
#include "rtlforge/distiller.hpp"
#include "rtlforge/gateway.hpp"

namespace {

using namespace rtlforge;

void BM_PassAtK(benchmark::State& state) {
    const long n = state.range(0);
    for (auto _ : state) benchmark::DoNotOptimize(pass_at_k(n, n / 3, n / 2));
}
BENCHMARK(BM_PassAtK)->Arg(10)->Arg(200)->Arg(10'000);

std::string reply_with_modules(int count) {
    std::string text = "Here is the design.\n\n```verilog\n";
    for (int i = 0; i < count; ++i) {
        text += "module stage" + std::to_string(i) + "(input clk, input [7:0] d, output reg [7:0] q);\n"
                "  always @(posedge clk) q <= d;\nendmodule\n\n";
    }
    text += "```\n\n```verilog\nmodule tb;\n  reg clk = 0;\n  initial $finish;\nendmodule\n```\n";
    return text;
}

void BM_SplitCode(benchmark::State& state) {
    const std::string reply = reply_with_modules(static_cast<int>(state.range(0)));
    for (auto _ : state) benchmark::DoNotOptimize(split_code(reply));
    state.SetBytesProcessed(static_cast<std::int64_t>(state.iterations() * reply.size()));
}
BENCHMARK(BM_SplitCode)->Arg(1)->Arg(16)->Arg(128);

std::string compile_log(int lines) {
    std::string log;
    for (int i = 0; i < lines; ++i) {
        log += "design.v:" + std::to_string(i + 1) + ": syntax error\n";
        log += "design.v:" + std::to_string(i + 1) + ": warning: implicit definition of wire 'x" +
               std::to_string(i) + "'.\n";
    }
    return log;
}

void BM_ParseCompileLog(benchmark::State& state) {
    const auto rules = builtin_rule_set("icarus");
    const std::string log = compile_log(static_cast<int>(state.range(0)));
    for (auto _ : state) benchmark::DoNotOptimize(parse_compile_log(rules, log, false));
    state.SetBytesProcessed(static_cast<std::int64_t>(state.iterations() * log.size()));
}
BENCHMARK(BM_ParseCompileLog)->Arg(10)->Arg(1000);

void BM_DistillSyntax(benchmark::State& state) {
    const auto rules = builtin_rule_set("icarus");
    CompileReport report;
    report.raw_log = compile_log(static_cast<int>(state.range(0)));
    report.diagnostics = parse_compile_log(rules, report.raw_log, false);
    for (auto _ : state) benchmark::DoNotOptimize(distill(report, std::nullopt, std::nullopt));
}
BENCHMARK(BM_DistillSyntax)->Arg(10)->Arg(1000);

void BM_OutcomeRoundTrip(benchmark::State& state) {
    LoopOutcome outcome;
    outcome.status = LoopStatus::Success;
    for (int i = 1; i <= state.range(0); ++i) {
        IterationRecord r;
        r.index = i;
        r.prompt_sent = std::string(2000, 'p');
        r.agent_response = reply_with_modules(4);
        r.compile = CompileReport{{}, true, compile_log(5), "icarus", 0.5};
        outcome.trace.push_back(r);
    }
    outcome.iterations_used = static_cast<int>(outcome.trace.size());
    for (auto _ : state) {
        benchmark::DoNotOptimize(from_json_text<LoopOutcome>(to_canonical_json(outcome)));
    }
}
BENCHMARK(BM_OutcomeRoundTrip)->Arg(1)->Arg(20);

}  // namespace

BENCHMARK_MAIN();
