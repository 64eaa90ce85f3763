#include <gtest/gtest.h>

#include "rtlforge/autodv.hpp"
#include "rtlforge/harness.hpp"
#include "rtlforge/process.hpp"
#include "test_support.hpp"

namespace rtlforge {
namespace {

using test_support::TempDir;

#define REQUIRE_TOOLS(...)                                                        \
    do {                                                                          \
        for (const char* tool : {__VA_ARGS__}) {                                  \
            if (!find_executable(tool)) GTEST_SKIP() << tool << " is not installed"; \
        }                                                                         \
    } while (0)

RtlBundle counter_bundle() {
    RtlBundle bundle;
    bundle.design_source =
        "module counter(input clk, input rst, output reg [3:0] q);\n"
        "  always @(posedge clk) begin\n"
        "    if (rst) q <= 4'd0;\n"
        "    else q <= q + 4'd1;\n"
        "  end\n"
        "endmodule\n";
    bundle.testbench_source =
        "module tb;\n"
        "  reg clk = 0, rst = 1;\n"
        "  wire [3:0] q;\n"
        "  counter dut(.clk(clk), .rst(rst), .q(q));\n"
        "  always #5 clk = ~clk;\n"
        "  initial begin\n"
        "    $dumpfile(\"dump.vcd\");\n"
        "    $dumpvars(0, tb);\n"
        "    #12 rst = 0;\n"
        "    #40;\n"
        "    if (q !== 4'd4) $display(\"ASSERTION FAILED at time %0t: q is %0d\", $time, q);\n"
        "    $finish;\n"
        "  end\n"
        "endmodule\n";
    bundle.top_module = "counter";
    return bundle;
}

TEST(RealTools, IcarusCompileAndSimulate) {
    REQUIRE_TOOLS("iverilog", "vvp");
    TempDir base;
    const auto ws = make_workspace("counter", base.path());
    const auto compiled = compile(icarus_profile(), counter_bundle(), ws);
    EXPECT_EQ(compiled.error_count(), 0u) << compiled.raw_log;
    const auto sim = simulate(icarus_profile(), counter_bundle(), ws);
    EXPECT_TRUE(sim.passed) << sim.raw_log;
}

TEST(RealTools, IcarusReportsSyntaxError) {
    REQUIRE_TOOLS("iverilog");
    TempDir base;
    auto bundle = counter_bundle();
    bundle.design_source.replace(bundle.design_source.find("q + 4'd1;"), 9, "q + 4'd1");
    const auto compiled = compile(icarus_profile(), bundle, make_workspace("counter", base.path()));
    ASSERT_GT(compiled.error_count(), 0u) << compiled.raw_log;
    EXPECT_EQ(compiled.diagnostics.front().file, "design.v");
    EXPECT_TRUE(compiled.diagnostics.front().line.has_value());
}

TEST(RealTools, CoveredMeasuresCoverage) {
    REQUIRE_TOOLS("iverilog", "vvp", "covered");
    TempDir base;
    const auto ws = make_workspace("counter", base.path());
    ASSERT_EQ(compile(icarus_profile(), counter_bundle(), ws).error_count(), 0u);
    ASSERT_TRUE(simulate(icarus_profile(), counter_bundle(), ws).passed);
    const auto coverage = measure_coverage(icarus_profile(), counter_bundle(), ws);
    EXPECT_GT(coverage.aggregate, 0.0);
    EXPECT_LE(coverage.aggregate, 1.0);
}

// Optional end-to-end run against a live chat endpoint.
TEST(RealTools, LiveMultiplexerSmoke) {
    REQUIRE_TOOLS("iverilog", "vvp", "covered");
    const char* key = std::getenv("RTLFORGE_API_KEY");
    const char* endpoint = std::getenv("RTLFORGE_ENDPOINT");
    if (key == nullptr || endpoint == nullptr) GTEST_SKIP() << "no live endpoint configured";
    AutoDVConfig config;
    config.review_config.code_agent.provider = ProviderKind::HttpChat;
    config.review_config.code_agent.endpoint = endpoint;
    if (const char* model = std::getenv("RTLFORGE_MODEL")) config.review_config.code_agent.model_id = model;
    config.review_config.tool_profile = icarus_profile();
    TempDir base;
    const auto outcome = run_autodv(make_design_task("mux2", "2-to-1 multiplexer"), config,
                                    make_workspace("mux2", base.path()));
    EXPECT_EQ(outcome.status, LoopStatus::Success) << outcome.detail;
}

}  // namespace
}  // namespace rtlforge
