#include <gtest/gtest.h>

#include <chrono>
#include <fstream>
#include <set>
#include <thread>

#include <boost/regex.hpp>

#include "rtlforge/gateway.hpp"
#include "test_support.hpp"

namespace rtlforge {
namespace {

namespace fs = std::filesystem;
using test_support::FakeChatServer;
using test_support::ScopedEnv;
using test_support::TempDir;

Transcript user_turn(const std::string& text = "design an adder") {
    return Transcript{AgentRole::Code,
                      {{ChatRole::System, "You write Verilog."}, {ChatRole::User, text}}};
}

ChatMessage assistant(std::string text) { return ChatMessage{ChatRole::Assistant, std::move(text)}; }

// Independent oracle: fenced blocks by regex, trailing whitespace trimmed.
std::vector<std::string> oracle_blocks(const std::string& text) {
    static const boost::regex kFence(R"(```[A-Za-z]*\n([\s\S]*?)```)");
    std::vector<std::string> blocks;
    for (auto it = boost::sregex_iterator(text.begin(), text.end(), kFence);
         it != boost::sregex_iterator(); ++it) {
        std::string block = (*it)[1].str();
        block.erase(block.find_last_not_of(" \t\r\n") + 1);
        blocks.push_back(block);
    }
    return blocks;
}

// ---------------------------------------------------------------------------
// Replay

TEST(ReplayAgent, ReturnsFileVerbatim) {
    TempDir dir;
    test_support::write_replay(dir.path(), {"module m; endmodule"});
    ReplayAgent agent(dir.path());
    const auto reply = agent.send_chat(user_turn());
    EXPECT_EQ(reply.role, ChatRole::Assistant);
    EXPECT_EQ(reply.content, "module m; endmodule");
}

TEST(ReplayAgent, ExhaustionAfterAllFiles) {
    TempDir dir;
    test_support::write_replay(dir.path(), {"a", "b"});
    ReplayAgent agent(dir.path());
    EXPECT_EQ(agent.send_chat(user_turn()).content, "a");
    EXPECT_EQ(agent.send_chat(user_turn()).content, "b");
    EXPECT_ERROR_KIND(agent.send_chat(user_turn()), ErrorKind::ReplayExhausted);
    EXPECT_EQ(agent.consumed(), 2u);
}

TEST(ReplayAgent, LexicographicOrderAndHiddenFilesSkipped) {
    TempDir dir;
    write_text_file(dir / "b.txt", "second");
    write_text_file(dir / "a.txt", "first");
    write_text_file(dir / ".hidden", "never");
    ReplayAgent agent(dir.path());
    EXPECT_EQ(agent.available(), 2u);
    EXPECT_EQ(agent.send_chat(user_turn()).content, "first");
    EXPECT_EQ(agent.send_chat(user_turn()).content, "second");
}

TEST(ReplayAgent, DeterministicAcrossInstances) {
    TempDir dir;
    test_support::write_replay(dir.path(), {"x", "y", "z"});
    ReplayAgent a(dir.path());
    ReplayAgent b(dir.path());
    for (int i = 0; i < 3; ++i) EXPECT_EQ(a.send_chat(user_turn()), b.send_chat(user_turn()));
}

TEST(ReplayAgent, PreconditionsAndMissingDirectory) {
    TempDir dir;
    test_support::write_replay(dir.path(), {"x"});
    ReplayAgent agent(dir.path());
    Transcript ends_with_assistant = user_turn();
    ends_with_assistant.messages.push_back(assistant("reply"));
    EXPECT_ERROR_KIND(agent.send_chat(ends_with_assistant), ErrorKind::PreconditionViolation);
    EXPECT_ERROR_KIND(ReplayAgent(dir / "absent"), ErrorKind::IoError);
}

TEST(ReplayAgent, ConcurrentCallsDeliverEachResponseOnce) {
    TempDir dir;
    std::vector<std::string> responses;
    for (int i = 0; i < 64; ++i) responses.push_back("response " + std::to_string(i));
    test_support::write_replay(dir.path(), responses);
    ReplayAgent agent(dir.path());

    std::mutex mutex;
    std::multiset<std::string> seen;
    std::vector<std::thread> workers;
    for (int t = 0; t < 8; ++t) {
        workers.emplace_back([&] {
            for (int i = 0; i < 8; ++i) {
                auto reply = agent.send_chat(user_turn());
                std::lock_guard lock(mutex);
                seen.insert(reply.content);
            }
        });
    }
    for (auto& w : workers) w.join();
    EXPECT_EQ(seen, std::multiset<std::string>(responses.begin(), responses.end()));
    EXPECT_ERROR_KIND(agent.send_chat(user_turn()), ErrorKind::ReplayExhausted);
}

// ---------------------------------------------------------------------------
// Extraction

TEST(ExtractBundle, TwoBlocksWithTestbench) {
    const std::string design =
        "module adder(input [1:0] a, input [1:0] b, output [2:0] s);\n"
        "  assign s = a + b;\n"
        "endmodule\n";
    const std::string tb =
        "module tb_adder;\n"
        "  reg [1:0] a, b; wire [2:0] s;\n"
        "  adder dut(.a(a), .b(b), .s(s));\n"
        "endmodule\n";
    const std::string reply = "Here is the design:\n" + test_support::fenced(design) +
                              "And the testbench:\n" + test_support::fenced(tb) + "Done.";
    const auto oracle = oracle_blocks(reply);
    ASSERT_EQ(oracle.size(), 2u);

    const auto bundle = extract_rtl_bundle(assistant(reply));
    EXPECT_EQ(bundle.design_source, oracle[0]);
    EXPECT_EQ(bundle.testbench_source, oracle[1]);
    EXPECT_EQ(bundle.top_module, "adder");
}

TEST(ExtractBundle, TestbenchFirstIsStillDetected) {
    const std::string reply = test_support::fenced("module check;\n  adder u(.a(1));\nendmodule\n") +
                              test_support::fenced(test_support::kAdder);
    const auto bundle = extract_rtl_bundle(assistant(reply));
    EXPECT_EQ(bundle.top_module, "adder");
    EXPECT_NE(bundle.testbench_source.find("module check"), std::string::npos);
}

TEST(ExtractBundle, SingleBlock) {
    const auto bundle =
        extract_rtl_bundle(assistant(test_support::fenced("module m(input a); endmodule\n")));
    EXPECT_EQ(bundle.design_source, "module m(input a); endmodule");
    EXPECT_TRUE(bundle.testbench_source.empty());
    EXPECT_EQ(bundle.top_module, "m");
}

TEST(ExtractBundle, ProseOnlyIsNoCodeFound) {
    EXPECT_ERROR_KIND(extract_rtl_bundle(assistant("I would use a counter for that.")),
                      ErrorKind::NoCodeFound);
    EXPECT_ERROR_KIND(extract_rtl_bundle(assistant("```\nnot verilog\n```")),
                      ErrorKind::NoCodeFound);
}

TEST(ExtractBundle, BareModuleSpans) {
    const std::string reply = "Sure.\nmodule inv(input a, output y); assign y = ~a; endmodule\nBye";
    const auto bundle = extract_rtl_bundle(assistant(reply));
    EXPECT_EQ(bundle.design_source, "module inv(input a, output y); assign y = ~a; endmodule");
    EXPECT_EQ(bundle.top_module, "inv");
}

TEST(ExtractBundle, SingleBlockWithTestbenchIsSplit) {
    const std::string block = std::string(test_support::kAdder) + "\n" +
                              "module adder_tb;\n  adder dut(.a(a), .b(b), .sum(s));\nendmodule\n";
    const auto bundle = extract_rtl_bundle(assistant(test_support::fenced(block)));
    EXPECT_EQ(bundle.top_module, "adder");
    EXPECT_EQ(bundle.design_source.find("adder_tb"), std::string::npos);
    EXPECT_NE(bundle.testbench_source.find("module adder_tb"), std::string::npos);
}

TEST(ExtractBundle, HierarchicalDesignTopIsUninstantiatedModule) {
    const std::string block =
        "module half(input a, b, output s, c); assign s = a ^ b; assign c = a & b; endmodule\n"
        "module full(input a, b, ci, output s, co);\n"
        "  wire s1, c1, c2;\n"
        "  half h0(.a(a), .b(b), .s(s1), .c(c1));\n"
        "  half h1(.a(s1), .b(ci), .s(s), .c(c2));\n"
        "  assign co = c1 | c2;\n"
        "endmodule\n";
    const auto bundle = extract_rtl_bundle(assistant(test_support::fenced(block)));
    EXPECT_TRUE(bundle.testbench_source.empty());
    EXPECT_EQ(bundle.top_module, "full");
    EXPECT_EQ(top_module_of(bundle.design_source), "full");
}

TEST(ExtractBundle, AmbiguousWhenNoRuleApplies) {
    const std::string reply = test_support::fenced("module a(input x); endmodule\n") +
                              test_support::fenced("module b(input y); endmodule\n");
    EXPECT_ERROR_KIND(extract_rtl_bundle(assistant(reply)), ErrorKind::AmbiguousBundle);
}

TEST(ExtractBundle, AmbiguousWhenTwoTestbenchNames) {
    const std::string reply = test_support::fenced(test_support::kAdder) +
                              test_support::fenced("module tb_one(input q); endmodule\n") +
                              test_support::fenced("module tb_two(input q); endmodule\n");
    EXPECT_ERROR_KIND(extract_rtl_bundle(assistant(reply)), ErrorKind::AmbiguousBundle);
}

TEST(ExtractBundle, KnownTestbenchNamesBreakAmbiguity) {
    const std::string reply = test_support::fenced("module a(input x); endmodule\n") +
                              test_support::fenced("module check(input y); endmodule\n");
    ExtractOptions options;
    options.known_testbench_modules = {"check"};
    const auto bundle = extract_rtl_bundle(assistant(reply), options);
    EXPECT_EQ(bundle.top_module, "a");
    EXPECT_NE(bundle.testbench_source.find("check"), std::string::npos);
}

TEST(ExtractBundle, IdempotentOnRewrappedOutput) {
    const std::string reply =
        test_support::fenced(test_support::kAdder) +
        test_support::fenced(test_support::adder_testbench("// stub:coverage line=1/2\n"));
    const auto first = extract_rtl_bundle(assistant(reply));
    const auto second = extract_rtl_bundle(assistant(
        test_support::fenced(first.design_source + "\n") +
        test_support::fenced(first.testbench_source + "\n")));
    EXPECT_EQ(first, second);
}

TEST(ExtractBundle, RequiresAssistantRole) {
    EXPECT_ERROR_KIND(extract_rtl_bundle(ChatMessage{ChatRole::User, "module m; endmodule"}),
                      ErrorKind::PreconditionViolation);
}

TEST(DeclaredModules, IgnoresCommentsAndStrings) {
    const std::string source =
        "// module ghost(a);\n"
        "module real_one(input a); initial $display(\"module fake\"); endmodule\n"
        "/* module also_ghost; */ macromodule second; endmodule\n";
    EXPECT_EQ(declared_modules(source), (std::vector<std::string>{"real_one", "second"}));
    EXPECT_EQ(top_module_of("no modules"), "");
}

// ---------------------------------------------------------------------------
// Transcripts

TEST(RecordTranscript, NumberedFilesAndRoundTrip) {
    TempDir dir;
    Transcript transcript = user_turn();
    const auto first = record_transcript(transcript, dir.path());
    EXPECT_EQ(first.filename(), "transcript_001.json");
    transcript.messages.push_back(assistant("module m; endmodule"));
    const auto second = record_transcript(transcript, dir.path());
    EXPECT_EQ(second.filename(), "transcript_002.json");
    EXPECT_EQ(from_json_text<Transcript>(read_text_file(second)), transcript);
    EXPECT_EQ(from_json_text<Transcript>(read_text_file(first)), user_turn());
}

TEST(RecordTranscript, MissingWorkspaceIsIoError) {
    TempDir dir;
    EXPECT_ERROR_KIND(record_transcript(user_turn(), dir / "absent"), ErrorKind::IoError);
}

TEST(TranscriptInvariants, SystemFirstThenAlternating) {
    EXPECT_NO_THROW(validate(user_turn()));
    Transcript no_system{AgentRole::Code, {{ChatRole::User, "hi"}}};
    EXPECT_ERROR_KIND(validate(no_system), ErrorKind::InvariantViolation);
    Transcript doubled = user_turn();
    doubled.messages.push_back({ChatRole::User, "again"});
    EXPECT_ERROR_KIND(validate(doubled), ErrorKind::InvariantViolation);
    Transcript empty_reply = user_turn();
    empty_reply.messages.push_back({ChatRole::Assistant, ""});
    EXPECT_ERROR_KIND(validate(empty_reply), ErrorKind::InvariantViolation);
}

// ---------------------------------------------------------------------------
// Config

TEST(AgentConfigs, RoleDefaults) {
    EXPECT_DOUBLE_EQ(default_agent_config(AgentRole::Review).temperature, 0.0);
    EXPECT_DOUBLE_EQ(default_agent_config(AgentRole::Code).temperature, 0.2);
}

TEST(AgentConfigs, ValidationPerProvider) {
    AgentConfig config = default_agent_config(AgentRole::Code);
    config.replay_dir = "/tmp";
    EXPECT_NO_THROW(validate(config));
    config.temperature = 2.5;
    EXPECT_ERROR_KIND(validate(config), ErrorKind::ConfigError);
    config.temperature = 0.2;
    config.replay_dir.clear();
    EXPECT_ERROR_KIND(validate(config), ErrorKind::ConfigError);
    config.provider = ProviderKind::HttpChat;
    EXPECT_ERROR_KIND(validate(config), ErrorKind::ConfigError);
    config.endpoint = "http://127.0.0.1:1/v1/chat/completions";
    EXPECT_NO_THROW(validate(config));
    config.max_retries = -1;
    EXPECT_ERROR_KIND(validate(config), ErrorKind::ConfigError);
    config.max_retries = 0;
    config.request_timeout_seconds = 0;
    EXPECT_ERROR_KIND(validate(config), ErrorKind::ConfigError);
}

TEST(AgentConfigs, JsonRoundTripAndProviderNames) {
    AgentConfig config = default_agent_config(AgentRole::Review);
    config.provider = ProviderKind::HttpChat;
    config.endpoint = "http://localhost:8000/v1/chat/completions";
    config.model_id = "some-model";
    config.seed = 42;
    EXPECT_EQ(from_json_text<AgentConfig>(to_canonical_json(config)), config);
    EXPECT_EQ(to_string(ProviderKind::HttpChat), "http");
    EXPECT_EQ(enum_from_string<ProviderKind>("replay"), ProviderKind::Replay);
}

// ---------------------------------------------------------------------------
// HTTP

AgentConfig http_config(const std::string& endpoint) {
    AgentConfig config = default_agent_config(AgentRole::Code);
    config.provider = ProviderKind::HttpChat;
    config.model_id = "test-model";
    config.endpoint = endpoint;
    config.request_timeout_seconds = 5;
    config.max_retries = 2;
    config.backoff_base_ms = 10;
    return config;
}

TEST(HttpChatAgent, RequestBodyShape) {
    const auto config = http_config("http://127.0.0.1:9/v1/chat/completions");
    const auto body = Json::parse(HttpChatAgent::build_request_body(config, user_turn("hi")));
    EXPECT_EQ(body.at("model"), "test-model");
    EXPECT_DOUBLE_EQ(body.at("temperature").get<double>(), 0.2);
    ASSERT_EQ(body.at("messages").size(), 2u);
    EXPECT_EQ(body.at("messages")[0].at("role"), "system");
    EXPECT_EQ(body.at("messages")[1].at("content"), "hi");
}

TEST(HttpChatAgent, ParseResponseBody) {
    EXPECT_EQ(HttpChatAgent::parse_response_body(
                  R"({"choices":[{"message":{"role":"assistant","content":"ok"}}]})"),
              "ok");
    EXPECT_ERROR_KIND(HttpChatAgent::parse_response_body("not json"), ErrorKind::ProtocolError);
    EXPECT_ERROR_KIND(HttpChatAgent::parse_response_body(R"({"choices":[]})"),
                      ErrorKind::ProtocolError);
}

TEST(HttpChatAgent, PassesCompletionThrough) {
    TempDir dir;
    test_support::write_replay(dir / "responses", {"module m; endmodule\n"});
    FakeChatServer server(dir / "responses", {"--log", (dir / "log.jsonl").string()});
    ScopedEnv key("RTLFORGE_TEST_KEY", "sekrit");
    auto config = http_config(server.endpoint());
    config.api_key_env = "RTLFORGE_TEST_KEY";
    HttpChatAgent agent(config);
    const auto reply = agent.send_chat(user_turn("make m"));
    EXPECT_EQ(reply, assistant("module m; endmodule\n"));

    const auto log = Json::parse(read_text_file(dir / "log.jsonl"));
    EXPECT_EQ(log.at("path"), "/v1/chat/completions");
    EXPECT_EQ(log.at("authorization"), "Bearer sekrit");
    EXPECT_EQ(log.at("body").at("model"), "test-model");
    EXPECT_EQ(log.at("body").at("messages")[1].at("content"), "make m");
}

TEST(HttpChatAgent, NoAuthorizationWithoutKey) {
    TempDir dir;
    test_support::write_replay(dir / "responses", {"x"});
    FakeChatServer server(dir / "responses", {"--log", (dir / "log.jsonl").string()});
    auto config = http_config(server.endpoint());
    config.api_key_env = "RTLFORGE_TEST_KEY_THAT_IS_NOT_SET";
    HttpChatAgent(config).send_chat(user_turn());
    EXPECT_TRUE(Json::parse(read_text_file(dir / "log.jsonl")).at("authorization").is_null());
}

TEST(HttpChatAgent, RetriesServerErrors) {
    TempDir dir;
    test_support::write_replay(dir / "responses", {"after retry"});
    FakeChatServer server(dir / "responses", {"--fail-first", "2"});
    HttpChatAgent agent(http_config(server.endpoint()));
    EXPECT_EQ(agent.send_chat(user_turn()).content, "after retry");
}

TEST(HttpChatAgent, TransportErrorAfterRetries) {
    TempDir dir;
    test_support::write_replay(dir / "responses", {"never"});
    FakeChatServer server(dir / "responses", {"--fail-first", "10"});
    HttpChatAgent agent(http_config(server.endpoint()));
    EXPECT_ERROR_KIND(agent.send_chat(user_turn()), ErrorKind::TransportError);
}

TEST(HttpChatAgent, ConnectionRefusedIsTransportError) {
    int port = 0;
    {
        TempDir dir;
        test_support::write_replay(dir / "responses", {"x"});
        FakeChatServer server(dir / "responses");
        port = server.port();
    }
    auto config = http_config("http://127.0.0.1:" + std::to_string(port) + "/v1/chat/completions");
    config.max_retries = 1;
    const auto started = std::chrono::steady_clock::now();
    EXPECT_ERROR_KIND(HttpChatAgent(config).send_chat(user_turn()), ErrorKind::TransportError);
    EXPECT_LT(std::chrono::steady_clock::now() - started, std::chrono::seconds(12));
}

TEST(HttpChatAgent, MalformedResponseIsProtocolError) {
    TempDir dir;
    test_support::write_replay(dir / "responses", {"x"});
    FakeChatServer server(dir / "responses", {"--malformed"});
    EXPECT_ERROR_KIND(HttpChatAgent(http_config(server.endpoint())).send_chat(user_turn()),
                      ErrorKind::ProtocolError);
}

TEST(HttpChatAgent, ClientErrorIsProtocolErrorWithoutRetry) {
    TempDir dir;
    test_support::write_replay(dir / "responses", {"x"});
    FakeChatServer server(dir / "responses",
                          {"--fail-first", "1", "--status", "401", "--log",
                           (dir / "log.jsonl").string()});
    EXPECT_ERROR_KIND(HttpChatAgent(http_config(server.endpoint())).send_chat(user_turn()),
                      ErrorKind::ProtocolError);
    const auto log = read_text_file(dir / "log.jsonl");
    EXPECT_EQ(std::count(log.begin(), log.end(), '\n'), 1);
}

TEST(HttpChatAgent, EndpointWithoutSchemeIsConfigError) {
    EXPECT_ERROR_KIND(HttpChatAgent(http_config("localhost:8000/v1")), ErrorKind::ConfigError);
}

TEST(HttpChatAgent, AgreesWithReplayOnSameResponses) {
    TempDir dir;
    test_support::write_replay(dir / "responses", {"one", "two"});
    FakeChatServer server(dir / "responses");
    HttpChatAgent http(http_config(server.endpoint()));
    ReplayAgent replay(dir / "responses");
    for (int i = 0; i < 2; ++i) EXPECT_EQ(http.send_chat(user_turn()), replay.send_chat(user_turn()));
}

// ---------------------------------------------------------------------------
// Recording

TEST(RecordingAgent, SavesRepliesThatReplayIdentically) {
    TempDir dir;
    test_support::write_replay(dir / "source", {"alpha", "beta"});
    auto inner = std::make_shared<ReplayAgent>(dir / "source");
    RecordingAgent recorder(inner, dir / "recorded");
    const auto a = recorder.send_chat(user_turn());
    const auto b = recorder.send_chat(user_turn());
    EXPECT_EQ(recorder.recorded(), 2u);
    EXPECT_EQ(recorder.model_id(), "replay");

    ReplayAgent replay(dir / "recorded");
    EXPECT_EQ(replay.send_chat(user_turn()), a);
    EXPECT_EQ(replay.send_chat(user_turn()), b);
}

TEST(RecordingAgent, FailuresAreNotRecorded) {
    TempDir dir;
    test_support::write_replay(dir / "source", {"only"});
    RecordingAgent recorder(std::make_shared<ReplayAgent>(dir / "source"), dir / "recorded");
    recorder.send_chat(user_turn());
    EXPECT_ERROR_KIND(recorder.send_chat(user_turn()), ErrorKind::ReplayExhausted);
    EXPECT_EQ(test_support::snapshot(dir / "recorded"), (std::vector<std::string>{"001.txt"}));
}

TEST(MakeAgent, DispatchesOnProvider) {
    TempDir dir;
    test_support::write_replay(dir.path(), {"x"});
    auto agent = make_agent(test_support::replay_config(dir.path()));
    EXPECT_NE(dynamic_cast<ReplayAgent*>(agent.get()), nullptr);
    EXPECT_ERROR_KIND(make_agent(AgentConfig{.replay_dir = {}}), ErrorKind::ConfigError);
}

}  // namespace
}  // namespace rtlforge
