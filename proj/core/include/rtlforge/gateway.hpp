#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "rtlforge/model.hpp"
#include "rtlforge/serialize.hpp"

namespace rtlforge {

enum class ChatRole { System, User, Assistant };
enum class AgentRole { Code, Review };
enum class ProviderKind { HttpChat, Replay };

std::string_view to_string(ChatRole value);
std::string_view to_string(AgentRole value);
std::string_view to_string(ProviderKind value);
template <> ChatRole enum_from_string<ChatRole>(std::string_view name);
template <> AgentRole enum_from_string<AgentRole>(std::string_view name);
template <> ProviderKind enum_from_string<ProviderKind>(std::string_view name);

struct ChatMessage {
    ChatRole role = ChatRole::User;
    std::string content;

    friend bool operator==(const ChatMessage&, const ChatMessage&) = default;
};

struct AgentConfig {
    ProviderKind provider = ProviderKind::Replay;
    std::string model_id = "replay";
    double temperature = 0.2;
    std::string endpoint;                  // HttpChat only
    std::filesystem::path replay_dir;      // Replay only
    int request_timeout_seconds = 60;
    int max_retries = 2;
    std::string api_key_env = "RTLFORGE_API_KEY";
    int backoff_base_ms = 500;
    std::optional<std::uint64_t> seed;

    friend bool operator==(const AgentConfig&, const AgentConfig&) = default;
};

/// Defaults per role: review distillation runs at temperature 0, code
/// generation at 0.2.
AgentConfig default_agent_config(AgentRole role);
void validate(const AgentConfig& config);

struct Transcript {
    AgentRole agent_role = AgentRole::Code;
    std::vector<ChatMessage> messages;

    friend bool operator==(const Transcript&, const Transcript&) = default;
};

void validate(const Transcript& transcript);

void to_json(Json& j, const ChatMessage& v);
void from_json(const Json& j, ChatMessage& v);
void to_json(Json& j, const Transcript& v);
void from_json(const Json& j, Transcript& v);
void to_json(Json& j, const AgentConfig& v);
void from_json(const Json& j, AgentConfig& v);

/// One LLM backend. Implementations must tolerate concurrent calls.
class ChatAgent {
public:
    virtual ~ChatAgent() = default;

    /// Returns the assistant reply to a transcript that ends with a user
    /// message. The transcript is not modified; callers append the reply.
    virtual ChatMessage send_chat(const Transcript& transcript) = 0;

    virtual std::string model_id() const = 0;
};

/// Serves the plain-text files of a directory in lexicographic order, one
/// per call, and throws ReplayExhausted afterwards.
class ReplayAgent final : public ChatAgent {
public:
    explicit ReplayAgent(std::filesystem::path replay_dir, std::string model_id = "replay");

    ChatMessage send_chat(const Transcript& transcript) override;
    std::string model_id() const override { return model_id_; }

    std::size_t consumed() const;
    std::size_t available() const { return files_.size(); }

private:
    std::filesystem::path dir_;
    std::string model_id_;
    std::vector<std::filesystem::path> files_;
    mutable std::mutex mutex_;
    std::size_t next_ = 0;
};

/// Chat-completion client: POSTs {model, messages, temperature} and reads
/// choices[0].message.content. Retries transport failures and 5xx/429
/// responses with exponential backoff.
class HttpChatAgent final : public ChatAgent {
public:
    explicit HttpChatAgent(AgentConfig config);

    ChatMessage send_chat(const Transcript& transcript) override;
    std::string model_id() const override { return config_.model_id; }

    static std::string build_request_body(const AgentConfig& config, const Transcript& transcript);
    static std::string parse_response_body(const std::string& body);

private:
    AgentConfig config_;
    std::string scheme_host_port_;
    std::string path_;
};

/// Forwards to another agent and saves every reply as NNN.txt so a live
/// run can be replayed offline.
class RecordingAgent final : public ChatAgent {
public:
    RecordingAgent(std::shared_ptr<ChatAgent> inner, std::filesystem::path record_dir);

    ChatMessage send_chat(const Transcript& transcript) override;
    std::string model_id() const override { return inner_->model_id(); }

    std::size_t recorded() const;

private:
    std::shared_ptr<ChatAgent> inner_;
    std::filesystem::path dir_;
    mutable std::mutex mutex_;
    std::size_t count_ = 0;
};

std::shared_ptr<ChatAgent> make_agent(const AgentConfig& config);

struct ExtractOptions {
    // Module names already known to be testbenches (e.g. from a previous
    // iteration); they count as testbench names for the naming rule.
    std::vector<std::string> known_testbench_modules;
};

/// Design/testbench split of an agent reply, before bundle validation.
struct CodeSplit {
    std::string design_source;
    std::string testbench_source;
};

/// Segments a reply into fenced blocks (or bare module spans) and decides
/// which one is the testbench. Throws NoCodeFound or AmbiguousBundle.
CodeSplit split_code(std::string_view response_text, const ExtractOptions& options = {});

RtlBundle extract_rtl_bundle(const ChatMessage& response, const ExtractOptions& options = {});

/// Module names declared in source, in order of appearance.
std::vector<std::string> declared_modules(std::string_view source);

/// First declared module that no other module of the source instantiates;
/// empty when the source declares none.
std::string top_module_of(std::string_view design_source);

/// Writes transcript_NNN.json (next free number) under workspace.
std::filesystem::path record_transcript(const Transcript& transcript,
                                        const std::filesystem::path& workspace);

}  // namespace rtlforge
