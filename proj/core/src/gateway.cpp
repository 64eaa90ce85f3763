#include "rtlforge/gateway.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <cstdlib>
#include <boost/regex.hpp>
#include <set>
#include <thread>
#include <utility>

#include <fmt/format.h>

#include "rtlforge/error.hpp"
#include "rtlforge/hdl_text.hpp"

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include "httplib.h"

namespace fs = std::filesystem;

namespace rtlforge {

namespace {

constexpr std::array<std::pair<ChatRole, std::string_view>, 3> kChatRoleNames{{
    {ChatRole::System, "system"},
    {ChatRole::User, "user"},
    {ChatRole::Assistant, "assistant"},
}};
constexpr std::array<std::pair<AgentRole, std::string_view>, 2> kAgentRoleNames{{
    {AgentRole::Code, "code"},
    {AgentRole::Review, "review"},
}};
constexpr std::array<std::pair<ProviderKind, std::string_view>, 2> kProviderNames{{
    {ProviderKind::HttpChat, "http"},
    {ProviderKind::Replay, "replay"},
}};

template <typename Table, typename Enum>
std::string_view name_of(const Table& table, Enum value) {
    for (const auto& [e, n] : table) {
        if (e == value) return n;
    }
    return "unknown";
}

template <typename Enum, typename Table>
Enum value_of(const Table& table, std::string_view name, std::string_view what) {
    for (const auto& [e, n] : table) {
        if (n == name) return e;
    }
    fail(ErrorKind::FormatError, fmt::format("unknown {} '{}'", what, name));
}

}  // namespace

std::string_view to_string(ChatRole value) { return name_of(kChatRoleNames, value); }
std::string_view to_string(AgentRole value) { return name_of(kAgentRoleNames, value); }
std::string_view to_string(ProviderKind value) { return name_of(kProviderNames, value); }

template <> ChatRole enum_from_string<ChatRole>(std::string_view name) {
    return value_of<ChatRole>(kChatRoleNames, name, "chat role");
}
template <> AgentRole enum_from_string<AgentRole>(std::string_view name) {
    return value_of<AgentRole>(kAgentRoleNames, name, "agent role");
}
template <> ProviderKind enum_from_string<ProviderKind>(std::string_view name) {
    return value_of<ProviderKind>(kProviderNames, name, "provider");
}

AgentConfig default_agent_config(AgentRole role) {
    AgentConfig config;
    config.temperature = role == AgentRole::Review ? 0.0 : 0.2;
    return config;
}

void validate(const AgentConfig& config) {
    if (config.temperature < 0.0 || config.temperature > 2.0) {
        fail(ErrorKind::ConfigError,
             fmt::format("temperature {} outside [0, 2]", config.temperature));
    }
    if (config.request_timeout_seconds <= 0) {
        fail(ErrorKind::ConfigError, "request timeout must be positive");
    }
    if (config.max_retries < 0) fail(ErrorKind::ConfigError, "max_retries must be >= 0");
    switch (config.provider) {
        case ProviderKind::HttpChat:
            if (config.endpoint.empty()) {
                fail(ErrorKind::ConfigError, "http provider requires an endpoint");
            }
            if (config.model_id.empty()) {
                fail(ErrorKind::ConfigError, "http provider requires a model id");
            }
            break;
        case ProviderKind::Replay:
            if (config.replay_dir.empty()) {
                fail(ErrorKind::ConfigError, "replay provider requires a replay directory");
            }
            break;
    }
}

void validate(const Transcript& transcript) {
    const auto& messages = transcript.messages;
    if (messages.empty() || messages.front().role != ChatRole::System) {
        fail(ErrorKind::InvariantViolation, "transcript must start with a system message");
    }
    std::size_t i = 0;
    while (i < messages.size() && messages[i].role == ChatRole::System) ++i;
    ChatRole expected = ChatRole::User;
    for (; i < messages.size(); ++i) {
        if (messages[i].role != expected) {
            fail(ErrorKind::InvariantViolation,
                 fmt::format("transcript message {} should be {}", i, to_string(expected)));
        }
        if (messages[i].content.empty()) {
            fail(ErrorKind::InvariantViolation,
                 fmt::format("transcript message {} is empty", i));
        }
        expected = expected == ChatRole::User ? ChatRole::Assistant : ChatRole::User;
    }
}

void to_json(Json& j, const ChatMessage& v) {
    j = Json::object();
    j["role"] = to_string(v.role);
    j["content"] = v.content;
}

void from_json(const Json& j, ChatMessage& v) {
    v.role = enum_from_string<ChatRole>(j.at("role").get<std::string>());
    v.content = j.at("content").get<std::string>();
}

void to_json(Json& j, const Transcript& v) {
    j = Json::object();
    j["agent_role"] = to_string(v.agent_role);
    j["messages"] = v.messages;
}

void from_json(const Json& j, Transcript& v) {
    v.agent_role = enum_from_string<AgentRole>(j.at("agent_role").get<std::string>());
    v.messages = j.at("messages").get<std::vector<ChatMessage>>();
}

void to_json(Json& j, const AgentConfig& v) {
    j = Json::object();
    j["provider"] = to_string(v.provider);
    j["model_id"] = v.model_id;
    j["temperature"] = v.temperature;
    j["endpoint"] = v.endpoint;
    j["replay_dir"] = v.replay_dir.string();
    j["request_timeout_seconds"] = v.request_timeout_seconds;
    j["max_retries"] = v.max_retries;
    j["api_key_env"] = v.api_key_env;
    j["backoff_base_ms"] = v.backoff_base_ms;
    if (v.seed) {
        j["seed"] = *v.seed;
    } else {
        j["seed"] = nullptr;
    }
}

void from_json(const Json& j, AgentConfig& v) {
    v.provider = enum_from_string<ProviderKind>(j.at("provider").get<std::string>());
    v.model_id = j.at("model_id").get<std::string>();
    v.temperature = j.at("temperature").get<double>();
    v.endpoint = j.at("endpoint").get<std::string>();
    v.replay_dir = j.at("replay_dir").get<std::string>();
    v.request_timeout_seconds = j.at("request_timeout_seconds").get<int>();
    v.max_retries = j.at("max_retries").get<int>();
    v.api_key_env = j.at("api_key_env").get<std::string>();
    v.backoff_base_ms = j.at("backoff_base_ms").get<int>();
    if (j.contains("seed") && !j.at("seed").is_null()) {
        v.seed = j.at("seed").get<std::uint64_t>();
    } else {
        v.seed.reset();
    }
}

// ---------------------------------------------------------------------------
// Replay

ReplayAgent::ReplayAgent(fs::path replay_dir, std::string model_id)
    : dir_(std::move(replay_dir)), model_id_(std::move(model_id)) {
    std::error_code ec;
    if (!fs::is_directory(dir_, ec)) {
        fail(ErrorKind::IoError, fmt::format("replay directory {} does not exist", dir_.string()));
    }
    for (const auto& entry : fs::directory_iterator(dir_)) {
        if (!entry.is_regular_file()) continue;
        const auto name = entry.path().filename().string();
        if (name.empty() || name.front() == '.') continue;
        files_.push_back(entry.path());
    }
    std::sort(files_.begin(), files_.end(), [](const fs::path& a, const fs::path& b) {
        return a.filename().string() < b.filename().string();
    });
}

ChatMessage ReplayAgent::send_chat(const Transcript& transcript) {
    if (transcript.messages.empty() || transcript.messages.back().role != ChatRole::User) {
        fail(ErrorKind::PreconditionViolation, "transcript must end with a user message");
    }
    fs::path file;
    {
        std::lock_guard lock(mutex_);
        if (next_ >= files_.size()) {
            fail(ErrorKind::ReplayExhausted,
                 fmt::format("replay directory {} has no response #{}", dir_.string(),
                             next_ + 1));
        }
        file = files_[next_++];
    }
    return ChatMessage{ChatRole::Assistant, read_text_file(file)};
}

std::size_t ReplayAgent::consumed() const {
    std::lock_guard lock(mutex_);
    return next_;
}

// ---------------------------------------------------------------------------
// HTTP

HttpChatAgent::HttpChatAgent(AgentConfig config) : config_(std::move(config)) {
    validate(config_);
    const auto& url = config_.endpoint;
    const auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) {
        fail(ErrorKind::ConfigError, fmt::format("endpoint '{}' has no scheme", url));
    }
    const auto path_start = url.find('/', scheme_end + 3);
    if (path_start == std::string::npos) {
        scheme_host_port_ = url;
        path_ = "/v1/chat/completions";
    } else {
        scheme_host_port_ = url.substr(0, path_start);
        path_ = url.substr(path_start);
    }
}

std::string HttpChatAgent::build_request_body(const AgentConfig& config,
                                              const Transcript& transcript) {
    Json body = Json::object();
    body["model"] = config.model_id;
    Json messages = Json::array();
    for (const auto& message : transcript.messages) {
        messages.push_back(Json{{"role", to_string(message.role)}, {"content", message.content}});
    }
    body["messages"] = std::move(messages);
    body["temperature"] = config.temperature;
    if (config.seed) body["seed"] = *config.seed;
    return body.dump();
}

std::string HttpChatAgent::parse_response_body(const std::string& body) {
    Json parsed;
    try {
        parsed = Json::parse(body);
    } catch (const Json::exception& e) {
        fail(ErrorKind::ProtocolError, fmt::format("response is not JSON: {}", e.what()));
    }
    const auto* content = [&]() -> const Json* {
        if (!parsed.is_object()) return nullptr;
        auto choices = parsed.find("choices");
        if (choices == parsed.end() || !choices->is_array() || choices->empty()) return nullptr;
        const auto& first = choices->front();
        if (!first.is_object()) return nullptr;
        auto message = first.find("message");
        if (message == first.end() || !message->is_object()) return nullptr;
        auto text = message->find("content");
        if (text == message->end() || !text->is_string()) return nullptr;
        return &*text;
    }();
    if (content == nullptr) {
        fail(ErrorKind::ProtocolError, "response lacks choices[0].message.content");
    }
    auto text = content->get<std::string>();
    if (text.empty()) fail(ErrorKind::ProtocolError, "provider returned an empty completion");
    return text;
}

ChatMessage HttpChatAgent::send_chat(const Transcript& transcript) {
    if (transcript.messages.empty() || transcript.messages.back().role != ChatRole::User) {
        fail(ErrorKind::PreconditionViolation, "transcript must end with a user message");
    }
    const auto body = build_request_body(config_, transcript);

    httplib::Headers headers;
    if (!config_.api_key_env.empty()) {
        if (const char* key = std::getenv(config_.api_key_env.c_str()); key && *key) {
            headers.emplace("Authorization", fmt::format("Bearer {}", key));
        }
    }

    std::string last_error;
    for (int attempt = 0; attempt <= config_.max_retries; ++attempt) {
        if (attempt > 0) {
            const auto delay = std::chrono::milliseconds(
                static_cast<long long>(config_.backoff_base_ms) << (attempt - 1));
            std::this_thread::sleep_for(delay);
        }
        httplib::Client client(scheme_host_port_);
        client.set_connection_timeout(config_.request_timeout_seconds, 0);
        client.set_read_timeout(config_.request_timeout_seconds, 0);
        client.set_write_timeout(config_.request_timeout_seconds, 0);

        auto result = client.Post(path_, headers, body, "application/json");
        if (!result) {
            last_error = fmt::format("transport failure: {}", httplib::to_string(result.error()));
            continue;
        }
        if (result->status >= 500 || result->status == 429) {
            last_error = fmt::format("HTTP {}", result->status);
            continue;
        }
        if (result->status != 200) {
            fail(ErrorKind::ProtocolError,
                 fmt::format("HTTP {} from {}: {}", result->status, config_.endpoint,
                             result->body.substr(0, 200)));
        }
        return ChatMessage{ChatRole::Assistant, parse_response_body(result->body)};
    }
    fail(ErrorKind::TransportError,
         fmt::format("{} after {} attempt(s): {}", config_.endpoint, config_.max_retries + 1,
                     last_error));
}

// ---------------------------------------------------------------------------
// Recording

RecordingAgent::RecordingAgent(std::shared_ptr<ChatAgent> inner, fs::path record_dir)
    : inner_(std::move(inner)), dir_(std::move(record_dir)) {
    std::error_code ec;
    fs::create_directories(dir_, ec);
    if (ec) fail(ErrorKind::IoError, fmt::format("cannot create {}: {}", dir_.string(), ec.message()));
}

ChatMessage RecordingAgent::send_chat(const Transcript& transcript) {
    auto reply = inner_->send_chat(transcript);
    std::lock_guard lock(mutex_);
    ++count_;
    write_text_file(dir_ / fmt::format("{:03}.txt", count_), reply.content);
    return reply;
}

std::size_t RecordingAgent::recorded() const {
    std::lock_guard lock(mutex_);
    return count_;
}

std::shared_ptr<ChatAgent> make_agent(const AgentConfig& config) {
    validate(config);
    switch (config.provider) {
        case ProviderKind::HttpChat: return std::make_shared<HttpChatAgent>(config);
        case ProviderKind::Replay:
            return std::make_shared<ReplayAgent>(config.replay_dir, config.model_id);
    }
    fail(ErrorKind::ConfigError, "unknown provider");
}

// ---------------------------------------------------------------------------
// Bundle extraction

namespace {

struct Segment {
    std::string text;
    std::vector<std::string> modules;
    bool portless = false;
};

std::string trim_block(std::string_view text) {
    const auto first = text.find_first_not_of(" \t\r\n");
    if (first == std::string_view::npos) return {};
    const auto last = text.find_last_not_of(" \t\r\n");
    // keep leading indentation of the first line
    auto line_start = text.rfind('\n', first);
    line_start = line_start == std::string_view::npos ? 0 : line_start + 1;
    return std::string(text.substr(line_start, last - line_start + 1));
}

std::vector<std::string> fenced_blocks(std::string_view text) {
    std::vector<std::string> blocks;
    std::size_t pos = 0;
    bool inside = false;
    std::string current;
    while (pos <= text.size()) {
        auto eol = text.find('\n', pos);
        if (eol == std::string_view::npos) eol = text.size();
        auto line = text.substr(pos, eol - pos);
        const auto indent = line.find_first_not_of(" \t");
        const bool fence = indent != std::string_view::npos && line.substr(indent).starts_with("```");
        if (fence) {
            if (inside) {
                blocks.push_back(current);
                current.clear();
            }
            inside = !inside;
        } else if (inside) {
            current.append(line);
            current.push_back('\n');
        }
        if (eol == text.size()) break;
        pos = eol + 1;
    }
    if (inside && !current.empty()) blocks.push_back(current);
    return blocks;
}

std::vector<std::string> bare_module_spans(std::string_view text) {
    std::vector<std::string> spans;
    const std::string stripped = strip_hdl_comments(text);
    static const boost::regex kStart(R"(\bmodule\b)");
    static const boost::regex kEnd(R"(\bendmodule\b)");
    auto begin = stripped.cbegin();
    boost::smatch start;
    while (boost::regex_search(begin, stripped.cend(), start, kStart)) {
        auto from = start[0].first;
        // comments directly above a module belong to it
        if (std::all_of(begin, from, [](char c) { return std::isspace(static_cast<unsigned char>(c)); })) {
            const auto gap_from = static_cast<std::size_t>(begin - stripped.cbegin());
            const auto gap_to = static_cast<std::size_t>(from - stripped.cbegin());
            const auto first = text.substr(gap_from, gap_to - gap_from).find_first_not_of(" \t\r\n");
            if (first != std::string_view::npos) {
                from = begin + static_cast<std::ptrdiff_t>(first);
                while (from != begin && *(from - 1) != '\n') --from;
            }
        }
        boost::smatch end;
        if (!boost::regex_search(start[0].second, stripped.cend(), end, kEnd)) break;
        const auto to = end[0].second;
        const auto offset = static_cast<std::size_t>(from - stripped.cbegin());
        const auto length = static_cast<std::size_t>(to - from);
        spans.push_back(std::string(text.substr(offset, length)));
        begin = to;
    }
    return spans;
}

// Splits one block holding several modules into per-module pieces; text
// before the first module stays with it, text after the last with it too.
std::vector<std::string> split_modules(const std::string& block) {
    const std::string stripped = strip_hdl_comments(block);
    static const boost::regex kEnd(R"(\bendmodule\b)");
    std::vector<std::string> pieces;
    std::size_t from = 0;
    for (auto it = boost::sregex_iterator(stripped.begin(), stripped.end(), kEnd);
         it != boost::sregex_iterator(); ++it) {
        const auto to = static_cast<std::size_t>(it->position(std::size_t{0}) + it->length(std::size_t{0}));
        pieces.push_back(block.substr(from, to - from));
        from = to;
    }
    if (pieces.empty()) return {block};
    if (from < block.size()) pieces.back() += block.substr(from);
    return pieces;
}

bool instantiates(const std::string& stripped_source, const std::string& module_name) {
    const boost::regex pattern("(?<![\\w$`])(" + regex_escape(module_name) +
                               R"()\s*(#\s*\([^;]*?\)\s*)?[A-Za-z_][\w$]*\s*(\[[^\]]*\]\s*)?\()");
    for (auto it = boost::sregex_iterator(stripped_source.begin(), stripped_source.end(), pattern);
         it != boost::sregex_iterator(); ++it) {
        // skip the declaration "module <name> ..." itself
        auto pos = static_cast<std::size_t>(it->position(std::size_t{1}));
        while (pos > 0 && std::isspace(static_cast<unsigned char>(stripped_source[pos - 1]))) --pos;
        const bool declaration = pos >= 6 && stripped_source.compare(pos - 6, 6, "module") == 0;
        if (!declaration) return true;
    }
    return false;
}

bool is_testbench_name(const std::string& name, const ExtractOptions& options) {
    if (std::find(options.known_testbench_modules.begin(), options.known_testbench_modules.end(),
                  name) != options.known_testbench_modules.end()) {
        return true;
    }
    std::string lower(name);
    std::transform(lower.begin(), lower.end(), lower.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    // common spellings beyond the tb_ prefix / _tb suffix rule
    return lower.starts_with("tb_") || lower.ends_with("_tb") || lower == "tb" ||
           lower == "testbench" || lower.ends_with("_testbench");
}

Segment make_segment(std::string text) {
    Segment segment;
    segment.text = trim_block(text);
    segment.modules = declared_modules(segment.text);
    segment.portless = !segment.modules.empty() && module_is_portless(segment.text);
    return segment;
}

std::string join_design(const std::vector<const Segment*>& parts) {
    std::string joined;
    for (const auto* part : parts) {
        if (!joined.empty()) joined += "\n\n";
        joined += part->text;
    }
    return joined;
}

}  // namespace

std::vector<std::string> declared_modules(std::string_view source) {
    const std::string stripped = strip_hdl_comments(source);
    static const boost::regex kDecl(R"((^|[^\w$`])(module|macromodule)\s+([A-Za-z_][\w$]*))");
    std::vector<std::string> names;
    for (auto it = boost::sregex_iterator(stripped.begin(), stripped.end(), kDecl);
         it != boost::sregex_iterator(); ++it) {
        names.push_back((*it)[3].str());
    }
    return names;
}

CodeSplit split_code(std::string_view response_text, const ExtractOptions& options) {
    std::vector<std::string> raw_blocks;
    for (auto& block : fenced_blocks(response_text)) {
        if (!declared_modules(block).empty()) raw_blocks.push_back(std::move(block));
    }
    if (raw_blocks.empty()) raw_blocks = bare_module_spans(response_text);
    if (raw_blocks.empty()) {
        fail(ErrorKind::NoCodeFound, "reply contains no fenced code and no module...endmodule span");
    }

    bool split_single_block = false;
    if (raw_blocks.size() == 1 && declared_modules(raw_blocks.front()).size() > 1) {
        raw_blocks = split_modules(raw_blocks.front());
        split_single_block = true;
    }

    std::vector<Segment> segments;
    for (auto& block : raw_blocks) segments.push_back(make_segment(std::move(block)));

    if (segments.size() == 1) {
        return CodeSplit{segments.front().text, {}};
    }

    // Rule 1: a portless block that instantiates a module declared in another
    // block and is itself instantiated by none.
    std::vector<std::size_t> candidates;
    std::vector<std::string> stripped;
    for (const auto& s : segments) stripped.push_back(strip_hdl_comments(s.text));
    for (std::size_t i = 0; i < segments.size(); ++i) {
        if (!segments[i].portless) continue;
        bool uses_other = false;
        bool used_by_other = false;
        for (std::size_t j = 0; j < segments.size(); ++j) {
            if (i == j) continue;
            for (const auto& name : segments[j].modules) {
                if (instantiates(stripped[i], name)) uses_other = true;
            }
            for (const auto& name : segments[i].modules) {
                if (instantiates(stripped[j], name)) used_by_other = true;
            }
        }
        if (uses_other && !used_by_other) candidates.push_back(i);
    }

    // Rule 2: naming convention, used alone or to break rule-1 ties.
    auto named = [&](std::size_t i) {
        return std::any_of(segments[i].modules.begin(), segments[i].modules.end(),
                           [&](const std::string& n) { return is_testbench_name(n, options); });
    };
    if (candidates.size() > 1) {
        std::vector<std::size_t> narrowed;
        std::copy_if(candidates.begin(), candidates.end(), std::back_inserter(narrowed), named);
        candidates = std::move(narrowed);
        if (candidates.size() != 1) {
            fail(ErrorKind::AmbiguousBundle, "several blocks look like testbenches");
        }
    }
    if (candidates.empty()) {
        for (std::size_t i = 0; i < segments.size(); ++i) {
            if (named(i)) candidates.push_back(i);
        }
    }

    if (candidates.size() != 1) {
        if (candidates.empty() && split_single_block) {
            // one block of several design modules: keep it whole
            std::vector<const Segment*> all;
            for (const auto& s : segments) all.push_back(&s);
            return CodeSplit{join_design(all), {}};
        }
        fail(ErrorKind::AmbiguousBundle,
             candidates.empty() ? "cannot tell which block is the testbench"
                                : "several blocks are named like testbenches");
    }

    std::vector<const Segment*> design;
    for (std::size_t i = 0; i < segments.size(); ++i) {
        if (i != candidates.front()) design.push_back(&segments[i]);
    }
    return CodeSplit{join_design(design), segments[candidates.front()].text};
}

std::string top_module_of(std::string_view design_source) {
    const auto modules = declared_modules(design_source);
    if (modules.empty()) return {};
    const std::string stripped = strip_hdl_comments(design_source);
    for (const auto& name : modules) {
        if (!instantiates(stripped, name)) return name;
    }
    return modules.front();
}

RtlBundle extract_rtl_bundle(const ChatMessage& response, const ExtractOptions& options) {
    if (response.role != ChatRole::Assistant) {
        fail(ErrorKind::PreconditionViolation, "can only extract code from assistant replies");
    }
    auto split = split_code(response.content, options);
    const auto modules = declared_modules(split.design_source);
    if (modules.empty()) {
        fail(ErrorKind::NoCodeFound, "design source declares no module");
    }
    std::string top = top_module_of(split.design_source);
    RtlBundle bundle{std::move(split.design_source), std::move(split.testbench_source),
                     std::move(top)};
    validate(bundle);
    return bundle;
}

fs::path record_transcript(const Transcript& transcript, const fs::path& workspace) {
    std::error_code ec;
    if (!fs::is_directory(workspace, ec)) {
        fail(ErrorKind::IoError, fmt::format("workspace {} does not exist", workspace.string()));
    }
    int highest = 0;
    static const boost::regex kName(R"(transcript_(\d{3,})\.json)");
    for (const auto& entry : fs::directory_iterator(workspace)) {
        boost::smatch m;
        const auto name = entry.path().filename().string();
        if (boost::regex_match(name, m, kName)) highest = std::max(highest, std::stoi(m[1].str()));
    }
    for (int n = highest + 1;; ++n) {
        const auto path = workspace / fmt::format("transcript_{:03}.json", n);
        if (fs::exists(path)) continue;
        write_text_file(path, to_canonical_json(transcript));
        return path;
    }
}

}  // namespace rtlforge
