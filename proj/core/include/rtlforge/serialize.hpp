#pragma once

#include <filesystem>
#include <string>

#include <nlohmann/json.hpp>

#include "rtlforge/model.hpp"

namespace rtlforge {

// Artifacts are written with one canonical field order so they diff
// cleanly between runs; ordered_json preserves insertion order.
using Json = nlohmann::ordered_json;

void to_json(Json& j, const DesignTask& v);
void from_json(const Json& j, DesignTask& v);
void to_json(Json& j, const RtlBundle& v);
void from_json(const Json& j, RtlBundle& v);
void to_json(Json& j, const Diagnostic& v);
void from_json(const Json& j, Diagnostic& v);
void to_json(Json& j, const CompileReport& v);
void from_json(const Json& j, CompileReport& v);
void to_json(Json& j, const FailedAssertion& v);
void from_json(const Json& j, FailedAssertion& v);
void to_json(Json& j, const SimReport& v);
void from_json(const Json& j, SimReport& v);
void to_json(Json& j, const CoverageReport& v);
void from_json(const Json& j, CoverageReport& v);
void to_json(Json& j, const ReviewIssue& v);
void from_json(const Json& j, ReviewIssue& v);
void to_json(Json& j, const ReviewFeedback& v);
void from_json(const Json& j, ReviewFeedback& v);
void to_json(Json& j, const Budget& v);
void from_json(const Json& j, Budget& v);
void to_json(Json& j, const IterationRecord& v);
void from_json(const Json& j, IterationRecord& v);
void to_json(Json& j, const LoopOutcome& v);
void from_json(const Json& j, LoopOutcome& v);

/// Two-space indented dump with a trailing newline.
std::string canonical_dump(const Json& j);

template <typename T>
std::string to_canonical_json(const T& value) {
    Json j = value;
    return canonical_dump(j);
}

template <typename T>
T from_json_text(const std::string& text) {
    return Json::parse(text).get<T>();
}

// Small file helpers shared by every module that writes artifacts.
std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace rtlforge
