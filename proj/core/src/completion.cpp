#include "gcoach/completion.hpp"

#include "gcoach/errors.hpp"
#include "gcoach/hashing.hpp"
#include "http_client.hpp"

#include <nlohmann/json.hpp>

#include <fstream>

namespace gcoach {

std::optional<InstructionFrame> parse_instruction_frame(std::string_view name) {
    if (name == "plain") return InstructionFrame::plain;
    if (name == "llama2-chat") return InstructionFrame::llama2_chat;
    return std::nullopt;
}

std::string_view to_string(InstructionFrame frame) {
    switch (frame) {
    case InstructionFrame::plain: return "plain";
    case InstructionFrame::llama2_chat: return "llama2-chat";
    }
    return "plain";
}

HttpCompletionProvider::HttpCompletionProvider(std::string endpoint, CompletionOptions options)
    : CompletionProvider(options), endpoint_(std::move(endpoint)) {}

std::string HttpCompletionProvider::complete(const std::string& prompt) {
    const auto response = detail::post_json(endpoint_, nlohmann::json{{"prompt", prompt}},
                                            options().timeout, options().max_retries);
    if (!response.is_object() || !response.contains("completion") || !response["completion"].is_string())
        throw TransportError(endpoint_ + ": response lacks a string \"completion\"");
    return response["completion"].get<std::string>();
}

MockCompletionProvider::MockCompletionProvider(std::vector<Rule> rules, CompletionOptions options,
                                               std::string id)
    : CompletionProvider(options), rules_(std::move(rules)), id_(std::move(id)) {}

std::shared_ptr<MockCompletionProvider> MockCompletionProvider::from_file(const std::filesystem::path& path,
                                                                          CompletionOptions options) {
    std::ifstream in(path);
    if (!in) throw LoadError("cannot open mock completion fixture " + path.string(), 0);
    std::vector<Rule> rules;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        nlohmann::json rec;
        try {
            rec = nlohmann::json::parse(line);
        } catch (const nlohmann::json::parse_error& e) {
            throw LoadError(path.string() + ": " + e.what(), line_no);
        }
        if (!rec.is_object()) throw LoadError(path.string() + ": record is not an object", line_no);
        Rule rule;
        if (rec.contains("prompt_hash")) {
            rule.kind = Rule::Kind::hash;
            rule.key = rec["prompt_hash"].get<std::string>();
        } else if (rec.contains("contains")) {
            rule.kind = Rule::Kind::contains;
            rule.key = rec["contains"].get<std::string>();
        } else if (rec.value("default", false)) {
            rule.kind = Rule::Kind::fallback;
        } else {
            throw LoadError(path.string() + ": record needs prompt_hash, contains or default", line_no);
        }
        if (rec.contains("error")) {
            rule.fail = true;
        } else if (rec.contains("completion") && rec["completion"].is_string()) {
            rule.completion = rec["completion"].get<std::string>();
        } else {
            throw LoadError(path.string() + ": record needs a completion or an error", line_no);
        }
        rules.push_back(std::move(rule));
    }
    return std::make_shared<MockCompletionProvider>(std::move(rules), options, "mock:" + path.string());
}

std::string MockCompletionProvider::complete(const std::string& prompt) {
    ++calls_;
    const Rule* hit = nullptr;
    const auto hash = sha256_hex(prompt);
    for (const auto& r : rules_) {
        if (r.kind == Rule::Kind::hash && r.key == hash) {
            hit = &r;
            break;
        }
    }
    if (!hit) {
        for (const auto& r : rules_) {
            if (r.kind == Rule::Kind::contains && prompt.find(r.key) != std::string::npos) {
                hit = &r;
                break;
            }
        }
    }
    if (!hit) {
        for (const auto& r : rules_) {
            if (r.kind == Rule::Kind::fallback) {
                hit = &r;
                break;
            }
        }
    }
    if (!hit) return {};
    if (hit->fail) throw TransportError(id_ + ": simulated transport failure");
    return hit->completion;
}

std::shared_ptr<CompletionProvider> make_completion_provider(std::string_view provider_id,
                                                             const CompletionOptions& options) {
    if (provider_id.starts_with("mock:"))
        return MockCompletionProvider::from_file(std::string(provider_id.substr(5)), options);
    if (provider_id.starts_with("http://") || provider_id.starts_with("https://"))
        return std::make_shared<HttpCompletionProvider>(std::string(provider_id), options);
    throw InputError("unknown completion provider '" + std::string(provider_id) + "'");
}

} // namespace gcoach
