#pragma once

#include <atomic>
#include <chrono>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace gcoach {

// How a system prompt and user text are framed for a particular model.
enum class InstructionFrame {
    plain,       // "<system>\n\nText: <text>"
    llama2_chat, // "<s>[INST] <<SYS>> <system> <</SYS>> Text: <text> [/INST]"
};

std::optional<InstructionFrame> parse_instruction_frame(std::string_view name);
std::string_view to_string(InstructionFrame frame);

struct CompletionOptions {
    InstructionFrame frame = InstructionFrame::plain;
    std::chrono::milliseconds timeout{30000};
    int max_retries = 2;
};

class CompletionProvider {
public:
    explicit CompletionProvider(CompletionOptions options = {}) : options_(options) {}
    virtual ~CompletionProvider() = default;

    virtual std::string id() const = 0;

    // Throws TransportError when the provider cannot be reached after retries.
    virtual std::string complete(const std::string& prompt) = 0;

    const CompletionOptions& options() const noexcept { return options_; }
    InstructionFrame frame() const noexcept { return options_.frame; }

private:
    CompletionOptions options_;
};

// POST {"prompt": ...} -> {"completion": ...}
class HttpCompletionProvider final : public CompletionProvider {
public:
    HttpCompletionProvider(std::string endpoint, CompletionOptions options = {});

    std::string id() const override { return endpoint_; }
    std::string complete(const std::string& prompt) override;

private:
    std::string endpoint_;
};

// Canned completions read from a line-delimited fixture file. Records:
//   {"prompt_hash": <sha256 of prompt>, "completion": ...}
//   {"contains": <substring of prompt>, "completion": ...}
//   {"default": true, "completion": ...}
// Any record may carry "error": "transport" instead of a completion to
// simulate an outage. Hash records win over substring records, which are
// tried in file order; unmatched prompts complete to "".
class MockCompletionProvider final : public CompletionProvider {
public:
    struct Rule {
        enum class Kind { hash, contains, fallback } kind = Kind::fallback;
        std::string key;
        std::string completion;
        bool fail = false;
    };

    explicit MockCompletionProvider(std::vector<Rule> rules, CompletionOptions options = {},
                                    std::string id = "mock:inline");
    static std::shared_ptr<MockCompletionProvider> from_file(const std::filesystem::path& path,
                                                             CompletionOptions options = {});

    std::string id() const override { return id_; }
    std::string complete(const std::string& prompt) override;

    std::size_t calls() const noexcept { return calls_.load(); }

private:
    std::vector<Rule> rules_;
    std::string id_;
    std::atomic<std::size_t> calls_{0};
};

// "mock:<fixture path>" or an http(s):// endpoint.
std::shared_ptr<CompletionProvider> make_completion_provider(std::string_view provider_id,
                                                             const CompletionOptions& options = {});

} // namespace gcoach
