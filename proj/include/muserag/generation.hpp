#pragma once

#include "muserag/retrieval.hpp"

#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace muserag {

// Prompt layout. Rendering is pure: same inputs, same string. The system text
// travels as the system message, everything else becomes the user message.
struct PromptTemplate {
    std::string system_text;
    std::string context_block_format;  // placeholders {index}, {title}, {text}
    std::string question_block_format; // placeholders {question}, {options}
    std::string answer_instruction;

    static PromptTemplate default_mcq();
};

// User-message content: context blocks (rank order) when present, then the
// question block, then the answer instruction. Throws InputError unless
// exactly 4 options are given.
std::string assemble_prompt(const std::string& question, const std::vector<std::string>& options,
                            const RetrievedContext* context, const PromptTemplate& tmpl);

struct GeneratorConfig {
    std::string endpoint; // full URL, e.g. http://host:port/v1/chat/completions
    std::string model;
    std::string api_key;
    double temperature = 0.0;
    int max_tokens = 64;
    int timeout_ms = 60000;
    int max_retries = 3;
    int backoff_ms = 100;
};

class Generator {
public:
    virtual ~Generator() = default;
    // Returns the raw completion text; throws UnavailableError once retries
    // are exhausted. Called concurrently by the evaluation worker pool, so
    // implementations must be safe for parallel calls.
    virtual std::string complete(const std::string& system_text,
                                 const std::string& user_prompt) = 0;
};

// Chat-completion client: {model, messages, temperature, max_tokens} in,
// assistant text out. Retries transport failures with exponential backoff.
class HttpGenerator : public Generator {
public:
    explicit HttpGenerator(GeneratorConfig config) : config_(std::move(config)) {}

    std::string complete(const std::string& system_text, const std::string& user_prompt) override;

    const GeneratorConfig& config() const { return config_; }

private:
    GeneratorConfig config_;
};

// Always answers the same string.
class FixedGenerator : public Generator {
public:
    explicit FixedGenerator(std::string reply) : reply_(std::move(reply)) {}

    std::string complete(const std::string&, const std::string&) override { return reply_; }

private:
    std::string reply_;
};

// Substring-triggered canned responses: first rule whose `contains` occurs in
// the user prompt wins, otherwise the default reply.
class ScriptedGenerator : public Generator {
public:
    struct Rule {
        std::string contains;
        std::string response;
    };

    ScriptedGenerator(std::vector<Rule> rules, std::string default_reply)
        : rules_(std::move(rules)), default_reply_(std::move(default_reply)) {}

    static ScriptedGenerator from_file(const std::string& path);

    std::string complete(const std::string&, const std::string& user_prompt) override;

private:
    std::vector<Rule> rules_;
    std::string default_reply_;
};

std::string generate(const GeneratorConfig& config, const std::string& prompt,
                     const std::string& system_text = {});

struct ChoiceVerdict {
    std::optional<char> parsed; // 'A'..'D'
    std::string raw_text;
    bool format_ok = false;
};

// Strict option-letter grammar, applied after stripping leading whitespace:
// a bare letter A-D, letter followed by ')' '.' ':', or "(X)". Anything else
// is a format deviation, never an exception.
ChoiceVerdict parse_choice(const std::string& raw);

} // namespace muserag
