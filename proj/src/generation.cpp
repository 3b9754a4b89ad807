#include "muserag/generation.hpp"

#include "muserag/errors.hpp"
#include "muserag/http_util.hpp"

#include <httplib.h>
#include <nlohmann/json.hpp>

#include <cctype>
#include <fstream>
#include <thread>

namespace muserag {

using json = nlohmann::json;

namespace {

// Replaces every "{name}" with its value; unknown placeholders stay verbatim.
std::string render(std::string_view format,
                   const std::vector<std::pair<std::string_view, std::string_view>>& values) {
    std::string out;
    out.reserve(format.size());
    std::size_t pos = 0;
    while (pos < format.size()) {
        std::size_t open = format.find('{', pos);
        if (open == std::string_view::npos) {
            out.append(format.substr(pos));
            break;
        }
        std::size_t close = format.find('}', open);
        if (close == std::string_view::npos) {
            out.append(format.substr(pos));
            break;
        }
        out.append(format.substr(pos, open - pos));
        std::string_view key = format.substr(open + 1, close - open - 1);
        bool replaced = false;
        for (const auto& [name, value] : values) {
            if (name == key) {
                out.append(value);
                replaced = true;
                break;
            }
        }
        if (!replaced) out.append(format.substr(open, close - open + 1));
        pos = close + 1;
    }
    return out;
}

} // namespace

PromptTemplate PromptTemplate::default_mcq() {
    PromptTemplate t;
    t.system_text =
        "You are a music expert answering multiple-choice questions. "
        "Respond with only the letter of the correct option.";
    t.context_block_format = "[{index}] {title}\n{text}\n\n";
    t.question_block_format = "Question: {question}\n{options}\n";
    t.answer_instruction = "Answer with only the option letter (A, B, C, or D).";
    return t;
}

std::string assemble_prompt(const std::string& question, const std::vector<std::string>& options,
                            const RetrievedContext* context, const PromptTemplate& tmpl) {
    if (options.size() != 4) {
        throw InputError("expected exactly 4 options, got " + std::to_string(options.size()));
    }

    std::string prompt;
    if (context) {
        for (std::size_t i = 0; i < context->items.size(); ++i) {
            const Passage& p = context->items[i].passage;
            std::string title = p.doc_title.empty() ? p.doc_id : p.doc_title;
            if (!p.section_heading.empty()) title += " / " + p.section_heading;
            prompt += render(tmpl.context_block_format, {{"index", std::to_string(i + 1)},
                                                         {"title", title},
                                                         {"text", p.text}});
        }
    }

    std::string rendered_options;
    static constexpr char kLabels[4] = {'A', 'B', 'C', 'D'};
    for (std::size_t i = 0; i < 4; ++i) {
        rendered_options += kLabels[i];
        rendered_options += ". ";
        rendered_options += options[i];
        if (i + 1 < 4) rendered_options += '\n';
    }
    prompt += render(tmpl.question_block_format,
                     {{"question", question}, {"options", rendered_options}});
    prompt += tmpl.answer_instruction;
    return prompt;
}

std::string HttpGenerator::complete(const std::string& system_text,
                                    const std::string& user_prompt) {
    SplitUrl url = split_url(config_.endpoint);

    json messages = json::array();
    if (!system_text.empty()) {
        messages.push_back({{"role", "system"}, {"content", system_text}});
    }
    messages.push_back({{"role", "user"}, {"content", user_prompt}});
    json payload = {{"model", config_.model},
                    {"messages", messages},
                    {"temperature", config_.temperature},
                    {"max_tokens", config_.max_tokens}};

    std::string body;
    int attempt = 0;
    for (;;) {
        httplib::Client client(url.host_port);
        client.set_connection_timeout(config_.timeout_ms / 1000,
                                      (config_.timeout_ms % 1000) * 1000);
        client.set_read_timeout(config_.timeout_ms / 1000, (config_.timeout_ms % 1000) * 1000);
        httplib::Headers headers;
        if (!config_.api_key.empty()) {
            headers.emplace("Authorization", "Bearer " + config_.api_key);
        }
        auto res = client.Post(url.path, headers, payload.dump(), "application/json");
        if (res && res->status == 200) {
            body = res->body;
            break;
        }
        bool transport_failure = !res || res->status >= 500;
        if (!transport_failure) {
            throw UnavailableError("generator rejected request (status " +
                                   std::to_string(res->status) + ")");
        }
        if (attempt >= config_.max_retries) {
            throw UnavailableError("generator unreachable after " + std::to_string(attempt + 1) +
                                   " attempts: " + config_.endpoint);
        }
        std::this_thread::sleep_for(std::chrono::milliseconds(config_.backoff_ms << attempt));
        ++attempt;
    }

    try {
        json response = json::parse(body);
        return response.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const json::exception& e) {
        throw ProtocolError(std::string("malformed generator response: ") + e.what());
    }
}

ScriptedGenerator ScriptedGenerator::from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open generator script: " + path);

    std::vector<Rule> rules;
    std::string default_reply;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        try {
            json record = json::parse(line);
            if (record.contains("default")) {
                default_reply = record.at("default").get<std::string>();
            } else {
                rules.push_back({record.at("contains").get<std::string>(),
                                 record.at("response").get<std::string>()});
            }
        } catch (const json::exception& e) {
            throw ParseError("generator script line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    return ScriptedGenerator(std::move(rules), std::move(default_reply));
}

std::string ScriptedGenerator::complete(const std::string&, const std::string& user_prompt) {
    for (const Rule& rule : rules_) {
        if (user_prompt.find(rule.contains) != std::string::npos) return rule.response;
    }
    return default_reply_;
}

std::string generate(const GeneratorConfig& config, const std::string& prompt,
                     const std::string& system_text) {
    HttpGenerator gen(config);
    return gen.complete(system_text, prompt);
}

ChoiceVerdict parse_choice(const std::string& raw) {
    ChoiceVerdict verdict;
    verdict.raw_text = raw;

    std::size_t i = 0;
    while (i < raw.size() && std::isspace(static_cast<unsigned char>(raw[i]))) ++i;
    auto is_option = [](char c) { return c >= 'A' && c <= 'D'; };
    auto accept = [&](char letter) {
        verdict.parsed = letter;
        verdict.format_ok = true;
    };

    if (i < raw.size() && raw[i] == '(') {
        if (i + 2 < raw.size() && is_option(raw[i + 1]) && raw[i + 2] == ')') accept(raw[i + 1]);
        return verdict;
    }
    if (i >= raw.size() || !is_option(raw[i])) return verdict;

    std::size_t next = i + 1;
    if (next >= raw.size()) {
        accept(raw[i]);
        return verdict;
    }
    char sep = raw[next];
    if (sep == ')' || sep == '.' || sep == ':') {
        accept(raw[i]);
        return verdict;
    }
    // Bare letter with nothing but trailing whitespace.
    std::size_t j = next;
    while (j < raw.size() && std::isspace(static_cast<unsigned char>(raw[j]))) ++j;
    if (j == raw.size()) accept(raw[i]);
    return verdict;
}

} // namespace muserag
