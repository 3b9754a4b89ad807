#include "muserag/tokenizer.hpp"

#include "muserag/errors.hpp"

#include <cctype>

namespace muserag {

namespace {

// Decodes the UTF-8 sequence starting at `pos`. Returns the byte length of the
// sequence and writes the code point, or returns 0 for a malformed sequence.
std::size_t decode_utf8(std::string_view s, std::size_t pos, char32_t& cp) {
    const auto byte = [&](std::size_t i) { return static_cast<unsigned char>(s[i]); };
    unsigned char lead = byte(pos);
    if (lead < 0x80) {
        cp = lead;
        return 1;
    }
    std::size_t len = 0;
    if ((lead & 0xE0) == 0xC0) {
        len = 2;
        cp = lead & 0x1F;
    } else if ((lead & 0xF0) == 0xE0) {
        len = 3;
        cp = lead & 0x0F;
    } else if ((lead & 0xF8) == 0xF0) {
        len = 4;
        cp = lead & 0x07;
    } else {
        return 0;
    }
    if (pos + len > s.size()) return 0;
    for (std::size_t i = 1; i < len; ++i) {
        unsigned char c = byte(pos + i);
        if ((c & 0xC0) != 0x80) return 0;
        cp = (cp << 6) | (c & 0x3F);
    }
    return len;
}

// Letters and digits form tokens. ASCII punctuation, whitespace and the common
// Unicode punctuation blocks separate them; any other non-ASCII code point is
// treated as a word character.
bool is_word_codepoint(char32_t cp) {
    if (cp < 0x80) return std::isalnum(static_cast<int>(cp)) != 0;
    if (cp <= 0x00BF) return false;                  // Latin-1 punctuation/controls
    if (cp == 0x00D7 || cp == 0x00F7) return false;  // multiplication/division signs
    if (cp >= 0x2000 && cp <= 0x206F) return false;  // general punctuation
    if (cp >= 0x2E00 && cp <= 0x2E7F) return false;  // supplemental punctuation
    if (cp >= 0x3000 && cp <= 0x303F) return false;  // CJK symbols and punctuation
    if (cp >= 0xFE30 && cp <= 0xFE4F) return false;  // CJK compatibility forms
    if (cp >= 0xFF01 && cp <= 0xFF0F) return false;  // fullwidth punctuation
    if (cp >= 0xFF1A && cp <= 0xFF20) return false;
    if (cp >= 0xFF3B && cp <= 0xFF40) return false;
    if (cp >= 0xFF5B && cp <= 0xFF65) return false;
    return true;
}

std::vector<TokenSpan> unicode_word_spans(std::string_view text) {
    std::vector<TokenSpan> spans;
    std::size_t pos = 0;
    std::size_t token_begin = 0;
    bool in_token = false;
    while (pos < text.size()) {
        char32_t cp = 0;
        std::size_t len = decode_utf8(text, pos, cp);
        bool word = len != 0 && is_word_codepoint(cp);
        if (len == 0) len = 1; // malformed byte acts as a separator
        if (word && !in_token) {
            in_token = true;
            token_begin = pos;
        } else if (!word && in_token) {
            in_token = false;
            spans.push_back({token_begin, pos});
        }
        pos += len;
    }
    if (in_token) spans.push_back({token_begin, text.size()});
    return spans;
}

std::vector<TokenSpan> whitespace_spans(std::string_view text) {
    std::vector<TokenSpan> spans;
    std::size_t pos = 0;
    while (pos < text.size()) {
        while (pos < text.size() && std::isspace(static_cast<unsigned char>(text[pos]))) ++pos;
        if (pos >= text.size()) break;
        std::size_t begin = pos;
        while (pos < text.size() && !std::isspace(static_cast<unsigned char>(text[pos]))) ++pos;
        spans.push_back({begin, pos});
    }
    return spans;
}

} // namespace

std::string TokenizerSpec::fingerprint() const {
    switch (kind) {
        case TokenizerKind::unicode_word: return "unicode_word.v1";
        case TokenizerKind::whitespace: return "whitespace.v1";
    }
    return "unicode_word.v1";
}

TokenizerSpec TokenizerSpec::from_fingerprint(const std::string& fp) {
    if (fp == "unicode_word.v1") return {TokenizerKind::unicode_word};
    if (fp == "whitespace.v1") return {TokenizerKind::whitespace};
    throw FormatError("unknown tokenizer fingerprint: " + fp);
}

TokenizerSpec TokenizerSpec::from_name(const std::string& name) {
    if (name == "unicode" || name == "unicode_word") return {TokenizerKind::unicode_word};
    if (name == "whitespace") return {TokenizerKind::whitespace};
    throw ConfigError("unknown tokenizer: " + name + " (expected unicode|whitespace)");
}

std::vector<TokenSpan> tokenize_spans(const TokenizerSpec& spec, std::string_view text) {
    switch (spec.kind) {
        case TokenizerKind::unicode_word: return unicode_word_spans(text);
        case TokenizerKind::whitespace: return whitespace_spans(text);
    }
    return {};
}

std::vector<std::string> tokenize(const TokenizerSpec& spec, std::string_view text) {
    std::vector<std::string> tokens;
    for (const TokenSpan& span : tokenize_spans(spec, text)) {
        tokens.emplace_back(text.substr(span.begin, span.end - span.begin));
    }
    return tokens;
}

std::size_t count_tokens(const TokenizerSpec& spec, std::string_view text) {
    return tokenize_spans(spec, text).size();
}

std::string index_term(std::string_view token) {
    std::string term(token);
    for (char& c : term) {
        c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    }
    return term;
}

std::vector<std::string> query_terms(const TokenizerSpec& spec, std::string_view query) {
    std::vector<std::string> terms;
    for (const TokenSpan& span : tokenize_spans(spec, query)) {
        terms.push_back(index_term(query.substr(span.begin, span.end - span.begin)));
    }
    return terms;
}

} // namespace muserag
