#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace muserag {

enum class TokenizerKind {
    unicode_word, // runs of letters/digits; punctuation and whitespace separate
    whitespace,   // runs of non-whitespace bytes
};

// Byte range [begin, end) of one token within the text it came from.
struct TokenSpan {
    std::size_t begin = 0;
    std::size_t end = 0;
};

struct TokenizerSpec {
    TokenizerKind kind = TokenizerKind::unicode_word;

    // Stable identifier persisted in index headers; loading with a different
    // tokenizer configured is a format error.
    std::string fingerprint() const;
    static TokenizerSpec from_fingerprint(const std::string& fp);
    static TokenizerSpec from_name(const std::string& name);

    bool operator==(const TokenizerSpec&) const = default;
};

std::vector<TokenSpan> tokenize_spans(const TokenizerSpec& spec, std::string_view text);
std::vector<std::string> tokenize(const TokenizerSpec& spec, std::string_view text);
std::size_t count_tokens(const TokenizerSpec& spec, std::string_view text);

// Canonical term form for indexing and query matching (ASCII lowercase).
std::string index_term(std::string_view token);

std::vector<std::string> query_terms(const TokenizerSpec& spec, std::string_view query);

} // namespace muserag
