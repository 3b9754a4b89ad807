#pragma once

// Shared helpers for the unit and acceptance suites: scratch directories,
// synthetic corpora, and a programmable generator.

#include "muserag/corpus.hpp"
#include "muserag/generation.hpp"

#include <atomic>
#include <cstdio>
#include <unistd.h>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <string>
#include <vector>

namespace fixtures {

class TempDir {
public:
    TempDir() {
        static std::atomic<unsigned> counter{0};
        path_ = std::filesystem::temp_directory_path() /
                ("muserag_test_" + std::to_string(::getpid()) + "_" +
                 std::to_string(counter.fetch_add(1)));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    std::string file(const std::string& name) const { return (path_ / name).string(); }
    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
};

inline void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    out << content;
}

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

// Space-joined pseudo-words drawn from a bounded vocabulary, e.g. "w03 w17 w03".
inline std::string random_words(std::mt19937_64& rng, std::size_t count, std::size_t vocab) {
    std::uniform_int_distribution<std::size_t> pick(0, vocab - 1);
    std::string text;
    for (std::size_t i = 0; i < count; ++i) {
        if (i) text += ' ';
        char buf[16];
        std::snprintf(buf, sizeof(buf), "w%03zu", pick(rng));
        text += buf;
    }
    return text;
}

inline muserag::Passage make_passage(const std::string& id, const std::string& text,
                                     const muserag::TokenizerSpec& tok = {}) {
    muserag::Passage p;
    p.passage_id = id;
    p.doc_id = id.substr(0, id.find('#'));
    p.doc_title = "Title of " + p.doc_id;
    p.text = text;
    p.token_count = muserag::count_tokens(tok, text);
    p.token_offset = 0;
    return p;
}

// Generator driven by a lambda; handy for answer policies that need to see
// the prompt.
class LambdaGenerator : public muserag::Generator {
public:
    using Fn = std::function<std::string(const std::string&, const std::string&)>;
    explicit LambdaGenerator(Fn fn) : fn_(std::move(fn)) {}

    std::string complete(const std::string& system_text, const std::string& user_prompt) override {
        return fn_(system_text, user_prompt);
    }

private:
    Fn fn_;
};

} // namespace fixtures
