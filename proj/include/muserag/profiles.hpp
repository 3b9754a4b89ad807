#pragma once

#include "muserag/dense_index.hpp"
#include "muserag/generation.hpp"

#include <map>
#include <memory>
#include <optional>
#include <string>

namespace muserag {

// Named endpoint/model bundles loaded from a config file. Keys never appear
// in the file, only the name of the environment variable that holds them.
struct GeneratorProfile {
    enum class Type { http, mock, scripted };
    Type type = Type::mock;
    GeneratorConfig http;
    std::string api_key_env;
    std::string answer = "A";  // mock
    std::string script_path;   // scripted
};

struct EmbeddingProfile {
    enum class Type { http, hash };
    Type type = Type::hash;
    EmbeddingClientConfig http;
    std::string api_key_env;
    std::size_t hash_dim = 64;
};

struct ProfilesConfig {
    std::map<std::string, GeneratorProfile> generators;
    std::map<std::string, EmbeddingProfile> embeddings;
};

ProfilesConfig load_profiles(const std::string& path);

// Resolves a spec string into a generator. Accepts inline forms — "mock",
// "mock:<answer>", "script:<path>" — or the name of a profile from the config.
// GENERATOR_BASE_URL / GENERATOR_API_KEY override http profile settings.
std::unique_ptr<Generator> make_generator(const ProfilesConfig& config, const std::string& spec);

// Inline forms: "hash", "hash:<dim>"; otherwise a named profile.
// EMBEDDING_BASE_URL / EMBEDDING_API_KEY override http profile settings.
std::unique_ptr<Embedder> make_embedder(const ProfilesConfig& config, const std::string& spec);

} // namespace muserag
