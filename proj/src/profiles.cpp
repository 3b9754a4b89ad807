#include "muserag/profiles.hpp"

#include "muserag/errors.hpp"

#include <nlohmann/json.hpp>

#include <cstdlib>
#include <fstream>

namespace muserag {

using json = nlohmann::json;

namespace {

std::string env_or(const char* name, const std::string& fallback) {
    const char* value = std::getenv(name);
    return value && *value ? value : fallback;
}

GeneratorProfile parse_generator_profile(const std::string& name, const json& spec) {
    GeneratorProfile profile;
    std::string type = spec.value("type", "http");
    if (type == "mock") {
        profile.type = GeneratorProfile::Type::mock;
        profile.answer = spec.value("answer", "A");
    } else if (type == "scripted") {
        profile.type = GeneratorProfile::Type::scripted;
        profile.script_path = spec.at("script").get<std::string>();
    } else if (type == "http") {
        profile.type = GeneratorProfile::Type::http;
        profile.http.endpoint = spec.value("endpoint", std::string{});
        profile.http.model = spec.value("model", std::string{});
        profile.http.temperature = spec.value("temperature", 0.0);
        profile.http.max_tokens = spec.value("max_tokens", 64);
        profile.http.timeout_ms = spec.value("timeout_ms", 60000);
        profile.http.max_retries = spec.value("max_retries", 3);
        profile.http.backoff_ms = spec.value("backoff_ms", 100);
        profile.api_key_env = spec.value("api_key_env", std::string{});
    } else {
        throw ConfigError("generator profile \"" + name + "\" has unknown type \"" + type + "\"");
    }
    return profile;
}

EmbeddingProfile parse_embedding_profile(const std::string& name, const json& spec) {
    EmbeddingProfile profile;
    std::string type = spec.value("type", "http");
    if (type == "hash") {
        profile.type = EmbeddingProfile::Type::hash;
        profile.hash_dim = spec.value("dim", std::size_t{64});
    } else if (type == "http") {
        profile.type = EmbeddingProfile::Type::http;
        profile.http.endpoint = spec.value("endpoint", std::string{});
        profile.http.model = spec.value("model", std::string{});
        profile.http.timeout_ms = spec.value("timeout_ms", 30000);
        profile.http.max_batch = spec.value("max_batch", std::size_t{16});
        profile.http.max_retries = spec.value("max_retries", 3);
        profile.http.backoff_ms = spec.value("backoff_ms", 100);
        profile.api_key_env = spec.value("api_key_env", std::string{});
    } else {
        throw ConfigError("embedding profile \"" + name + "\" has unknown type \"" + type + "\"");
    }
    return profile;
}

} // namespace

ProfilesConfig load_profiles(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open profiles config: " + path);
    json spec;
    try {
        spec = json::parse(in);
    } catch (const json::exception& e) {
        throw ParseError(std::string("bad profiles config: ") + e.what());
    }

    ProfilesConfig config;
    try {
        json generators = spec.value("generators", json::object());
        for (const auto& [name, value] : generators.items()) {
            config.generators.emplace(name, parse_generator_profile(name, value));
        }
        json embeddings = spec.value("embeddings", json::object());
        for (const auto& [name, value] : embeddings.items()) {
            config.embeddings.emplace(name, parse_embedding_profile(name, value));
        }
    } catch (const json::exception& e) {
        throw ParseError(std::string("bad profiles config: ") + e.what());
    }
    return config;
}

std::unique_ptr<Generator> make_generator(const ProfilesConfig& config, const std::string& spec) {
    if (spec == "mock") return std::make_unique<FixedGenerator>("A");
    if (spec.rfind("mock:", 0) == 0) {
        return std::make_unique<FixedGenerator>(spec.substr(5));
    }
    if (spec.rfind("script:", 0) == 0) {
        return std::make_unique<ScriptedGenerator>(ScriptedGenerator::from_file(spec.substr(7)));
    }

    auto it = config.generators.find(spec);
    if (it == config.generators.end()) {
        throw ConfigError("unknown generator profile \"" + spec + "\"");
    }
    const GeneratorProfile& profile = it->second;
    switch (profile.type) {
        case GeneratorProfile::Type::mock:
            return std::make_unique<FixedGenerator>(profile.answer);
        case GeneratorProfile::Type::scripted:
            return std::make_unique<ScriptedGenerator>(
                ScriptedGenerator::from_file(profile.script_path));
        case GeneratorProfile::Type::http: {
            GeneratorConfig http = profile.http;
            http.endpoint = env_or("GENERATOR_BASE_URL", http.endpoint);
            http.api_key = env_or("GENERATOR_API_KEY",
                                  profile.api_key_env.empty()
                                      ? std::string{}
                                      : env_or(profile.api_key_env.c_str(), std::string{}));
            if (http.endpoint.empty()) {
                throw ConfigError("generator profile \"" + spec + "\" has no endpoint");
            }
            return std::make_unique<HttpGenerator>(http);
        }
    }
    throw ConfigError("unknown generator profile \"" + spec + "\"");
}

std::unique_ptr<Embedder> make_embedder(const ProfilesConfig& config, const std::string& spec) {
    if (spec == "hash") return std::make_unique<HashEmbedder>();
    if (spec.rfind("hash:", 0) == 0) {
        std::size_t dim = 0;
        try {
            dim = std::stoull(spec.substr(5));
        } catch (const std::exception&) {
            throw ConfigError("bad hash embedder dim in \"" + spec + "\"");
        }
        if (dim == 0) throw ConfigError("hash embedder dim must be >= 1");
        return std::make_unique<HashEmbedder>(dim);
    }

    auto it = config.embeddings.find(spec);
    if (it == config.embeddings.end()) {
        throw ConfigError("unknown embedding profile \"" + spec + "\"");
    }
    const EmbeddingProfile& profile = it->second;
    if (profile.type == EmbeddingProfile::Type::hash) {
        return std::make_unique<HashEmbedder>(profile.hash_dim);
    }
    EmbeddingClientConfig http = profile.http;
    http.endpoint = env_or("EMBEDDING_BASE_URL", http.endpoint);
    http.api_key = env_or("EMBEDDING_API_KEY",
                          profile.api_key_env.empty()
                              ? std::string{}
                              : env_or(profile.api_key_env.c_str(), std::string{}));
    if (http.endpoint.empty()) {
        throw ConfigError("embedding profile \"" + spec + "\" has no endpoint");
    }
    return std::make_unique<HttpEmbedder>(http);
}

} // namespace muserag
