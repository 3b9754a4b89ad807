#include "muserag/benchgen.hpp"

#include "muserag/errors.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <array>
#include <cctype>
#include <fstream>
#include <limits>
#include <map>
#include <random>
#include <unordered_set>

namespace muserag {

using json = nlohmann::json;

// ---------------------------------------------------------------------------
// Section reconstruction
// ---------------------------------------------------------------------------

namespace {

bool parse_ordinals(const std::string& passage_id, std::size_t& section, std::size_t& chunk) {
    std::size_t chunk_mark = passage_id.rfind("#c");
    if (chunk_mark == std::string::npos) return false;
    std::size_t section_mark = passage_id.rfind("#s", chunk_mark);
    if (section_mark == std::string::npos) return false;
    try {
        section = std::stoull(passage_id.substr(section_mark + 2, chunk_mark - section_mark - 2));
        chunk = std::stoull(passage_id.substr(chunk_mark + 2));
    } catch (const std::exception&) {
        return false;
    }
    return true;
}

} // namespace

std::vector<SectionRef> reconstruct_sections(const PassageStore& store) {
    struct Chunk {
        std::size_t chunk_ordinal;
        const Passage* passage;
    };
    std::map<std::pair<std::string, std::size_t>, std::vector<Chunk>> grouped;
    for (const Passage& p : store.passages()) {
        std::size_t section = 0, chunk = 0;
        if (!parse_ordinals(p.passage_id, section, chunk)) {
            throw FormatError("passage_id does not follow the <doc>#s<n>#c<m> scheme: " +
                              p.passage_id);
        }
        grouped[{p.doc_id, section}].push_back({chunk, &p});
    }

    const TokenizerSpec& tokenizer = store.meta().tokenizer;
    std::vector<SectionRef> sections;
    sections.reserve(grouped.size());
    for (auto& [key, chunks] : grouped) {
        std::sort(chunks.begin(), chunks.end(),
                  [](const Chunk& a, const Chunk& b) { return a.chunk_ordinal < b.chunk_ordinal; });

        SectionRef section;
        section.doc_id = key.first;
        section.section_ordinal = key.second;
        section.heading = chunks.front().passage->section_heading;

        std::size_t covered = 0; // tokens of the section emitted so far
        for (const Chunk& chunk : chunks) {
            const Passage& p = *chunk.passage;
            section.passage_ids.push_back(p.passage_id);
            if (section.text.empty()) {
                section.text = p.text;
                covered = p.token_offset + p.token_count;
                continue;
            }
            // Skip the tokens this chunk shares with its predecessor.
            if (covered < p.token_offset) {
                throw IntegrityError("gap in chunk sequence at " + p.passage_id);
            }
            std::size_t already = covered - p.token_offset;
            if (already >= p.token_count) continue;
            auto spans = tokenize_spans(tokenizer, p.text);
            section.text += ' ';
            section.text += p.text.substr(spans[already].begin);
            covered = p.token_offset + p.token_count;
        }
        section.token_count = covered;
        sections.push_back(std::move(section));
    }
    return sections;
}

// ---------------------------------------------------------------------------
// Artist metadata and genre tables
// ---------------------------------------------------------------------------

std::vector<ArtistRecord> load_artist_meta(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open artist file: " + path);

    std::vector<ArtistRecord> records;
    std::unordered_set<std::string> seen;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        ArtistRecord record;
        try {
            json r = json::parse(line);
            record.doc_id = r.at("doc_id").get<std::string>();
            record.name = r.at("name").get<std::string>();
            record.abstract = r.value("abstract", std::string{});
            record.topics = r.value("topics", std::vector<std::string>{});
            record.raw_genres = r.value("raw_genres", std::vector<std::string>{});
        } catch (const json::exception& e) {
            throw ParseError("artist file line " + std::to_string(line_no) + ": " + e.what());
        }
        if (!seen.insert(record.doc_id).second) {
            throw IntegrityError("duplicate artist doc_id \"" + record.doc_id + "\" at line " +
                                 std::to_string(line_no));
        }
        records.push_back(std::move(record));
    }
    return records;
}

std::string normalize_genre(std::string_view raw) {
    std::string out;
    out.reserve(raw.size());
    for (char c : raw) {
        if (c == ' ' || c == '-' || c == '/') continue;
        if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
        out.push_back(c);
    }
    return out;
}

namespace {

std::vector<std::pair<std::string, std::string>> read_tsv(const std::string& path,
                                                          const char* what) {
    std::ifstream in(path);
    if (!in) throw IoError(std::string("cannot open ") + what + " file: " + path);
    std::vector<std::pair<std::string, std::string>> rows;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line[0] == '#') continue;
        std::size_t tab = line.find('\t');
        if (tab == std::string::npos) {
            throw ParseError(std::string(what) + " file line " + std::to_string(line_no) +
                             ": expected two tab-separated fields");
        }
        rows.emplace_back(line.substr(0, tab), line.substr(tab + 1));
    }
    return rows;
}

} // namespace

GenreFrequency load_genre_frequency(const std::string& path) {
    GenreFrequency freq;
    for (const auto& [genre, count] : read_tsv(path, "genre frequency")) {
        try {
            freq[normalize_genre(genre)] += std::stoull(count);
        } catch (const std::exception&) {
            throw ParseError("genre frequency for \"" + genre + "\" is not a number: " + count);
        }
    }
    return freq;
}

GenreMapping load_genre_mapping(const std::string& path) {
    GenreMapping mapping;
    for (const auto& [genre, label] : read_tsv(path, "genre mapping")) {
        mapping[normalize_genre(genre)] = normalize_genre(label);
    }
    return mapping;
}

std::vector<std::string> map_genres(const std::vector<std::string>& normalized,
                                    const GenreFrequency& frequency, const GenreMapping& mapping,
                                    std::size_t top_n) {
    std::vector<std::pair<std::string, std::size_t>> ranked(frequency.begin(), frequency.end());
    std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });
    if (ranked.size() > top_n) ranked.resize(top_n);
    std::unordered_set<std::string> top;
    for (const auto& [genre, _] : ranked) top.insert(genre);

    std::vector<std::string> labels;
    std::unordered_set<std::string> used;
    for (const std::string& genre : normalized) {
        if (!top.count(genre)) continue;
        auto it = mapping.find(genre);
        if (it == mapping.end()) {
            throw ConfigError("genre mapping has no label for top-ranked genre \"" + genre + "\"");
        }
        if (used.insert(it->second).second) labels.push_back(it->second);
    }
    return labels;
}

std::vector<std::string> load_country_list(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open country list: " + path);
    std::vector<std::string> countries;
    std::string line;
    while (std::getline(in, line)) {
        while (!line.empty() && (line.back() == '\r' || line.back() == '\n')) line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        countries.push_back(line);
    }
    return countries;
}

namespace {

std::string render_prompt(std::string_view format,
                          const std::vector<std::pair<std::string_view, std::string_view>>& values) {
    std::string out(format);
    for (const auto& [name, value] : values) {
        std::string key = "{" + std::string(name) + "}";
        std::size_t pos = 0;
        while ((pos = out.find(key, pos)) != std::string::npos) {
            out.replace(pos, key.size(), value);
            pos += value.size();
        }
    }
    return out;
}

std::string trimmed(const std::string& s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

} // namespace

std::optional<std::string> extract_country(Generator& generator,
                                           const std::string& prompt_template,
                                           const std::string& abstract,
                                           const std::vector<std::string>& countries) {
    if (trimmed(abstract).empty()) return std::nullopt;
    std::string prompt = render_prompt(prompt_template, {{"abstract", abstract}});
    std::string answer = trimmed(generator.complete({}, prompt));
    for (const std::string& country : countries) {
        if (country == answer) return country;
    }
    return std::nullopt;
}

// ---------------------------------------------------------------------------
// Artist selection
// ---------------------------------------------------------------------------

std::vector<ArtistRecord> select_artists(const std::vector<ArtistRecord>& records, std::size_t n,
                                         std::uint64_t seed) {
    std::vector<std::size_t> eligible;
    for (std::size_t i = 0; i < records.size(); ++i) {
        if (!records[i].eligible_sections.empty()) eligible.push_back(i);
    }
    if (n > eligible.size()) {
        throw InputError("requested " + std::to_string(n) + " artists but only " +
                         std::to_string(eligible.size()) + " have an eligible section (short by " +
                         std::to_string(n - eligible.size()) + ")");
    }

    std::unordered_map<std::string, std::size_t> pool_country, pool_genre, pool_topic;
    auto country_of = [](const ArtistRecord& r) { return r.country.value_or(std::string{}); };
    for (std::size_t i : eligible) {
        const ArtistRecord& r = records[i];
        ++pool_country[country_of(r)];
        for (const std::string& g : r.genre_labels) ++pool_genre[g];
        for (const std::string& t : r.topics) ++pool_topic[t];
    }

    std::mt19937_64 rng(seed);
    std::shuffle(eligible.begin(), eligible.end(), rng);

    std::unordered_map<std::string, std::size_t> sel_country, sel_genre, sel_topic;
    auto min_count = [](const std::unordered_map<std::string, std::size_t>& counts,
                        const std::vector<std::string>& keys) -> std::size_t {
        if (keys.empty()) return 0;
        std::size_t best = std::numeric_limits<std::size_t>::max();
        for (const std::string& key : keys) {
            auto it = counts.find(key);
            best = std::min(best, it == counts.end() ? 0 : it->second);
        }
        return best;
    };

    std::vector<ArtistRecord> selected;
    selected.reserve(n);
    std::vector<bool> taken(eligible.size(), false);
    for (std::size_t round = 0; round < n; ++round) {
        std::size_t best_pos = eligible.size();
        std::array<std::size_t, 6> best_key{};
        for (std::size_t pos = 0; pos < eligible.size(); ++pos) {
            if (taken[pos]) continue;
            const ArtistRecord& r = records[eligible[pos]];
            std::string country = country_of(r);
            std::array<std::size_t, 6> key = {
                sel_country.count(country) ? sel_country[country] : 0,
                pool_country[country],
                min_count(sel_genre, r.genre_labels),
                min_count(pool_genre, r.genre_labels),
                min_count(sel_topic, r.topics),
                min_count(pool_topic, r.topics),
            };
            if (best_pos == eligible.size() || key < best_key) {
                best_pos = pos;
                best_key = key;
            }
        }
        taken[best_pos] = true;
        const ArtistRecord& winner = records[eligible[best_pos]];
        ++sel_country[country_of(winner)];
        for (const std::string& g : winner.genre_labels) ++sel_genre[g];
        for (const std::string& t : winner.topics) ++sel_topic[t];
        selected.push_back(winner);
    }
    return selected;
}

// ---------------------------------------------------------------------------
// Question generation and validation
// ---------------------------------------------------------------------------

BenchgenPrompts BenchgenPrompts::load_dir(const std::string& dir) {
    auto read_file = [&](const char* name) {
        std::string path = dir + "/" + name;
        std::ifstream in(path);
        if (!in) throw IoError("cannot open prompt template: " + path);
        return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
    };
    BenchgenPrompts prompts;
    prompts.extract_country = read_file("extract_country.txt");
    prompts.question_factual = read_file("question_factual.txt");
    prompts.question_contextual = read_file("question_contextual.txt");
    prompts.validate_relevance = read_file("validate_music_relevance.txt");
    prompts.validate_faithful = read_file("validate_faithfulness.txt");
    return prompts;
}

namespace {

// Pulls the JSON object out of a possibly fenced LLM reply and checks it into
// a CandidateQuestion. Returns the rejection reason on failure.
std::optional<std::string> parse_candidate(const std::string& raw, CandidateQuestion& out) {
    std::size_t open = raw.find('{');
    std::size_t close = raw.rfind('}');
    if (open == std::string::npos || close == std::string::npos || close < open) {
        return "response contains no JSON object";
    }
    json record;
    try {
        record = json::parse(raw.substr(open, close - open + 1));
    } catch (const json::exception& e) {
        return std::string("invalid JSON: ") + e.what();
    }
    try {
        out.stem = record.at("question").get<std::string>();
        out.options = record.at("options").get<std::vector<std::string>>();
        if (out.options.size() != 4) {
            return "expected 4 options, got " + std::to_string(out.options.size());
        }
        std::string answer = record.at("answer").get<std::string>();
        std::string trimmed_answer = trimmed(answer);
        if (trimmed_answer.size() == 1 && trimmed_answer[0] >= 'A' && trimmed_answer[0] <= 'D') {
            out.answer_key = trimmed_answer[0];
        } else {
            std::size_t matches = 0, match_index = 0;
            for (std::size_t i = 0; i < out.options.size(); ++i) {
                if (out.options[i] == trimmed_answer) {
                    ++matches;
                    match_index = i;
                }
            }
            if (matches == 0) return "answer text is not among the options";
            if (matches > 1) return "answer text appears more than once among the options";
            out.answer_key = static_cast<char>('A' + match_index);
        }
        const std::string& answer_text = out.options[out.answer_key - 'A'];
        std::size_t occurrences = static_cast<std::size_t>(
            std::count(out.options.begin(), out.options.end(), answer_text));
        if (occurrences != 1) return "answer text appears " + std::to_string(occurrences) +
                                     " times among the options";
    } catch (const json::exception& e) {
        return std::string("missing field: ") + e.what();
    }
    return std::nullopt;
}

std::optional<bool> parse_yes_no(const std::string& raw) {
    std::string t = trimmed(raw);
    std::transform(t.begin(), t.end(), t.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    if (t.rfind("yes", 0) == 0) return true;
    if (t.rfind("no", 0) == 0) return false;
    return std::nullopt;
}

} // namespace

QuestionOutcome generate_questions(Generator& generator, const BenchgenPrompts& prompts,
                                   const ArtistRecord& artist, const SectionRef& section,
                                   const TokenizerSpec& tokenizer) {
    std::size_t tokens = count_tokens(tokenizer, section.text);
    if (tokens < 500 || tokens > 2000) {
        throw InputError("section has " + std::to_string(tokens) +
                         " tokens; question generation requires 500..2000");
    }

    QuestionOutcome outcome;
    const std::pair<QuestionType, const std::string*> rounds[] = {
        {QuestionType::factual, &prompts.question_factual},
        {QuestionType::contextual, &prompts.question_contextual},
    };
    for (const auto& [type, template_text] : rounds) {
        std::string prompt = render_prompt(*template_text, {{"artist_name", artist.name},
                                                            {"section_heading", section.heading},
                                                            {"section_text", section.text}});
        std::string raw = generator.complete({}, prompt);

        CandidateQuestion candidate;
        candidate.artist_doc_id = artist.doc_id;
        candidate.source_passage_ids = section.passage_ids;
        candidate.question_type = type;
        if (auto reason = parse_candidate(raw, candidate)) {
            outcome.rejected.push_back({artist.doc_id, type, *reason, raw});
        } else {
            outcome.accepted.push_back(std::move(candidate));
        }
    }
    return outcome;
}

void validate_question(Generator& generator, const BenchgenPrompts& prompts,
                       CandidateQuestion& candidate, const std::string& section_text) {
    std::string options;
    for (std::size_t i = 0; i < candidate.options.size(); ++i) {
        options += static_cast<char>('A' + i);
        options += ". ";
        options += candidate.options[i];
        options += '\n';
    }
    std::string answer = std::string(1, candidate.answer_key) + ". " +
                         candidate.options[candidate.answer_key - 'A'];

    candidate.music_relevant = parse_yes_no(generator.complete(
        {}, render_prompt(prompts.validate_relevance,
                          {{"question", candidate.stem}, {"options", options}, {"answer", answer}})));
    candidate.faithful = parse_yes_no(generator.complete(
        {}, render_prompt(prompts.validate_faithful, {{"question", candidate.stem},
                                                      {"options", options},
                                                      {"answer", answer},
                                                      {"section_text", section_text}})));
}

// ---------------------------------------------------------------------------
// Option balancing
// ---------------------------------------------------------------------------

std::vector<BenchmarkItem> balance_options(std::vector<BenchmarkItem> items, std::uint64_t seed) {
    if (items.size() % 4 != 0) {
        throw InputError("item count " + std::to_string(items.size()) +
                         " is not divisible by 4; cannot balance answer keys");
    }
    std::vector<char> targets;
    targets.reserve(items.size());
    for (char letter : {'A', 'B', 'C', 'D'}) {
        targets.insert(targets.end(), items.size() / 4, letter);
    }
    std::mt19937_64 rng(seed);
    std::shuffle(targets.begin(), targets.end(), rng);

    for (std::size_t i = 0; i < items.size(); ++i) {
        BenchmarkItem& item = items[i];
        std::size_t from = static_cast<std::size_t>(item.answer_key - 'A');
        std::size_t to = static_cast<std::size_t>(targets[i] - 'A');
        std::swap(item.options[from], item.options[to]);
        item.answer_key = targets[i];
    }
    return items;
}

// ---------------------------------------------------------------------------
// Pipeline
// ---------------------------------------------------------------------------

BenchgenResult build_benchmark(const PassageStore& store,
                               const std::vector<ArtistRecord>& artist_meta,
                               const GenreFrequency& frequency, const GenreMapping& mapping,
                               const std::vector<std::string>& countries,
                               const BenchgenPrompts& prompts, Generator& generator,
                               const BenchgenOptions& options,
                               const std::string& review_queue_path) {
    std::ofstream review(review_queue_path, std::ios::binary);
    if (!review) throw IoError("cannot write review queue: " + review_queue_path);

    auto sections = reconstruct_sections(store);
    std::map<std::string, std::vector<const SectionRef*>> sections_by_doc;
    for (const SectionRef& section : sections) {
        sections_by_doc[section.doc_id].push_back(&section);
    }

    std::vector<ArtistRecord> records = artist_meta;
    for (ArtistRecord& record : records) {
        record.normalized_genres.clear();
        for (const std::string& raw : record.raw_genres) {
            record.normalized_genres.push_back(normalize_genre(raw));
        }
        record.genre_labels =
            map_genres(record.normalized_genres, frequency, mapping, options.top_genres);
        record.country = extract_country(generator, prompts.extract_country, record.abstract,
                                         countries);
        record.eligible_sections.clear();
        auto it = sections_by_doc.find(record.doc_id);
        if (it != sections_by_doc.end()) {
            for (const SectionRef* section : it->second) {
                if (section->token_count >= options.min_section_tokens &&
                    section->token_count <= options.max_section_tokens) {
                    record.eligible_sections.push_back(*section);
                }
            }
        }
    }

    std::vector<ArtistRecord> selected =
        select_artists(records, options.artist_count, options.seed);

    std::optional<std::unordered_set<std::string>> seen_artists;
    if (options.seen_fraction >= 0.0) {
        std::vector<std::string> ids;
        for (const ArtistRecord& r : selected) ids.push_back(r.doc_id);
        std::sort(ids.begin(), ids.end());
        std::mt19937_64 rng(options.seed + 1);
        std::shuffle(ids.begin(), ids.end(), rng);
        std::size_t seen_count = static_cast<std::size_t>(
            std::min<double>(static_cast<double>(ids.size()),
                             std::ceil(options.seen_fraction * static_cast<double>(ids.size()))));
        seen_artists.emplace(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(seen_count));
    }

    BenchgenResult result;
    std::vector<BenchmarkItem> items;
    for (const ArtistRecord& artist : selected) {
        const SectionRef& section = artist.eligible_sections.front();
        QuestionOutcome outcome =
            generate_questions(generator, prompts, artist, section, store.meta().tokenizer);
        result.candidates_generated += outcome.accepted.size() + outcome.rejected.size();

        for (const CandidateRejection& rejection : outcome.rejected) {
            ++result.candidates_rejected;
            review << json{{"artist", rejection.artist_doc_id},
                           {"type", to_string(rejection.question_type)},
                           {"status", "rejected"},
                           {"reason", rejection.reason},
                           {"raw_response", rejection.raw_response}}
                          .dump()
                   << '\n';
        }
        for (CandidateQuestion& candidate : outcome.accepted) {
            validate_question(generator, prompts, candidate, section.text);

            std::string status;
            if (!candidate.music_relevant.has_value() || !candidate.faithful.has_value()) {
                status = "needs_review";
                ++result.candidates_needing_review;
            } else if (*candidate.music_relevant && *candidate.faithful) {
                status = "retained";
            } else {
                status = "excluded";
                ++result.candidates_excluded;
            }
            json entry = {{"artist", candidate.artist_doc_id},
                          {"type", to_string(candidate.question_type)},
                          {"status", status},
                          {"question", candidate.stem},
                          {"options", candidate.options},
                          {"answer_key", std::string(1, candidate.answer_key)}};
            entry["music_relevant"] =
                candidate.music_relevant ? json(*candidate.music_relevant) : json(nullptr);
            entry["faithful"] = candidate.faithful ? json(*candidate.faithful) : json(nullptr);
            review << entry.dump() << '\n';
            if (status != "retained") continue;

            BenchmarkItem item;
            item.item_id = candidate.artist_doc_id + "#" + to_string(candidate.question_type);
            item.question = candidate.stem;
            item.options = candidate.options;
            item.answer_key = candidate.answer_key;
            item.question_type = candidate.question_type;
            item.category = artist.topics.empty() ? "artist" : artist.topics.front();
            item.gold_passage_ids = candidate.source_passage_ids;
            if (seen_artists) item.seen = seen_artists->count(candidate.artist_doc_id) > 0;
            items.push_back(std::move(item));
        }
    }

    // Balancing needs a multiple of 4; trim deterministically from the tail.
    std::sort(items.begin(), items.end(),
              [](const BenchmarkItem& a, const BenchmarkItem& b) { return a.item_id < b.item_id; });
    items.resize(items.size() - items.size() % 4);
    result.items = balance_options(std::move(items), options.seed);
    return result;
}

} // namespace muserag
