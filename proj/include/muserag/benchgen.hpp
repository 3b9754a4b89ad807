#pragma once

#include "muserag/corpus.hpp"
#include "muserag/evaluation.hpp"
#include "muserag/generation.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

namespace muserag {

// A section rebuilt from its chunks, carrying the passage ids that compose it.
struct SectionRef {
    std::string doc_id;
    std::size_t section_ordinal = 0;
    std::string heading;
    std::string text;
    std::size_t token_count = 0;
    std::vector<std::string> passage_ids;
};

// Regroups a chunked store into whole sections (overlaps deduplicated).
std::vector<SectionRef> reconstruct_sections(const PassageStore& store);

struct ArtistRecord {
    std::string doc_id;
    std::string name;
    std::string abstract;
    std::vector<std::string> topics;
    std::vector<std::string> raw_genres;
    std::vector<std::string> normalized_genres;
    std::vector<std::string> genre_labels;
    std::optional<std::string> country;
    std::vector<SectionRef> eligible_sections;
};

std::vector<ArtistRecord> load_artist_meta(const std::string& path);

// Lowercases and strips spaces, '-' and '/'. Everything else is preserved.
std::string normalize_genre(std::string_view raw);

using GenreFrequency = std::unordered_map<std::string, std::size_t>; // normalized genre -> count
using GenreMapping = std::unordered_map<std::string, std::string>;   // normalized genre -> label

GenreFrequency load_genre_frequency(const std::string& path);
GenreMapping load_genre_mapping(const std::string& path);

// Keeps genres ranked in the top_n by frequency, maps them through the label
// table, and deduplicates (first occurrence wins). A ranked genre missing from
// the mapping is a ConfigError.
std::vector<std::string> map_genres(const std::vector<std::string>& normalized,
                                    const GenreFrequency& frequency, const GenreMapping& mapping,
                                    std::size_t top_n = 300);

std::vector<std::string> load_country_list(const std::string& path);

// Asks the generator for the artist's country and keeps the answer only when
// it is an exact member of the country list.
std::optional<std::string> extract_country(Generator& generator,
                                           const std::string& prompt_template,
                                           const std::string& abstract,
                                           const std::vector<std::string>& countries);

// Diversity-driven pick of n artists. Greedy: each step takes the candidate
// whose country (then genre label, then topic) is least represented among the
// already-selected set, breaking ties by overall pool rarity and finally by a
// seeded shuffle. Only records with at least one eligible section compete.
std::vector<ArtistRecord> select_artists(const std::vector<ArtistRecord>& records, std::size_t n,
                                         std::uint64_t seed);

struct CandidateQuestion {
    std::string artist_doc_id;
    std::vector<std::string> source_passage_ids;
    QuestionType question_type = QuestionType::factual;
    std::string stem;
    std::vector<std::string> options;
    char answer_key = 'A';
    std::optional<bool> music_relevant;
    std::optional<bool> faithful;
};

struct CandidateRejection {
    std::string artist_doc_id;
    QuestionType question_type = QuestionType::factual;
    std::string reason;
    std::string raw_response;
};

// Prompt files used by the LLM-assisted steps.
struct BenchgenPrompts {
    std::string extract_country;     // {abstract}
    std::string question_factual;    // {artist_name}, {section_heading}, {section_text}
    std::string question_contextual;
    std::string validate_relevance;  // {question}, {options}, {answer}
    std::string validate_faithful;   // {question}, {options}, {answer}, {section_text}

    static BenchgenPrompts load_dir(const std::string& dir);
};

struct QuestionOutcome {
    std::vector<CandidateQuestion> accepted;
    std::vector<CandidateRejection> rejected;
};

// One factual and one contextual question for the artist, generated from one
// section. The section must hold 500..2000 tokens.
QuestionOutcome generate_questions(Generator& generator, const BenchgenPrompts& prompts,
                                   const ArtistRecord& artist, const SectionRef& section,
                                   const TokenizerSpec& tokenizer);

// Records the two validation verdicts on the candidate. Unparseable judge
// output leaves the flag unset.
void validate_question(Generator& generator, const BenchgenPrompts& prompts,
                       CandidateQuestion& candidate, const std::string& section_text);

// Reassigns answer positions so each key letter is correct on exactly
// |items|/4 items; per-item answer text is unchanged. |items| must be
// divisible by 4.
std::vector<BenchmarkItem> balance_options(std::vector<BenchmarkItem> items, std::uint64_t seed);

struct BenchgenOptions {
    std::size_t artist_count = 500;
    std::uint64_t seed = 0;
    std::size_t top_genres = 300;
    std::size_t min_section_tokens = 500;
    std::size_t max_section_tokens = 2000;
    double seen_fraction = -1.0; // < 0 leaves the seen flag unset
};

struct BenchgenResult {
    std::vector<BenchmarkItem> items;
    std::size_t candidates_generated = 0;
    std::size_t candidates_rejected = 0;
    std::size_t candidates_excluded = 0;
    std::size_t candidates_needing_review = 0;
};

// Full pipeline: records -> selection -> question generation -> validation ->
// balancing. Every candidate and verdict is appended to the review queue file.
BenchgenResult build_benchmark(const PassageStore& store,
                               const std::vector<ArtistRecord>& artist_meta,
                               const GenreFrequency& frequency, const GenreMapping& mapping,
                               const std::vector<std::string>& countries,
                               const BenchgenPrompts& prompts, Generator& generator,
                               const BenchgenOptions& options,
                               const std::string& review_queue_path);

} // namespace muserag
