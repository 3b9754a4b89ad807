#pragma once

#include "muserag/corpus.hpp"
#include "muserag/evaluation.hpp"
#include "muserag/generation.hpp"

#include <string>
#include <vector>

namespace muserag {

enum class ExportStyle { qa, rag };

const char* to_string(ExportStyle style);
std::optional<ExportStyle> parse_export_style(const std::string& name);

// One supervised example. qa records condition on the question alone; rag
// records additionally carry the gold passages rendered into `user` exactly
// as the inference-time prompt would render them.
struct TrainingRecord {
    ExportStyle style = ExportStyle::qa;
    std::string system;
    std::string user;
    std::string assistant; // "<letter>. <answer text>"
    std::string item_id;
    std::vector<std::string> gold_passage_ids; // rag only
};

struct ExportManifest {
    ExportStyle style = ExportStyle::qa;
    std::size_t record_count = 0;
    std::vector<std::string> seen_doc_ids; // artists whose items were exported
    std::string checksum;                  // fnv1a-64 of the output file
    std::vector<std::string> errors;       // skipped items, one message each
};

ExportManifest export_qa(const std::vector<BenchmarkItem>& items, const PromptTemplate& tmpl,
                         const std::string& out_path);

// Items whose gold ids cannot all be resolved are skipped and listed in the
// manifest; everything else is exported.
ExportManifest export_rag(const std::vector<BenchmarkItem>& items, const PassageStore& store,
                          const PromptTemplate& tmpl, const std::string& out_path);

std::vector<TrainingRecord> read_training_records(const std::string& path);

nlohmann::json manifest_to_json(const ExportManifest& manifest);

std::string fnv1a_hex(const std::string& data);

} // namespace muserag
