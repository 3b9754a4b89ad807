#include "muserag/finetune_export.hpp"

#include "muserag/errors.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <set>

namespace muserag {

using json = nlohmann::json;

const char* to_string(ExportStyle style) { return style == ExportStyle::qa ? "qa" : "rag"; }

std::optional<ExportStyle> parse_export_style(const std::string& name) {
    if (name == "qa") return ExportStyle::qa;
    if (name == "rag") return ExportStyle::rag;
    return std::nullopt;
}

std::string fnv1a_hex(const std::string& data) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : data) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    char buf[20];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

namespace {

std::string assistant_target(const BenchmarkItem& item) {
    return std::string(1, item.answer_key) + ". " +
           item.options[static_cast<std::size_t>(item.answer_key - 'A')];
}

json record_to_json(const TrainingRecord& record) {
    json out = {{"style", to_string(record.style)},
                {"system", record.system},
                {"user", record.user},
                {"assistant", record.assistant},
                {"item_id", record.item_id}};
    if (!record.gold_passage_ids.empty()) out["gold_passage_ids"] = record.gold_passage_ids;
    return out;
}

ExportManifest write_records(std::vector<TrainingRecord> records, ExportStyle style,
                             std::vector<std::string> errors, std::set<std::string> seen,
                             const std::string& out_path) {
    std::sort(records.begin(), records.end(),
              [](const TrainingRecord& a, const TrainingRecord& b) { return a.item_id < b.item_id; });

    std::string payload;
    for (const TrainingRecord& record : records) {
        payload += record_to_json(record).dump();
        payload += '\n';
    }
    std::ofstream out(out_path, std::ios::binary);
    if (!out) throw IoError("cannot write export file: " + out_path);
    out << payload;
    if (!out) throw IoError("write failed: " + out_path);

    ExportManifest manifest;
    manifest.style = style;
    manifest.record_count = records.size();
    manifest.seen_doc_ids.assign(seen.begin(), seen.end());
    manifest.checksum = fnv1a_hex(payload);
    manifest.errors = std::move(errors);
    return manifest;
}

} // namespace

ExportManifest export_qa(const std::vector<BenchmarkItem>& items, const PromptTemplate& tmpl,
                         const std::string& out_path) {
    std::vector<TrainingRecord> records;
    records.reserve(items.size());
    std::set<std::string> seen;
    for (const BenchmarkItem& item : items) {
        TrainingRecord record;
        record.style = ExportStyle::qa;
        record.system = tmpl.system_text;
        record.user = assemble_prompt(item.question, item.options, nullptr, tmpl);
        record.assistant = assistant_target(item);
        record.item_id = item.item_id;
        records.push_back(std::move(record));
        for (const std::string& id : item.gold_passage_ids) seen.insert(doc_id_of_passage(id));
    }
    return write_records(std::move(records), ExportStyle::qa, {}, std::move(seen), out_path);
}

ExportManifest export_rag(const std::vector<BenchmarkItem>& items, const PassageStore& store,
                          const PromptTemplate& tmpl, const std::string& out_path) {
    std::vector<TrainingRecord> records;
    records.reserve(items.size());
    std::vector<std::string> errors;
    std::set<std::string> seen;
    for (const BenchmarkItem& item : items) {
        RetrievedContext context;
        try {
            context = gold_context(item.gold_passage_ids, store);
        } catch (const LookupError& e) {
            errors.push_back(item.item_id + ": " + e.what());
            continue;
        }
        TrainingRecord record;
        record.style = ExportStyle::rag;
        record.system = tmpl.system_text;
        record.user = assemble_prompt(item.question, item.options, &context, tmpl);
        record.assistant = assistant_target(item);
        record.item_id = item.item_id;
        record.gold_passage_ids = item.gold_passage_ids;
        records.push_back(std::move(record));
        for (const std::string& id : item.gold_passage_ids) seen.insert(doc_id_of_passage(id));
    }
    return write_records(std::move(records), ExportStyle::rag, std::move(errors), std::move(seen),
                         out_path);
}

std::vector<TrainingRecord> read_training_records(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open export file: " + path);
    std::vector<TrainingRecord> records;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        try {
            json r = json::parse(line);
            TrainingRecord record;
            std::string style = r.at("style").get<std::string>();
            auto parsed = parse_export_style(style);
            if (!parsed) throw ParseError("unknown export style \"" + style + "\"");
            record.style = *parsed;
            record.system = r.at("system").get<std::string>();
            record.user = r.at("user").get<std::string>();
            record.assistant = r.at("assistant").get<std::string>();
            record.item_id = r.at("item_id").get<std::string>();
            record.gold_passage_ids =
                r.value("gold_passage_ids", std::vector<std::string>{});
            records.push_back(std::move(record));
        } catch (const ParseError&) {
            throw;
        } catch (const json::exception& e) {
            throw ParseError("export file line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    return records;
}

json manifest_to_json(const ExportManifest& manifest) {
    // Advisory defaults for downstream trainers; nothing here is consumed by
    // this toolkit.
    json training_advisory = {
        {"epochs", 1},
        {"adapter", "lora"},
        {"lora_r", 16},
        {"lora_alpha", 16},
        {"lora_dropout", 0.1},
        {"quantization", "8bit"},
        {"batch_size", 2},
        {"gradient_accumulation_steps", 4},
        {"learning_rate", 3e-5},
        {"weight_decay", 0.005},
        {"warmup_ratio", 0.1},
        {"scheduler", "cosine"},
        {"optimizer", "adamw"},
    };
    return {{"style", to_string(manifest.style)},
            {"record_count", manifest.record_count},
            {"seen_doc_ids", manifest.seen_doc_ids},
            {"checksum", manifest.checksum},
            {"errors", manifest.errors},
            {"training_advisory", training_advisory}};
}

} // namespace muserag
