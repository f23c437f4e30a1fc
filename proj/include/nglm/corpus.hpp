#pragma once

#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "nglm/kb.hpp"

namespace nglm::corpus {

using json = nlohmann::ordered_json;

/// One corpus record: pre-tokenized text plus optional KB tuples. The
/// corrupted variants additionally carry the gold (uncorrupted) tokens.
struct Document {
    std::string id;
    std::vector<std::string> tokens;
    std::vector<kb::KbTuple> kb;
    bool corrupted = false;
    std::vector<std::string> gold_tokens;  // present iff corrupted
};

struct GoldRecord {
    std::string id;
    bool corrupted = false;
    std::size_t position = 0;
    std::string original;
    std::string substituted;
};

inline json document_to_json(const Document& doc, bool with_corruption) {
    json j;
    j["id"] = doc.id;
    j["tokens"] = doc.tokens;
    json kb_arr = json::array();
    for (const auto& tuple : doc.kb) kb_arr.push_back({{"attr", tuple.attribute}, {"value", tuple.value}});
    j["kb"] = kb_arr;
    if (with_corruption) {
        j["corrupted"] = doc.corrupted;
        if (doc.corrupted) j["gold_tokens"] = doc.gold_tokens;
    }
    return j;
}

inline Document document_from_json(const json& j) {
    Document doc;
    doc.id = j.at("id").get<std::string>();
    doc.tokens = j.at("tokens").get<std::vector<std::string>>();
    if (j.contains("kb")) {
        for (const auto& t : j.at("kb"))
            doc.kb.push_back({t.at("attr").get<std::string>(), t.at("value").get<std::string>()});
    }
    if (j.contains("corrupted")) doc.corrupted = j.at("corrupted").get<bool>();
    if (j.contains("gold_tokens"))
        doc.gold_tokens = j.at("gold_tokens").get<std::vector<std::string>>();
    return doc;
}

inline void write_jsonl(const std::string& path, const std::vector<Document>& docs,
                        bool with_corruption = false) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    for (const auto& doc : docs) out << document_to_json(doc, with_corruption).dump() << '\n';
}

inline std::vector<Document> read_jsonl(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open corpus: " + path);
    std::vector<Document> docs;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        try {
            docs.push_back(document_from_json(json::parse(line)));
        } catch (const json::exception& e) {
            throw std::runtime_error(path + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    return docs;
}

inline void write_confusion_sets(const std::string& path,
                                 const std::vector<std::vector<std::string>>& sets) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << json(sets).dump(2) << '\n';
}

inline std::vector<std::vector<std::string>> read_confusion_sets(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open confusion sets: " + path);
    json j = json::parse(in);
    return j.get<std::vector<std::vector<std::string>>>();
}

inline void write_gold(const std::string& path, const std::vector<GoldRecord>& records) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    for (const auto& rec : records) {
        json j;
        j["id"] = rec.id;
        j["corrupted"] = rec.corrupted;
        if (rec.corrupted) {
            j["position"] = rec.position;
            j["original"] = rec.original;
            j["substituted"] = rec.substituted;
        }
        out << j.dump() << '\n';
    }
}

inline std::vector<GoldRecord> read_gold(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open gold records: " + path);
    std::vector<GoldRecord> records;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        json j = json::parse(line);
        GoldRecord rec;
        rec.id = j.at("id").get<std::string>();
        rec.corrupted = j.at("corrupted").get<bool>();
        if (rec.corrupted) {
            rec.position = j.at("position").get<std::size_t>();
            rec.original = j.at("original").get<std::string>();
            rec.substituted = j.at("substituted").get<std::string>();
        }
        records.push_back(std::move(rec));
    }
    return records;
}

}  // namespace nglm::corpus
