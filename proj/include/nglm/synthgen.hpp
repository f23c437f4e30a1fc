#pragma once

#include <cmath>
#include <cstdio>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "nglm/corpus.hpp"
#include "nglm/rng.hpp"

namespace nglm::synthgen {

/// A measured attribute whose value determines a severity word: value falls
/// into the interval [min,t1), [t1,t2), ..., [tk,max] and selects the
/// corresponding word (a boundary value joins the upper interval).
struct Attribute {
    std::string name;
    double min_value = 0.0;
    double max_value = 0.0;
    std::vector<double> thresholds;      // strictly increasing, inside (min, max)
    std::vector<std::string> severity_words;  // |thresholds| + 1 entries
    std::string unit;
    std::string mention_template;   // placeholders {name} {value} {unit}
    std::string severity_template;  // placeholder {w}

    void validate() const {
        if (severity_words.size() != thresholds.size() + 1)
            throw std::invalid_argument("invalid thresholds: attribute " + name +
                                        " needs |severity_words| = |thresholds| + 1");
        double prev = min_value;
        for (double t : thresholds) {
            if (!(prev < t)) throw std::invalid_argument("invalid thresholds: attribute " + name);
            prev = t;
        }
        if (!(prev < max_value)) throw std::invalid_argument("invalid thresholds: attribute " + name);
    }
};

struct GenConfig {
    std::size_t n_documents = 5000;
    std::uint64_t seed = 42;
    std::vector<Attribute> attributes;   // empty = default attribute set
    double kb_drop_prob = 0.3;
    double numeric_mention_prob = 0.5;
    std::size_t sentences_min = 4;
    std::size_t sentences_max = 6;
    std::string id_prefix = "doc";
};

/// EF with the non/mildly/severely scale, plus two invented attributes sized
/// so hypothesis generation averages 12 candidates per document.
inline std::vector<Attribute> default_attributes() {
    return {
        {"ef", 10.0, 75.0, {40.0, 55.0}, {"severely", "mildly", "non"}, "%",
         "the {name} is {value} {unit} .", "the left ventricle is {w} dilated ."},
        {"edv", 60.0, 260.0, {100.0, 130.0, 160.0, 190.0, 220.0},
         {"tiny", "small", "normal", "large", "huge", "massive"}, "ml",
         "the {name} is {value} {unit} .", "the cavity appears {w} in size ."},
        {"pg", 2.0, 40.0, {8.0, 14.0, 20.0, 27.0, 33.0},
         {"trivial", "mild", "moderate", "significant", "severe", "critical"}, "mmhg",
         "the {name} is {value} {unit} .", "there is {w} tricuspid regurgitation ."},
    };
}

inline const std::vector<std::string>& filler_sentences() {
    static const std::vector<std::string> fillers = {
        "no other abnormality is seen .",
        "the patient was in sinus rhythm .",
        "image quality was adequate .",
        "the pericardium is unremarkable .",
        "valves are structurally intact .",
        "no thrombus is identified .",
    };
    return fillers;
}

inline const std::string& severity_word(const Attribute& attr, double value) {
    std::size_t idx = 0;
    for (double t : attr.thresholds)
        if (value >= t) ++idx;
    return attr.severity_words[idx];
}

inline std::string format_value(double value) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.1f", value);
    return buf;
}

namespace detail {

inline void append_template(std::vector<std::string>& out, const std::string& tpl,
                            const Attribute& attr, const std::string& value,
                            const std::string& word) {
    std::string current;
    auto flush = [&] {
        if (current.empty()) return;
        if (current == "{name}") out.push_back(attr.name);
        else if (current == "{value}") out.push_back(value);
        else if (current == "{unit}") out.push_back(attr.unit);
        else if (current == "{w}") out.push_back(word);
        else out.push_back(current);
        current.clear();
    };
    for (char c : tpl) {
        if (c == ' ') flush();
        else current += c;
    }
    flush();
}

}  // namespace detail

/// Confusion sets are exactly the severity-word lists of the configured
/// attributes.
inline std::vector<std::vector<std::string>> confusion_sets(const GenConfig& config) {
    const auto attrs = config.attributes.empty() ? default_attributes() : config.attributes;
    std::vector<std::vector<std::string>> sets;
    for (const auto& attr : attrs) sets.push_back(attr.severity_words);
    return sets;
}

/// Draws attribute values uniformly (rounded to one decimal), renders the
/// severity sentence for each attribute, mentions the raw number in-text with
/// numeric_mention_prob, and drops each KB tuple with kb_drop_prob. Filler
/// sentences pad documents into the configured sentence range. Fully
/// determined by the seed.
inline std::vector<corpus::Document> generate(const GenConfig& config) {
    if (config.n_documents == 0) throw std::invalid_argument("n_documents must be positive");
    if (config.kb_drop_prob < 0.0 || config.kb_drop_prob > 1.0)
        throw std::invalid_argument("kb_drop_prob out of range");
    if (config.numeric_mention_prob < 0.0 || config.numeric_mention_prob > 1.0)
        throw std::invalid_argument("numeric_mention_prob out of range");
    if (config.sentences_min > config.sentences_max)
        throw std::invalid_argument("sentences_per_doc range inverted");
    const auto attrs = config.attributes.empty() ? default_attributes() : config.attributes;
    for (const auto& attr : attrs) attr.validate();

    Rng rng(config.seed);
    std::vector<corpus::Document> docs;
    docs.reserve(config.n_documents);

    char idbuf[64];
    for (std::size_t n = 0; n < config.n_documents; ++n) {
        corpus::Document doc;
        std::snprintf(idbuf, sizeof idbuf, "%s-%05zu", config.id_prefix.c_str(), n);
        doc.id = idbuf;

        std::size_t sentences = 0;
        for (const auto& attr : attrs) {
            const double raw = rng.uniform(attr.min_value, attr.max_value);
            const double value = std::round(raw * 10.0) / 10.0;
            const std::string value_str = format_value(value);
            const std::string& word = severity_word(attr, value);

            if (rng.uniform() < config.numeric_mention_prob) {
                detail::append_template(doc.tokens, attr.mention_template, attr, value_str, word);
                ++sentences;
            }
            detail::append_template(doc.tokens, attr.severity_template, attr, value_str, word);
            ++sentences;

            if (rng.uniform() >= config.kb_drop_prob)
                doc.kb.push_back({attr.name, value_str});
        }

        std::size_t target = config.sentences_min +
                             static_cast<std::size_t>(rng.below(config.sentences_max -
                                                                config.sentences_min + 1));
        const auto& fillers = filler_sentences();
        while (sentences < target) {
            const auto& filler = fillers[rng.below(fillers.size())];
            detail::append_template(doc.tokens, filler, attrs[0], "", "");
            ++sentences;
        }
        docs.push_back(std::move(doc));
    }
    return docs;
}

struct CorruptResult {
    std::vector<corpus::Document> documents;
    std::vector<corpus::GoldRecord> gold;
};

/// A seeded fraction rho of documents receive exactly one substitution: a
/// uniformly chosen confusable position replaced by a uniformly chosen other
/// member of its set. Everything else passes through unchanged.
inline CorruptResult corrupt(const std::vector<corpus::Document>& docs,
                             const std::vector<std::vector<std::string>>& sets, double rho,
                             std::uint64_t seed) {
    if (rho < 0.0 || rho > 1.0) throw std::invalid_argument("rho out of range");
    std::unordered_map<std::string, int> index;
    for (std::size_t s = 0; s < sets.size(); ++s)
        for (const auto& member : sets[s]) {
            if (!index.emplace(member, static_cast<int>(s)).second)
                throw std::invalid_argument("token in more than one confusion set: " + member);
        }
    auto set_of = [&index](const std::string& token) {
        auto it = index.find(token);
        return it == index.end() ? -1 : it->second;
    };

    Rng rng(seed);
    CorruptResult out;
    out.documents.reserve(docs.size());
    for (const auto& doc : docs) {
        corpus::Document copy = doc;
        corpus::GoldRecord rec;
        rec.id = doc.id;

        if (rng.uniform() < rho) {
            std::vector<std::size_t> positions;
            for (std::size_t i = 0; i < doc.tokens.size(); ++i)
                if (set_of(doc.tokens[i]) >= 0) positions.push_back(i);
            if (!positions.empty()) {
                const std::size_t pos = positions[rng.below(positions.size())];
                const auto& members = sets[static_cast<std::size_t>(set_of(doc.tokens[pos]))];
                std::vector<std::string> alternatives;
                for (const auto& m : members)
                    if (m != doc.tokens[pos]) alternatives.push_back(m);
                const std::string& replacement = alternatives[rng.below(alternatives.size())];

                copy.corrupted = true;
                copy.gold_tokens = doc.tokens;
                copy.tokens[pos] = replacement;
                rec.corrupted = true;
                rec.position = pos;
                rec.original = doc.tokens[pos];
                rec.substituted = replacement;
            }
        }
        out.documents.push_back(std::move(copy));
        out.gold.push_back(std::move(rec));
    }
    return out;
}

}  // namespace nglm::synthgen
