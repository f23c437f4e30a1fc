#pragma once

#include <string>
#include <vector>

#include "nglm/numtext.hpp"

namespace nglm::kb {

/// One <attribute, value> pair. A missing value is represented by an empty
/// string and drops the tuple from lexicalisation.
struct KbTuple {
    std::string attribute;
    std::string value;

    bool operator==(const KbTuple&) const = default;
};

/// Renders tuples as "attribute : value" token statements, joined in input
/// order. Values go through the standard tokenizer, so numeric surfaces keep
/// their one-token form.
inline std::vector<std::string> lexicalise(const std::vector<KbTuple>& tuples) {
    std::vector<std::string> out;
    for (const auto& tuple : tuples) {
        if (tuple.attribute.empty() || tuple.value.empty()) continue;
        for (auto& token : numtext::tokenize(tuple.attribute)) out.push_back(std::move(token));
        out.emplace_back(":");
        for (auto& token : numtext::tokenize(tuple.value)) out.push_back(std::move(token));
    }
    return out;
}

struct ConditionedDocument {
    std::vector<std::string> tokens;
    std::vector<char> loss_mask;
    std::size_t prefix_length = 0;  // lexicalised tuples plus the separator
};

/// Prefixes a document with its lexicalised KB and a `<sep>` marker. The
/// prefix, the separator, and the first document token are excluded from the
/// loss so the masked target set is exactly the target set of the same
/// document scored without a prefix.
inline ConditionedDocument condition(const std::vector<std::string>& doc_tokens,
                                     const std::vector<KbTuple>& tuples) {
    ConditionedDocument out;
    out.tokens = lexicalise(tuples);
    out.tokens.emplace_back(numtext::Vocab::kSep);
    out.prefix_length = out.tokens.size();
    out.tokens.insert(out.tokens.end(), doc_tokens.begin(), doc_tokens.end());

    out.loss_mask.assign(out.tokens.size(), 1);
    for (std::size_t i = 0; i < out.prefix_length; ++i) out.loss_mask[i] = 0;
    if (out.prefix_length < out.tokens.size()) out.loss_mask[out.prefix_length] = 0;
    return out;
}

}  // namespace nglm::kb
