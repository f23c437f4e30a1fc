#pragma once

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace nglm::numtext {

/// Value carried alongside a token. Non-numeric tokens carry (0.0, false).
struct NumericValue {
    double value = 0.0;
    bool is_numeric = false;

    bool operator==(const NumericValue&) const = default;
};

inline bool is_digit(char c) { return c >= '0' && c <= '9'; }

/// Accepts [+|-] digits [. digits], with one optional trailing '%' stripped
/// before parsing (the value is not divided by 100). Anything else yields
/// (0.0, false).
inline NumericValue parse_numeric(const std::string& token) {
    std::string body = token;
    if (body.size() > 1 && body.back() == '%') body.pop_back();
    if (body.empty()) return {};

    std::size_t i = 0;
    if (body[i] == '+' || body[i] == '-') ++i;
    std::size_t int_digits = 0;
    while (i < body.size() && is_digit(body[i])) { ++i; ++int_digits; }
    if (int_digits == 0) return {};
    if (i < body.size() && body[i] == '.') {
        ++i;
        std::size_t frac_digits = 0;
        while (i < body.size() && is_digit(body[i])) { ++i; ++frac_digits; }
        if (frac_digits == 0) return {};
    }
    if (i != body.size()) return {};
    return {std::strtod(body.c_str(), nullptr), true};
}

namespace detail {

inline bool splits_always(char c) {
    return c == ':' || c == ',' || c == '(' || c == ')';
}

inline std::string lowered(std::string s) {
    for (char& c : s)
        if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
    return s;
}

}  // namespace detail

/// Whitespace split, then punctuation `: . , % ( )` becomes standalone unless
/// it belongs to a numeric literal: '.' is kept between digits, '%' is kept
/// directly after a complete number. Alphabetic characters are lowercased.
inline std::vector<std::string> tokenize(const std::string& text) {
    std::vector<std::string> out;
    std::string current;
    auto flush = [&] {
        if (!current.empty()) {
            out.push_back(detail::lowered(current));
            current.clear();
        }
    };

    for (std::size_t i = 0; i < text.size(); ++i) {
        const char c = text[i];
        if (std::isspace(static_cast<unsigned char>(c))) {
            flush();
        } else if (detail::splits_always(c)) {
            flush();
            out.emplace_back(1, c);
        } else if (c == '.') {
            const bool digit_before = !current.empty() && is_digit(current.back());
            const bool digit_after = i + 1 < text.size() && is_digit(text[i + 1]);
            if (digit_before && digit_after) {
                current += c;
            } else {
                flush();
                out.emplace_back(1, c);
            }
        } else if (c == '%') {
            if (!current.empty() && parse_numeric(current).is_numeric) {
                current += c;
            } else {
                flush();
                out.emplace_back(1, c);
            }
        } else {
            current += c;
        }
    }
    flush();
    return out;
}

/// Frequency-ranked token table with reserved ids up front. `<unk>` and
/// `<num_unk>` are always present; callers may reserve further tokens
/// (the language model adds `<sep>`). Reserved tokens sit outside the V
/// budget. Immutable once built.
class Vocab {
public:
    static constexpr const char* kUnk = "<unk>";
    static constexpr const char* kNumUnk = "<num_unk>";
    static constexpr const char* kSep = "<sep>";

    Vocab() = default;

    explicit Vocab(std::vector<std::string> id_to_token) : id_to_token_(std::move(id_to_token)) {
        for (std::size_t i = 0; i < id_to_token_.size(); ++i)
            token_to_id_.emplace(id_to_token_[i], static_cast<int>(i));
        if (lookup(kUnk) != 0 || lookup(kNumUnk) != 1)
            throw std::invalid_argument("vocab must reserve <unk>=0, <num_unk>=1");
        sep_id_ = lookup(kSep);
    }

    int unk_id() const { return 0; }
    int num_unk_id() const { return 1; }
    int sep_id() const { return sep_id_; }  // -1 when not reserved

    int size() const { return static_cast<int>(id_to_token_.size()); }

    /// id for the token, or -1 if out of vocabulary.
    int lookup(const std::string& token) const {
        auto it = token_to_id_.find(token);
        return it == token_to_id_.end() ? -1 : it->second;
    }

    const std::string& surface(int id) const { return id_to_token_.at(static_cast<std::size_t>(id)); }
    const std::vector<std::string>& entries() const { return id_to_token_; }

private:
    std::vector<std::string> id_to_token_;
    std::unordered_map<std::string, int> token_to_id_;
    int sep_id_ = -1;
};

/// Keeps the V most frequent surface tokens, ties broken by first occurrence.
/// `reserve_sep` additionally reserves `<sep>` at id 2.
inline Vocab build_vocab(const std::vector<std::vector<std::string>>& corpus,
                         std::size_t v, bool reserve_sep = false) {
    if (v == 0) throw std::invalid_argument("empty vocabulary budget");
    if (corpus.empty()) throw std::invalid_argument("empty corpus");

    std::unordered_map<std::string, std::size_t> freq;
    std::unordered_map<std::string, std::size_t> first_seen;
    std::size_t position = 0;
    for (const auto& doc : corpus) {
        for (const auto& token : doc) {
            first_seen.emplace(token, position);
            ++position;
            ++freq[token];
        }
    }

    std::vector<std::string> ranked;
    ranked.reserve(freq.size());
    for (const auto& [token, count] : freq) ranked.push_back(token);
    std::sort(ranked.begin(), ranked.end(), [&](const std::string& a, const std::string& b) {
        const std::size_t fa = freq[a], fb = freq[b];
        if (fa != fb) return fa > fb;
        return first_seen[a] < first_seen[b];
    });
    if (ranked.size() > v) ranked.resize(v);

    std::vector<std::string> entries = {Vocab::kUnk, Vocab::kNumUnk};
    if (reserve_sep) entries.push_back(Vocab::kSep);
    for (auto& token : ranked)
        if (token != Vocab::kUnk && token != Vocab::kNumUnk && token != Vocab::kSep)
            entries.push_back(std::move(token));
    return Vocab(std::move(entries));
}

/// Token stream after vocabulary masking. Numeric values are extracted from
/// the raw surfaces before masking, so `<num_unk>` positions keep their value.
struct EncodedDocument {
    std::vector<int> ids;
    std::vector<NumericValue> numerics;
    std::vector<char> loss_mask;  // true = target contributes to loss
    std::vector<std::string> raw_tokens;

    std::size_t size() const { return ids.size(); }
};

inline EncodedDocument encode(const std::vector<std::string>& tokens, const Vocab& vocab) {
    EncodedDocument doc;
    doc.ids.reserve(tokens.size());
    doc.numerics.reserve(tokens.size());
    doc.loss_mask.assign(tokens.size(), 1);
    doc.raw_tokens = tokens;
    for (const auto& token : tokens) {
        const NumericValue num = parse_numeric(token);
        doc.numerics.push_back(num);
        const int id = vocab.lookup(token);
        if (id >= 0) {
            doc.ids.push_back(id);
        } else {
            doc.ids.push_back(num.is_numeric ? vocab.num_unk_id() : vocab.unk_id());
        }
    }
    return doc;
}

}  // namespace nglm::numtext
