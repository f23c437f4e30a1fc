#pragma once

#include <cmath>
#include <cstdlib>
#include <functional>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "nglm/corpus.hpp"
#include "nglm/lm.hpp"
#include "nglm/numtext.hpp"

namespace nglm::eval {

/// One scored prediction target: the raw surface, its token class (numeric
/// versus word, decided by parse_numeric on the surface), whether it was out
/// of vocabulary, and the model's log-probability for it.
struct TargetScore {
    std::string surface;
    bool numeric_class = false;
    bool oov = false;
    double logp = 0.0;
};

inline std::size_t env_threads() {
    const char* s = std::getenv("NGLM_THREADS");
    if (!s) return 1;
    const long n = std::strtol(s, nullptr, 10);
    return n > 1 ? static_cast<std::size_t>(n) : 1;
}

/// Scores every masked target of every document, in document order. Documents
/// may be scored in parallel (NGLM_THREADS); the output order is fixed.
inline std::vector<TargetScore> score_documents(const lm::Model& model,
                                                const std::vector<corpus::Document>& docs) {
    std::vector<std::vector<TargetScore>> per_doc(docs.size());
    auto score_one = [&](std::size_t i) {
        const numtext::EncodedDocument encoded = lm::prepare_document(model, docs[i]);
        if (encoded.size() < 2) return;
        const lm::DocumentNll res = lm::document_nll(model, encoded);
        for (std::size_t t = 0; t + 1 < encoded.size(); ++t) {
            if (!encoded.loss_mask[t + 1]) continue;
            TargetScore ts;
            ts.surface = encoded.raw_tokens[t + 1];
            ts.numeric_class = encoded.numerics[t + 1].is_numeric;
            ts.oov = model.vocab.lookup(ts.surface) < 0;
            ts.logp = res.target_logprobs[t];
            per_doc[i].push_back(std::move(ts));
        }
    };

    const std::size_t threads = std::min(env_threads(), docs.size() ? docs.size() : 1);
    if (threads <= 1) {
        for (std::size_t i = 0; i < docs.size(); ++i) score_one(i);
    } else {
        std::vector<std::thread> pool;
        for (std::size_t w = 0; w < threads; ++w)
            pool.emplace_back([&, w] {
                for (std::size_t i = w; i < docs.size(); i += threads) score_one(i);
            });
        for (auto& th : pool) th.join();
    }

    std::vector<TargetScore> out;
    for (auto& chunk : per_doc)
        for (auto& ts : chunk) out.push_back(std::move(ts));
    return out;
}

struct ClassStats {
    std::size_t count = 0;
    std::size_t oov_count = 0;
    double pp = 0.0;   // exp(mean nll)
    double app = 0.0;  // pp with each OOV target penalised by log |U_class|
    bool present = false;
};

struct PerplexityReport {
    ClassStats overall, numeric, word;
};

/// Number of distinct OOV surface types per class in the scored targets; the
/// masked `<unk>`/`<num_unk>` probability mass is treated as spread uniformly
/// over these types.
struct OovTypeCounts {
    std::size_t numeric_types = 0;
    std::size_t word_types = 0;
};

inline OovTypeCounts count_oov_types(const std::vector<TargetScore>& scores) {
    std::set<std::string> numeric_types, word_types;
    for (const auto& ts : scores) {
        if (!ts.oov) continue;
        (ts.numeric_class ? numeric_types : word_types).insert(ts.surface);
    }
    return {numeric_types.size(), word_types.size()};
}

inline PerplexityReport make_report(const std::vector<TargetScore>& scores,
                                    const OovTypeCounts& oov_types) {
    struct Acc {
        double nll = 0.0, adjusted_nll = 0.0;
        std::size_t n = 0, oov = 0;
    } overall, numeric, word;

    const double log_u_numeric =
        oov_types.numeric_types ? std::log(static_cast<double>(oov_types.numeric_types)) : 0.0;
    const double log_u_word =
        oov_types.word_types ? std::log(static_cast<double>(oov_types.word_types)) : 0.0;

    for (const auto& ts : scores) {
        const double correction = ts.oov ? (ts.numeric_class ? log_u_numeric : log_u_word) : 0.0;
        Acc& cls = ts.numeric_class ? numeric : word;
        for (Acc* acc : {&overall, &cls}) {
            acc->nll -= ts.logp;
            acc->adjusted_nll += -ts.logp + correction;
            acc->n += 1;
            acc->oov += ts.oov ? 1 : 0;
        }
    }

    auto to_stats = [](const Acc& acc) {
        ClassStats s;
        s.count = acc.n;
        s.oov_count = acc.oov;
        s.present = acc.n > 0;
        if (acc.n > 0) {
            s.pp = std::exp(acc.nll / static_cast<double>(acc.n));
            s.app = std::exp(acc.adjusted_nll / static_cast<double>(acc.n));
        }
        return s;
    };
    return {to_stats(overall), to_stats(numeric), to_stats(word)};
}

inline PerplexityReport make_report(const std::vector<TargetScore>& scores) {
    return make_report(scores, count_oov_types(scores));
}

inline PerplexityReport perplexity(const lm::Model& model,
                                   const std::vector<corpus::Document>& docs) {
    return make_report(score_documents(model, docs));
}

inline nlohmann::ordered_json report_to_json(const PerplexityReport& report) {
    auto cls = [](const ClassStats& s) -> nlohmann::ordered_json {
        if (!s.present) return nullptr;
        return {{"count", s.count}, {"oov_count", s.oov_count}, {"pp", s.pp}, {"app", s.app}};
    };
    return {{"overall", cls(report.overall)},
            {"numeric", cls(report.numeric)},
            {"word", cls(report.word)}};
}

}  // namespace nglm::eval
