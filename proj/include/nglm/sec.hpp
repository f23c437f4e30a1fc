#pragma once

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <thread>
#include <unordered_map>
#include <vector>

#include "nglm/corpus.hpp"
#include "nglm/eval.hpp"
#include "nglm/lm.hpp"
#include "nglm/rng.hpp"

namespace nglm::sec {

/// Confusion sets of mutually substitutable words. A token may belong to at
/// most one set.
class ConfusionSets {
public:
    ConfusionSets() = default;

    explicit ConfusionSets(std::vector<std::vector<std::string>> sets) : sets_(std::move(sets)) {
        for (std::size_t s = 0; s < sets_.size(); ++s) {
            if (sets_[s].size() < 2)
                throw std::invalid_argument("confusion set needs at least 2 members");
            for (std::size_t m = 0; m < sets_[s].size(); ++m) {
                auto [it, inserted] = index_.emplace(sets_[s][m], Entry{s, m});
                (void)it;
                if (!inserted)
                    throw std::invalid_argument("token in more than one confusion set: " +
                                                sets_[s][m]);
            }
        }
    }

    struct Entry {
        std::size_t set = 0;
        std::size_t member = 0;
    };

    const Entry* find(const std::string& token) const {
        auto it = index_.find(token);
        return it == index_.end() ? nullptr : &it->second;
    }

    const std::vector<std::vector<std::string>>& sets() const { return sets_; }

private:
    std::vector<std::vector<std::string>> sets_;
    std::unordered_map<std::string, Entry> index_;
};

/// A candidate corrected document. Non-original hypotheses differ from the
/// original in exactly one position, substituted within its confusion set.
struct Hypothesis {
    std::vector<std::string> tokens;
    std::size_t position = 0;
    std::string replacement;
    bool is_original = false;
};

/// H0 first, then one hypothesis per alternative member at every confusable
/// position, ordered by (position, member order).
inline std::vector<Hypothesis> generate_hypotheses(const std::vector<std::string>& tokens,
                                                   const ConfusionSets& sets) {
    std::vector<Hypothesis> out;
    Hypothesis h0;
    h0.tokens = tokens;
    h0.is_original = true;
    out.push_back(std::move(h0));

    for (std::size_t pos = 0; pos < tokens.size(); ++pos) {
        const ConfusionSets::Entry* entry = sets.find(tokens[pos]);
        if (!entry) continue;
        const auto& members = sets.sets()[entry->set];
        for (std::size_t m = 0; m < members.size(); ++m) {
            if (m == entry->member) continue;
            Hypothesis h;
            h.tokens = tokens;
            h.tokens[pos] = members[m];
            h.position = pos;
            h.replacement = members[m];
            out.push_back(std::move(h));
        }
    }
    return out;
}

struct ScoredHypothesis {
    Hypothesis hypothesis;
    double log_score = 0.0;  // log s(H_i) = NLL(H0) - NLL(H_i) for LM scorers
};

/// Likelihood-ratio scores under the model; the document's KB conditions the
/// evaluation iff the model is conditional. H0 scores exactly 0.
inline std::vector<ScoredHypothesis> score(const lm::Model& model, const corpus::Document& doc,
                                           const std::vector<Hypothesis>& hypotheses) {
    std::vector<double> nll(hypotheses.size(), 0.0);
    auto eval_one = [&](std::size_t i) {
        corpus::Document cand;
        cand.tokens = hypotheses[i].tokens;
        cand.kb = doc.kb;
        nll[i] = lm::document_nll(model, lm::prepare_document(model, cand)).nll;
    };
    const std::size_t threads = std::min(eval::env_threads(), hypotheses.size());
    if (threads <= 1) {
        for (std::size_t i = 0; i < hypotheses.size(); ++i) eval_one(i);
    } else {
        std::vector<std::thread> pool;
        for (std::size_t w = 0; w < threads; ++w)
            pool.emplace_back([&, w] {
                for (std::size_t i = w; i < hypotheses.size(); i += threads) eval_one(i);
            });
        for (auto& th : pool) th.join();
    }

    std::size_t h0 = 0;
    for (std::size_t i = 0; i < hypotheses.size(); ++i)
        if (hypotheses[i].is_original) h0 = i;

    std::vector<ScoredHypothesis> out;
    out.reserve(hypotheses.size());
    for (std::size_t i = 0; i < hypotheses.size(); ++i)
        out.push_back({hypotheses[i], hypotheses[i].is_original ? 0.0 : nll[h0] - nll[i]});
    return out;
}

enum class BaselineKind { kRandom, kAlways, kNever };

inline BaselineKind baseline_from_string(const std::string& s) {
    if (s == "random") return BaselineKind::kRandom;
    if (s == "always") return BaselineKind::kAlways;
    if (s == "never") return BaselineKind::kNever;
    throw std::invalid_argument("unknown baseline: " + s);
}

/// random: every hypothesis gets an iid Uniform(0,1) score. always/never: the
/// original document is pinned below/above everything, corrections random.
inline std::vector<ScoredHypothesis> baseline_score(BaselineKind kind,
                                                    const std::vector<Hypothesis>& hypotheses,
                                                    Rng& rng) {
    std::vector<ScoredHypothesis> out;
    out.reserve(hypotheses.size());
    for (const auto& h : hypotheses) {
        double s;
        if (h.is_original && kind == BaselineKind::kAlways)
            s = -std::numeric_limits<double>::infinity();
        else if (h.is_original && kind == BaselineKind::kNever)
            s = std::numeric_limits<double>::infinity();
        else
            s = rng.uniform();
        out.push_back({h, s});
    }
    return out;
}

struct SecOutcome {
    bool detected = false;
    std::size_t chosen = 0;        // index into the scored sequence
    std::vector<double> scores;    // per hypothesis, original order
    std::size_t original = 0;      // index of H0
};

/// Accepts the best-scoring correction only if it strictly beats the
/// original; ties among corrections resolve to the earliest in generation
/// order (position, then member order).
inline SecOutcome decide(const std::vector<ScoredHypothesis>& scored) {
    SecOutcome out;
    out.scores.reserve(scored.size());
    bool found_h0 = false;
    for (std::size_t i = 0; i < scored.size(); ++i) {
        out.scores.push_back(scored[i].log_score);
        if (scored[i].hypothesis.is_original) {
            out.original = i;
            found_h0 = true;
        }
    }
    if (!found_h0) throw std::invalid_argument("decide: original hypothesis missing");

    const double h0_score = out.scores[out.original];
    out.chosen = out.original;
    double best = h0_score;
    for (std::size_t i = 0; i < scored.size(); ++i) {
        if (scored[i].hypothesis.is_original) continue;
        if (out.scores[i] > best) {
            best = out.scores[i];
            out.chosen = i;
        }
    }
    out.detected = out.chosen != out.original;
    return out;
}

/// 1-based rank of hypothesis `index` by descending score; tied scores share
/// the worst rank of the tie group.
inline std::size_t rank_of(const std::vector<double>& scores, std::size_t index) {
    std::size_t rank = 0;
    for (double s : scores)
        if (s >= scores[index]) ++rank;
    return rank;
}

struct Prf {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

inline Prf prf_from_counts(std::size_t tp, std::size_t fp, std::size_t fn) {
    Prf m;
    m.precision = (tp + fp) ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
    m.recall = (tp + fn) ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
    m.f1 = (m.precision + m.recall) > 0.0
               ? 2.0 * m.precision * m.recall / (m.precision + m.recall)
               : 0.0;
    return m;
}

/// Document-level detection: a true positive is a corrupted document the
/// system flags.
inline Prf detection_metrics(const std::vector<SecOutcome>& outcomes,
                             const std::vector<char>& corrupted) {
    if (outcomes.size() != corrupted.size())
        throw std::invalid_argument("detection_metrics: misaligned inputs");
    std::size_t tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < outcomes.size(); ++i) {
        if (outcomes[i].detected && corrupted[i]) ++tp;
        else if (outcomes[i].detected) ++fp;
        else if (corrupted[i]) ++fn;
    }
    return prf_from_counts(tp, fp, fn);
}

struct CorrectionMetrics {
    Prf prf;
    double map = 0.0;   // mean reciprocal rank of the gold hypothesis
    bool map_present = false;
};

/// Correction scoring over a set of documents. `gold_tokens[i]` is the
/// uncorrupted document when `corrupted[i]`, ignored otherwise. A true
/// positive is a detection whose chosen hypothesis restores the gold exactly.
/// MAP averages 1/rank of the gold hypothesis over corrupted documents.
inline CorrectionMetrics correction_metrics(
    const std::vector<SecOutcome>& outcomes,
    const std::vector<std::vector<ScoredHypothesis>>& scored,
    const std::vector<char>& corrupted,
    const std::vector<std::vector<std::string>>& gold_tokens) {
    if (outcomes.size() != corrupted.size() || scored.size() != corrupted.size() ||
        gold_tokens.size() != corrupted.size())
        throw std::invalid_argument("correction_metrics: misaligned inputs");

    std::size_t tp = 0, fp = 0, fn = 0;
    double reciprocal_sum = 0.0;
    std::size_t n_corrupted = 0;

    for (std::size_t i = 0; i < outcomes.size(); ++i) {
        const SecOutcome& o = outcomes[i];
        const bool correct_fix =
            o.detected && corrupted[i] && scored[i][o.chosen].hypothesis.tokens == gold_tokens[i];
        if (correct_fix) ++tp;
        else if (o.detected) ++fp;
        if (corrupted[i] && !correct_fix) ++fn;

        if (corrupted[i]) {
            ++n_corrupted;
            std::size_t gold_index = scored[i].size();
            for (std::size_t k = 0; k < scored[i].size(); ++k) {
                if (scored[i][k].hypothesis.tokens == gold_tokens[i]) {
                    gold_index = k;
                    break;
                }
            }
            if (gold_index < scored[i].size())
                reciprocal_sum += 1.0 / static_cast<double>(rank_of(o.scores, gold_index));
        }
    }

    CorrectionMetrics m;
    m.prf = prf_from_counts(tp, fp, fn);
    if (n_corrupted > 0) {
        m.map = reciprocal_sum / static_cast<double>(n_corrupted);
        m.map_present = true;
    }
    return m;
}

}  // namespace nglm::sec
