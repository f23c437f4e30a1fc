#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "nglm/corpus.hpp"
#include "nglm/hash.hpp"
#include "nglm/kb.hpp"
#include "nglm/mathcore.hpp"
#include "nglm/matrix.hpp"
#include "nglm/numtext.hpp"
#include "nglm/optimizer.hpp"
#include "nglm/rng.hpp"

namespace nglm::lm {

enum class NumericScaling { kRaw, kSignedLog };

inline std::string to_string(NumericScaling s) {
    return s == NumericScaling::kRaw ? "raw" : "signed_log";
}

inline NumericScaling numeric_scaling_from_string(const std::string& s) {
    if (s == "raw") return NumericScaling::kRaw;
    if (s == "signed_log") return NumericScaling::kSignedLog;
    throw std::invalid_argument("unknown numeric_scaling: " + s);
}

struct ModelConfig {
    std::size_t hidden = 50;        // D: latent width of embeddings and LSTM
    std::size_t vocab_budget = 1000;  // V: content tokens kept in vocabulary
    bool grounded = false;
    bool conditional = false;
    NumericScaling numeric_scaling = NumericScaling::kSignedLog;
    std::size_t epochs = 20;
    std::size_t batch_size = 16;
    std::uint64_t seed = 42;
    std::size_t doc_cap = 200;  // BPTT length cap; longer documents are truncated
    double clip_l2 = 0.0;       // 0 disables gradient clipping

    void validate() const {
        if (hidden < 1) throw std::invalid_argument("config: hidden must be >= 1");
        if (vocab_budget < 1) throw std::invalid_argument("config: vocab budget must be >= 1");
        if (batch_size < 1) throw std::invalid_argument("config: batch_size must be >= 1");
        if (doc_cap < 2) throw std::invalid_argument("config: doc_cap must be >= 2");
    }
};

struct Model {
    ModelConfig config;
    numtext::Vocab vocab;
    Matrix input_embeddings;   // D × |vocab|
    Matrix output_embeddings;  // |vocab| × D
    mathcore::LstmParams lstm;  // input_dim = D (+1 when grounded)

    std::size_t vocab_size() const { return static_cast<std::size_t>(vocab.size()); }
};

/// Parameters drawn uniformly from [-0.05, 0.05] in a fixed order, then the
/// forget-gate bias is set to 1.0. Same seed, same vocab: bit-identical model.
inline Model init_model(const ModelConfig& config, numtext::Vocab vocab) {
    config.validate();
    Model model;
    model.config = config;
    model.vocab = std::move(vocab);

    const std::size_t d = config.hidden;
    const std::size_t v = model.vocab_size();
    const std::size_t input_dim = d + (config.grounded ? 1 : 0);

    Rng rng(config.seed);
    auto fill_uniform = [&rng](std::vector<double>& data) {
        for (double& x : data) x = rng.uniform(-0.05, 0.05);
    };

    model.input_embeddings = Matrix(d, v);
    model.output_embeddings = Matrix(v, d);
    model.lstm = mathcore::LstmParams(d, input_dim);
    fill_uniform(model.input_embeddings.data);
    fill_uniform(model.output_embeddings.data);
    fill_uniform(model.lstm.w.data);
    fill_uniform(model.lstm.u.data);
    fill_uniform(model.lstm.b);
    for (std::size_t k = 0; k < d; ++k) model.lstm.b[d + k] = 1.0;
    return model;
}

inline double scale_numeric(NumericScaling scaling, double v) {
    if (scaling == NumericScaling::kRaw) return v;
    return v >= 0 ? std::log1p(v) : -std::log1p(-v);
}

/// Embedding column for the token, with the scaled numeric value appended
/// when the model is grounded.
inline std::vector<double> input_vector(const Model& model, int id,
                                        const numtext::NumericValue& numeric) {
    const std::size_t d = model.config.hidden;
    std::vector<double> x(model.lstm.input_dim, 0.0);
    for (std::size_t k = 0; k < d; ++k)
        x[k] = model.input_embeddings.at(k, static_cast<std::size_t>(id));
    if (model.config.grounded)
        x[d] = numeric.is_numeric ? scale_numeric(model.config.numeric_scaling, numeric.value) : 0.0;
    return x;
}

/// Token stream a given model actually consumes for a document: KB-prefixed
/// when conditional, raw otherwise, truncated to the BPTT cap.
inline numtext::EncodedDocument prepare_document(const Model& model,
                                                 const corpus::Document& doc) {
    numtext::EncodedDocument encoded;
    if (model.config.conditional) {
        kb::ConditionedDocument cond = kb::condition(doc.tokens, doc.kb);
        encoded = numtext::encode(cond.tokens, model.vocab);
        encoded.loss_mask = cond.loss_mask;
    } else {
        encoded = numtext::encode(doc.tokens, model.vocab);
    }
    if (encoded.size() > model.config.doc_cap) {
        encoded.ids.resize(model.config.doc_cap);
        encoded.numerics.resize(model.config.doc_cap);
        encoded.loss_mask.resize(model.config.doc_cap);
        encoded.raw_tokens.resize(model.config.doc_cap);
    }
    return encoded;
}

namespace detail {

struct StepData {
    std::vector<std::vector<double>> inputs;  // positions 0..T-2
    std::vector<int> targets;                 // tokens 1..T-1
    std::vector<char> mask;                   // loss_mask of the targets
};

inline StepData make_steps(const Model& model, const numtext::EncodedDocument& doc) {
    if (doc.size() < 2) throw std::invalid_argument("document too short");
    const std::size_t steps = doc.size() - 1;
    StepData data;
    data.inputs.reserve(steps);
    data.targets.reserve(steps);
    data.mask.reserve(steps);
    for (std::size_t t = 0; t < steps; ++t) {
        data.inputs.push_back(input_vector(model, doc.ids[t], doc.numerics[t]));
        data.targets.push_back(doc.ids[t + 1]);
        data.mask.push_back(doc.loss_mask[t + 1]);
    }
    return data;
}

}  // namespace detail

struct DocumentNll {
    double nll = 0.0;              // sum over masked targets
    std::size_t masked_count = 0;  // number of masked targets
    std::vector<double> target_logprobs;  // log p(token_{t+1} | tokens_{<=t}), all positions
};

/// Feeds the document left to right from the zero state; the target at step t
/// is token t+1. Only targets whose loss_mask is set contribute to the sum.
inline DocumentNll document_nll(const Model& model, const numtext::EncodedDocument& doc) {
    detail::StepData steps = detail::make_steps(model, doc);
    mathcore::SequenceResult res = mathcore::sequence_forward(
        model.lstm, steps.inputs, steps.targets, model.output_embeddings, steps.mask);
    return {res.loss, res.masked_steps, std::move(res.target_logprobs)};
}

/// Distribution over the vocabulary after consuming a non-empty prefix.
inline std::vector<double> next_token_distribution(const Model& model,
                                                   const numtext::EncodedDocument& prefix) {
    if (prefix.size() < 1) throw std::invalid_argument("empty prefix");
    mathcore::LstmState state(model.config.hidden);
    for (std::size_t t = 0; t < prefix.size(); ++t)
        state = mathcore::lstm_step(model.lstm,
                                    input_vector(model, prefix.ids[t], prefix.numerics[t]), state);
    std::vector<double> logits(model.vocab_size(), 0.0);
    matvec_acc(model.output_embeddings, state.h.data(), logits.data());
    return mathcore::softmax(logits);
}

struct TrainReport {
    std::vector<double> epoch_mean_xent;  // mean masked cross-entropy per epoch
    std::string parameter_checksum;
    double wall_seconds = 0.0;
};

namespace detail {

/// Gradient accumulation for one AdaDelta block layout: E_in, E_out, W, U, b.
struct FlatGradients {
    Matrix d_ein;
    mathcore::SequenceGradients seq;

    FlatGradients(const Model& m)
        : d_ein(m.config.hidden, m.vocab_size()),
          seq(m.lstm, m.vocab_size(), 0) {}

    void add_document(const Model& model, const numtext::EncodedDocument& doc,
                      const StepData& steps, const mathcore::SequenceGradients& g) {
        seq.add(g);
        const std::size_t d = model.config.hidden;
        for (std::size_t t = 0; t < g.d_inputs.size(); ++t) {
            const int id = doc.ids[t];
            for (std::size_t k = 0; k < d; ++k)
                d_ein.at(k, static_cast<std::size_t>(id)) += g.d_inputs[t][k];
        }
    }
};

inline void clip_gradients(FlatGradients& grads, double max_norm) {
    if (max_norm <= 0.0) return;
    double sq = 0.0;
    auto acc = [&sq](const std::vector<double>& v) {
        for (double x : v) sq += x * x;
    };
    acc(grads.d_ein.data);
    acc(grads.seq.d_output_embeddings.data);
    acc(grads.seq.d_w.data);
    acc(grads.seq.d_u.data);
    acc(grads.seq.d_b);
    const double norm = std::sqrt(sq);
    if (norm <= max_norm) return;
    const double scale = max_norm / norm;
    auto mul = [scale](std::vector<double>& v) {
        for (double& x : v) x *= scale;
    };
    mul(grads.d_ein.data);
    mul(grads.seq.d_output_embeddings.data);
    mul(grads.seq.d_w.data);
    mul(grads.seq.d_u.data);
    mul(grads.seq.d_b);
}

}  // namespace detail

inline std::string parameter_checksum(const Model& model) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    auto mix = [&h](const std::vector<double>& v) {
        for (double x : v) {
            std::uint64_t bits;
            std::memcpy(&bits, &x, sizeof bits);
            for (int i = 0; i < 8; ++i) {
                h ^= (bits >> (8 * i)) & 0xff;
                h *= 0x100000001b3ULL;
            }
        }
    };
    mix(model.input_embeddings.data);
    mix(model.output_embeddings.data);
    mix(model.lstm.w.data);
    mix(model.lstm.u.data);
    mix(model.lstm.b);
    return hex64(h);
}

/// Builds the vocabulary from the exact token streams the variant will see
/// (KB-prefixed when conditional), then runs seeded mini-batch AdaDelta for
/// config.epochs epochs. Gradients are summed over the documents of a batch
/// in a fixed order, one optimizer update per batch.
inline std::pair<Model, TrainReport> train(const ModelConfig& config,
                                           const std::vector<corpus::Document>& docs) {
    config.validate();
    if (docs.empty()) throw std::invalid_argument("empty corpus");
    const auto t_start = std::chrono::steady_clock::now();

    std::vector<std::vector<std::string>> streams;
    streams.reserve(docs.size());
    for (const auto& doc : docs) {
        if (config.conditional) {
            streams.push_back(kb::condition(doc.tokens, doc.kb).tokens);
        } else {
            streams.push_back(doc.tokens);
        }
    }
    numtext::Vocab vocab = numtext::build_vocab(streams, config.vocab_budget, /*reserve_sep=*/true);
    Model model = init_model(config, std::move(vocab));

    std::vector<numtext::EncodedDocument> encoded;
    encoded.reserve(docs.size());
    for (const auto& doc : docs) encoded.push_back(prepare_document(model, doc));

    const std::size_t n_params =
        model.input_embeddings.size() + model.output_embeddings.size() + model.lstm.w.size() +
        model.lstm.u.size() + model.lstm.b.size();

    optimizer::AdaDeltaState opt_ein(model.input_embeddings.size());
    optimizer::AdaDeltaState opt_eout(model.output_embeddings.size());
    optimizer::AdaDeltaState opt_w(model.lstm.w.size());
    optimizer::AdaDeltaState opt_u(model.lstm.u.size());
    optimizer::AdaDeltaState opt_b(model.lstm.b.size());
    (void)n_params;

    TrainReport report;
    Rng shuffle_rng(Rng::mix(config.seed, 1));  // stream 0 is parameter init

    std::vector<std::size_t> order(encoded.size());
    std::iota(order.begin(), order.end(), 0);

    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        shuffle_rng.shuffle(order);
        double epoch_loss = 0.0;
        std::size_t epoch_tokens = 0;

        for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
            const std::size_t end = std::min(order.size(), start + config.batch_size);
            detail::FlatGradients grads(model);
            for (std::size_t i = start; i < end; ++i) {
                const numtext::EncodedDocument& doc = encoded[order[i]];
                if (doc.size() < 2) continue;
                detail::StepData steps = detail::make_steps(model, doc);
                auto [res, g] = mathcore::sequence_backward(
                    model.lstm, steps.inputs, steps.targets, model.output_embeddings, steps.mask);
                epoch_loss += res.loss;
                epoch_tokens += res.masked_steps;
                grads.add_document(model, doc, steps, g);
            }
            detail::clip_gradients(grads, config.clip_l2);
            optimizer::adadelta_step(opt_ein, model.input_embeddings.data, grads.d_ein.data);
            optimizer::adadelta_step(opt_eout, model.output_embeddings.data,
                                     grads.seq.d_output_embeddings.data);
            optimizer::adadelta_step(opt_w, model.lstm.w.data, grads.seq.d_w.data);
            optimizer::adadelta_step(opt_u, model.lstm.u.data, grads.seq.d_u.data);
            optimizer::adadelta_step(opt_b, model.lstm.b, grads.seq.d_b);
        }
        report.epoch_mean_xent.push_back(epoch_tokens ? epoch_loss / epoch_tokens : 0.0);
    }

    report.parameter_checksum = parameter_checksum(model);
    report.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
    return {std::move(model), std::move(report)};
}

// ---------------------------------------------------------------------------
// Checkpoint format: magic "NGLM1", uint32 little-endian JSON header length,
// UTF-8 JSON header (config, vocab entries in id order), then all matrices as
// little-endian doubles in the order E_in, E_out, W, U, b.
// ---------------------------------------------------------------------------

namespace detail {

inline void write_doubles(std::ostream& out, const std::vector<double>& v) {
    out.write(reinterpret_cast<const char*>(v.data()),
              static_cast<std::streamsize>(v.size() * sizeof(double)));
}

inline void read_doubles(std::istream& in, std::vector<double>& v) {
    in.read(reinterpret_cast<char*>(v.data()),
            static_cast<std::streamsize>(v.size() * sizeof(double)));
    if (!in) throw std::runtime_error("checkpoint truncated");
}

}  // namespace detail

inline void save_checkpoint(const Model& model, const std::string& path) {
    nlohmann::ordered_json header;
    header["config"] = {{"hidden", model.config.hidden},
                        {"vocab_budget", model.config.vocab_budget},
                        {"grounded", model.config.grounded},
                        {"conditional", model.config.conditional},
                        {"numeric_scaling", to_string(model.config.numeric_scaling)},
                        {"epochs", model.config.epochs},
                        {"batch_size", model.config.batch_size},
                        {"seed", model.config.seed},
                        {"doc_cap", model.config.doc_cap},
                        {"clip_l2", model.config.clip_l2}};
    header["vocab"] = model.vocab.entries();
    const std::string header_str = header.dump();

    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write checkpoint: " + path);
    out.write("NGLM1", 5);
    const std::uint32_t len = static_cast<std::uint32_t>(header_str.size());
    char lenbuf[4] = {static_cast<char>(len & 0xff), static_cast<char>((len >> 8) & 0xff),
                      static_cast<char>((len >> 16) & 0xff), static_cast<char>((len >> 24) & 0xff)};
    out.write(lenbuf, 4);
    out.write(header_str.data(), static_cast<std::streamsize>(header_str.size()));
    detail::write_doubles(out, model.input_embeddings.data);
    detail::write_doubles(out, model.output_embeddings.data);
    detail::write_doubles(out, model.lstm.w.data);
    detail::write_doubles(out, model.lstm.u.data);
    detail::write_doubles(out, model.lstm.b);
    if (!out) throw std::runtime_error("checkpoint write failed: " + path);
}

inline Model load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open checkpoint: " + path);
    char magic[5];
    in.read(magic, 5);
    if (!in || std::string(magic, 5) != "NGLM1")
        throw std::runtime_error("not a model checkpoint: " + path);
    unsigned char lenbuf[4];
    in.read(reinterpret_cast<char*>(lenbuf), 4);
    if (!in) throw std::runtime_error("checkpoint truncated");
    const std::uint32_t len = static_cast<std::uint32_t>(lenbuf[0]) |
                              (static_cast<std::uint32_t>(lenbuf[1]) << 8) |
                              (static_cast<std::uint32_t>(lenbuf[2]) << 16) |
                              (static_cast<std::uint32_t>(lenbuf[3]) << 24);
    std::string header_str(len, '\0');
    in.read(header_str.data(), static_cast<std::streamsize>(len));
    if (!in) throw std::runtime_error("checkpoint truncated");

    const auto header = nlohmann::json::parse(header_str);
    const auto& cfg = header.at("config");
    ModelConfig config;
    config.hidden = cfg.at("hidden").get<std::size_t>();
    config.vocab_budget = cfg.at("vocab_budget").get<std::size_t>();
    config.grounded = cfg.at("grounded").get<bool>();
    config.conditional = cfg.at("conditional").get<bool>();
    config.numeric_scaling = numeric_scaling_from_string(cfg.at("numeric_scaling").get<std::string>());
    config.epochs = cfg.at("epochs").get<std::size_t>();
    config.batch_size = cfg.at("batch_size").get<std::size_t>();
    config.seed = cfg.at("seed").get<std::uint64_t>();
    config.doc_cap = cfg.at("doc_cap").get<std::size_t>();
    config.clip_l2 = cfg.at("clip_l2").get<double>();

    Model model;
    model.config = config;
    model.vocab = numtext::Vocab(header.at("vocab").get<std::vector<std::string>>());

    const std::size_t d = config.hidden;
    const std::size_t v = model.vocab_size();
    model.input_embeddings = Matrix(d, v);
    model.output_embeddings = Matrix(v, d);
    model.lstm = mathcore::LstmParams(d, d + (config.grounded ? 1 : 0));
    detail::read_doubles(in, model.input_embeddings.data);
    detail::read_doubles(in, model.output_embeddings.data);
    detail::read_doubles(in, model.lstm.w.data);
    detail::read_doubles(in, model.lstm.u.data);
    detail::read_doubles(in, model.lstm.b);
    return model;
}

}  // namespace nglm::lm
