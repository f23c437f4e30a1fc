#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>

#include "nglm/eval.hpp"
#include "nglm/hash.hpp"
#include "nglm/lm.hpp"
#include "nglm/optimizer.hpp"
#include "nglm/rng.hpp"
#include "nglm/synthgen.hpp"

using namespace nglm;
using namespace nglm::lm;

namespace {

numtext::Vocab small_vocab() {
    return numtext::build_vocab({{"a", "b", "c", "d", "e", "7", "9"}}, 50, /*reserve_sep=*/true);
}

ModelConfig small_config(bool grounded = false) {
    ModelConfig config;
    config.hidden = 8;
    config.vocab_budget = 50;
    config.grounded = grounded;
    config.seed = 31;
    return config;
}

std::vector<corpus::Document> word_corpus(std::size_t n, std::uint64_t seed) {
    Rng rng(seed);
    const std::vector<std::string> words = {"a", "b", "c", "d", "e", "7", "9"};
    std::vector<corpus::Document> docs(n);
    for (std::size_t i = 0; i < n; ++i) {
        docs[i].id = "doc-" + std::to_string(i);
        const std::size_t len = 4 + rng.below(8);
        for (std::size_t t = 0; t < len; ++t)
            docs[i].tokens.push_back(words[rng.below(words.size())]);
    }
    return docs;
}

}  // namespace

TEST_CASE("init_model is seeded and shape-correct") {
    numtext::Vocab vocab = small_vocab();
    Model a = init_model(small_config(), vocab);
    Model b = init_model(small_config(), vocab);
    CHECK(a.input_embeddings == b.input_embeddings);
    CHECK(a.output_embeddings == b.output_embeddings);
    CHECK(a.lstm.w == b.lstm.w);
    CHECK(a.lstm.u == b.lstm.u);
    CHECK(a.lstm.b == b.lstm.b);

    CHECK(a.lstm.input_dim == 8);
    Model g = init_model(small_config(/*grounded=*/true), vocab);
    CHECK(g.lstm.input_dim == 9);

    // forget biases pinned to 1, everything else inside the init range
    for (std::size_t k = 0; k < 8; ++k) CHECK(a.lstm.b[8 + k] == 1.0);
    for (std::size_t k = 0; k < 8; ++k) CHECK(std::abs(a.lstm.b[k]) <= 0.05);
    for (double x : a.input_embeddings.data) CHECK(std::abs(x) <= 0.05);
}

TEST_CASE("input_vector concatenates the scaled numeric channel") {
    numtext::Vocab vocab = small_vocab();
    SECTION("raw scaling appends the value") {
        ModelConfig config = small_config(true);
        config.hidden = 4;
        config.numeric_scaling = NumericScaling::kRaw;
        Model m = init_model(config, vocab);
        const int id = m.vocab.lookup("a");
        auto x = input_vector(m, id, {60.0, true});
        REQUIRE(x.size() == 5);
        for (std::size_t k = 0; k < 4; ++k)
            CHECK(x[k] == m.input_embeddings.at(k, static_cast<std::size_t>(id)));
        CHECK(x[4] == 60.0);
    }
    SECTION("non-numeric tokens append zero") {
        Model m = init_model(small_config(true), vocab);
        auto x = input_vector(m, m.vocab.lookup("a"), {0.0, false});
        CHECK(x.back() == 0.0);
    }
    SECTION("signed log compresses magnitudes") {
        Model m = init_model(small_config(true), vocab);
        auto x = input_vector(m, m.vocab.lookup("a"), {-99.0, true});
        CHECK_THAT(x.back(), Catch::Matchers::WithinAbs(-std::log(100.0), 1e-12));
        CHECK_THAT(x.back(), Catch::Matchers::WithinAbs(-4.60517, 1e-5));
    }
    SECTION("ungrounded models get the bare embedding") {
        Model m = init_model(small_config(false), vocab);
        CHECK(input_vector(m, 3, {42.0, true}).size() == 8);
    }
}

TEST_CASE("document_nll on a uniform model") {
    Model m = init_model(small_config(), small_vocab());
    m.output_embeddings.fill(0.0);
    const auto encoded = numtext::encode({"a", "b", "c", "7"}, m.vocab);
    const auto res = document_nll(m, encoded);
    const double uniform = -std::log(static_cast<double>(m.vocab.size()));
    REQUIRE(res.target_logprobs.size() == 3);
    for (double lp : res.target_logprobs) CHECK_THAT(lp, Catch::Matchers::WithinAbs(uniform, 1e-12));
    CHECK(res.masked_count == 3);
    CHECK_THAT(res.nll, Catch::Matchers::WithinAbs(-3 * uniform, 1e-12));
}

TEST_CASE("document_nll equals the sum of masked per-token terms") {
    Model m = init_model(small_config(true), small_vocab());
    auto encoded = numtext::encode({"a", "7", "b", "c", "9", "d"}, m.vocab);
    encoded.loss_mask = {1, 0, 1, 1, 0, 1};
    const auto res = document_nll(m, encoded);
    double sum = 0.0;
    for (std::size_t t = 0; t + 1 < encoded.size(); ++t)
        if (encoded.loss_mask[t + 1]) sum -= res.target_logprobs[t];
    CHECK_THAT(res.nll, Catch::Matchers::WithinAbs(sum, 1e-12));
    CHECK(res.masked_count == 3);
}

TEST_CASE("documents shorter than two tokens are rejected") {
    Model m = init_model(small_config(), small_vocab());
    CHECK_THROWS_WITH(document_nll(m, numtext::encode({"a"}, m.vocab)),
                      Catch::Matchers::ContainsSubstring("document too short"));
}

TEST_CASE("next_token_distribution is a deterministic distribution") {
    Model m = init_model(small_config(true), small_vocab());
    const auto prefix = numtext::encode({"a", "7", "b"}, m.vocab);
    const auto p = next_token_distribution(m, prefix);
    const auto q = next_token_distribution(m, prefix);
    CHECK(p == q);
    double sum = 0.0;
    for (double v : p) sum += v;
    CHECK_THAT(sum, Catch::Matchers::WithinAbs(1.0, 1e-12));
}

TEST_CASE("a trainable model memorizes a single document") {
    ModelConfig config;
    config.hidden = 32;
    config.vocab_budget = 20;
    config.epochs = 200;
    config.batch_size = 1;
    config.seed = 9;

    corpus::Document doc;
    doc.id = "only";
    doc.tokens = {"the", "quick", "brown", "fox", "jumps", "over", "a", "lazy", "dog", "today"};
    auto [model, report] = train(config, {doc});
    REQUIRE(report.epoch_mean_xent.size() == 200);

    const auto res = document_nll(model, prepare_document(model, doc));
    CHECK(res.masked_count == 9);
    CHECK(res.nll / static_cast<double>(res.masked_count) < 0.1);
}

TEST_CASE("train with zero epochs returns the initialized model") {
    ModelConfig config = small_config();
    config.epochs = 0;
    auto docs = word_corpus(10, 1);
    auto [model, report] = train(config, docs);
    CHECK(report.epoch_mean_xent.empty());

    std::vector<std::vector<std::string>> streams;
    for (const auto& d : docs) streams.push_back(d.tokens);
    Model fresh = init_model(config, numtext::build_vocab(streams, config.vocab_budget, true));
    CHECK(model.input_embeddings == fresh.input_embeddings);
    CHECK(model.lstm.w == fresh.lstm.w);
}

TEST_CASE("training is deterministic and reduces cross-entropy") {
    ModelConfig config = small_config();
    config.epochs = 4;
    config.batch_size = 8;
    auto docs = word_corpus(60, 2);

    auto [m1, r1] = train(config, docs);
    auto [m2, r2] = train(config, docs);
    CHECK(parameter_checksum(m1) == parameter_checksum(m2));
    CHECK(r1.epoch_mean_xent == r2.epoch_mean_xent);
    CHECK(r1.epoch_mean_xent.back() < r1.epoch_mean_xent.front());
}

TEST_CASE("one training step equals manual gradient sum plus adadelta") {
    ModelConfig config = small_config();
    config.epochs = 1;
    config.batch_size = 2;
    auto docs = word_corpus(2, 3);

    auto [trained, report] = train(config, docs);

    // rebuild by hand: same vocab, same init, one batch of both documents
    std::vector<std::vector<std::string>> streams;
    for (const auto& d : docs) streams.push_back(d.tokens);
    Model manual = init_model(config, numtext::build_vocab(streams, config.vocab_budget, true));

    // the epoch shuffle for this seed determines the gradient summation order
    Rng shuffle_rng(Rng::mix(config.seed, 1));
    std::vector<std::size_t> order = {0, 1};
    shuffle_rng.shuffle(order);

    Matrix d_ein(manual.config.hidden, manual.vocab_size());
    mathcore::SequenceGradients total(manual.lstm, manual.vocab_size(), 0);
    for (std::size_t idx : order) {
        const auto encoded = prepare_document(manual, docs[idx]);
        std::vector<std::vector<double>> inputs;
        std::vector<int> targets;
        std::vector<char> mask;
        for (std::size_t t = 0; t + 1 < encoded.size(); ++t) {
            inputs.push_back(input_vector(manual, encoded.ids[t], encoded.numerics[t]));
            targets.push_back(encoded.ids[t + 1]);
            mask.push_back(encoded.loss_mask[t + 1]);
        }
        auto [res, g] =
            mathcore::sequence_backward(manual.lstm, inputs, targets, manual.output_embeddings, mask);
        (void)res;
        total.add(g);
        for (std::size_t t = 0; t < g.d_inputs.size(); ++t)
            for (std::size_t k = 0; k < manual.config.hidden; ++k)
                d_ein.at(k, static_cast<std::size_t>(encoded.ids[t])) += g.d_inputs[t][k];
    }
    optimizer::AdaDeltaState s_ein(manual.input_embeddings.size());
    optimizer::AdaDeltaState s_eout(manual.output_embeddings.size());
    optimizer::AdaDeltaState s_w(manual.lstm.w.size());
    optimizer::AdaDeltaState s_u(manual.lstm.u.size());
    optimizer::AdaDeltaState s_b(manual.lstm.b.size());
    optimizer::adadelta_step(s_ein, manual.input_embeddings.data, d_ein.data);
    optimizer::adadelta_step(s_eout, manual.output_embeddings.data, total.d_output_embeddings.data);
    optimizer::adadelta_step(s_w, manual.lstm.w.data, total.d_w.data);
    optimizer::adadelta_step(s_u, manual.lstm.u.data, total.d_u.data);
    optimizer::adadelta_step(s_b, manual.lstm.b, total.d_b);

    CHECK(trained.input_embeddings == manual.input_embeddings);
    CHECK(trained.output_embeddings == manual.output_embeddings);
    CHECK(trained.lstm.w == manual.lstm.w);
    CHECK(trained.lstm.u == manual.lstm.u);
    CHECK(trained.lstm.b == manual.lstm.b);
}

TEST_CASE("zeroed numeric values make the numeric weights irrelevant") {
    Model m = init_model(small_config(true), small_vocab());
    auto encoded = numtext::encode({"a", "b", "c", "d", "e"}, m.vocab);
    for (auto& nv : encoded.numerics) nv = {0.0, false};

    const double before = document_nll(m, encoded).nll;
    Model perturbed = m;
    const std::size_t d = m.config.hidden;
    for (std::size_t row = 0; row < perturbed.lstm.w.rows; ++row)
        perturbed.lstm.w.at(row, d) += 17.3;  // numeric input column
    const double after = document_nll(perturbed, encoded).nll;
    CHECK_THAT(after, Catch::Matchers::WithinAbs(before, 1e-9));
}

TEST_CASE("consistent vocabulary permutation leaves the loss unchanged") {
    Model m = init_model(small_config(), small_vocab());
    const auto encoded = numtext::encode({"a", "b", "7", "c", "d"}, m.vocab);
    const double base = document_nll(m, encoded).nll;

    const std::size_t v = m.vocab_size();
    REQUIRE(v % 3 != 0);
    std::vector<std::size_t> perm(v);
    for (std::size_t i = 0; i < v; ++i) perm[i] = (i * 3 + 2) % v;

    Model permuted = m;
    for (std::size_t col = 0; col < v; ++col)
        for (std::size_t k = 0; k < m.config.hidden; ++k) {
            permuted.input_embeddings.at(k, perm[col]) = m.input_embeddings.at(k, col);
            permuted.output_embeddings.at(perm[col], k) = m.output_embeddings.at(col, k);
        }
    auto remapped = encoded;
    for (int& id : remapped.ids) id = static_cast<int>(perm[static_cast<std::size_t>(id)]);

    CHECK_THAT(document_nll(permuted, remapped).nll, Catch::Matchers::WithinAbs(base, 1e-12));
}

TEST_CASE("documents longer than the cap are truncated") {
    ModelConfig config = small_config();
    config.doc_cap = 5;
    Model m = init_model(config, small_vocab());
    corpus::Document doc;
    for (int i = 0; i < 12; ++i) doc.tokens.push_back("a");
    const auto encoded = prepare_document(m, doc);
    CHECK(encoded.size() == 5);
    CHECK(encoded.ids.size() == encoded.numerics.size());
    CHECK(encoded.numerics.size() == encoded.loss_mask.size());
    CHECK(encoded.loss_mask.size() == encoded.raw_tokens.size());
}

TEST_CASE("checkpoints round-trip byte-exactly") {
    namespace fs = std::filesystem;
    ModelConfig config = small_config(true);
    config.epochs = 2;
    auto [model, report] = train(config, word_corpus(20, 5));

    const fs::path dir = fs::temp_directory_path() / "nglm-test-ckpt";
    fs::create_directories(dir);
    const std::string p1 = (dir / "a.nglm").string();
    const std::string p2 = (dir / "b.nglm").string();
    save_checkpoint(model, p1);
    Model loaded = load_checkpoint(p1);
    save_checkpoint(loaded, p2);

    CHECK(read_file(p1) == read_file(p2));
    CHECK(loaded.config.grounded == model.config.grounded);
    CHECK(loaded.vocab.entries() == model.vocab.entries());

    const auto doc = numtext::encode({"a", "b", "7", "c"}, model.vocab);
    CHECK(document_nll(loaded, doc).nll == document_nll(model, doc).nll);
    fs::remove_all(dir);
}

TEST_CASE("checkpoint loading rejects foreign files") {
    namespace fs = std::filesystem;
    const fs::path dir = fs::temp_directory_path() / "nglm-test-ckpt-bad";
    fs::create_directories(dir);
    const std::string path = (dir / "bad.nglm").string();
    {
        std::ofstream out(path, std::ios::binary);
        out << "definitely not a checkpoint";
    }
    CHECK_THROWS(load_checkpoint(path));
    fs::remove_all(dir);
}
