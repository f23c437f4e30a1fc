// Command-line front end: corpus generation, training, perplexity evaluation,
// semantic error correction, and the numeric-sensitivity probe.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "nglm/corpus.hpp"
#include "nglm/eval.hpp"
#include "nglm/hash.hpp"
#include "nglm/lm.hpp"
#include "nglm/numtext.hpp"
#include "nglm/rng.hpp"
#include "nglm/sec.hpp"
#include "nglm/synthgen.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace nglm;

namespace {

struct RunConfig {
    lm::ModelConfig model;
    synthgen::GenConfig gen;
    std::size_t n_test_documents = 500;
    double rho = 0.5;
};

void reject_unknown_keys(const json& j, const std::vector<std::string>& known,
                         const std::string& where) {
    for (const auto& [key, value] : j.items()) {
        if (std::find(known.begin(), known.end(), key) == known.end())
            throw std::runtime_error("config: unknown key \"" + where + key + "\"");
    }
}

synthgen::Attribute attribute_from_json(const json& j) {
    reject_unknown_keys(j,
                        {"name", "min", "max", "thresholds", "severity_words", "unit",
                         "mention_template", "severity_template"},
                        "gen.attributes.");
    synthgen::Attribute attr;
    attr.name = j.at("name").get<std::string>();
    attr.min_value = j.at("min").get<double>();
    attr.max_value = j.at("max").get<double>();
    attr.thresholds = j.at("thresholds").get<std::vector<double>>();
    attr.severity_words = j.at("severity_words").get<std::vector<std::string>>();
    attr.unit = j.at("unit").get<std::string>();
    attr.mention_template = j.value("mention_template", "the {name} is {value} {unit} .");
    attr.severity_template = j.value("severity_template", "the {name} finding is {w} .");
    attr.validate();
    return attr;
}

RunConfig parse_run_config(const json& j) {
    reject_unknown_keys(j, {"model", "gen"}, "");
    RunConfig config;
    if (j.contains("model")) {
        const json& m = j.at("model");
        reject_unknown_keys(m,
                            {"hidden", "vocab_budget", "numeric_scaling", "epochs", "batch_size",
                             "seed", "doc_cap", "clip_l2"},
                            "model.");
        config.model.hidden = m.value("hidden", config.model.hidden);
        config.model.vocab_budget = m.value("vocab_budget", config.model.vocab_budget);
        if (m.contains("numeric_scaling"))
            config.model.numeric_scaling =
                lm::numeric_scaling_from_string(m.at("numeric_scaling").get<std::string>());
        config.model.epochs = m.value("epochs", config.model.epochs);
        config.model.batch_size = m.value("batch_size", config.model.batch_size);
        config.model.seed = m.value("seed", config.model.seed);
        config.model.doc_cap = m.value("doc_cap", config.model.doc_cap);
        config.model.clip_l2 = m.value("clip_l2", config.model.clip_l2);
    }
    if (j.contains("gen")) {
        const json& g = j.at("gen");
        reject_unknown_keys(g,
                            {"n_documents", "n_test_documents", "seed", "kb_drop_prob",
                             "numeric_mention_prob", "sentences_min", "sentences_max", "rho",
                             "attributes"},
                            "gen.");
        config.gen.n_documents = g.value("n_documents", config.gen.n_documents);
        config.n_test_documents = g.value("n_test_documents", config.n_test_documents);
        config.gen.seed = g.value("seed", config.gen.seed);
        config.gen.kb_drop_prob = g.value("kb_drop_prob", config.gen.kb_drop_prob);
        config.gen.numeric_mention_prob =
            g.value("numeric_mention_prob", config.gen.numeric_mention_prob);
        config.gen.sentences_min = g.value("sentences_min", config.gen.sentences_min);
        config.gen.sentences_max = g.value("sentences_max", config.gen.sentences_max);
        config.rho = g.value("rho", config.rho);
        if (g.contains("attributes"))
            for (const auto& a : g.at("attributes"))
                config.gen.attributes.push_back(attribute_from_json(a));
    }
    return config;
}

RunConfig load_run_config(const std::string& path) {
    if (path.empty()) return RunConfig{};
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config: " + path);
    json j;
    try {
        j = json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error("config: " + std::string(e.what()));
    }
    return parse_run_config(j);
}

json attribute_to_json(const synthgen::Attribute& attr) {
    return {{"name", attr.name},
            {"min", attr.min_value},
            {"max", attr.max_value},
            {"thresholds", attr.thresholds},
            {"severity_words", attr.severity_words},
            {"unit", attr.unit},
            {"mention_template", attr.mention_template},
            {"severity_template", attr.severity_template}};
}

/// Full effective configuration, defaults applied, as echoed into manifests.
json run_config_to_json(const RunConfig& config) {
    json attrs = json::array();
    const auto attributes = config.gen.attributes.empty() ? synthgen::default_attributes()
                                                          : config.gen.attributes;
    for (const auto& attr : attributes) attrs.push_back(attribute_to_json(attr));
    return {{"model",
             {{"hidden", config.model.hidden},
              {"vocab_budget", config.model.vocab_budget},
              {"numeric_scaling", lm::to_string(config.model.numeric_scaling)},
              {"epochs", config.model.epochs},
              {"batch_size", config.model.batch_size},
              {"seed", config.model.seed},
              {"doc_cap", config.model.doc_cap},
              {"clip_l2", config.model.clip_l2}}},
            {"gen",
             {{"n_documents", config.gen.n_documents},
              {"n_test_documents", config.n_test_documents},
              {"seed", config.gen.seed},
              {"kb_drop_prob", config.gen.kb_drop_prob},
              {"numeric_mention_prob", config.gen.numeric_mention_prob},
              {"sentences_min", config.gen.sentences_min},
              {"sentences_max", config.gen.sentences_max},
              {"rho", config.rho},
              {"attributes", attrs}}}};
}

void write_manifest(const std::string& path, const std::string& command, const json& config,
                    std::uint64_t seed, const std::vector<std::string>& input_paths,
                    const std::vector<std::string>& output_paths) {
    json inputs = json::object();
    for (const auto& p : input_paths) inputs[fs::path(p).filename().string()] = file_hash(p);
    json outputs = json::object();
    for (const auto& p : output_paths) outputs[fs::path(p).filename().string()] = file_hash(p);
    json manifest = {{"command", command},
                     {"seed", seed},
                     {"config", config},
                     {"inputs", inputs},
                     {"outputs", outputs}};
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write manifest: " + path);
    out << manifest.dump(2) << '\n';
}

void emit_report(const json& report, const std::string& out_path, bool pretty) {
    if (!out_path.empty()) {
        std::ofstream out(out_path, std::ios::binary);
        if (!out) throw std::runtime_error("cannot write report: " + out_path);
        out << report.dump(pretty ? 2 : -1) << '\n';
    }
    std::cout << report.dump(pretty ? 2 : -1) << std::endl;
}

// ---------------------------------------------------------------- generate

int cmd_generate(const std::string& config_path, std::uint64_t seed_override, bool has_seed,
                 const std::string& out_dir) {
    RunConfig config = load_run_config(config_path);
    if (has_seed) config.gen.seed = seed_override;
    if (config.gen.n_documents == 0) throw std::runtime_error("n_documents must be positive");

    fs::create_directories(out_dir);
    const auto sets = synthgen::confusion_sets(config.gen);

    synthgen::GenConfig train_cfg = config.gen;
    train_cfg.id_prefix = "train";
    train_cfg.seed = Rng::mix(config.gen.seed, 10);
    synthgen::GenConfig test_cfg = config.gen;
    test_cfg.id_prefix = "test";
    test_cfg.seed = Rng::mix(config.gen.seed, 11);
    test_cfg.n_documents = config.n_test_documents;

    const auto train_docs = synthgen::generate(train_cfg);
    const auto test_docs = synthgen::generate(test_cfg);
    const auto corrupted = synthgen::corrupt(test_docs, sets, config.rho,
                                             Rng::mix(config.gen.seed, 12));

    const std::string train_path = out_dir + "/train.jsonl";
    const std::string test_path = out_dir + "/test.jsonl";
    const std::string corrupted_path = out_dir + "/corrupted.jsonl";
    const std::string sets_path = out_dir + "/confusion_sets.json";
    const std::string gold_path = out_dir + "/gold.jsonl";
    corpus::write_jsonl(train_path, train_docs);
    corpus::write_jsonl(test_path, test_docs);
    corpus::write_jsonl(corrupted_path, corrupted.documents, /*with_corruption=*/true);
    corpus::write_confusion_sets(sets_path, sets);
    corpus::write_gold(gold_path, corrupted.gold);

    write_manifest(out_dir + "/manifest.json", "generate", run_config_to_json(config),
                   config.gen.seed, {},
                   {train_path, test_path, corrupted_path, sets_path, gold_path});
    std::cout << "wrote " << out_dir << " (" << train_docs.size() << " train, "
              << test_docs.size() << " test)" << std::endl;
    return 0;
}

// ------------------------------------------------------------------- train

int cmd_train(const std::string& config_path, std::uint64_t seed_override, bool has_seed,
              const std::string& corpus_path, const std::string& variant,
              const std::string& out_path) {
    RunConfig config = load_run_config(config_path);
    if (has_seed) config.model.seed = seed_override;

    if (variant == "base") {
        config.model.grounded = false;
        config.model.conditional = false;
    } else if (variant == "grounded") {
        config.model.grounded = true;
        config.model.conditional = false;
    } else if (variant == "conditional") {
        config.model.grounded = false;
        config.model.conditional = true;
    } else if (variant == "g-conditional") {
        config.model.grounded = true;
        config.model.conditional = true;
    } else {
        throw std::runtime_error("unknown variant: " + variant);
    }

    const auto docs = corpus::read_jsonl(corpus_path);
    auto [model, train_report] = lm::train(config.model, docs);
    lm::save_checkpoint(model, out_path);

    json report = {{"variant", variant},
                   {"documents", docs.size()},
                   {"vocab_size", model.vocab.size()},
                   {"epoch_mean_xent", train_report.epoch_mean_xent},
                   {"parameter_checksum", train_report.parameter_checksum},
                   {"wall_seconds", train_report.wall_seconds}};

    json cfg = run_config_to_json(config);
    cfg["model"]["grounded"] = config.model.grounded;
    cfg["model"]["conditional"] = config.model.conditional;
    write_manifest(out_path + ".manifest.json", "train", cfg, config.model.seed, {corpus_path},
                   {out_path});
    std::cout << report.dump() << std::endl;
    return 0;
}

// -------------------------------------------------------------- perplexity

int cmd_perplexity(const std::string& checkpoint_path, const std::string& corpus_path,
                   const std::string& out_path, bool pretty) {
    const lm::Model model = lm::load_checkpoint(checkpoint_path);
    const auto docs = corpus::read_jsonl(corpus_path);
    const eval::PerplexityReport report = eval::perplexity(model, docs);
    emit_report(eval::report_to_json(report), out_path, pretty);
    if (!out_path.empty())
        write_manifest(out_path + ".manifest.json", "perplexity", json::object(),
                       model.config.seed, {checkpoint_path, corpus_path}, {out_path});
    return 0;
}

// ----------------------------------------------------------------- correct

int cmd_correct(const std::string& checkpoint_path, const std::string& baseline,
                std::uint64_t seed, const std::string& corpus_path, const std::string& sets_path,
                const std::string& gold_path, const std::string& out_path, bool pretty) {
    const auto docs = corpus::read_jsonl(corpus_path);
    const sec::ConfusionSets sets(corpus::read_confusion_sets(sets_path));
    if (!gold_path.empty()) {
        const auto gold = corpus::read_gold(gold_path);
        if (gold.size() != docs.size())
            throw std::runtime_error("gold records do not match corpus size");
        for (std::size_t i = 0; i < docs.size(); ++i)
            if (gold[i].id != docs[i].id || gold[i].corrupted != docs[i].corrupted)
                throw std::runtime_error("gold record mismatch at document " + docs[i].id);
    }

    lm::Model model;
    const bool use_model = baseline.empty();
    if (use_model) model = lm::load_checkpoint(checkpoint_path);
    const sec::BaselineKind kind =
        use_model ? sec::BaselineKind::kRandom : sec::baseline_from_string(baseline);

    std::vector<sec::SecOutcome> outcomes(docs.size());
    std::vector<std::vector<sec::ScoredHypothesis>> scored(docs.size());
    std::vector<char> corrupted(docs.size(), 0);
    std::vector<std::vector<std::string>> gold_tokens(docs.size());
    std::size_t hypothesis_count = 0;

    for (std::size_t i = 0; i < docs.size(); ++i) {
        const auto hypotheses = sec::generate_hypotheses(docs[i].tokens, sets);
        hypothesis_count += hypotheses.size() - 1;  // candidates, H0 excluded
        if (use_model) {
            scored[i] = sec::score(model, docs[i], hypotheses);
        } else {
            Rng rng(Rng::mix(seed, i));
            scored[i] = sec::baseline_score(kind, hypotheses, rng);
        }
        outcomes[i] = sec::decide(scored[i]);
        corrupted[i] = docs[i].corrupted;
        gold_tokens[i] = docs[i].corrupted ? docs[i].gold_tokens : docs[i].tokens;
    }

    const sec::Prf detection = sec::detection_metrics(outcomes, corrupted);
    const sec::CorrectionMetrics correction =
        sec::correction_metrics(outcomes, scored, corrupted, gold_tokens);

    json report = {{"scorer", use_model ? "model" : baseline},
                   {"detection",
                    {{"p", detection.precision}, {"r", detection.recall}, {"f1", detection.f1}}},
                   {"correction",
                    {{"p", correction.prf.precision},
                     {"r", correction.prf.recall},
                     {"f1", correction.prf.f1},
                     {"map", correction.map_present ? json(correction.map) : json(nullptr)}}},
                   {"mean_hypotheses",
                    docs.empty() ? 0.0
                                 : static_cast<double>(hypothesis_count) /
                                       static_cast<double>(docs.size())}};
    emit_report(report, out_path, pretty);
    if (!out_path.empty()) {
        std::vector<std::string> inputs = {corpus_path, sets_path};
        if (!gold_path.empty()) inputs.push_back(gold_path);
        if (use_model) inputs.push_back(checkpoint_path);
        write_manifest(out_path + ".manifest.json", "correct", json::object(), seed, inputs,
                       {out_path});
    }
    return 0;
}

// ------------------------------------------------------------------- probe

std::vector<std::string> split_csv(const std::string& s) {
    std::vector<std::string> out;
    std::string current;
    for (char c : s) {
        if (c == ',') {
            out.push_back(current);
            current.clear();
        } else {
            current += c;
        }
    }
    if (!current.empty()) out.push_back(current);
    return out;
}

int cmd_probe(const std::string& checkpoint_path, const std::string& tpl,
              const std::string& values_csv, const std::string& words_csv,
              const std::string& out_path, bool pretty) {
    const lm::Model model = lm::load_checkpoint(checkpoint_path);
    const auto values = split_csv(values_csv);
    const auto words = split_csv(words_csv);
    if (values.empty() || words.empty()) throw std::runtime_error("probe: empty values or words");
    if (tpl.find("{value}") == std::string::npos || tpl.find("{w}") == std::string::npos)
        throw std::runtime_error("probe: template must contain {value} and {w}");

    json rows = json::array();
    for (const auto& value : values) {
        std::string text = tpl;
        for (std::size_t at = text.find("{value}"); at != std::string::npos;
             at = text.find("{value}"))
            text.replace(at, 7, value);
        const std::size_t slot = text.find("{w}");
        const std::string prefix_text = text.substr(0, slot);

        const auto tokens = numtext::tokenize(prefix_text);
        if (tokens.empty()) throw std::runtime_error("probe: empty prefix before {w}");
        const auto encoded = numtext::encode(tokens, model.vocab);
        const auto dist = lm::next_token_distribution(model, encoded);

        json row = {{"value", value}};
        json probs = json::object();
        for (const auto& word : words) {
            const int id = model.vocab.lookup(word);
            probs[word] = id >= 0 ? dist[static_cast<std::size_t>(id)] : 0.0;
        }
        row["p"] = probs;
        rows.push_back(std::move(row));
    }
    emit_report(json{{"template", tpl}, {"rows", rows}}, out_path, pretty);
    if (!out_path.empty())
        write_manifest(out_path + ".manifest.json", "probe", json{{"template", tpl}},
                       model.config.seed, {checkpoint_path}, {out_path});
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"numerically grounded LSTM language modelling and semantic error correction"};
    app.require_subcommand(1);

    std::string config_path, out_path, corpus_path, checkpoint_path, variant = "base";
    std::string sets_path, gold_path, baseline, tpl, values_csv, words_csv;
    std::uint64_t seed = 0;
    bool pretty = false;

    auto* generate = app.add_subcommand("generate", "generate a synthetic corpus");
    generate->add_option("--config", config_path, "run config JSON");
    auto* gen_seed = generate->add_option("--seed", seed, "override the generation seed");
    generate->add_option("--out", out_path, "output directory")->required();

    auto* train = app.add_subcommand("train", "train a model variant");
    train->add_option("--config", config_path, "run config JSON");
    auto* train_seed = train->add_option("--seed", seed, "override the training seed");
    train->add_option("--corpus", corpus_path, "training corpus JSONL")->required();
    train->add_option("--variant", variant, "base|grounded|conditional|g-conditional");
    train->add_option("--out", out_path, "checkpoint path")->required();

    auto* perplexity = app.add_subcommand("perplexity", "perplexity report on a corpus");
    perplexity->add_option("--checkpoint", checkpoint_path, "model checkpoint")->required();
    perplexity->add_option("--corpus", corpus_path, "evaluation corpus JSONL")->required();
    perplexity->add_option("--out", out_path, "also write the report here");
    perplexity->add_flag("--pretty", pretty, "indent the JSON output");

    auto* correct = app.add_subcommand("correct", "semantic error correction report");
    correct->add_option("--checkpoint", checkpoint_path, "model checkpoint");
    correct->add_option("--baseline", baseline, "random|always|never");
    correct->add_option("--seed", seed, "baseline scorer seed");
    correct->add_option("--corpus", corpus_path, "corrupted corpus JSONL")->required();
    correct->add_option("--confusion-sets", sets_path, "confusion set JSON")->required();
    correct->add_option("--gold", gold_path, "gold record JSONL");
    correct->add_option("--out", out_path, "also write the report here");
    correct->add_flag("--pretty", pretty, "indent the JSON output");

    auto* probe = app.add_subcommand("probe", "word probabilities as a template value varies");
    probe->add_option("--checkpoint", checkpoint_path, "model checkpoint")->required();
    probe->add_option("--template", tpl, "text with {value} and {w} placeholders")->required();
    probe->add_option("--values", values_csv, "comma-separated values")->required();
    probe->add_option("--words", words_csv, "comma-separated candidate words")->required();
    probe->add_option("--out", out_path, "also write the report here");
    probe->add_flag("--pretty", pretty, "indent the JSON output");

    CLI11_PARSE(app, argc, argv);

    try {
        if (generate->parsed())
            return cmd_generate(config_path, seed, gen_seed->count() > 0, out_path);
        if (train->parsed())
            return cmd_train(config_path, seed, train_seed->count() > 0, corpus_path, variant,
                             out_path);
        if (perplexity->parsed())
            return cmd_perplexity(checkpoint_path, corpus_path, out_path, pretty);
        if (correct->parsed()) {
            if (baseline.empty() == checkpoint_path.empty())
                throw std::runtime_error("correct: pass exactly one of --checkpoint, --baseline");
            return cmd_correct(checkpoint_path, baseline, seed, corpus_path, sets_path, gold_path,
                               out_path, pretty);
        }
        if (probe->parsed())
            return cmd_probe(checkpoint_path, tpl, values_csv, words_csv, out_path, pretty);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << std::endl;
        return 1;
    }
    return 0;
}
