#include "detective/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

#include <json.hpp>

namespace detective {

using nlohmann::json;

std::vector<EmbeddingRecord> embed_corpus(const EncoderParams& params,
                                          const FeaturizerConfig& featurizer,
                                          const Corpus& corpus) {
    std::vector<EmbeddingRecord> records;
    records.reserve(corpus.samples.size());
    for (const auto& s : corpus.samples) {
        auto [embedding, prenorm] = encode(params, featurize(s.text, featurizer));
        records.push_back({s.id, s.label, std::move(embedding)});
    }
    return records;
}

MetricsReport evaluate_db(const FeatureDb& db, const std::vector<EmbeddingRecord>& queries,
                          const EvalOptions& opts) {
    MetricsReport report;
    if (opts.attribution) {
        std::vector<std::pair<std::string, std::string>> predictions;
        predictions.reserve(queries.size());
        for (const auto& q : queries) {
            auto [predicted, detail] = attribute(db, q.vec.values, opts.k);
            predictions.emplace_back(q.label.class_key(), predicted);
        }
        report = compute_attribution_metrics(predictions);
    } else {
        std::vector<std::pair<HierLabel, Source>> predictions;
        predictions.reserve(queries.size());
        for (const auto& q : queries) {
            auto [predicted, detail] = classify_binary(db, q.vec.values, opts.k, opts.vote);
            predictions.emplace_back(q.label, predicted);
        }
        report = compute_metrics(predictions, opts.f1_mode);
    }
    report.k = opts.k;
    report.vote_mode = opts.vote == VoteMode::Majority ? "majority" : "weighted";
    std::ostringstream digest;
    digest << std::hex << db.digest();
    report.db_digest = digest.str();
    return report;
}

TfiaSweepResult tfia_sweep(const EncoderParams& params, const FeaturizerConfig& featurizer,
                           const FeatureDb& base_db, const Corpus& ood_train,
                           const Corpus& ood_test, const std::vector<double>& fractions,
                           const EvalOptions& opts, std::uint64_t seed) {
    if (fractions.empty()) throw ValidationError("empty fraction list");
    for (std::size_t i = 0; i < fractions.size(); ++i) {
        if (fractions[i] < 0.0 || fractions[i] > 1.0)
            throw ValidationError("fractions must lie in [0,1]");
        if (i > 0 && fractions[i] <= fractions[i - 1])
            throw ValidationError("fractions must be strictly increasing");
    }

    std::set<std::string> train_ids;
    for (const auto& s : ood_train.samples) train_ids.insert(s.id);
    for (const auto& s : ood_test.samples)
        if (train_ids.count(s.id))
            throw ValidationError("test-leakage guard: id '" + s.id +
                                  "' appears in both OOD train and test");

    auto train_records = embed_corpus(params, featurizer, ood_train);
    const auto test_records = embed_corpus(params, featurizer, ood_test);

    // one seeded shuffle; every fraction takes a prefix, so subsamples nest
    std::mt19937_64 rng(mix_seeds(seed, 0x7F1A));
    std::shuffle(train_records.begin(), train_records.end(), rng);

    TfiaSweepResult result;
    for (double f : fractions) {
        const auto count = std::min<std::size_t>(
            train_records.size(),
            static_cast<std::size_t>(std::floor(f * train_records.size() + 0.5)));
        const std::vector<EmbeddingRecord> subset(train_records.begin(),
                                                  train_records.begin() + count);
        const FeatureDb expanded = tfia_add(base_db, subset);
        result.fractions.push_back(f);
        result.reports.push_back(evaluate_db(expanded, test_records, opts));
    }
    return result;
}

std::string TfiaSweepResult::to_json() const {
    json points = json::array();
    for (std::size_t i = 0; i < fractions.size(); ++i)
        points.push_back({{"ood_fraction", fractions[i]},
                          {"report", json::parse(reports[i].to_json())}});
    return json{{"sweep", points}}.dump(2);
}

void cmd_synth(const SynthSpec& spec, std::uint64_t seed, const std::string& out_path) {
    save_corpus(synth_corpus(spec, seed), out_path);
}

void cmd_embed(const std::optional<std::string>& checkpoint_path, const std::string& corpus_path,
               const std::string& out_path, std::uint64_t fallback_seed) {
    const Corpus corpus = load_corpus(corpus_path);
    EncoderParams params;
    FeaturizerConfig featurizer;
    if (checkpoint_path.has_value()) {
        auto ckpt = checkpoint_load(*checkpoint_path);
        params = std::move(ckpt.params);
        featurizer = ckpt.featurizer;
    } else {
        // untrained encoder with default dims; useful for smoke runs
        params = init_encoder(EncoderDims{featurizer.bucket_count, 256, 128}, fallback_seed);
    }
    const auto records = embed_corpus(params, featurizer, corpus);
    export_embeddings(out_path, records, params.dims.embed_dim);
}

void cmd_build_db(const std::string& embeddings_path, const std::string& out_path) {
    std::size_t dim = 0;
    const auto records = import_embeddings(embeddings_path, &dim);
    db_save(build_db(static_cast<std::uint32_t>(dim), records), out_path);
}

void cmd_tfia_add(const std::string& db_path, const std::string& embeddings_path,
                  const std::string& out_path) {
    const FeatureDb db = db_load(db_path);
    const auto records = import_embeddings(embeddings_path);
    db_save(tfia_add(db, records), out_path);
}

namespace {

void write_predictions(const std::string& out_path,
                       const std::vector<std::pair<std::string, std::string>>& predictions) {
    std::ofstream out(out_path);
    if (!out) throw IoError("cannot write predictions: " + out_path);
    for (const auto& [id, predicted] : predictions)
        out << json{{"id", id}, {"predicted", predicted}}.dump() << '\n';
    if (!out) throw IoError("write failed: " + out_path);
}

}  // namespace

void cmd_classify(const std::string& db_path, const std::string& embeddings_path,
                  const EvalOptions& opts, const std::string& out_path) {
    const FeatureDb db = db_load(db_path);
    const auto queries = import_embeddings(embeddings_path);
    std::vector<std::pair<std::string, std::string>> predictions;
    for (const auto& q : queries) {
        auto [predicted, detail] = classify_binary(db, q.vec.values, opts.k, opts.vote);
        predictions.emplace_back(q.id, predicted == Source::Human ? "human" : "machine");
    }
    write_predictions(out_path, predictions);
}

void cmd_attribute(const std::string& db_path, const std::string& embeddings_path, int k,
                   const std::string& out_path) {
    const FeatureDb db = db_load(db_path);
    const auto queries = import_embeddings(embeddings_path);
    std::vector<std::pair<std::string, std::string>> predictions;
    for (const auto& q : queries) {
        auto [predicted, detail] = attribute(db, q.vec.values, k);
        predictions.emplace_back(q.id, predicted);
    }
    write_predictions(out_path, predictions);
}

MetricsReport cmd_evaluate(const std::string& db_path, const std::string& embeddings_path,
                           const EvalOptions& opts, const std::string& out_path) {
    const FeatureDb db = db_load(db_path);
    const auto queries = import_embeddings(embeddings_path);
    const MetricsReport report = evaluate_db(db, queries, opts);
    if (!out_path.empty()) {
        std::ofstream out(out_path);
        if (!out) throw IoError("cannot write report: " + out_path);
        out << report.to_json() << '\n';
        if (!out) throw IoError("write failed: " + out_path);
    }
    return report;
}

TfiaSweepResult cmd_tfia_sweep(const std::string& checkpoint_path, const std::string& base_db_path,
                               const std::string& ood_train_path, const std::string& ood_test_path,
                               const std::vector<double>& fractions, const EvalOptions& opts,
                               std::uint64_t seed, const std::string& out_path) {
    auto ckpt = checkpoint_load(checkpoint_path);
    const FeatureDb base_db = db_load(base_db_path);
    const Corpus ood_train = load_corpus(ood_train_path);
    const Corpus ood_test = load_corpus(ood_test_path);
    const auto result = tfia_sweep(ckpt.params, ckpt.featurizer, base_db, ood_train, ood_test,
                                   fractions, opts, seed);
    if (!out_path.empty()) {
        std::ofstream out(out_path);
        if (!out) throw IoError("cannot write sweep result: " + out_path);
        out << result.to_json() << '\n';
        if (!out) throw IoError("write failed: " + out_path);
    }
    return result;
}

}  // namespace detective
