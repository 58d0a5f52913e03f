#pragma once

#include <optional>
#include <string>
#include <vector>

#include "detective/corpus.hpp"
#include "detective/encoder.hpp"
#include "detective/metrics.hpp"
#include "detective/trainer.hpp"
#include "detective/vectordb.hpp"

namespace detective {

// Encode every corpus sample with the given encoder; labels copied through.
std::vector<EmbeddingRecord> embed_corpus(const EncoderParams& params,
                                          const FeaturizerConfig& featurizer,
                                          const Corpus& corpus);

struct EvalOptions {
    int k = 5;
    VoteMode vote = VoteMode::Majority;
    F1Mode f1_mode = F1Mode::Macro;
    bool attribution = false;
};

// Classify labeled query embeddings against the database and score them.
MetricsReport evaluate_db(const FeatureDb& db, const std::vector<EmbeddingRecord>& queries,
                          const EvalOptions& opts);

struct TfiaSweepResult {
    std::vector<double> fractions;
    std::vector<MetricsReport> reports;

    std::string to_json() const;
};

// For each fraction, expand a copy of the base database with a nested
// deterministic subsample of the encoded OOD training corpus and evaluate
// on the OOD test corpus. No parameter updates anywhere.
TfiaSweepResult tfia_sweep(const EncoderParams& params, const FeaturizerConfig& featurizer,
                           const FeatureDb& base_db, const Corpus& ood_train,
                           const Corpus& ood_test, const std::vector<double>& fractions,
                           const EvalOptions& opts, std::uint64_t seed);

// File-level command implementations shared by the CLI.
void cmd_synth(const SynthSpec& spec, std::uint64_t seed, const std::string& out_path);
void cmd_embed(const std::optional<std::string>& checkpoint_path, const std::string& corpus_path,
               const std::string& out_path, std::uint64_t fallback_seed = 0);
void cmd_build_db(const std::string& embeddings_path, const std::string& out_path);
void cmd_tfia_add(const std::string& db_path, const std::string& embeddings_path,
                  const std::string& out_path);
void cmd_classify(const std::string& db_path, const std::string& embeddings_path,
                  const EvalOptions& opts, const std::string& out_path);
void cmd_attribute(const std::string& db_path, const std::string& embeddings_path, int k,
                   const std::string& out_path);
MetricsReport cmd_evaluate(const std::string& db_path, const std::string& embeddings_path,
                           const EvalOptions& opts, const std::string& out_path);
TfiaSweepResult cmd_tfia_sweep(const std::string& checkpoint_path, const std::string& base_db_path,
                               const std::string& ood_train_path, const std::string& ood_test_path,
                               const std::vector<double>& fractions, const EvalOptions& opts,
                               std::uint64_t seed, const std::string& out_path);

}  // namespace detective
