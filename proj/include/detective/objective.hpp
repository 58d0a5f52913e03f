#pragma once

#include <array>
#include <string>
#include <vector>

#include "detective/encoder.hpp"

namespace detective {

struct LossWeights {
    double alpha = 1.0;
    double beta = 1.0;
    double gamma = 1.0;
    double delta = 3.0;
    double tau = 0.07;
    bool balanced_mode = true;  // delta tracks alpha + beta + gamma

    double effective_delta() const { return balanced_mode ? alpha + beta + gamma : delta; }
    void validate() const;
};

struct SimMatrix {
    std::size_t n = 0;
    std::vector<double> values;  // row-major n x n

    double at(std::size_t i, std::size_t j) const { return values[i * n + j]; }
};

// Cosine similarities of a batch of unit embeddings (plain dot products).
SimMatrix sim_matrix(const std::vector<EmbeddingVec>& embeddings);

// Positive/negative index sets for the four kinship levels of one query.
// Level 0 (human vs machine) applies to human queries; levels 1-3
// (same model / same family / any machine) apply to machine queries.
struct LevelSets {
    std::array<std::vector<int>, 4> positives;
    std::array<std::vector<int>, 4> negatives;
    std::array<bool, 4> applicable{};  // false when the positive set is empty
};

LevelSets build_level_sets(const std::vector<HierLabel>& labels, int query);

// Set-averaged contrastive term: -log(exp(mean pos sim / tau) /
// (exp(mean pos sim / tau) + sum over negatives of exp(sim / tau))).
// Exactly 0 when the negative set is empty.
double level_loss(int query, const std::vector<int>& positives, const std::vector<int>& negatives,
                  const SimMatrix& sims, double tau);

struct MclDetail {
    // per query, per level; 0 for inapplicable levels
    std::vector<std::array<double, 4>> level_losses;
    std::vector<LevelSets> sets;
    int skipped_levels = 0;  // query/level pairs with empty positives
};

double mcl_loss(const std::vector<HierLabel>& labels, const SimMatrix& sims,
                const LossWeights& weights, MclDetail* detail = nullptr);

// Binary cross-entropy with x = 1 for human; probabilities clamped to
// [1e-12, 1 - 1e-12] before the logs.
double ce_loss(const std::vector<double>& probs, const std::vector<HierLabel>& labels);

struct LossReport {
    double l_mcl = 0.0;
    double l_ce = 0.0;
    double l_all = 0.0;
    int skipped_levels = 0;
    std::array<double, 4> per_level_mean{};  // mean over applicable query/level terms

    std::string to_json_line() const;
};

LossReport total_loss(const std::vector<HierLabel>& labels,
                      const std::vector<EmbeddingVec>& embeddings,
                      const std::vector<double>& probs, const LossWeights& weights);

struct LossGradients {
    std::vector<std::vector<double>> d_embeddings;
    std::vector<double> d_probs;
};

// Analytic gradients of the combined loss w.r.t. the raw embedding vectors
// and probabilities; chaining through the encoder is the caller's job.
LossGradients loss_gradients(const std::vector<HierLabel>& labels,
                             const std::vector<EmbeddingVec>& embeddings,
                             const std::vector<double>& probs, const LossWeights& weights);

}  // namespace detective
