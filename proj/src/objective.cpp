#include "detective/objective.hpp"

#include <algorithm>
#include <cmath>

#include <json.hpp>

namespace detective {

void LossWeights::validate() const {
    if (!(tau > 0.0)) throw ValidationError("temperature must be positive");
    if (alpha < 0.0 || beta < 0.0 || gamma < 0.0 || delta < 0.0)
        throw ValidationError("loss weights must be non-negative");
}

SimMatrix sim_matrix(const std::vector<EmbeddingVec>& embeddings) {
    const std::size_t n = embeddings.size();
    if (n < 2) throw ValidationError("similarity matrix needs at least 2 embeddings");
    const std::size_t d = embeddings[0].dim();
    for (const auto& e : embeddings) {
        if (e.dim() != d) throw ValidationError("embedding dimension mismatch");
        double sq = 0.0;
        for (double v : e.values) sq += v * v;
        if (std::abs(std::sqrt(sq) - 1.0) > 1e-4)
            throw ValidationError("non-unit embedding passed to sim_matrix");
    }

    SimMatrix s;
    s.n = n;
    s.values.resize(n * n);
    for (std::size_t i = 0; i < n; ++i) {
        s.values[i * n + i] = 1.0;
        for (std::size_t j = i + 1; j < n; ++j) {
            double dot = 0.0;
            for (std::size_t k = 0; k < d; ++k) dot += embeddings[i].values[k] * embeddings[j].values[k];
            s.values[i * n + j] = dot;
            s.values[j * n + i] = dot;
        }
    }
    return s;
}

LevelSets build_level_sets(const std::vector<HierLabel>& labels, int query) {
    LevelSets sets;
    const auto& q = labels[query];
    const int n = static_cast<int>(labels.size());
    for (int j = 0; j < n; ++j) {
        if (j == query) continue;
        const auto& l = labels[j];
        if (q.is_human()) {
            // level 1: humans together, machines apart
            if (l.is_human())
                sets.positives[0].push_back(j);
            else
                sets.negatives[0].push_back(j);
        } else {
            // level 2: same model vs everything else (humans count as z-different)
            if (l.is_machine() && l.model == q.model)
                sets.positives[1].push_back(j);
            else
                sets.negatives[1].push_back(j);
            // level 3: same family, different model; negatives are y-different
            if (l.is_machine() && l.family == q.family) {
                if (l.model != q.model) sets.positives[2].push_back(j);
            } else {
                sets.negatives[2].push_back(j);
            }
            // level 4: any other machine family vs humans
            if (l.is_machine()) {
                if (l.family != q.family) sets.positives[3].push_back(j);
            } else {
                sets.negatives[3].push_back(j);
            }
        }
    }
    for (int lvl = 0; lvl < 4; ++lvl) sets.applicable[lvl] = !sets.positives[lvl].empty();
    return sets;
}

double level_loss(int query, const std::vector<int>& positives, const std::vector<int>& negatives,
                  const SimMatrix& sims, double tau) {
    if (positives.empty()) throw ValidationError("level_loss requires a non-empty positive set");
    if (negatives.empty()) return 0.0;

    double pos_mean = 0.0;
    for (int k : positives) pos_mean += sims.at(query, k) / tau;
    pos_mean /= static_cast<double>(positives.size());

    double max_arg = pos_mean;
    for (int k : negatives) max_arg = std::max(max_arg, sims.at(query, k) / tau);
    double denom = std::exp(pos_mean - max_arg);
    for (int k : negatives) denom += std::exp(sims.at(query, k) / tau - max_arg);
    return -(pos_mean - max_arg) + std::log(denom);
}

double mcl_loss(const std::vector<HierLabel>& labels, const SimMatrix& sims,
                const LossWeights& weights, MclDetail* detail) {
    weights.validate();
    const int n = static_cast<int>(labels.size());
    const double level_weights[4] = {weights.effective_delta(), weights.alpha, weights.beta,
                                     weights.gamma};
    if (detail) {
        detail->level_losses.assign(n, {});
        detail->sets.resize(n);
        detail->skipped_levels = 0;
    }

    double total = 0.0;
    for (int i = 0; i < n; ++i) {
        auto sets = build_level_sets(labels, i);
        std::array<double, 4> losses{};
        for (int lvl = 0; lvl < 4; ++lvl) {
            const bool relevant = labels[i].is_human() ? lvl == 0 : lvl > 0;
            if (!relevant) continue;
            if (!sets.applicable[lvl]) {
                if (detail) ++detail->skipped_levels;
                continue;
            }
            losses[lvl] = level_loss(i, sets.positives[lvl], sets.negatives[lvl], sims, weights.tau);
            total += level_weights[lvl] * losses[lvl];
        }
        if (detail) {
            detail->level_losses[i] = losses;
            detail->sets[i] = std::move(sets);
        }
    }
    return total;
}

namespace {

double clamp_prob(double p) { return std::clamp(p, 1e-12, 1.0 - 1e-12); }

}  // namespace

double ce_loss(const std::vector<double>& probs, const std::vector<HierLabel>& labels) {
    if (probs.size() != labels.size()) throw ValidationError("probs/labels length mismatch");
    if (probs.empty()) throw ValidationError("ce_loss on empty batch");
    double total = 0.0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
        const double p = clamp_prob(probs[i]);
        total += labels[i].is_human() ? std::log(p) : std::log(1.0 - p);
    }
    return -total / static_cast<double>(probs.size());
}

LossReport total_loss(const std::vector<HierLabel>& labels,
                      const std::vector<EmbeddingVec>& embeddings,
                      const std::vector<double>& probs, const LossWeights& weights) {
    if (labels.size() != embeddings.size() || labels.size() != probs.size())
        throw ValidationError("batch length mismatch");

    const auto sims = sim_matrix(embeddings);
    MclDetail detail;
    LossReport report;
    report.l_mcl = mcl_loss(labels, sims, weights, &detail);
    report.l_ce = ce_loss(probs, labels);
    report.l_all = report.l_mcl + report.l_ce;
    report.skipped_levels = detail.skipped_levels;

    std::array<int, 4> counts{};
    for (std::size_t i = 0; i < labels.size(); ++i) {
        for (int lvl = 0; lvl < 4; ++lvl) {
            const bool relevant = labels[i].is_human() ? lvl == 0 : lvl > 0;
            if (relevant && detail.sets[i].applicable[lvl]) {
                report.per_level_mean[lvl] += detail.level_losses[i][lvl];
                ++counts[lvl];
            }
        }
    }
    for (int lvl = 0; lvl < 4; ++lvl)
        if (counts[lvl] > 0) report.per_level_mean[lvl] /= counts[lvl];

    if (!std::isfinite(report.l_all)) throw NumericError("non-finite loss");
    return report;
}

std::string LossReport::to_json_line() const {
    nlohmann::json j;
    j["l_mcl"] = l_mcl;
    j["l_ce"] = l_ce;
    j["l_all"] = l_all;
    j["skipped_levels"] = skipped_levels;
    j["per_level_means"] = per_level_mean;
    return j.dump();
}

LossGradients loss_gradients(const std::vector<HierLabel>& labels,
                             const std::vector<EmbeddingVec>& embeddings,
                             const std::vector<double>& probs, const LossWeights& weights) {
    if (labels.size() != embeddings.size() || labels.size() != probs.size())
        throw ValidationError("batch length mismatch");
    weights.validate();

    const std::size_t n = labels.size();
    const std::size_t d = embeddings[0].dim();
    const auto sims = sim_matrix(embeddings);
    const double level_weights[4] = {weights.effective_delta(), weights.alpha, weights.beta,
                                     weights.gamma};

    LossGradients g;
    g.d_embeddings.assign(n, std::vector<double>(d, 0.0));
    g.d_probs.assign(n, 0.0);

    auto add_pair_grad = [&](std::size_t i, std::size_t k, double coeff) {
        // dS(i,k)/de_i = e_k and vice versa
        for (std::size_t c = 0; c < d; ++c) {
            g.d_embeddings[i][c] += coeff * embeddings[k].values[c];
            g.d_embeddings[k][c] += coeff * embeddings[i].values[c];
        }
    };

    for (std::size_t i = 0; i < n; ++i) {
        const auto sets = build_level_sets(labels, static_cast<int>(i));
        for (int lvl = 0; lvl < 4; ++lvl) {
            const bool relevant = labels[i].is_human() ? lvl == 0 : lvl > 0;
            if (!relevant || !sets.applicable[lvl] || sets.negatives[lvl].empty()) continue;

            const auto& pos = sets.positives[lvl];
            const auto& neg = sets.negatives[lvl];
            double pos_mean = 0.0;
            for (int k : pos) pos_mean += sims.at(i, k) / weights.tau;
            pos_mean /= static_cast<double>(pos.size());

            double max_arg = pos_mean;
            for (int k : neg) max_arg = std::max(max_arg, sims.at(i, k) / weights.tau);
            double z = std::exp(pos_mean - max_arg);
            for (int k : neg) z += std::exp(sims.at(i, k) / weights.tau - max_arg);

            const double p_pos = std::exp(pos_mean - max_arg) / z;
            const double w = level_weights[lvl];
            // dL/d(pos mean) = p_pos - 1; spread over the positive set
            const double pos_coeff =
                w * (p_pos - 1.0) / (weights.tau * static_cast<double>(pos.size()));
            for (int k : pos) add_pair_grad(i, k, pos_coeff);
            for (int k : neg) {
                const double p_k = std::exp(sims.at(i, k) / weights.tau - max_arg) / z;
                add_pair_grad(i, k, w * p_k / weights.tau);
            }
        }
    }

    const double inv_n = 1.0 / static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double p = std::clamp(probs[i], 1e-12, 1.0 - 1e-12);
        const double x = labels[i].is_human() ? 1.0 : 0.0;
        g.d_probs[i] = inv_n * (p - x) / (p * (1.0 - p));
        if (!std::isfinite(g.d_probs[i])) throw NumericError("non-finite probability gradient");
    }
    return g;
}

}  // namespace detective
