#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "detective/corpus.hpp"
#include "detective/encoder.hpp"
#include "detective/objective.hpp"

namespace detective {

struct AdamWConfig {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 1e-4;
};

struct OptimState {
    AdamWConfig cfg;
    std::uint64_t step = 0;
    EncoderGrads m;  // first moments, shaped like the parameters
    EncoderGrads v;  // second moments

    static OptimState init(const EncoderDims& dims, const AdamWConfig& cfg = {});
};

// Bias-corrected Adam update with decoupled weight decay.
void adamw_step(EncoderParams& params, const EncoderGrads& grads, OptimState& state, double lr);

struct Schedule {
    double peak_lr = 1e-3;  // transformer-scale fine-tuning would use ~2e-5
    double min_lr = 0.0;
    std::uint64_t warmup_steps = 200;  // transformer-scale runs would use ~2000
    std::uint64_t total_steps = 1;

    void validate() const;
};

// Linear warmup from zero, then cosine annealing to min_lr.
double lr_at(std::uint64_t step, const Schedule& schedule);

struct SamplerConfig {
    int batch_size = 32;
    int classes_per_batch = 0;   // 0 = derive from batch size and corpus
    int samples_per_class = 3;   // >= 2 so level-2 positives exist
    double human_fraction = 0.25;
    std::uint64_t seed = 0;
};

// Precomputed stratum indexes for repeated batch draws.
struct BatchSampler {
    BatchSampler(const Corpus& corpus, const SamplerConfig& cfg);

    // Deterministic function of (config seed, step).
    std::vector<std::size_t> sample_batch(std::uint64_t step) const;

    int classes_per_batch() const { return classes_; }
    int humans_per_batch() const { return humans_; }

  private:
    const Corpus* corpus_;
    SamplerConfig cfg_;
    int classes_ = 0;
    int humans_ = 0;
    std::vector<std::string> class_keys_;                 // distinct z, family-major order
    std::vector<std::vector<std::size_t>> class_indices_; // per class sample indices
    std::vector<std::size_t> human_indices_;
};

struct TrainConfig {
    FeaturizerConfig featurizer;
    std::uint32_t hidden_dim = 256;
    std::uint32_t embed_dim = 128;
    LossWeights weights;
    AdamWConfig optimizer;
    double peak_lr = 1e-3;
    double min_lr = 0.0;
    std::uint64_t warmup_steps = 200;
    SamplerConfig sampler;
    int epochs = 10;
    std::uint64_t max_steps = 0;  // stop early, keeping the full schedule; 0 = run to the end
    std::uint64_t seed = 0;
    std::string checkpoint_path;   // empty = no checkpoints
    int checkpoint_every = 0;      // steps; 0 = final only
    std::string log_path;          // JSONL step log
};

struct StepLog {
    std::uint64_t step = 0;
    double lr = 0.0;
    LossReport report;
};

struct TrainResult {
    EncoderParams params;
    OptimState opt;
    FeaturizerConfig featurizer;
    std::vector<StepLog> steps;
};

struct Checkpoint {
    EncoderParams params;
    OptimState opt;
    FeaturizerConfig featurizer;
};

// Deterministic training loop: featurize -> encode -> loss -> gradients ->
// AdamW. Throws NumericError with the offending step on divergence.
TrainResult train(const Corpus& corpus, const TrainConfig& cfg,
                  const Checkpoint* resume = nullptr);

// Binary container: magic "DTCK", version, dims, featurizer config,
// parameter blocks and moments as little-endian float64, step counter,
// config digest.
void checkpoint_save(const std::string& path, const Checkpoint& ckpt);
Checkpoint checkpoint_load(const std::string& path);

}  // namespace detective
