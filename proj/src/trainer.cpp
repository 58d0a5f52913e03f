#include "detective/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>

#include "binio.hpp"

namespace detective {

OptimState OptimState::init(const EncoderDims& dims, const AdamWConfig& cfg) {
    OptimState s;
    s.cfg = cfg;
    s.m = EncoderGrads::zeros(dims);
    s.v = EncoderGrads::zeros(dims);
    return s;
}

namespace {

void adamw_block(std::vector<double>& theta, const std::vector<double>& g, std::vector<double>& m,
                 std::vector<double>& v, const AdamWConfig& cfg, double lr, double bc1, double bc2) {
    const std::size_t n = theta.size();
    for (std::size_t i = 0; i < n; ++i) {
        theta[i] -= lr * cfg.weight_decay * theta[i];
        m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
        v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
        theta[i] -= lr * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + cfg.eps);
    }
}

void adamw_scalar(double& theta, double g, double& m, double& v, const AdamWConfig& cfg, double lr,
                  double bc1, double bc2) {
    theta -= lr * cfg.weight_decay * theta;
    m = cfg.beta1 * m + (1.0 - cfg.beta1) * g;
    v = cfg.beta2 * v + (1.0 - cfg.beta2) * g * g;
    theta -= lr * (m / bc1) / (std::sqrt(v / bc2) + cfg.eps);
}

bool all_finite(const std::vector<double>& v) {
    for (double x : v)
        if (!std::isfinite(x)) return false;
    return true;
}

}  // namespace

void adamw_step(EncoderParams& params, const EncoderGrads& grads, OptimState& state, double lr) {
    if (!all_finite(grads.w1) || !all_finite(grads.b1) || !all_finite(grads.w2) ||
        !all_finite(grads.b2) || !all_finite(grads.wc) || !std::isfinite(grads.bc))
        throw NumericError("non-finite gradients in optimizer step");

    state.step += 1;
    const auto t = static_cast<double>(state.step);
    const double bc1 = 1.0 - std::pow(state.cfg.beta1, t);
    const double bc2 = 1.0 - std::pow(state.cfg.beta2, t);
    adamw_block(params.w1, grads.w1, state.m.w1, state.v.w1, state.cfg, lr, bc1, bc2);
    adamw_block(params.b1, grads.b1, state.m.b1, state.v.b1, state.cfg, lr, bc1, bc2);
    adamw_block(params.w2, grads.w2, state.m.w2, state.v.w2, state.cfg, lr, bc1, bc2);
    adamw_block(params.b2, grads.b2, state.m.b2, state.v.b2, state.cfg, lr, bc1, bc2);
    adamw_block(params.wc, grads.wc, state.m.wc, state.v.wc, state.cfg, lr, bc1, bc2);
    adamw_scalar(params.bc, grads.bc, state.m.bc, state.v.bc, state.cfg, lr, bc1, bc2);
}

void Schedule::validate() const {
    if (warmup_steps >= total_steps) throw ValidationError("warmup must be shorter than training");
    if (!(peak_lr > min_lr) || min_lr < 0.0) throw ValidationError("require peak_lr > min_lr >= 0");
}

double lr_at(std::uint64_t step, const Schedule& schedule) {
    schedule.validate();
    if (step > schedule.total_steps) throw ValidationError("step beyond schedule");
    if (step < schedule.warmup_steps)
        return schedule.peak_lr * static_cast<double>(step) /
               static_cast<double>(schedule.warmup_steps);
    const double progress = static_cast<double>(step - schedule.warmup_steps) /
                            static_cast<double>(schedule.total_steps - schedule.warmup_steps);
    return schedule.min_lr +
           0.5 * (schedule.peak_lr - schedule.min_lr) * (1.0 + std::cos(std::numbers::pi * progress));
}

BatchSampler::BatchSampler(const Corpus& corpus, const SamplerConfig& cfg)
    : corpus_(&corpus), cfg_(cfg) {
    if (cfg.batch_size < 2) throw ValidationError("batch size must be >= 2");
    if (cfg.samples_per_class < 2) throw ValidationError("samples per class must be >= 2");
    if (cfg.human_fraction < 0.0 || cfg.human_fraction >= 1.0)
        throw ValidationError("human fraction must be in [0,1)");

    std::map<std::string, std::vector<std::size_t>> by_class;
    for (std::size_t i = 0; i < corpus.samples.size(); ++i) {
        const auto& label = corpus.samples[i].label;
        if (label.is_human())
            human_indices_.push_back(i);
        else
            by_class[label.model].push_back(i);
    }
    // family-major order so that co-sampled classes tend to share families
    for (const auto& [family, models] : corpus.family_index)
        for (const auto& model : models) {
            auto it = by_class.find(model);
            if (it == by_class.end() || it->second.size() < static_cast<std::size_t>(cfg.samples_per_class))
                throw ValidationError("class '" + model + "' too small for sampler config");
            class_keys_.push_back(model);
            class_indices_.push_back(it->second);
        }

    const int want_humans =
        human_indices_.empty() ? 0 : static_cast<int>(std::lround(cfg.batch_size * cfg.human_fraction));
    classes_ = cfg.classes_per_batch;
    if (classes_ == 0)
        classes_ = std::min<int>(static_cast<int>(class_keys_.size()),
                                 (cfg.batch_size - want_humans) / cfg.samples_per_class);
    if (classes_ < 1 || classes_ > static_cast<int>(class_keys_.size()))
        throw ValidationError("infeasible sampler config: no usable machine classes");
    humans_ = cfg.batch_size - classes_ * cfg.samples_per_class;
    if (humans_ < 0) throw ValidationError("infeasible sampler config: batch too small");
    if (humans_ > static_cast<int>(human_indices_.size()))
        throw ValidationError("infeasible sampler config: not enough human samples");
}

std::vector<std::size_t> BatchSampler::sample_batch(std::uint64_t step) const {
    std::mt19937_64 rng(mix_seeds(cfg_.seed, splitmix64(step)));

    std::vector<std::size_t> class_order(class_keys_.size());
    for (std::size_t i = 0; i < class_order.size(); ++i) class_order[i] = i;
    // rotate instead of shuffle: keeps family-major adjacency so batches
    // usually contain same-family class pairs
    if (!class_order.empty())
        std::rotate(class_order.begin(), class_order.begin() + rng() % class_order.size(),
                    class_order.end());

    std::vector<std::size_t> batch;
    batch.reserve(cfg_.batch_size);
    for (int c = 0; c < classes_; ++c) {
        auto pool = class_indices_[class_order[c]];
        for (int s = 0; s < cfg_.samples_per_class; ++s) {
            const std::size_t pick = s + rng() % (pool.size() - s);
            std::swap(pool[s], pool[pick]);
            batch.push_back(pool[s]);
        }
    }
    if (humans_ > 0) {
        auto pool = human_indices_;
        for (int s = 0; s < humans_; ++s) {
            const std::size_t pick = s + rng() % (pool.size() - s);
            std::swap(pool[s], pool[pick]);
            batch.push_back(pool[s]);
        }
    }
    return batch;
}

TrainResult train(const Corpus& corpus, const TrainConfig& cfg, const Checkpoint* resume) {
    const auto report = validate_corpus(corpus);
    if (!report.ok)
        throw ValidationError("corpus failed validation: " + report.issues.front());
    cfg.featurizer.validate();
    cfg.weights.validate();

    const EncoderDims dims{cfg.featurizer.bucket_count, cfg.hidden_dim, cfg.embed_dim};

    TrainResult result;
    if (resume != nullptr) {
        if (!(resume->params.dims == dims))
            throw ValidationError("checkpoint dimensions do not match training config");
        result.params = resume->params;
        result.opt = resume->opt;
    } else {
        result.params = init_encoder(dims, cfg.seed);
        result.opt = OptimState::init(dims, cfg.optimizer);
    }
    result.featurizer = cfg.featurizer;

    if (cfg.epochs == 0) return result;

    BatchSampler sampler(corpus, cfg.sampler);
    const auto steps_per_epoch = static_cast<std::uint64_t>(
        (corpus.samples.size() + cfg.sampler.batch_size - 1) / cfg.sampler.batch_size);
    Schedule schedule;
    schedule.peak_lr = cfg.peak_lr;
    schedule.min_lr = cfg.min_lr;
    schedule.total_steps = steps_per_epoch * static_cast<std::uint64_t>(cfg.epochs);
    schedule.warmup_steps = std::min<std::uint64_t>(cfg.warmup_steps, schedule.total_steps - 1);

    // featurization is pure; cache it once
    std::vector<FeatureVector> features(corpus.samples.size());
    for (std::size_t i = 0; i < corpus.samples.size(); ++i)
        features[i] = featurize(corpus.samples[i].text, cfg.featurizer);

    std::ofstream log;
    if (!cfg.log_path.empty()) {
        log.open(cfg.log_path);
        if (!log) throw IoError("cannot write training log: " + cfg.log_path);
    }

    const std::uint64_t end_step = cfg.max_steps == 0
                                       ? schedule.total_steps
                                       : std::min(cfg.max_steps, schedule.total_steps);

    auto grads = EncoderGrads::zeros(dims);
    for (std::uint64_t step = result.opt.step; step < end_step; ++step) {
        const auto batch = sampler.sample_batch(step);
        const std::size_t bsz = batch.size();

        std::vector<ForwardCache> caches(bsz);
        std::vector<EmbeddingVec> embeddings(bsz);
        std::vector<double> probs(bsz);
        std::vector<HierLabel> labels(bsz);
        for (std::size_t b = 0; b < bsz; ++b) {
            caches[b] = encode_forward(result.params, features[batch[b]]);
            embeddings[b] = caches[b].embedding;
            probs[b] = caches[b].prob;
            labels[b] = corpus.samples[batch[b]].label;
        }

        LossReport step_report;
        try {
            step_report = total_loss(labels, embeddings, probs, cfg.weights);
        } catch (const NumericError& e) {
            throw NumericError("training diverged at step " + std::to_string(step) + ": " +
                               e.what());
        }

        const auto loss_grads = loss_gradients(labels, embeddings, probs, cfg.weights);
        grads.zero();
        for (std::size_t b = 0; b < bsz; ++b)
            encode_backward(result.params, features[batch[b]], caches[b],
                            loss_grads.d_embeddings[b], loss_grads.d_probs[b], grads);

        const double lr = lr_at(step + 1, schedule);
        adamw_step(result.params, grads, result.opt, lr);

        StepLog entry{step, lr, step_report};
        if (log)
            log << "{\"step\":" << step << ",\"lr\":" << lr << ",\"l_mcl\":" << step_report.l_mcl
                << ",\"l_ce\":" << step_report.l_ce << ",\"l_all\":" << step_report.l_all << "}\n";
        result.steps.push_back(std::move(entry));

        if (!cfg.checkpoint_path.empty() && cfg.checkpoint_every > 0 &&
            result.opt.step % static_cast<std::uint64_t>(cfg.checkpoint_every) == 0)
            checkpoint_save(cfg.checkpoint_path,
                            Checkpoint{result.params, result.opt, cfg.featurizer});
    }

    if (!cfg.checkpoint_path.empty())
        checkpoint_save(cfg.checkpoint_path, Checkpoint{result.params, result.opt, cfg.featurizer});
    return result;
}

namespace {

constexpr char kCheckpointMagic[4] = {'D', 'T', 'C', 'K'};
constexpr std::uint32_t kCheckpointVersion = 1;

void write_grads(binio::Writer& w, const EncoderGrads& g) {
    w.f64_block(g.w1);
    w.f64_block(g.b1);
    w.f64_block(g.w2);
    w.f64_block(g.b2);
    w.f64_block(g.wc);
    w.pod(g.bc);
}

EncoderGrads read_grads(binio::Reader& r) {
    EncoderGrads g;
    g.w1 = r.f64_block();
    g.b1 = r.f64_block();
    g.w2 = r.f64_block();
    g.b2 = r.f64_block();
    g.wc = r.f64_block();
    g.bc = r.pod<double>();
    return g;
}

}  // namespace

void checkpoint_save(const std::string& path, const Checkpoint& ckpt) {
    binio::Writer w(path);
    w.bytes(kCheckpointMagic, 4);
    w.pod(kCheckpointVersion);
    w.pod(ckpt.params.dims.feature_dim);
    w.pod(ckpt.params.dims.hidden_dim);
    w.pod(ckpt.params.dims.embed_dim);
    w.pod<std::uint32_t>(static_cast<std::uint32_t>(ckpt.featurizer.ngram_orders.size()));
    for (int n : ckpt.featurizer.ngram_orders) w.pod<std::int32_t>(n);
    w.pod(ckpt.featurizer.hash_seed);
    w.f64_block(ckpt.params.w1);
    w.f64_block(ckpt.params.b1);
    w.f64_block(ckpt.params.w2);
    w.f64_block(ckpt.params.b2);
    w.f64_block(ckpt.params.wc);
    w.pod(ckpt.params.bc);
    w.pod(ckpt.opt.cfg.beta1);
    w.pod(ckpt.opt.cfg.beta2);
    w.pod(ckpt.opt.cfg.eps);
    w.pod(ckpt.opt.cfg.weight_decay);
    write_grads(w, ckpt.opt.m);
    write_grads(w, ckpt.opt.v);
    w.pod(ckpt.opt.step);
    w.finish_with_digest();
}

Checkpoint checkpoint_load(const std::string& path) {
    binio::Reader r(path);
    char magic[4];
    r.bytes(magic, 4);
    if (std::memcmp(magic, kCheckpointMagic, 4) != 0)
        throw IoError("not a checkpoint file: " + path);
    const auto version = r.pod<std::uint32_t>();
    if (version != kCheckpointVersion)
        throw IoError("unsupported checkpoint version " + std::to_string(version));

    Checkpoint ckpt;
    ckpt.params.dims.feature_dim = r.pod<std::uint32_t>();
    ckpt.params.dims.hidden_dim = r.pod<std::uint32_t>();
    ckpt.params.dims.embed_dim = r.pod<std::uint32_t>();
    const auto n_orders = r.pod<std::uint32_t>();
    if (n_orders == 0 || n_orders > 16) throw IoError("corrupt checkpoint: bad n-gram orders");
    ckpt.featurizer.ngram_orders.resize(n_orders);
    for (auto& n : ckpt.featurizer.ngram_orders) n = r.pod<std::int32_t>();
    ckpt.featurizer.hash_seed = r.pod<std::uint64_t>();
    ckpt.featurizer.bucket_count = ckpt.params.dims.feature_dim;

    const auto& dims = ckpt.params.dims;
    ckpt.params.w1 = r.f64_block();
    ckpt.params.b1 = r.f64_block();
    ckpt.params.w2 = r.f64_block();
    ckpt.params.b2 = r.f64_block();
    ckpt.params.wc = r.f64_block();
    ckpt.params.bc = r.pod<double>();
    if (ckpt.params.w1.size() != static_cast<std::size_t>(dims.feature_dim) * dims.hidden_dim ||
        ckpt.params.b1.size() != dims.hidden_dim ||
        ckpt.params.w2.size() != static_cast<std::size_t>(dims.hidden_dim) * dims.embed_dim ||
        ckpt.params.b2.size() != dims.embed_dim || ckpt.params.wc.size() != dims.embed_dim)
        throw IoError("checkpoint parameter blocks do not match declared dims");

    ckpt.opt.cfg.beta1 = r.pod<double>();
    ckpt.opt.cfg.beta2 = r.pod<double>();
    ckpt.opt.cfg.eps = r.pod<double>();
    ckpt.opt.cfg.weight_decay = r.pod<double>();
    ckpt.opt.m = read_grads(r);
    ckpt.opt.v = read_grads(r);
    if (ckpt.opt.m.w1.size() != ckpt.params.w1.size() ||
        ckpt.opt.v.w1.size() != ckpt.params.w1.size())
        throw IoError("checkpoint moment blocks do not match declared dims");
    ckpt.opt.step = r.pod<std::uint64_t>();
    r.verify_trailing_digest();
    return ckpt;
}

}  // namespace detective
