#include "detective/encoder.hpp"

#include <cmath>
#include <fstream>
#include <random>

#include <json.hpp>

namespace detective {

using nlohmann::json;

namespace {

void fill_glorot(std::vector<double>& w, std::size_t fan_in, std::size_t fan_out,
                 std::mt19937_64& rng) {
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    for (auto& v : w) {
        const double u = static_cast<double>(rng() >> 11) * (1.0 / 9007199254740992.0);
        v = (2.0 * u - 1.0) * limit;
    }
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

EncoderParams init_encoder(const EncoderDims& dims, std::uint64_t seed) {
    EncoderParams p;
    p.dims = dims;
    p.w1.resize(static_cast<std::size_t>(dims.feature_dim) * dims.hidden_dim);
    p.b1.assign(dims.hidden_dim, 0.0);
    p.w2.resize(static_cast<std::size_t>(dims.hidden_dim) * dims.embed_dim);
    p.b2.assign(dims.embed_dim, 0.0);
    p.wc.resize(dims.embed_dim);
    std::mt19937_64 rng(mix_seeds(seed, 0xE4C0DE));
    fill_glorot(p.w1, dims.feature_dim, dims.hidden_dim, rng);
    fill_glorot(p.w2, dims.hidden_dim, dims.embed_dim, rng);
    fill_glorot(p.wc, dims.embed_dim, 1, rng);
    p.bc = 0.0;
    return p;
}

ForwardCache encode_forward(const EncoderParams& params, const FeatureVector& fv) {
    const auto& d = params.dims;
    if (fv.dim != d.feature_dim) throw ValidationError("feature vector dimension mismatch");
    if (!(fv.norm > 0.0)) throw ValidationError("feature vector has zero norm");

    ForwardCache cache;
    cache.input.resize(fv.entries.size());
    for (std::size_t e = 0; e < fv.entries.size(); ++e)
        cache.input[e] = fv.entries[e].second / fv.norm;

    cache.hidden.assign(d.hidden_dim, 0.0);
    for (std::size_t e = 0; e < fv.entries.size(); ++e) {
        const double x = cache.input[e];
        const double* row = &params.w1[static_cast<std::size_t>(fv.entries[e].first) * d.hidden_dim];
        for (std::uint32_t j = 0; j < d.hidden_dim; ++j) cache.hidden[j] += x * row[j];
    }
    for (std::uint32_t j = 0; j < d.hidden_dim; ++j)
        cache.hidden[j] = std::tanh(cache.hidden[j] + params.b1[j]);

    cache.prenorm = params.b2;
    for (std::uint32_t j = 0; j < d.hidden_dim; ++j) {
        const double hj = cache.hidden[j];
        const double* row = &params.w2[static_cast<std::size_t>(j) * d.embed_dim];
        for (std::uint32_t k = 0; k < d.embed_dim; ++k) cache.prenorm[k] += hj * row[k];
    }

    double sq = 0.0;
    for (double v : cache.prenorm) sq += v * v;
    cache.prenorm_norm = std::sqrt(sq);
    if (cache.prenorm_norm < 1e-12)
        throw NumericError("degenerate parameters: pre-normalization output has near-zero norm");

    cache.embedding.values.resize(d.embed_dim);
    for (std::uint32_t k = 0; k < d.embed_dim; ++k)
        cache.embedding.values[k] = cache.prenorm[k] / cache.prenorm_norm;
    cache.embedding.provenance = Provenance::Computed;

    cache.logit = params.bc;
    for (std::uint32_t k = 0; k < d.embed_dim; ++k) cache.logit += params.wc[k] * cache.prenorm[k];
    cache.prob = sigmoid(cache.logit);
    return cache;
}

std::pair<EmbeddingVec, std::vector<double>> encode(const EncoderParams& params,
                                                    const FeatureVector& fv) {
    auto cache = encode_forward(params, fv);
    return {std::move(cache.embedding), std::move(cache.prenorm)};
}

double classify_head(const EncoderParams& params, const std::vector<double>& prenorm) {
    if (prenorm.size() != params.dims.embed_dim) throw ValidationError("prenorm dimension mismatch");
    double logit = params.bc;
    for (std::size_t k = 0; k < prenorm.size(); ++k) logit += params.wc[k] * prenorm[k];
    return sigmoid(logit);
}

EncoderGrads EncoderGrads::zeros(const EncoderDims& dims) {
    EncoderGrads g;
    g.w1.assign(static_cast<std::size_t>(dims.feature_dim) * dims.hidden_dim, 0.0);
    g.b1.assign(dims.hidden_dim, 0.0);
    g.w2.assign(static_cast<std::size_t>(dims.hidden_dim) * dims.embed_dim, 0.0);
    g.b2.assign(dims.embed_dim, 0.0);
    g.wc.assign(dims.embed_dim, 0.0);
    g.bc = 0.0;
    return g;
}

void EncoderGrads::zero() {
    std::fill(w1.begin(), w1.end(), 0.0);
    std::fill(b1.begin(), b1.end(), 0.0);
    std::fill(w2.begin(), w2.end(), 0.0);
    std::fill(b2.begin(), b2.end(), 0.0);
    std::fill(wc.begin(), wc.end(), 0.0);
    bc = 0.0;
}

std::vector<double> normalization_backward(const std::vector<double>& prenorm,
                                           double prenorm_norm,
                                           const std::vector<double>& grad_embedding) {
    // d(x/||x||)^T g = (g - (g.e) e) / ||x||, with e = x/||x||
    const std::size_t d = prenorm.size();
    double dot = 0.0;
    for (std::size_t k = 0; k < d; ++k) dot += grad_embedding[k] * prenorm[k] / prenorm_norm;
    std::vector<double> out(d);
    for (std::size_t k = 0; k < d; ++k)
        out[k] = (grad_embedding[k] - dot * prenorm[k] / prenorm_norm) / prenorm_norm;
    return out;
}

void encode_backward(const EncoderParams& params, const FeatureVector& fv,
                     const ForwardCache& cache, const std::vector<double>& grad_embedding,
                     double grad_prob, EncoderGrads& out) {
    const auto& d = params.dims;

    const double dlogit = grad_prob * cache.prob * (1.0 - cache.prob);
    std::vector<double> dprenorm =
        normalization_backward(cache.prenorm, cache.prenorm_norm, grad_embedding);
    for (std::uint32_t k = 0; k < d.embed_dim; ++k) {
        dprenorm[k] += dlogit * params.wc[k];
        out.wc[k] += dlogit * cache.prenorm[k];
        out.b2[k] += dprenorm[k];
    }
    out.bc += dlogit;

    std::vector<double> dhidden(d.hidden_dim, 0.0);
    for (std::uint32_t j = 0; j < d.hidden_dim; ++j) {
        const double hj = cache.hidden[j];
        const double* row = &params.w2[static_cast<std::size_t>(j) * d.embed_dim];
        double* grow = &out.w2[static_cast<std::size_t>(j) * d.embed_dim];
        double acc = 0.0;
        for (std::uint32_t k = 0; k < d.embed_dim; ++k) {
            acc += row[k] * dprenorm[k];
            grow[k] += hj * dprenorm[k];
        }
        dhidden[j] = acc * (1.0 - hj * hj);  // through tanh
        out.b1[j] += dhidden[j];
    }

    for (std::size_t e = 0; e < fv.entries.size(); ++e) {
        const double x = cache.input[e];
        double* grow = &out.w1[static_cast<std::size_t>(fv.entries[e].first) * d.hidden_dim];
        for (std::uint32_t j = 0; j < d.hidden_dim; ++j) grow[j] += x * dhidden[j];
    }
}

std::vector<EmbeddingRecord> import_embeddings(const std::string& path, std::size_t* dim_out) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open embedding file: " + path);

    std::vector<EmbeddingRecord> records;
    std::string line;
    std::size_t lineno = 0;
    bool header_seen = false;
    std::size_t dim = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::exception& e) {
            throw ParseError(path + ":" + std::to_string(lineno) + ": " + e.what());
        }
        if (!header_seen) {
            if (!j.is_object() || j.value("format", "") != "dtev")
                throw ParseError(path + ": missing dtev header");
            dim = j.at("dim").get<std::size_t>();
            header_seen = true;
            continue;
        }
        EmbeddingRecord rec;
        try {
            rec.id = j.at("id").get<std::string>();
            const auto& lab = j.at("label");
            const auto source = lab.at("source").get<std::string>();
            auto opt_str = [&](const char* key) -> std::string {
                if (!lab.contains(key) || lab[key].is_null()) return {};
                return lab[key].get<std::string>();
            };
            rec.label.source = source == "human" ? Source::Human : Source::Machine;
            if (source != "human" && source != "machine")
                throw ParseError("unknown source '" + source + "'");
            rec.label.family = opt_str("family");
            rec.label.model = opt_str("model");
            rec.label.domain = opt_str("domain");
            rec.vec.values = j.at("vec").get<std::vector<double>>();
        } catch (const json::exception& e) {
            throw ParseError(path + ":" + std::to_string(lineno) + ": " + e.what());
        }
        rec.label.validate();
        if (rec.vec.values.size() != dim)
            throw ParseError(path + ":" + std::to_string(lineno) + ": dimension mismatch (got " +
                             std::to_string(rec.vec.values.size()) + ", header says " +
                             std::to_string(dim) + ")");
        double sq = 0.0;
        for (double v : rec.vec.values) sq += v * v;
        const double norm = std::sqrt(sq);
        if (norm < 1e-12)
            throw ValidationError(path + ":" + std::to_string(lineno) + ": zero vector");
        for (auto& v : rec.vec.values) v /= norm;
        rec.vec.provenance = Provenance::Imported;
        records.push_back(std::move(rec));
    }
    if (!header_seen) throw ParseError(path + ": missing dtev header");
    if (dim_out != nullptr) *dim_out = dim;
    return records;
}

void export_embeddings(const std::string& path, const std::vector<EmbeddingRecord>& records,
                       std::size_t dim) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write embedding file: " + path);
    json header{{"format", "dtev"}, {"dim", dim}, {"count", records.size()}};
    out << header.dump() << '\n';
    for (const auto& rec : records) {
        if (rec.vec.values.size() != dim)
            throw ValidationError("record '" + rec.id + "' has wrong dimension");
        json j;
        j["id"] = rec.id;
        j["label"] = {{"source", rec.label.is_human() ? "human" : "machine"},
                      {"family", rec.label.family.empty() ? json() : json(rec.label.family)},
                      {"model", rec.label.model.empty() ? json() : json(rec.label.model)},
                      {"domain", rec.label.domain.empty() ? json() : json(rec.label.domain)}};
        j["vec"] = rec.vec.values;
        out << j.dump() << '\n';
    }
    if (!out) throw IoError("write failed: " + path);
}

}  // namespace detective
