#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "detective/corpus.hpp"
#include "detective/featurizer.hpp"

namespace detective {

enum class Provenance : std::uint8_t { Computed = 0, Imported = 1 };

// Unit-length style embedding.
struct EmbeddingVec {
    std::vector<double> values;
    Provenance provenance = Provenance::Computed;

    std::size_t dim() const { return values.size(); }
};

struct EncoderDims {
    std::uint32_t feature_dim = 65536;  // F
    std::uint32_t hidden_dim = 256;     // h
    std::uint32_t embed_dim = 128;      // d

    bool operator==(const EncoderDims&) const = default;
};

// Two-layer tanh projection plus a scalar classification head on the
// pre-normalization representation.
struct EncoderParams {
    EncoderDims dims;
    std::vector<double> w1;  // F x h, row-major by feature index
    std::vector<double> b1;  // h
    std::vector<double> w2;  // h x d, row-major by hidden index
    std::vector<double> b2;  // d
    std::vector<double> wc;  // d
    double bc = 0.0;
};

// Glorot-uniform weights, zero biases.
EncoderParams init_encoder(const EncoderDims& dims, std::uint64_t seed);

struct ForwardCache {
    std::vector<double> input;     // L2-normalized sparse values, aligned with fv entries
    std::vector<double> hidden;    // tanh activations, h
    std::vector<double> prenorm;   // d
    double prenorm_norm = 0.0;
    EmbeddingVec embedding;        // prenorm / ||prenorm||
    double logit = 0.0;
    double prob = 0.0;             // sigmoid(logit)
};

// Throws NumericError when ||prenorm|| < 1e-12.
ForwardCache encode_forward(const EncoderParams& params, const FeatureVector& fv);

// Standalone pieces of the forward pass.
std::pair<EmbeddingVec, std::vector<double>> encode(const EncoderParams& params,
                                                    const FeatureVector& fv);
double classify_head(const EncoderParams& params, const std::vector<double>& prenorm);

struct EncoderGrads {
    std::vector<double> w1, b1, w2, b2, wc;
    double bc = 0.0;

    static EncoderGrads zeros(const EncoderDims& dims);
    void zero();
};

// Gradient of x/||x|| applied to an upstream gradient; exposed separately
// because its output is orthogonal to the unit vector.
std::vector<double> normalization_backward(const std::vector<double>& prenorm,
                                           double prenorm_norm,
                                           const std::vector<double>& grad_embedding);

// Accumulates parameter gradients for one sample given upstream gradients
// w.r.t. the unit embedding and the head probability.
void encode_backward(const EncoderParams& params, const FeatureVector& fv,
                     const ForwardCache& cache, const std::vector<double>& grad_embedding,
                     double grad_prob, EncoderGrads& out);

struct EmbeddingRecord {
    std::string id;
    HierLabel label;
    EmbeddingVec vec;
};

// Embedding file: header {"format":"dtev","dim":d,"count":n}, then one JSON
// record per line. Vectors are re-normalized on import.
std::vector<EmbeddingRecord> import_embeddings(const std::string& path,
                                               std::size_t* dim_out = nullptr);
void export_embeddings(const std::string& path, const std::vector<EmbeddingRecord>& records,
                       std::size_t dim);

}  // namespace detective
