#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>

#include "detective/encoder.hpp"
#include "oracles.hpp"

using namespace detective;

namespace {

FeatureVector random_feature_vector(std::mt19937_64& rng, std::uint32_t dim, int nnz) {
    FeatureVector fv;
    fv.dim = dim;
    std::set<std::uint32_t> used;
    while (static_cast<int>(used.size()) < nnz) used.insert(rng() % dim);
    double sq = 0.0;
    for (auto idx : used) {
        const double c = 1.0 + static_cast<double>(rng() % 5);
        fv.entries.emplace_back(idx, c);
        sq += c * c;
    }
    fv.norm = std::sqrt(sq);
    return fv;
}

// straight-line dense re-evaluation of the forward pass
std::vector<double> naive_forward_prenorm(const EncoderParams& p, const FeatureVector& fv) {
    std::vector<double> x(p.dims.feature_dim, 0.0);
    for (const auto& [idx, c] : fv.entries) x[idx] = c / fv.norm;
    std::vector<double> hidden(p.dims.hidden_dim);
    for (std::uint32_t j = 0; j < p.dims.hidden_dim; ++j) {
        double acc = p.b1[j];
        for (std::uint32_t i = 0; i < p.dims.feature_dim; ++i)
            acc += x[i] * p.w1[static_cast<std::size_t>(i) * p.dims.hidden_dim + j];
        hidden[j] = std::tanh(acc);
    }
    std::vector<double> prenorm(p.dims.embed_dim);
    for (std::uint32_t k = 0; k < p.dims.embed_dim; ++k) {
        double acc = p.b2[k];
        for (std::uint32_t j = 0; j < p.dims.hidden_dim; ++j)
            acc += hidden[j] * p.w2[static_cast<std::size_t>(j) * p.dims.embed_dim + k];
        prenorm[k] = acc;
    }
    return prenorm;
}

double batch_pseudo_loss(const EncoderParams& params, const std::vector<FeatureVector>& batch,
                         const std::vector<std::vector<double>>& emb_weights,
                         const std::vector<double>& prob_weights) {
    // linear functional of embeddings and probabilities; its gradient w.r.t.
    // the parameters exercises every block
    double loss = 0.0;
    for (std::size_t b = 0; b < batch.size(); ++b) {
        const auto cache = encode_forward(params, batch[b]);
        for (std::size_t k = 0; k < cache.embedding.values.size(); ++k)
            loss += emb_weights[b][k] * cache.embedding.values[k];
        loss += prob_weights[b] * cache.prob;
    }
    return loss;
}

}  // namespace

TEST_CASE("zero W2 with b2 = e1 forces the first basis vector") {
    EncoderDims dims{64, 8, 4};
    auto params = init_encoder(dims, 1);
    std::fill(params.w2.begin(), params.w2.end(), 0.0);
    std::fill(params.b2.begin(), params.b2.end(), 0.0);
    params.b2[0] = 1.0;

    std::mt19937_64 rng(5);
    const auto fv = random_feature_vector(rng, 64, 6);
    const auto [embedding, prenorm] = encode(params, fv);
    CHECK(embedding.values[0] == doctest::Approx(1.0));
    for (std::size_t k = 1; k < embedding.values.size(); ++k)
        CHECK(embedding.values[k] == doctest::Approx(0.0));
}

TEST_CASE("embeddings are unit norm") {
    EncoderDims dims{128, 16, 8};
    const auto params = init_encoder(dims, 2);
    std::mt19937_64 rng(7);
    for (int trial = 0; trial < 20; ++trial) {
        const auto fv = random_feature_vector(rng, 128, 10);
        const auto [embedding, prenorm] = encode(params, fv);
        double sq = 0.0;
        for (double v : embedding.values) sq += v * v;
        CHECK(std::abs(std::sqrt(sq) - 1.0) < 1e-6);
    }
}

TEST_CASE("forward matches a naive dense re-evaluation") {
    EncoderDims dims{96, 12, 6};
    const auto params = init_encoder(dims, 3);
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 5; ++trial) {
        const auto fv = random_feature_vector(rng, 96, 8);
        const auto [embedding, prenorm] = encode(params, fv);
        const auto expected = naive_forward_prenorm(params, fv);
        for (std::size_t k = 0; k < expected.size(); ++k)
            CHECK(std::abs(prenorm[k] - expected[k]) <= 1e-10);
    }
}

TEST_CASE("encode is pure") {
    EncoderDims dims{64, 8, 4};
    const auto params = init_encoder(dims, 4);
    std::mt19937_64 rng(13);
    const auto fv = random_feature_vector(rng, 64, 6);
    const auto a = encode(params, fv);
    const auto b = encode(params, fv);
    CHECK(a.first.values == b.first.values);
    CHECK(a.second == b.second);
}

TEST_CASE("classification head") {
    EncoderDims dims{64, 8, 4};
    auto params = init_encoder(dims, 5);
    std::fill(params.wc.begin(), params.wc.end(), 0.0);
    params.bc = 0.0;
    CHECK(classify_head(params, {0.3, -0.2, 0.9, 0.1}) == doctest::Approx(0.5));
    params.bc = 1.0;
    CHECK(classify_head(params, {0.3, -0.2, 0.9, 0.1}) == doctest::Approx(0.7310585786));
    // monotone in the logit
    params.wc = {1.0, 0.0, 0.0, 0.0};
    params.bc = 0.0;
    CHECK(classify_head(params, {0.5, 0, 0, 0}) < classify_head(params, {0.8, 0, 0, 0}));
}

TEST_CASE("zero upstream gradients give zero parameter gradients") {
    EncoderDims dims{64, 8, 4};
    const auto params = init_encoder(dims, 6);
    std::mt19937_64 rng(17);
    const auto fv = random_feature_vector(rng, 64, 6);
    const auto cache = encode_forward(params, fv);
    auto grads = EncoderGrads::zeros(dims);
    encode_backward(params, fv, cache, std::vector<double>(4, 0.0), 0.0, grads);
    for (double g : grads.w1) CHECK(g == 0.0);
    for (double g : grads.w2) CHECK(g == 0.0);
    for (double g : grads.wc) CHECK(g == 0.0);
    CHECK(grads.bc == 0.0);
}

TEST_CASE("backward matches central finite differences on every block") {
    const EncoderDims dims{48, 10, 5};
    std::mt19937_64 rng(23);
    for (std::uint64_t seed : {11u, 22u, 33u}) {
        for (std::size_t batch_size : {2u, 8u}) {
            auto params = init_encoder(dims, seed);
            std::vector<FeatureVector> batch;
            std::vector<std::vector<double>> emb_weights;
            std::vector<double> prob_weights;
            std::normal_distribution<double> normal(0.0, 1.0);
            for (std::size_t b = 0; b < batch_size; ++b) {
                batch.push_back(random_feature_vector(rng, 48, 5));
                std::vector<double> w(5);
                for (auto& x : w) x = normal(rng);
                emb_weights.push_back(w);
                prob_weights.push_back(normal(rng));
            }

            auto analytic = EncoderGrads::zeros(dims);
            for (std::size_t b = 0; b < batch_size; ++b) {
                const auto cache = encode_forward(params, batch[b]);
                encode_backward(params, batch[b], cache, emb_weights[b], prob_weights[b], analytic);
            }

            const double h = 1e-5;
            auto check_coord = [&](double* theta, double analytic_g) {
                const double saved = *theta;
                *theta = saved + h;
                const double up = batch_pseudo_loss(params, batch, emb_weights, prob_weights);
                *theta = saved - h;
                const double down = batch_pseudo_loss(params, batch, emb_weights, prob_weights);
                *theta = saved;
                const double fd = (up - down) / (2.0 * h);
                const double scale = std::max({std::abs(fd), std::abs(analytic_g), 1e-6});
                CHECK(std::abs(fd - analytic_g) / scale <= 1e-4);
            };

            // sample a handful of coordinates per block
            for (int t = 0; t < 6; ++t) {
                const auto i = rng() % params.w1.size();
                check_coord(&params.w1[i], analytic.w1[i]);
            }
            for (int t = 0; t < 4; ++t) {
                const auto i = rng() % params.b1.size();
                check_coord(&params.b1[i], analytic.b1[i]);
            }
            for (int t = 0; t < 6; ++t) {
                const auto i = rng() % params.w2.size();
                check_coord(&params.w2[i], analytic.w2[i]);
            }
            for (int t = 0; t < 4; ++t) {
                const auto i = rng() % params.b2.size();
                check_coord(&params.b2[i], analytic.b2[i]);
            }
            for (int t = 0; t < 4; ++t) {
                const auto i = rng() % params.wc.size();
                check_coord(&params.wc[i], analytic.wc[i]);
            }
            check_coord(&params.bc, analytic.bc);
        }
    }
}

TEST_CASE("normalization gradient is orthogonal to the embedding") {
    std::mt19937_64 rng(29);
    std::normal_distribution<double> normal(0.0, 1.0);
    for (int trial = 0; trial < 10; ++trial) {
        std::vector<double> prenorm(8), upstream(8);
        double sq = 0.0;
        for (auto& v : prenorm) {
            v = normal(rng);
            sq += v * v;
        }
        for (auto& v : upstream) v = normal(rng);
        const double norm = std::sqrt(sq);
        const auto grad = normalization_backward(prenorm, norm, upstream);
        double dot = 0.0;
        for (std::size_t k = 0; k < 8; ++k) dot += grad[k] * prenorm[k] / norm;
        CHECK(std::abs(dot) <= 1e-8);
    }
}

TEST_CASE("embedding import normalizes and validates") {
    namespace fs = std::filesystem;
    const auto path = (fs::temp_directory_path() / "dt_emb_import.jsonl").string();
    {
        std::ofstream out(path);
        out << R"({"format":"dtev","dim":2,"count":1})" << "\n";
        out << R"({"id":"a","label":{"source":"human"},"vec":[3,4]})" << "\n";
    }
    const auto records = import_embeddings(path);
    REQUIRE(records.size() == 1);
    CHECK(records[0].vec.values[0] == doctest::Approx(0.6));
    CHECK(records[0].vec.values[1] == doctest::Approx(0.8));
    CHECK(records[0].vec.provenance == Provenance::Imported);
    fs::remove(path);
}

TEST_CASE("embedding import rejects dimension mismatches and zero vectors") {
    namespace fs = std::filesystem;
    const auto path = (fs::temp_directory_path() / "dt_emb_bad.jsonl").string();
    {
        std::ofstream out(path);
        out << R"({"format":"dtev","dim":2,"count":2})" << "\n";
        out << R"({"id":"a","label":{"source":"human"},"vec":[1,0]})" << "\n";
        out << R"({"id":"b","label":{"source":"human"},"vec":[1,0,0]})" << "\n";
    }
    CHECK_THROWS_AS(import_embeddings(path), ParseError);
    {
        std::ofstream out(path);
        out << R"({"format":"dtev","dim":2,"count":1})" << "\n";
        out << R"({"id":"a","label":{"source":"human"},"vec":[0,0]})" << "\n";
    }
    CHECK_THROWS_AS(import_embeddings(path), ValidationError);
    {
        std::ofstream out(path);
        out << R"({"id":"a","label":{"source":"human"},"vec":[1,0]})" << "\n";
    }
    CHECK_THROWS_AS(import_embeddings(path), ParseError);  // missing header
    fs::remove(path);
}

TEST_CASE("export then import preserves vectors") {
    namespace fs = std::filesystem;
    const auto path = (fs::temp_directory_path() / "dt_emb_rt.jsonl").string();
    std::mt19937_64 rng(31);
    std::vector<EmbeddingRecord> records;
    for (int i = 0; i < 10; ++i)
        records.push_back({"id" + std::to_string(i),
                           i % 2 ? HierLabel::machine("A", "a1", "news") : HierLabel::human(),
                           oracles::random_unit_vec(rng, 16)});
    export_embeddings(path, records, 16);
    const auto back = import_embeddings(path);
    REQUIRE(back.size() == records.size());
    for (std::size_t i = 0; i < records.size(); ++i) {
        CHECK(back[i].id == records[i].id);
        CHECK(back[i].label == records[i].label);
        for (std::size_t k = 0; k < 16; ++k)
            CHECK(std::abs(back[i].vec.values[k] - records[i].vec.values[k]) <= 1e-6);
    }
    fs::remove(path);
}
