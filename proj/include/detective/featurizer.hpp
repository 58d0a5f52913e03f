#pragma once

#include <cstdint>
#include <string_view>
#include <utility>
#include <vector>

#include "detective/common.hpp"

namespace detective {

struct FeaturizerConfig {
    std::vector<int> ngram_orders{1, 2, 3};  // character n-grams over normalized text
    std::uint32_t bucket_count = 65536;      // power of two
    std::uint64_t hash_seed = 0x5EEDF00D;

    void validate() const;
};

// Sparse hashed n-gram counts; entries sorted by bucket index, no duplicates.
struct FeatureVector {
    std::uint32_t dim = 0;
    std::vector<std::pair<std::uint32_t, double>> entries;
    double norm = 0.0;  // L2 norm of the counts
};

// Lowercases, collapses whitespace runs, trims.
std::string normalize_text(std::string_view text);

std::uint32_t hash_ngram(std::string_view gram, const FeaturizerConfig& cfg);

// Throws ValidationError if the text is empty after normalization.
FeatureVector featurize(std::string_view text, const FeaturizerConfig& cfg);

}  // namespace detective
