#include "detective/featurizer.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <unordered_map>

namespace detective {

void FeaturizerConfig::validate() const {
    if (bucket_count < 2 || (bucket_count & (bucket_count - 1)) != 0)
        throw ValidationError("bucket count must be a power of two >= 2");
    if (ngram_orders.empty()) throw ValidationError("at least one n-gram order required");
    for (int n : ngram_orders)
        if (n < 1) throw ValidationError("n-gram orders must be >= 1");
}

std::string normalize_text(std::string_view text) {
    std::string out;
    out.reserve(text.size());
    bool pending_space = false;
    for (char c : text) {
        const auto uc = static_cast<unsigned char>(c);
        if (std::isspace(uc)) {
            pending_space = !out.empty();
            continue;
        }
        if (pending_space) {
            out.push_back(' ');
            pending_space = false;
        }
        out.push_back(static_cast<char>(std::tolower(uc)));
    }
    return out;
}

std::uint32_t hash_ngram(std::string_view gram, const FeaturizerConfig& cfg) {
    return static_cast<std::uint32_t>(fnv1a64(gram, cfg.hash_seed) & (cfg.bucket_count - 1));
}

FeatureVector featurize(std::string_view text, const FeaturizerConfig& cfg) {
    cfg.validate();
    const std::string norm = normalize_text(text);
    if (norm.empty()) throw ValidationError("text is empty after normalization");

    std::unordered_map<std::uint32_t, double> counts;
    for (int n : cfg.ngram_orders) {
        if (norm.size() < static_cast<std::size_t>(n)) continue;
        for (std::size_t i = 0; i + n <= norm.size(); ++i)
            counts[hash_ngram(std::string_view(norm).substr(i, n), cfg)] += 1.0;
    }

    FeatureVector fv;
    fv.dim = cfg.bucket_count;
    fv.entries.assign(counts.begin(), counts.end());
    std::sort(fv.entries.begin(), fv.entries.end());
    double sq = 0.0;
    for (const auto& [idx, c] : fv.entries) sq += c * c;
    fv.norm = std::sqrt(sq);
    return fv;
}

}  // namespace detective
