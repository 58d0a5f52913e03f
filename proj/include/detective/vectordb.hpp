#pragma once

#include <cstdint>
#include <string>
#include <unordered_set>
#include <vector>

#include "detective/encoder.hpp"

namespace detective {

enum class Origin : std::uint8_t { Base = 0, Tfia = 1 };

struct DbEntry {
    std::string id;
    std::vector<float> vec;  // stored 32-bit, compared in 64-bit
    HierLabel label;
    Origin origin = Origin::Base;
    std::uint64_t ordinal = 0;
};

class FeatureDb {
  public:
    FeatureDb() = default;
    explicit FeatureDb(std::uint32_t dim) : dim_(dim) {}

    std::uint32_t dim() const { return dim_; }
    std::size_t size() const { return entries_.size(); }
    const std::vector<DbEntry>& entries() const { return entries_; }

    // Appends with the next ordinal; throws on duplicate id or dim mismatch.
    void append(const std::string& id, const HierLabel& label, const EmbeddingVec& vec,
                Origin origin);

    std::uint64_t digest() const;  // content fingerprint for report echoes

  private:
    std::uint32_t dim_ = 0;
    std::vector<DbEntry> entries_;
    std::unordered_set<std::string> ids_;
};

FeatureDb build_db(std::uint32_t dim, const std::vector<EmbeddingRecord>& records);

// Append-only expansion; existing entries are untouched.
FeatureDb tfia_add(const FeatureDb& db, const std::vector<EmbeddingRecord>& records);

struct Neighbor {
    std::size_t entry_index = 0;
    double similarity = 0.0;
};

// Exact top-k by cosine similarity; ties broken by lower ordinal.
std::vector<Neighbor> knn(const FeatureDb& db, const std::vector<double>& query, int k);

enum class VoteMode : std::uint8_t { Majority = 0, Weighted = 1 };

struct ClassVote {
    std::string class_key;
    int count = 0;
    double summed_similarity = 0.0;
};

struct QueryResult {
    std::vector<std::string> neighbor_ids;
    std::vector<double> similarities;  // descending
    std::vector<HierLabel> neighbor_labels;
    std::string predicted;  // "human"/"machine" in binary mode, class key otherwise
    std::vector<ClassVote> votes;
};

// Majority vote with summed-similarity tie-break; residual tie -> machine.
// Weighted mode ranks classes by summed similarity directly.
std::pair<Source, QueryResult> classify_binary(const FeatureDb& db,
                                               const std::vector<double>& query, int k,
                                               VoteMode mode = VoteMode::Majority);

// Multi-class vote over model ids plus "human"; ties by summed similarity,
// then by lowest ordinal among the tied classes' nearest members.
std::pair<std::string, QueryResult> attribute(const FeatureDb& db,
                                              const std::vector<double>& query, int k);

// Binary container: magic "DTDB", version, dim, count, entries, trailing
// FNV-1a checksum.
void db_save(const FeatureDb& db, const std::string& path);
FeatureDb db_load(const std::string& path);

}  // namespace detective
