#include "detective/vectordb.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <map>
#include <set>
#include <unordered_set>

#include "binio.hpp"

namespace detective {

void FeatureDb::append(const std::string& id, const HierLabel& label, const EmbeddingVec& vec,
                       Origin origin) {
    if (vec.dim() != dim_) throw ValidationError("embedding dimension mismatch for id '" + id + "'");
    label.validate();
    if (!ids_.insert(id).second) throw ValidationError("duplicate id in database: " + id);

    DbEntry entry;
    entry.id = id;
    entry.label = label;
    entry.origin = origin;
    entry.ordinal = entries_.size();
    entry.vec.resize(dim_);
    for (std::uint32_t i = 0; i < dim_; ++i) entry.vec[i] = static_cast<float>(vec.values[i]);
    entries_.push_back(std::move(entry));
}

std::uint64_t FeatureDb::digest() const {
    std::uint64_t h = fnv1a64(&dim_, sizeof(dim_));
    for (const auto& e : entries_) {
        h = fnv1a64(e.id, h);
        h = fnv1a64(e.vec.data(), e.vec.size() * sizeof(float), h);
    }
    return h;
}

namespace {

FeatureDb append_records(FeatureDb db, const std::vector<EmbeddingRecord>& records, Origin origin) {
    for (const auto& rec : records) db.append(rec.id, rec.label, rec.vec, origin);
    return db;
}

}  // namespace

FeatureDb build_db(std::uint32_t dim, const std::vector<EmbeddingRecord>& records) {
    return append_records(FeatureDb(dim), records, Origin::Base);
}

FeatureDb tfia_add(const FeatureDb& db, const std::vector<EmbeddingRecord>& records) {
    return append_records(db, records, Origin::Tfia);
}

std::vector<Neighbor> knn(const FeatureDb& db, const std::vector<double>& query, int k) {
    if (k < 1) throw ValidationError("k must be >= 1");
    if (db.size() == 0) throw ValidationError("knn on empty database");
    if (query.size() != db.dim()) throw ValidationError("query dimension mismatch");

    const auto& entries = db.entries();
    std::vector<Neighbor> all(entries.size());
    for (std::size_t i = 0; i < entries.size(); ++i) {
        double dot = 0.0;
        const float* v = entries[i].vec.data();
        for (std::size_t c = 0; c < query.size(); ++c) dot += query[c] * static_cast<double>(v[c]);
        all[i] = {i, dot};
    }

    const auto cmp = [&](const Neighbor& a, const Neighbor& b) {
        if (a.similarity != b.similarity) return a.similarity > b.similarity;
        return entries[a.entry_index].ordinal < entries[b.entry_index].ordinal;
    };
    const std::size_t take = std::min<std::size_t>(k, all.size());
    std::partial_sort(all.begin(), all.begin() + take, all.end(), cmp);
    all.resize(take);
    return all;
}

namespace {

QueryResult make_result(const FeatureDb& db, const std::vector<Neighbor>& neighbors) {
    QueryResult r;
    for (const auto& nb : neighbors) {
        const auto& e = db.entries()[nb.entry_index];
        r.neighbor_ids.push_back(e.id);
        r.similarities.push_back(nb.similarity);
        r.neighbor_labels.push_back(e.label);
    }
    return r;
}

}  // namespace

std::pair<Source, QueryResult> classify_binary(const FeatureDb& db,
                                               const std::vector<double>& query, int k,
                                               VoteMode mode) {
    const auto neighbors = knn(db, query, k);
    QueryResult result = make_result(db, neighbors);

    ClassVote human{"human", 0, 0.0}, machine{"machine", 0, 0.0};
    for (const auto& nb : neighbors) {
        auto& vote = db.entries()[nb.entry_index].label.is_human() ? human : machine;
        ++vote.count;
        vote.summed_similarity += nb.similarity;
    }
    result.votes = {human, machine};

    Source predicted;
    if (mode == VoteMode::Weighted) {
        predicted = human.summed_similarity > machine.summed_similarity ? Source::Human
                                                                        : Source::Machine;
    } else {
        if (human.count != machine.count)
            predicted = human.count > machine.count ? Source::Human : Source::Machine;
        else if (human.summed_similarity != machine.summed_similarity)
            predicted = human.summed_similarity > machine.summed_similarity ? Source::Human
                                                                            : Source::Machine;
        else
            predicted = Source::Machine;  // residual tie: conservative for a detector
    }
    result.predicted = predicted == Source::Human ? "human" : "machine";
    return {predicted, std::move(result)};
}

std::pair<std::string, QueryResult> attribute(const FeatureDb& db,
                                              const std::vector<double>& query, int k) {
    const auto neighbors = knn(db, query, k);
    QueryResult result = make_result(db, neighbors);

    struct Tally {
        int count = 0;
        double summed = 0.0;
        std::uint64_t nearest_ordinal = 0;
    };
    std::map<std::string, Tally> tallies;
    for (const auto& nb : neighbors) {
        const auto& e = db.entries()[nb.entry_index];
        auto [it, inserted] = tallies.try_emplace(e.label.class_key());
        if (inserted) it->second.nearest_ordinal = e.ordinal;
        ++it->second.count;
        it->second.summed += nb.similarity;
        it->second.nearest_ordinal = std::min(it->second.nearest_ordinal, e.ordinal);
    }

    std::string best;
    for (const auto& [key, tally] : tallies) {
        result.votes.push_back({key, tally.count, tally.summed});
        if (best.empty()) {
            best = key;
            continue;
        }
        const auto& cur = tallies.at(best);
        if (tally.count != cur.count) {
            if (tally.count > cur.count) best = key;
        } else if (tally.summed != cur.summed) {
            if (tally.summed > cur.summed) best = key;
        } else if (tally.nearest_ordinal < cur.nearest_ordinal) {
            best = key;
        }
    }
    result.predicted = best;
    return {best, std::move(result)};
}

namespace {

constexpr char kDbMagic[4] = {'D', 'T', 'D', 'B'};
constexpr std::uint32_t kDbVersion = 1;

}  // namespace

void db_save(const FeatureDb& db, const std::string& path) {
    binio::Writer w(path);
    w.bytes(kDbMagic, 4);
    w.pod(kDbVersion);
    w.pod(db.dim());
    w.pod<std::uint64_t>(db.size());
    for (const auto& e : db.entries()) {
        w.str(e.id);
        w.pod<std::uint8_t>(static_cast<std::uint8_t>(e.label.source));
        w.str(e.label.family);
        w.str(e.label.model);
        w.str(e.label.domain);
        w.pod<std::uint8_t>(static_cast<std::uint8_t>(e.origin));
        w.pod(e.ordinal);
        w.bytes(e.vec.data(), e.vec.size() * sizeof(float));
    }
    w.finish_with_digest();
}

FeatureDb db_load(const std::string& path) {
    binio::Reader r(path);
    char magic[4];
    r.bytes(magic, 4);
    if (std::memcmp(magic, kDbMagic, 4) != 0) throw IoError("not a database file: " + path);
    const auto version = r.pod<std::uint32_t>();
    if (version != kDbVersion) throw IoError("unsupported database version " + std::to_string(version));

    const auto dim = r.pod<std::uint32_t>();
    const auto count = r.pod<std::uint64_t>();
    FeatureDb db(dim);
    std::vector<DbEntry> entries;
    entries.reserve(count);
    for (std::uint64_t i = 0; i < count; ++i) {
        DbEntry e;
        e.id = r.str();
        e.label.source = static_cast<Source>(r.pod<std::uint8_t>());
        e.label.family = r.str();
        e.label.model = r.str();
        e.label.domain = r.str();
        e.origin = static_cast<Origin>(r.pod<std::uint8_t>());
        e.ordinal = r.pod<std::uint64_t>();
        e.vec.resize(dim);
        r.bytes(e.vec.data(), dim * sizeof(float));
        entries.push_back(std::move(e));
    }
    r.verify_trailing_digest();

    FeatureDb out(dim);
    for (auto& e : entries) {
        EmbeddingVec vec;
        vec.values.assign(e.vec.begin(), e.vec.end());
        vec.provenance = Provenance::Imported;
        out.append(e.id, e.label, vec, e.origin);
    }
    return out;
}

}  // namespace detective
