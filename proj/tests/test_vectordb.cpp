#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "detective/vectordb.hpp"
#include "oracles.hpp"

using namespace detective;

namespace {

EmbeddingVec vec_of(std::vector<double> values) {
    double sq = 0.0;
    for (double v : values) sq += v * v;
    const double inv = 1.0 / std::sqrt(sq);
    for (auto& v : values) v *= inv;
    EmbeddingVec e;
    e.values = std::move(values);
    return e;
}

std::vector<EmbeddingRecord> random_records(std::mt19937_64& rng, int n, std::size_t dim) {
    std::vector<EmbeddingRecord> records;
    for (int i = 0; i < n; ++i) {
        HierLabel label = i % 3 == 0 ? HierLabel::human()
                                     : HierLabel::machine("F" + std::to_string(i % 2),
                                                          "F" + std::to_string(i % 2) + "M" +
                                                              std::to_string(i % 4));
        records.push_back({"r" + std::to_string(i), label, oracles::random_unit_vec(rng, dim)});
    }
    return records;
}

// independent full-scan reference with a stable sort
std::vector<std::pair<std::string, double>> brute_force_knn(const FeatureDb& db,
                                                            const std::vector<double>& query,
                                                            int k) {
    std::vector<std::pair<std::string, double>> scored;
    for (const auto& e : db.entries()) {
        double dot = 0.0;
        for (std::size_t c = 0; c < query.size(); ++c)
            dot += query[c] * static_cast<double>(e.vec[c]);
        scored.emplace_back(e.id, dot);
    }
    std::stable_sort(scored.begin(), scored.end(),
                     [](const auto& a, const auto& b) { return a.second > b.second; });
    scored.resize(std::min<std::size_t>(k, scored.size()));
    return scored;
}

}  // namespace

TEST_CASE("build assigns ordinals in input order") {
    std::mt19937_64 rng(1);
    const auto records = random_records(rng, 5, 4);
    const auto db = build_db(4, records);
    REQUIRE(db.size() == 5);
    for (std::size_t i = 0; i < 5; ++i) {
        CHECK(db.entries()[i].id == records[i].id);
        CHECK(db.entries()[i].ordinal == i);
        CHECK(db.entries()[i].origin == Origin::Base);
    }
}

TEST_CASE("build rejects duplicates and dimension mismatches") {
    std::mt19937_64 rng(2);
    auto records = random_records(rng, 3, 4);
    records.push_back(records[0]);
    CHECK_THROWS_AS(build_db(4, records), ValidationError);
    records.pop_back();
    records.push_back({"odd", HierLabel::human(), oracles::random_unit_vec(rng, 8)});
    CHECK_THROWS_AS(build_db(4, records), ValidationError);
}

TEST_CASE("empty database of declared dimension") {
    const auto db = build_db(16, {});
    CHECK(db.size() == 0);
    CHECK(db.dim() == 16);
    CHECK_THROWS_AS(knn(db, std::vector<double>(16, 0.0), 1), ValidationError);
}

TEST_CASE("knn basics") {
    std::vector<EmbeddingRecord> records{
        {"e1", HierLabel::human(), vec_of({1, 0})},
        {"e2", HierLabel::machine("A", "a1"), vec_of({0, 1})},
    };
    const auto db = build_db(2, records);
    const auto result = knn(db, {1.0, 0.0}, 5);  // k > size returns everything
    REQUIRE(result.size() == 2);
    CHECK(db.entries()[result[0].entry_index].id == "e1");
    CHECK(result[0].similarity == doctest::Approx(1.0));
    CHECK(db.entries()[result[1].entry_index].id == "e2");
    CHECK(result[1].similarity == doctest::Approx(0.0));
    CHECK_THROWS_AS(knn(db, {1.0, 0.0, 0.0}, 1), ValidationError);
    CHECK_THROWS_AS(knn(db, {1.0, 0.0}, 0), ValidationError);
}

TEST_CASE("knn matches the brute-force oracle including tie order") {
    std::mt19937_64 rng(3);
    auto records = random_records(rng, 500, 8);
    // plant exact ties: duplicates of an existing vector at later ordinals
    records.push_back({"tie1", HierLabel::human(), records[10].vec});
    records.push_back({"tie2", HierLabel::human(), records[10].vec});
    const auto db = build_db(8, records);

    for (int q = 0; q < 50; ++q) {
        const auto query = oracles::random_unit_vec(rng, 8);
        for (int k : {1, 5, 17}) {
            const auto fast = knn(db, query.values, k);
            const auto slow = brute_force_knn(db, query.values, k);
            REQUIRE(fast.size() == slow.size());
            for (std::size_t i = 0; i < fast.size(); ++i) {
                CHECK(db.entries()[fast[i].entry_index].id == slow[i].first);
                CHECK(fast[i].similarity == slow[i].second);
            }
        }
        // direct tie probe
        const auto tied = knn(db, records[10].vec.values, 3);
        CHECK(db.entries()[tied[0].entry_index].id == records[10].id);
        CHECK(db.entries()[tied[1].entry_index].id == "tie1");
        CHECK(db.entries()[tied[2].entry_index].id == "tie2");
    }
}

TEST_CASE("binary vote: majority, tie-break, weighted") {
    // arrange sims via hand-built unit vectors in 2D around the query (1,0)
    auto at_angle = [](double deg) {
        const double rad = deg * 3.14159265358979323846 / 180.0;
        return vec_of({std::cos(rad), std::sin(rad)});
    };
    SUBCASE("majority wins") {
        std::vector<EmbeddingRecord> records{
            {"h1", HierLabel::human(), at_angle(5)},    {"h2", HierLabel::human(), at_angle(10)},
            {"h3", HierLabel::human(), at_angle(15)},   {"m1", HierLabel::machine("A", "a1"), at_angle(2)},
            {"m2", HierLabel::machine("A", "a1"), at_angle(4)},
        };
        const auto db = build_db(2, records);
        const auto [pred, detail] = classify_binary(db, {1.0, 0.0}, 5, VoteMode::Majority);
        CHECK(pred == Source::Human);  // 3 human vs 2 machine
        CHECK(detail.predicted == "human");
    }
    SUBCASE("count tie broken by summed similarity") {
        std::vector<EmbeddingRecord> records{
            {"h1", HierLabel::human(), at_angle(25)},  // sim ~0.906
            {"m1", HierLabel::machine("A", "a1"), at_angle(37)},  // sim ~0.799
        };
        const auto db = build_db(2, records);
        const auto [pred, detail] = classify_binary(db, {1.0, 0.0}, 2, VoteMode::Majority);
        CHECK(pred == Source::Human);
    }
    SUBCASE("residual tie goes to machine") {
        std::vector<EmbeddingRecord> records{
            {"h1", HierLabel::human(), at_angle(30)},
            {"m1", HierLabel::machine("A", "a1"), at_angle(-30)},  // same cosine
        };
        const auto db = build_db(2, records);
        const auto [pred, detail] = classify_binary(db, {1.0, 0.0}, 2, VoteMode::Majority);
        CHECK(pred == Source::Machine);
    }
    SUBCASE("weighted and majority can disagree") {
        // machine sims 0.95 + 0.94 = 1.89 beat three human 0.5s = 1.5
        auto at_sim = [](double s) { return vec_of({s, std::sqrt(1.0 - s * s)}); };
        std::vector<EmbeddingRecord> records{
            {"m1", HierLabel::machine("A", "a1"), at_sim(0.95)},
            {"m2", HierLabel::machine("A", "a1"), at_sim(0.94)},
            {"h1", HierLabel::human(), at_sim(0.5)},
            {"h2", HierLabel::human(), vec_of({0.5, -std::sqrt(0.75)})},
            {"h3", HierLabel::human(), at_sim(0.5)},
        };
        // h2 also has sim 0.5 with (1,0)
        const auto db = build_db(2, records);
        const auto [maj, d1] = classify_binary(db, {1.0, 0.0}, 5, VoteMode::Majority);
        const auto [wtd, d2] = classify_binary(db, {1.0, 0.0}, 5, VoteMode::Weighted);
        CHECK(maj == Source::Human);
        CHECK(wtd == Source::Machine);
    }
}

TEST_CASE("attribution votes over model classes plus human") {
    auto at_sim = [](double s) { return vec_of({s, std::sqrt(1.0 - s * s)}); };
    SUBCASE("unanimous") {
        std::vector<EmbeddingRecord> records{
            {"a", HierLabel::machine("O", "gpt-2"), at_sim(0.9)},
            {"b", HierLabel::machine("O", "gpt-2"), at_sim(0.8)},
            {"c", HierLabel::machine("O", "gpt-2"), at_sim(0.7)},
        };
        const auto db = build_db(2, records);
        CHECK(attribute(db, {1.0, 0.0}, 3).first == "gpt-2");
    }
    SUBCASE("majority beats human") {
        std::vector<EmbeddingRecord> records{
            {"a", HierLabel::machine("A", "a1"), at_sim(0.9)},
            {"b", HierLabel::machine("A", "a1"), at_sim(0.8)},
            {"c", HierLabel::human(), at_sim(0.95)},
        };
        const auto db = build_db(2, records);
        CHECK(attribute(db, {1.0, 0.0}, 3).first == "a1");
    }
    SUBCASE("count tie resolved by summed similarity") {
        std::vector<EmbeddingRecord> records{
            {"a", HierLabel::machine("A", "a1"), at_sim(0.9)},
            {"b", HierLabel::machine("B", "b1"), at_sim(0.85)},
            {"c", HierLabel::human(), at_sim(0.95)},
        };
        const auto db = build_db(2, records);
        CHECK(attribute(db, {1.0, 0.0}, 3).first == "human");
    }
}

TEST_CASE("tfia_add appends without touching existing entries") {
    std::mt19937_64 rng(7);
    const auto base_records = random_records(rng, 20, 8);
    const auto base = build_db(8, base_records);

    const auto unchanged = tfia_add(base, {});
    CHECK(unchanged.size() == base.size());
    CHECK(unchanged.digest() == base.digest());

    std::vector<EmbeddingRecord> extra{
        {"new1", HierLabel::machine("N", "n1", "ood"), oracles::random_unit_vec(rng, 8)}};
    const auto expanded = tfia_add(base, extra);
    CHECK(expanded.size() == base.size() + 1);
    for (std::size_t i = 0; i < base.size(); ++i) {
        CHECK(expanded.entries()[i].id == base.entries()[i].id);
        CHECK(expanded.entries()[i].vec == base.entries()[i].vec);
        CHECK(expanded.entries()[i].origin == Origin::Base);
    }
    CHECK(expanded.entries().back().origin == Origin::Tfia);

    // self retrieval of the added vector
    const auto nearest = knn(expanded, extra[0].vec.values, 1);
    CHECK(expanded.entries()[nearest[0].entry_index].id == "new1");
    CHECK(nearest[0].similarity == doctest::Approx(1.0).epsilon(1e-6));

    CHECK_THROWS_AS(tfia_add(base, {{base_records[0].id, HierLabel::human(),
                                     oracles::random_unit_vec(rng, 8)}}),
                    ValidationError);
}

TEST_CASE("tfia_add flips a constructed OOD misclassification") {
    // base db: 5 machine entries moderately close to the query
    auto at_sim = [](double s) { return vec_of({s, std::sqrt(1.0 - s * s), 0.0}); };
    std::vector<EmbeddingRecord> base_records;
    for (int i = 0; i < 5; ++i)
        base_records.push_back(
            {"m" + std::to_string(i), HierLabel::machine("A", "a1"), at_sim(0.5 + 0.01 * i)});
    const auto base = build_db(3, base_records);
    const std::vector<double> query{1.0, 0.0, 0.0};

    const auto [before, d1] = classify_binary(base, query, 5, VoteMode::Majority);
    CHECK(before == Source::Machine);  // wrong for a human query

    std::vector<EmbeddingRecord> ood;
    for (int i = 0; i < 3; ++i)
        ood.push_back({"h" + std::to_string(i), HierLabel::human("ood"), at_sim(0.9 + 0.01 * i)});
    const auto expanded = tfia_add(base, ood);
    const auto [after, d2] = classify_binary(expanded, query, 5, VoteMode::Majority);
    CHECK(after == Source::Human);  // 3 added human neighbors outrank the base entries
}

TEST_CASE("database save/load round trip") {
    namespace fs = std::filesystem;
    std::mt19937_64 rng(9);
    auto records = random_records(rng, 30, 8);
    auto db = build_db(8, records);
    db = tfia_add(db, {{"late", HierLabel::machine("Z", "z9", "x"), oracles::random_unit_vec(rng, 8)}});

    const auto path = (fs::temp_directory_path() / "dt_db_rt.bin").string();
    db_save(db, path);
    const auto loaded = db_load(path);
    REQUIRE(loaded.size() == db.size());
    CHECK(loaded.dim() == db.dim());
    for (std::size_t i = 0; i < db.size(); ++i) {
        CHECK(loaded.entries()[i].id == db.entries()[i].id);
        CHECK(loaded.entries()[i].vec == db.entries()[i].vec);
        CHECK(loaded.entries()[i].label == db.entries()[i].label);
        CHECK(loaded.entries()[i].origin == db.entries()[i].origin);
        CHECK(loaded.entries()[i].ordinal == db.entries()[i].ordinal);
    }

    // classifications agree before and after persistence
    for (int q = 0; q < 100; ++q) {
        const auto query = oracles::random_unit_vec(rng, 8);
        const auto a = classify_binary(db, query.values, 5, VoteMode::Majority);
        const auto b = classify_binary(loaded, query.values, 5, VoteMode::Majority);
        CHECK(a.first == b.first);
        CHECK(a.second.neighbor_ids == b.second.neighbor_ids);
    }
    fs::remove(path);
}

TEST_CASE("truncated or corrupted database files are rejected") {
    namespace fs = std::filesystem;
    std::mt19937_64 rng(11);
    const auto db = build_db(8, random_records(rng, 10, 8));
    const auto path = (fs::temp_directory_path() / "dt_db_bad.bin").string();
    db_save(db, path);

    const auto size = fs::file_size(path);
    fs::resize_file(path, size - 5);
    CHECK_THROWS_AS(db_load(path), IoError);

    db_save(db, path);
    std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
    f.seekg(40);
    char c;
    f.get(c);
    f.seekp(40);
    f.put(static_cast<char>(c ^ 0x10));
    f.close();
    CHECK_THROWS_AS(db_load(path), IoError);
    fs::remove(path);
}

TEST_CASE("32-bit storage perturbs similarities below 1e-5") {
    std::mt19937_64 rng(13);
    for (int trial = 0; trial < 50; ++trial) {
        const auto stored = oracles::random_unit_vec(rng, 64);
        const auto query = oracles::random_unit_vec(rng, 64);
        double exact = 0.0, quantized = 0.0;
        for (std::size_t c = 0; c < 64; ++c) {
            exact += query.values[c] * stored.values[c];
            quantized += query.values[c] * static_cast<double>(static_cast<float>(stored.values[c]));
        }
        CHECK(std::abs(exact - quantized) < 1e-5);
    }
}
