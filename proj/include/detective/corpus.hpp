#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "detective/common.hpp"

namespace detective {

enum class Source : std::uint8_t { Human = 0, Machine = 1 };

// Hierarchical source label: source flag, model family, specific model.
// Human labels carry no family/model; machine labels carry both.
struct HierLabel {
    Source source = Source::Human;
    std::string family;
    std::string model;
    std::string domain;

    bool is_human() const { return source == Source::Human; }
    bool is_machine() const { return source == Source::Machine; }

    static HierLabel human(std::string domain = {});
    static HierLabel machine(std::string family, std::string model, std::string domain = {});

    // Throws ValidationError on invariant violations.
    void validate() const;

    // Class key for attribution: model id for machine, "human" otherwise.
    std::string class_key() const { return is_human() ? "human" : model; }

    bool operator==(const HierLabel&) const = default;
};

struct Sample {
    std::string id;
    std::string text;
    HierLabel label;
};

struct Corpus {
    std::vector<Sample> samples;
    // family -> set of models seen under it
    std::map<std::string, std::set<std::string>> family_index;
    // stratum key ("human" or model id) -> count
    std::map<std::string, std::size_t> stratum_counts;
};

// Builds the indexes; does not validate cross-family consistency (see validate_corpus).
Corpus make_corpus(std::vector<Sample> samples);

// One JSONL record: {"id":..,"text":..,"source":"human"|"machine","family":..,"model":..,"domain":..}
Sample parse_corpus_line(const std::string& line);
std::string sample_to_json_line(const Sample& s);

Corpus load_corpus(const std::string& path);
void save_corpus(const Corpus& corpus, const std::string& path);

struct ValidationReport {
    bool ok = true;
    std::vector<std::string> issues;
    std::map<std::string, std::size_t> stratum_counts;
};

ValidationReport validate_corpus(const Corpus& corpus);

struct SynthSpec {
    int families = 2;
    int models_per_family = 2;
    int samples_per_model = 50;
    int human_samples = 200;
    int domains = 1;
    std::uint64_t vocab_seed = 1;
    int min_tokens = 30;
    int max_tokens = 80;
    // token-source mixture; remainders go to model-specific (machine) and
    // human-specific (human) vocabulary
    double p_common = 0.35;
    double p_domain = 0.20;
    double p_family = 0.20;  // machine only
};

// Deterministic style-marked corpus: model texts share family-level vocabulary
// plus model-unique tokens, humans draw from a disjoint pool.
Corpus synth_corpus(const SynthSpec& spec, std::uint64_t seed);

// Stratified deterministic split; per-stratum test count is
// round-half-up(n * fraction) clamped to [1, n-1].
std::pair<Corpus, Corpus> split_corpus(const Corpus& corpus, double test_fraction,
                                       std::uint64_t seed);

}  // namespace detective
