#include "detective/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include <json.hpp>

namespace detective {

using nlohmann::json;

HierLabel HierLabel::human(std::string domain) {
    HierLabel l;
    l.source = Source::Human;
    l.domain = std::move(domain);
    return l;
}

HierLabel HierLabel::machine(std::string family, std::string model, std::string domain) {
    HierLabel l;
    l.source = Source::Machine;
    l.family = std::move(family);
    l.model = std::move(model);
    l.domain = std::move(domain);
    return l;
}

void HierLabel::validate() const {
    if (is_human()) {
        if (!family.empty() || !model.empty())
            throw ValidationError("human label must not carry family/model");
    } else {
        if (family.empty() || model.empty())
            throw ValidationError("machine label requires non-empty family and model");
    }
}

Corpus make_corpus(std::vector<Sample> samples) {
    Corpus c;
    c.samples = std::move(samples);
    for (const auto& s : c.samples) {
        if (s.label.is_machine()) {
            c.family_index[s.label.family].insert(s.label.model);
            ++c.stratum_counts[s.label.model];
        } else {
            ++c.stratum_counts["human"];
        }
    }
    return c;
}

Sample parse_corpus_line(const std::string& line) {
    json j;
    try {
        j = json::parse(line);
    } catch (const json::exception& e) {
        throw ParseError(std::string("malformed corpus record: ") + e.what());
    }
    if (!j.is_object()) throw ParseError("corpus record is not a JSON object");

    Sample s;
    try {
        s.id = j.at("id").get<std::string>();
        s.text = j.at("text").get<std::string>();
        const auto source = j.at("source").get<std::string>();
        if (source == "human") {
            s.label.source = Source::Human;
        } else if (source == "machine") {
            s.label.source = Source::Machine;
        } else {
            throw ParseError("unknown source '" + source + "'");
        }
        auto opt_str = [&](const char* key) -> std::string {
            if (!j.contains(key) || j[key].is_null()) return {};
            return j[key].get<std::string>();
        };
        s.label.family = opt_str("family");
        s.label.model = opt_str("model");
        s.label.domain = opt_str("domain");
    } catch (const json::exception& e) {
        throw ParseError(std::string("malformed corpus record: ") + e.what());
    }
    if (s.text.empty()) throw ParseError("record '" + s.id + "' has empty text");
    try {
        s.label.validate();
    } catch (const ValidationError& e) {
        throw ParseError("record '" + s.id + "': " + e.what());
    }
    return s;
}

std::string sample_to_json_line(const Sample& s) {
    json j;
    j["id"] = s.id;
    j["text"] = s.text;
    j["source"] = s.label.is_human() ? "human" : "machine";
    j["family"] = s.label.family.empty() ? json() : json(s.label.family);
    j["model"] = s.label.model.empty() ? json() : json(s.label.model);
    j["domain"] = s.label.domain.empty() ? json() : json(s.label.domain);
    return j.dump();
}

Corpus load_corpus(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open corpus file: " + path);
    std::vector<Sample> samples;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        try {
            samples.push_back(parse_corpus_line(line));
        } catch (const ParseError& e) {
            throw ParseError(path + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    return make_corpus(std::move(samples));
}

void save_corpus(const Corpus& corpus, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write corpus file: " + path);
    for (const auto& s : corpus.samples) out << sample_to_json_line(s) << '\n';
    if (!out) throw IoError("write failed: " + path);
}

ValidationReport validate_corpus(const Corpus& corpus) {
    ValidationReport report;
    std::set<std::string> seen_ids;
    std::map<std::string, std::string> model_to_family;
    for (const auto& s : corpus.samples) {
        if (!seen_ids.insert(s.id).second) {
            report.ok = false;
            report.issues.push_back("duplicate id: " + s.id);
        }
        if (s.text.empty()) {
            report.ok = false;
            report.issues.push_back("empty text: " + s.id);
        }
        try {
            s.label.validate();
        } catch (const ValidationError& e) {
            report.ok = false;
            report.issues.push_back(s.id + ": " + e.what());
            continue;
        }
        if (s.label.is_machine()) {
            auto [it, inserted] = model_to_family.emplace(s.label.model, s.label.family);
            if (!inserted && it->second != s.label.family) {
                report.ok = false;
                report.issues.push_back("model '" + s.label.model + "' appears under families '" +
                                        it->second + "' and '" + s.label.family + "'");
            }
        }
    }
    report.stratum_counts = corpus.stratum_counts;
    return report;
}

namespace {

// Local deterministic helpers so generated corpora do not depend on standard
// library distribution internals.
std::uint64_t rng_below(std::mt19937_64& rng, std::uint64_t n) { return rng() % n; }

double rng_unit(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * (1.0 / 9007199254740992.0);
}

std::string random_word(std::mt19937_64& rng) {
    const std::size_t len = 4 + rng_below(rng, 5);
    std::string w(len, 'a');
    for (auto& ch : w) ch = static_cast<char>('a' + rng_below(rng, 26));
    return w;
}

std::vector<std::string> make_pool(std::mt19937_64& rng, std::size_t n) {
    std::vector<std::string> pool(n);
    for (auto& w : pool) w = random_word(rng);
    return pool;
}

const std::string& pick(std::mt19937_64& rng, const std::vector<std::string>& pool) {
    return pool[rng_below(rng, pool.size())];
}

}  // namespace

Corpus synth_corpus(const SynthSpec& spec, std::uint64_t seed) {
    if (spec.families < 2 || spec.models_per_family < 2 || spec.samples_per_model < 2)
        throw ValidationError("synth spec below minimum sizes (2 families, 2 models, 2 samples)");
    if (spec.domains < 1) throw ValidationError("synth spec needs at least 1 domain");
    if (spec.min_tokens < 1 || spec.max_tokens < spec.min_tokens)
        throw ValidationError("synth spec has invalid token length range");

    std::mt19937_64 vocab_rng(mix_seeds(spec.vocab_seed, 0xB0CAB));
    const auto common = make_pool(vocab_rng, 200);
    const auto human_pool = make_pool(vocab_rng, 80);
    std::vector<std::vector<std::string>> domain_pools(spec.domains);
    for (auto& p : domain_pools) p = make_pool(vocab_rng, 40);
    std::vector<std::vector<std::string>> family_pools(spec.families);
    for (auto& p : family_pools) p = make_pool(vocab_rng, 40);
    std::vector<std::vector<std::vector<std::string>>> model_pools(spec.families);
    for (auto& f : model_pools) {
        f.resize(spec.models_per_family);
        for (auto& p : f) p = make_pool(vocab_rng, 40);
    }

    std::mt19937_64 rng(mix_seeds(seed, 0x5A3D1E));
    std::vector<Sample> samples;

    auto gen_text = [&](const std::vector<std::string>* fam, const std::vector<std::string>* model,
                        int domain) {
        const int len = spec.min_tokens +
                        static_cast<int>(rng_below(rng, spec.max_tokens - spec.min_tokens + 1));
        std::ostringstream text;
        for (int t = 0; t < len; ++t) {
            if (t) text << ' ';
            const double u = rng_unit(rng);
            if (u < spec.p_common) {
                text << pick(rng, common);
            } else if (u < spec.p_common + spec.p_domain) {
                text << pick(rng, domain_pools[domain]);
            } else if (fam != nullptr && u < spec.p_common + spec.p_domain + spec.p_family) {
                text << pick(rng, *fam);
            } else {
                text << pick(rng, model != nullptr ? *model : human_pool);
            }
        }
        return text.str();
    };

    for (int f = 0; f < spec.families; ++f) {
        const std::string family = "fam" + std::to_string(f);
        for (int m = 0; m < spec.models_per_family; ++m) {
            const std::string model = family + "-m" + std::to_string(m);
            for (int i = 0; i < spec.samples_per_model; ++i) {
                const int domain = i % spec.domains;
                Sample s;
                s.id = model + "-s" + std::to_string(i);
                s.text = gen_text(&family_pools[f], &model_pools[f][m], domain);
                s.label = HierLabel::machine(family, model, "d" + std::to_string(domain));
                samples.push_back(std::move(s));
            }
        }
    }
    for (int i = 0; i < spec.human_samples; ++i) {
        const int domain = i % spec.domains;
        Sample s;
        s.id = "human-s" + std::to_string(i);
        s.text = gen_text(nullptr, nullptr, domain);
        s.label = HierLabel::human("d" + std::to_string(domain));
        samples.push_back(std::move(s));
    }
    return make_corpus(std::move(samples));
}

std::pair<Corpus, Corpus> split_corpus(const Corpus& corpus, double test_fraction,
                                       std::uint64_t seed) {
    if (!(test_fraction > 0.0 && test_fraction < 1.0))
        throw ValidationError("test fraction must be in (0,1)");

    std::map<std::string, std::vector<std::size_t>> strata;
    for (std::size_t i = 0; i < corpus.samples.size(); ++i)
        strata[corpus.samples[i].label.class_key()].push_back(i);

    std::vector<bool> is_test(corpus.samples.size(), false);
    for (auto& [key, indices] : strata) {
        const std::size_t n = indices.size();
        if (n < 2) throw ValidationError("stratum '" + key + "' too small to split (" +
                                         std::to_string(n) + " samples)");
        std::mt19937_64 rng(mix_seeds(seed, fnv1a64(key)));
        std::shuffle(indices.begin(), indices.end(), rng);
        auto test_count = static_cast<std::size_t>(std::floor(n * test_fraction + 0.5));
        test_count = std::clamp<std::size_t>(test_count, 1, n - 1);
        for (std::size_t j = 0; j < test_count; ++j) is_test[indices[j]] = true;
    }

    std::vector<Sample> train, test;
    for (std::size_t i = 0; i < corpus.samples.size(); ++i)
        (is_test[i] ? test : train).push_back(corpus.samples[i]);
    return {make_corpus(std::move(train)), make_corpus(std::move(test))};
}

}  // namespace detective
