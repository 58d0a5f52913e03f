#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "detective/pipeline.hpp"

namespace {

using namespace detective;

int run(int argc, char** argv) {
    CLI::App app{"DeTeCtive-style AI-generated text detection toolkit"};
    app.require_subcommand(1);

    std::uint64_t seed = 0;
    app.add_option("--seed", seed, "global RNG seed")->capture_default_str();

    // ---- synth ----
    auto* synth = app.add_subcommand("synth", "generate a synthetic style-marked corpus");
    SynthSpec spec;
    std::string synth_out;
    synth->add_option("--families", spec.families)->capture_default_str();
    synth->add_option("--models-per-family", spec.models_per_family)->capture_default_str();
    synth->add_option("--samples-per-model", spec.samples_per_model)->capture_default_str();
    synth->add_option("--human-samples", spec.human_samples)->capture_default_str();
    synth->add_option("--domains", spec.domains)->capture_default_str();
    synth->add_option("--vocab-seed", spec.vocab_seed)->capture_default_str();
    synth->add_option("--min-tokens", spec.min_tokens)->capture_default_str();
    synth->add_option("--max-tokens", spec.max_tokens)->capture_default_str();
    synth->add_option("--out", synth_out, "output corpus file")->required();

    // ---- train ----
    auto* train_cmd = app.add_subcommand("train", "train the built-in encoder");
    std::string train_corpus, train_ckpt, train_log;
    TrainConfig tcfg;
    train_cmd->add_option("--corpus", train_corpus, "training corpus file")->required();
    train_cmd->add_option("--out", train_ckpt, "checkpoint output path")->required();
    train_cmd->add_option("--log", train_log, "JSONL step log path");
    train_cmd->add_option("--buckets", tcfg.featurizer.bucket_count, "feature buckets (power of 2)")
        ->capture_default_str();
    train_cmd->add_option("--hidden", tcfg.hidden_dim)->capture_default_str();
    train_cmd->add_option("--dim", tcfg.embed_dim, "embedding dimension")->capture_default_str();
    train_cmd->add_option("--tau", tcfg.weights.tau)->capture_default_str();
    train_cmd->add_option("--alpha", tcfg.weights.alpha)->capture_default_str();
    train_cmd->add_option("--beta", tcfg.weights.beta)->capture_default_str();
    train_cmd->add_option("--gamma", tcfg.weights.gamma)->capture_default_str();
    auto* delta_opt = train_cmd->add_option("--delta", tcfg.weights.delta,
                                            "explicit human-level weight");
    train_cmd->add_flag("--balanced", "force delta = alpha + beta + gamma (default)");
    train_cmd->add_option("--lr", tcfg.peak_lr, "peak learning rate")->capture_default_str();
    train_cmd->add_option("--warmup", tcfg.warmup_steps)->capture_default_str();
    train_cmd->add_option("--weight-decay", tcfg.optimizer.weight_decay)->capture_default_str();
    train_cmd->add_option("--epochs", tcfg.epochs)->capture_default_str();
    train_cmd->add_option("--batch-size", tcfg.sampler.batch_size)->capture_default_str();
    train_cmd->add_option("--samples-per-class", tcfg.sampler.samples_per_class)
        ->capture_default_str();
    train_cmd->add_option("--human-fraction", tcfg.sampler.human_fraction)->capture_default_str();
    std::string resume_path;
    train_cmd->add_option("--resume", resume_path, "resume from checkpoint");

    // ---- embed ----
    auto* embed = app.add_subcommand("embed", "encode a corpus into an embedding file");
    std::string embed_ckpt, embed_corpus_path, embed_out;
    embed->add_option("--checkpoint", embed_ckpt, "encoder checkpoint (omit for untrained)");
    embed->add_option("--corpus", embed_corpus_path)->required();
    embed->add_option("--out", embed_out)->required();

    // ---- build-db ----
    auto* build = app.add_subcommand("build-db", "build a feature database from embeddings");
    std::string build_emb, build_out;
    build->add_option("--embeddings", build_emb)->required();
    build->add_option("--out", build_out)->required();

    // ---- tfia-add ----
    auto* tfia = app.add_subcommand("tfia-add", "expand a database with OOD embeddings");
    std::string tfia_db, tfia_emb, tfia_out;
    tfia->add_option("--db", tfia_db)->required();
    tfia->add_option("--embeddings", tfia_emb)->required();
    tfia->add_option("--out", tfia_out)->required();

    // shared retrieval flags
    EvalOptions eopts;
    std::string vote = "majority", f1_mode = "macro";
    auto add_retrieval_flags = [&](CLI::App* cmd, bool with_vote) {
        cmd->add_option("--k", eopts.k, "neighbors per query")->capture_default_str();
        if (with_vote)
            cmd->add_option("--vote", vote, "majority|weighted")
                ->check(CLI::IsMember({"majority", "weighted"}));
    };

    // ---- classify ----
    auto* classify = app.add_subcommand("classify", "binary human/machine KNN classification");
    std::string cls_db, cls_emb, cls_out;
    classify->add_option("--db", cls_db)->required();
    classify->add_option("--embeddings", cls_emb)->required();
    classify->add_option("--out", cls_out)->required();
    add_retrieval_flags(classify, true);

    // ---- attribute ----
    auto* attr = app.add_subcommand("attribute", "multi-class authorship attribution");
    std::string attr_db, attr_emb, attr_out;
    attr->add_option("--db", attr_db)->required();
    attr->add_option("--embeddings", attr_emb)->required();
    attr->add_option("--out", attr_out)->required();
    attr->add_option("--k", eopts.k)->capture_default_str();

    // ---- evaluate ----
    auto* eval = app.add_subcommand("evaluate", "score labeled queries against a database");
    std::string eval_db, eval_emb, eval_out, eval_task = "binary";
    eval->add_option("--db", eval_db)->required();
    eval->add_option("--embeddings", eval_emb)->required();
    eval->add_option("--out", eval_out, "machine-readable report file");
    eval->add_option("--task", eval_task, "binary|attribution")
        ->check(CLI::IsMember({"binary", "attribution"}));
    eval->add_option("--f1-mode", f1_mode, "macro|machine-class")
        ->check(CLI::IsMember({"macro", "machine-class"}));
    add_retrieval_flags(eval, true);

    // ---- tfia-sweep ----
    auto* sweep = app.add_subcommand("tfia-sweep", "TFIA dose-response experiment");
    std::string sw_ckpt, sw_db, sw_train, sw_test, sw_out;
    std::vector<double> fractions{0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0};
    sweep->add_option("--checkpoint", sw_ckpt)->required();
    sweep->add_option("--db", sw_db, "base database")->required();
    sweep->add_option("--ood-train", sw_train)->required();
    sweep->add_option("--ood-test", sw_test)->required();
    sweep->add_option("--fractions", fractions, "increasing fractions in [0,1]");
    sweep->add_option("--out", sw_out)->required();
    add_retrieval_flags(sweep, true);

    // let global flags like --seed appear after the subcommand name
    for (auto* sub : {synth, train_cmd, embed, build, tfia, classify, attr, eval, sweep})
        sub->fallthrough();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return e.get_exit_code() == 0 ? 0 : 1;  // usage errors map to 1
    }

    eopts.vote = vote == "weighted" ? VoteMode::Weighted : VoteMode::Majority;
    eopts.f1_mode = f1_mode == "machine-class" ? F1Mode::MachineClass : F1Mode::Macro;

    if (synth->parsed()) {
        cmd_synth(spec, seed, synth_out);
    } else if (train_cmd->parsed()) {
        tcfg.seed = seed;
        tcfg.sampler.seed = seed;
        tcfg.weights.balanced_mode = !static_cast<bool>(*delta_opt);
        tcfg.checkpoint_path = train_ckpt;
        tcfg.log_path = train_log;
        const Corpus corpus = load_corpus(train_corpus);
        if (!resume_path.empty()) {
            const Checkpoint ckpt = checkpoint_load(resume_path);
            train(corpus, tcfg, &ckpt);
        } else {
            train(corpus, tcfg);
        }
    } else if (embed->parsed()) {
        cmd_embed(embed_ckpt.empty() ? std::nullopt : std::make_optional(embed_ckpt),
                  embed_corpus_path, embed_out, seed);
    } else if (build->parsed()) {
        cmd_build_db(build_emb, build_out);
    } else if (tfia->parsed()) {
        cmd_tfia_add(tfia_db, tfia_emb, tfia_out);
    } else if (classify->parsed()) {
        cmd_classify(cls_db, cls_emb, eopts, cls_out);
    } else if (attr->parsed()) {
        cmd_attribute(attr_db, attr_emb, eopts.k, attr_out);
    } else if (eval->parsed()) {
        eopts.attribution = eval_task == "attribution";
        const MetricsReport report = cmd_evaluate(eval_db, eval_emb, eopts, eval_out);
        std::cout << report.to_table();
    } else if (sweep->parsed()) {
        const auto result =
            cmd_tfia_sweep(sw_ckpt, sw_db, sw_train, sw_test, fractions, eopts, seed, sw_out);
        for (std::size_t i = 0; i < result.fractions.size(); ++i)
            std::cout << "fraction " << result.fractions[i] << ": avg_rec "
                      << result.reports[i].avg_rec << "\n";
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const detective::NumericError& e) {
        std::cerr << "numeric error: " << e.what() << "\n";
        return 3;
    } catch (const detective::ParseError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 2;
    } catch (const detective::ValidationError& e) {
        std::cerr << "validation error: " << e.what() << "\n";
        return 2;
    } catch (const detective::IoError& e) {
        std::cerr << "io error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
