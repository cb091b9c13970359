#include "unts/cli.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

#include "unts/eval.hpp"
#include "unts/infer.hpp"
#include "unts/synth.hpp"
#include "unts/train.hpp"

namespace unts {

namespace {

const char* kUsage = R"(usage: unts <command> [flags]

commands:
  partition  --in FILE --out DIR [--complex-max-fe N] [--simple-min-fe N]
  synth      --out DIR [--config FILE] [--seed N] [--class-size N]
             [--train-simple N] [--train-complex N] [--dev N] [--test N]
             [--heldout-simple N] [--emb-dim N]
  train      --simple FILE --complex FILE --out DIR [--config FILE]
             [--dev-src FILE --dev-refs F1,F2,...] [--parallel FILE]
             [--embeddings FILE] [--resume CKPT] [--set key=value]...
  simplify   --model CKPT --in FILE --out FILE
  evaluate   --src FILE --pred FILE --refs F1,F2,... --report FILE [--smooth]
  sweep      --simple FILE --complex FILE --parallel FILE --out DIR
             [--config FILE] --sizes N1,N2,... [--seeds N]
             [--dev-src FILE --dev-refs F1,F2,...] [--embeddings FILE]
             [--set key=value]...
)";

struct Args {
    std::map<std::string, std::string> flags;
    std::vector<std::string> sets; // repeated --set key=value
    std::set<std::string> switches;
};

Args parse_args(const std::vector<std::string>& argv, std::size_t start,
                const std::set<std::string>& valued, const std::set<std::string>& boolean) {
    Args a;
    for (std::size_t i = start; i < argv.size(); ++i) {
        const std::string& flag = argv[i];
        if (boolean.count(flag)) {
            a.switches.insert(flag);
            continue;
        }
        if (!valued.count(flag) && flag != "--set")
            throw ConfigError("unknown flag '" + flag + "'");
        if (i + 1 >= argv.size()) throw ConfigError("flag '" + flag + "' needs a value");
        const std::string& value = argv[++i];
        if (flag == "--set") a.sets.push_back(value);
        else a.flags[flag] = value;
    }
    return a;
}

std::string require_flag(const Args& a, const std::string& flag) {
    auto it = a.flags.find(flag);
    if (it == a.flags.end()) throw ConfigError("missing required flag " + flag);
    return it->second;
}

std::vector<std::string> split_commas(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ','))
        if (!item.empty()) out.push_back(item);
    return out;
}

std::string fmt_double(double x) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

std::string fmt_fixed(double x, int digits = 4) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, x);
    return buf;
}

TrainingConfig config_from_args(const Args& a) {
    KeyValueConfig kv;
    if (a.flags.count("--config")) kv = KeyValueConfig::parse_file(a.flags.at("--config"));
    for (const auto& s : a.sets) {
        const auto eq = s.find('=');
        if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + s + "'");
        kv.set(s.substr(0, eq), s.substr(eq + 1));
    }
    return TrainingConfig::from_kv(kv);
}

DevSet devset_from_args(const Args& a) {
    DevSet dev;
    if (!a.flags.count("--dev-src")) return dev;
    dev.sources = load_sentences(a.flags.at("--dev-src"));
    if (!a.flags.count("--dev-refs"))
        throw ConfigError("--dev-src requires --dev-refs");
    std::vector<std::vector<Sentence>> ref_files;
    for (const auto& path : split_commas(a.flags.at("--dev-refs")))
        ref_files.push_back(load_sentences(path));
    for (const auto& rf : ref_files)
        if (rf.size() != dev.sources.size())
            throw ConfigError("dev reference file line count does not match --dev-src");
    dev.references.resize(dev.sources.size());
    for (std::size_t i = 0; i < dev.sources.size(); ++i)
        for (const auto& rf : ref_files) dev.references[i].push_back(rf[i]);
    return dev;
}

void echo_effective_config(const std::string& out_dir, const KeyValueConfig& kv) {
    std::filesystem::create_directories(out_dir);
    kv.save(out_dir + "/effective.cfg");
}

int cmd_partition(const Args& a) {
    const std::string in = require_flag(a, "--in");
    const std::string out_dir = require_flag(a, "--out");
    double complex_max = 10.0, simple_min = 70.0;
    if (a.flags.count("--complex-max-fe")) complex_max = std::stod(a.flags.at("--complex-max-fe"));
    if (a.flags.count("--simple-min-fe")) simple_min = std::stod(a.flags.at("--simple-min-fe"));

    const auto sentences = load_sentences(in);
    const PartitionResult res = partition_corpus(sentences, complex_max, simple_min);

    std::filesystem::create_directories(out_dir);
    save_sentences(out_dir + "/simple.txt", res.corpus.simple_side);
    save_sentences(out_dir + "/complex.txt", res.corpus.complex_side);

    auto side_stats = [](const std::vector<Sentence>& side) {
        double words = 0, fe_sum = 0;
        double fe_min = 0, fe_max = 0;
        bool first = true;
        for (const auto& s : side) {
            int w = 0;
            for (const auto& t : s.tokens)
                if (is_alphabetic(t)) ++w;
            words += w;
            const double fe = flesch_ease(s);
            fe_sum += fe;
            if (first || fe < fe_min) fe_min = fe;
            if (first || fe > fe_max) fe_max = fe;
            first = false;
        }
        const double n = side.empty() ? 1.0 : static_cast<double>(side.size());
        return std::tuple<double, double, double, double>(words / n, fe_sum / n, fe_min, fe_max);
    };

    std::ofstream stats(out_dir + "/stats.txt");
    stats << "category\tsentences\tavg_words\tavg_fe\tfe_min\tfe_max\n";
    auto [sw, sfe, smin, smax] = side_stats(res.corpus.simple_side);
    stats << "simple\t" << res.kept_simple << "\t" << fmt_fixed(sw, 2) << "\t"
          << fmt_fixed(sfe, 2) << "\t" << fmt_fixed(smin, 2) << "\t" << fmt_fixed(smax, 2)
          << "\n";
    auto [dw, dfe, dmin, dmax] = side_stats(res.corpus.complex_side);
    stats << "complex\t" << res.kept_complex << "\t" << fmt_fixed(dw, 2) << "\t"
          << fmt_fixed(dfe, 2) << "\t" << fmt_fixed(dmin, 2) << "\t" << fmt_fixed(dmax, 2)
          << "\n";
    stats << "discarded\t" << res.discarded << "\t-\t-\t-\t-\n";

    KeyValueConfig kv;
    kv.set("command", "partition");
    kv.set("in", in);
    kv.set("complex_max_fe", fmt_double(complex_max));
    kv.set("simple_min_fe", fmt_double(simple_min));
    echo_effective_config(out_dir, kv);
    std::cout << "kept " << res.kept_simple << " simple, " << res.kept_complex
              << " complex, discarded " << res.discarded << "\n";
    return 0;
}

int cmd_synth(const Args& a) {
    const std::string out_dir = require_flag(a, "--out");
    SynthConfig cfg;
    KeyValueConfig kv;
    if (a.flags.count("--config")) kv = KeyValueConfig::parse_file(a.flags.at("--config"));
    kv.check_schema({"seed", "class_size", "train_simple", "train_complex", "dev", "test",
                     "heldout_simple", "emb_dim"});
    cfg.seed = static_cast<std::uint64_t>(kv.get_int("seed", static_cast<long>(cfg.seed)));
    cfg.class_size = static_cast<int>(kv.get_int("class_size", cfg.class_size));
    cfg.train_simple = static_cast<int>(kv.get_int("train_simple", cfg.train_simple));
    cfg.train_complex = static_cast<int>(kv.get_int("train_complex", cfg.train_complex));
    cfg.dev_size = static_cast<int>(kv.get_int("dev", cfg.dev_size));
    cfg.test_size = static_cast<int>(kv.get_int("test", cfg.test_size));
    cfg.heldout_simple = static_cast<int>(kv.get_int("heldout_simple", cfg.heldout_simple));
    cfg.emb_dim = static_cast<int>(kv.get_int("emb_dim", cfg.emb_dim));
    auto flag_int = [&](const char* flag, int& into) {
        if (a.flags.count(flag)) into = std::stoi(a.flags.at(flag));
    };
    if (a.flags.count("--seed")) cfg.seed = std::stoull(a.flags.at("--seed"));
    flag_int("--class-size", cfg.class_size);
    flag_int("--train-simple", cfg.train_simple);
    flag_int("--train-complex", cfg.train_complex);
    flag_int("--dev", cfg.dev_size);
    flag_int("--test", cfg.test_size);
    flag_int("--heldout-simple", cfg.heldout_simple);
    flag_int("--emb-dim", cfg.emb_dim);

    const SynthOutput out = generate_synthetic_corpus(cfg);

    std::filesystem::create_directories(out_dir);
    save_sentences(out_dir + "/simple.txt", out.train.simple_side);
    save_sentences(out_dir + "/complex.txt", out.train.complex_side);
    save_parallel(out_dir + "/parallel.tsv", out.train.parallel);
    std::vector<Sentence> dev_src, dev_ref, test_src, test_ref;
    for (const auto& [c, s] : out.dev) {
        dev_src.push_back(c);
        dev_ref.push_back(s);
    }
    for (const auto& [c, s] : out.test) {
        test_src.push_back(c);
        test_ref.push_back(s);
    }
    save_sentences(out_dir + "/dev_src.txt", dev_src);
    save_sentences(out_dir + "/dev_ref.0", dev_ref);
    save_sentences(out_dir + "/test_src.txt", test_src);
    save_sentences(out_dir + "/test_ref.0", test_ref);
    save_sentences(out_dir + "/heldout_simple.txt", out.heldout_simple);
    save_synonyms(out_dir + "/synonyms.tsv", out.synonyms);
    save_embeddings(out_dir + "/embeddings.txt", out.embeddings);

    KeyValueConfig eff;
    eff.set("command", "synth");
    eff.set("seed", std::to_string(cfg.seed));
    eff.set("class_size", std::to_string(cfg.class_size));
    eff.set("train_simple", std::to_string(cfg.train_simple));
    eff.set("train_complex", std::to_string(cfg.train_complex));
    eff.set("dev", std::to_string(cfg.dev_size));
    eff.set("test", std::to_string(cfg.test_size));
    eff.set("heldout_simple", std::to_string(cfg.heldout_simple));
    eff.set("emb_dim", std::to_string(cfg.emb_dim));
    echo_effective_config(out_dir, eff);
    std::cout << "wrote synthetic corpus to " << out_dir << "\n";
    return 0;
}

Corpus corpus_from_args(const Args& a) {
    Corpus corpus;
    corpus.simple_side = load_sentences(require_flag(a, "--simple"));
    corpus.complex_side = load_sentences(require_flag(a, "--complex"));
    if (a.flags.count("--parallel")) corpus.parallel = load_parallel(a.flags.at("--parallel"));
    return corpus;
}

int cmd_train(const Args& a) {
    const std::string out_dir = require_flag(a, "--out");
    TrainingConfig cfg = config_from_args(a);
    if (cfg.mode == "semisupervised" && !a.flags.count("--parallel") &&
        !a.flags.count("--resume"))
        throw ConfigError("semisupervised mode requires --parallel");

    const Corpus corpus = corpus_from_args(a);
    const DevSet dev = devset_from_args(a);

    std::vector<std::pair<std::string, std::vector<double>>> embeddings;
    const bool have_emb = a.flags.count("--embeddings") != 0;
    if (have_emb) embeddings = load_embeddings(a.flags.at("--embeddings"));

    TrainResult result;
    if (a.flags.count("--resume")) {
        auto trainer = Trainer::resume(a.flags.at("--resume"), corpus, dev, out_dir);
        result = trainer->run();
    } else {
        Trainer trainer(corpus, cfg, dev, out_dir, have_emb ? &embeddings : nullptr);
        result = trainer.run();
    }

    KeyValueConfig eff = cfg.to_kv();
    eff.set("command", "train");
    eff.set("simple", a.flags.at("--simple"));
    eff.set("complex", a.flags.at("--complex"));
    if (a.flags.count("--parallel")) eff.set("parallel", a.flags.at("--parallel"));
    if (a.flags.count("--dev-src")) eff.set("dev_src", a.flags.at("--dev-src"));
    if (a.flags.count("--dev-refs")) eff.set("dev_refs", a.flags.at("--dev-refs"));
    if (have_emb) eff.set("embeddings", a.flags.at("--embeddings"));
    echo_effective_config(out_dir, eff);

    std::cout << "selected step " << result.selected.step << " sari "
              << fmt_fixed(result.selected.sari, 2) << " bleu "
              << fmt_fixed(result.selected.bleu, 2) << " fe_diff "
              << fmt_fixed(result.selected.fe_diff, 2) << " word_diff "
              << fmt_fixed(result.selected.word_diff, 2) << "\n";
    return 0;
}

int cmd_simplify(const Args& a) {
    const auto loaded = load_checkpoint(require_flag(a, "--model"));
    simplify_file(require_flag(a, "--in"), require_flag(a, "--out"), *loaded.state);
    return 0;
}

int cmd_evaluate(const Args& a) {
    const auto src = load_sentences(require_flag(a, "--src"));
    const auto pred_lines = [&] {
        // predictions may contain empty lines (empty generations)
        std::ifstream f(require_flag(a, "--pred"));
        if (!f) throw IoError("cannot open " + a.flags.at("--pred"));
        std::vector<Sentence> out;
        std::string line;
        while (std::getline(f, line)) {
            if (line.find_first_not_of(" \t\r") == std::string::npos) out.push_back({});
            else out.push_back(tokenize(line));
        }
        return out;
    }();
    std::vector<std::vector<Sentence>> ref_files;
    for (const auto& path : split_commas(require_flag(a, "--refs")))
        ref_files.push_back(load_sentences(path));

    if (pred_lines.size() != src.size())
        throw ConfigError("prediction line count does not match source");
    for (const auto& rf : ref_files)
        if (rf.size() != src.size())
            throw ConfigError("reference line count does not match source");
    if (ref_files.empty()) throw ConfigError("at least one reference file is required");

    std::vector<EvalInstance> instances;
    for (std::size_t i = 0; i < src.size(); ++i) {
        std::vector<Sentence> refs;
        for (const auto& rf : ref_files) refs.push_back(rf[i]);
        instances.emplace_back(src[i], pred_lines[i], refs);
    }
    EvalReport rep = evaluate(instances);
    if (a.switches.count("--smooth")) rep.bleu = bleu(instances, 4, true);
    save_report(require_flag(a, "--report"), rep);
    std::cout << "sari " << fmt_fixed(rep.sari, 2) << " bleu " << fmt_fixed(rep.bleu, 2)
              << " fe_diff " << fmt_fixed(rep.fe_diff, 2) << " word_diff "
              << fmt_fixed(rep.word_diff, 2) << "\n";
    return 0;
}

int cmd_sweep(const Args& a) {
    const std::string out_dir = require_flag(a, "--out");
    TrainingConfig base = config_from_args(a);
    const Corpus corpus = corpus_from_args(a);
    if (!a.flags.count("--parallel"))
        throw ConfigError("sweep requires --parallel (the pool subsampled per size)");
    const DevSet dev = devset_from_args(a);

    std::vector<long> sizes;
    for (const auto& s : split_commas(require_flag(a, "--sizes"))) sizes.push_back(std::stol(s));
    if (sizes.empty()) throw ConfigError("--sizes must name at least one size");
    int seeds = 1;
    if (a.flags.count("--seeds")) seeds = std::stoi(a.flags.at("--seeds"));
    if (seeds < 1) throw ConfigError("--seeds must be >= 1");

    std::vector<std::pair<std::string, std::vector<double>>> embeddings;
    const bool have_emb = a.flags.count("--embeddings") != 0;
    if (have_emb) embeddings = load_embeddings(a.flags.at("--embeddings"));
    const auto* emb_ptr = have_emb ? &embeddings : nullptr;

    std::filesystem::create_directories(out_dir);
    std::ofstream table(out_dir + "/sweep.tsv");
    table << "delta_size\tfe_diff\tsari\tbleu\tword_diff\tseeds\n";

    for (long size : sizes) {
        if (size > static_cast<long>(corpus.parallel.size()))
            throw ConfigError("sweep size " + std::to_string(size) +
                              " exceeds parallel pool of " +
                              std::to_string(corpus.parallel.size()));
        double sari_sum = 0, bleu_sum = 0, fe_sum = 0, wd_sum = 0;
        for (int s = 0; s < seeds; ++s) {
            TrainingConfig cfg = base;
            cfg.seed = base.seed + static_cast<std::uint64_t>(s);
            Corpus sub = corpus;
            sub.parallel.assign(corpus.parallel.begin(), corpus.parallel.begin() + size);
            cfg.mode = size == 0 ? "unsupervised" : "semisupervised";
            const std::string run_dir = out_dir + "/size_" + std::to_string(size) + "_seed_" +
                                        std::to_string(s);
            Trainer trainer(sub, cfg, dev, run_dir, emb_ptr);
            TrainResult res = trainer.run();
            sari_sum += res.selected.sari;
            bleu_sum += res.selected.bleu;
            fe_sum += res.selected.fe_diff;
            wd_sum += res.selected.word_diff;
        }
        const double n = static_cast<double>(seeds);
        table << size << "\t" << fmt_fixed(fe_sum / n, 4) << "\t" << fmt_fixed(sari_sum / n, 4)
              << "\t" << fmt_fixed(bleu_sum / n, 4) << "\t" << fmt_fixed(wd_sum / n, 4) << "\t"
              << seeds << "\n";
        table.flush();
    }

    KeyValueConfig eff = base.to_kv();
    eff.set("command", "sweep");
    eff.set("sizes", a.flags.at("--sizes"));
    eff.set("seeds", std::to_string(seeds));
    echo_effective_config(out_dir, eff);
    std::cout << "sweep table written to " << out_dir << "/sweep.tsv\n";
    return 0;
}

} // namespace

int cli_main(const std::vector<std::string>& args) {
    try {
        if (args.empty()) {
            std::cerr << kUsage;
            return 2;
        }
        const std::string& cmd = args[0];
        if (cmd == "partition") {
            return cmd_partition(parse_args(args, 1,
                                            {"--in", "--out", "--complex-max-fe",
                                             "--simple-min-fe"},
                                            {}));
        } else if (cmd == "synth") {
            return cmd_synth(parse_args(args, 1,
                                        {"--out", "--config", "--seed", "--class-size",
                                         "--train-simple", "--train-complex", "--dev", "--test",
                                         "--heldout-simple", "--emb-dim"},
                                        {}));
        } else if (cmd == "train") {
            return cmd_train(parse_args(args, 1,
                                        {"--config", "--simple", "--complex", "--out",
                                         "--dev-src", "--dev-refs", "--parallel",
                                         "--embeddings", "--resume"},
                                        {}));
        } else if (cmd == "simplify") {
            return cmd_simplify(parse_args(args, 1, {"--model", "--in", "--out"}, {}));
        } else if (cmd == "evaluate") {
            return cmd_evaluate(parse_args(args, 1, {"--src", "--pred", "--refs", "--report"},
                                           {"--smooth"}));
        } else if (cmd == "sweep") {
            return cmd_sweep(parse_args(args, 1,
                                        {"--config", "--simple", "--complex", "--parallel",
                                         "--out", "--sizes", "--seeds", "--dev-src",
                                         "--dev-refs", "--embeddings"},
                                        {}));
        }
        std::cerr << "unknown command '" << cmd << "'\n" << kUsage;
        return 2;
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const ParseError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const IoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return 1;
    }
}

} // namespace unts
