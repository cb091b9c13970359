// Acceptance suite: runs every criterion end to end and prints one
// PASS/FAIL line per criterion. Exit code is the number of failures.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <vector>

#include "test_util.hpp"
#include "unts/cli.hpp"
#include "unts/eval.hpp"
#include "unts/infer.hpp"
#include "unts/losses.hpp"
#include "unts/optim.hpp"
#include "unts/synth.hpp"
#include "unts/train.hpp"

using namespace unts;

namespace {

struct Criterion {
    int id;
    std::string name;
    bool pass = false;
    std::string detail;
};

std::vector<Criterion> g_results;

void record(int id, const std::string& name, bool pass, const std::string& detail) {
    g_results.push_back({id, name, pass, detail});
    std::printf("criterion %d (%s): %s  [%s]\n", id, name.c_str(), pass ? "PASS" : "FAIL",
                detail.c_str());
    std::fflush(stdout);
}

std::string base_dir() {
    const auto dir = std::filesystem::temp_directory_path() / "unts_acceptance";
    std::filesystem::create_directories(dir);
    return dir.string();
}

std::string fresh_dir(const std::string& name) {
    const std::string dir = base_dir() + "/" + name;
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

double seconds_since(const std::chrono::steady_clock::time_point& t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

Vocabulary toy_vocab(int extra) {
    Vocabulary v;
    for (int i = 0; i < extra; ++i) v.add("tok" + std::to_string(i));
    return v;
}

ModelState toy_state(std::uint64_t seed) {
    ModelConfig cfg;
    cfg.hidden = 8; // toy dimensions pinned by the criterion
    cfg.emb_dim = 6;
    cfg.conv_filters = 2;
    Rng rng(seed);
    return ModelState::init(cfg, toy_vocab(8), rng); // 12 ids with the reserved four
}

Tensor uniform_tensor(std::vector<int> shape, Rng& rng, double lo, double hi) {
    Tensor t(std::move(shape));
    for (auto& x : t.values) x = lo + (hi - lo) * rng.next_double();
    return t;
}

double overlap(const std::vector<std::string>& a, const std::vector<std::string>& b) {
    std::map<std::string, int> ca, cb;
    for (const auto& t : a) ca[t]++;
    for (const auto& t : b) cb[t]++;
    int inter = 0;
    for (const auto& [t, c] : ca) inter += std::min(c, cb.count(t) ? cb.at(t) : 0);
    const std::size_t denom = std::max(a.size(), b.size());
    return denom == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(denom);
}

// ---------------------------------------------------------------------------
// 1. Gradient integrity
// ---------------------------------------------------------------------------

void criterion_1() {
    const auto t0 = std::chrono::steady_clock::now();
    double worst = 0.0;
    std::string worst_at;
    auto track = [&](const testutil::FdReport& rep, const char* where) {
        if (rep.max_rel_err > worst) {
            worst = rep.max_rel_err;
            worst_at = std::string(where) + "/" + rep.worst;
        }
    };

    Rng rng(101);
    // every operator, randomized inputs
    for (int trial = 0; trial < 5; ++trial) {
        {
            Graph g;
            Value a = make_parameter(uniform_tensor({5}, rng, -2, 2), "a");
            Value b = make_parameter(uniform_tensor({5}, rng, -2, 2), "b");
            Value pos = make_parameter(uniform_tensor({5}, rng, 0.5, 2.0), "pos");
            Value root = g.sum(g.mul(g.add(a, b), g.sub(a, b)));
            root = g.add(root, g.sum(g.affine(g.tanh(g.sigmoid(a)), 1.5, 0.25)));
            root = g.add(root, g.sum(g.log(pos)));
            root = g.add(root, g.sum(g.clamp_min(b, -10.0)));
            root = g.add(root, g.sum(g.softmax(a)));
            g.backward(root);
            track(testutil::fd_check(g, root, {a, b, pos}), "elementwise");
        }
        {
            Graph g;
            Value m1 = make_parameter(uniform_tensor({3, 4}, rng, -2, 2), "m1");
            Value m2 = make_parameter(uniform_tensor({4, 2}, rng, -2, 2), "m2");
            Value x = make_parameter(uniform_tensor({4}, rng, -2, 2), "x");
            Value w = make_parameter(uniform_tensor({3}, rng, -2, 2), "w");
            Value root = g.mean(g.matmul(m1, m2));
            root = g.add(root, g.sum(g.matvec(m1, x)));
            root = g.add(root, g.sum(g.vecmat(w, m1)));
            root = g.add(root, g.mean(g.softmax(m1, 0)));
            root = g.add(root, g.mean(g.softmax(m1, 1)));
            g.backward(root);
            track(testutil::fd_check(g, root, {m1, m2, x, w}), "matrix");
        }
        {
            Graph g;
            Value a = make_parameter(uniform_tensor({3}, rng, -2, 2), "a");
            Value b = make_parameter(uniform_tensor({4}, rng, -2, 2), "b");
            Value table = make_parameter(uniform_tensor({6, 3}, rng, -2, 2), "table");
            Value conv_x = make_parameter(uniform_tensor({6, 3}, rng, -2, 2), "conv_x");
            Value conv_w = make_parameter(uniform_tensor({4, 2, 3}, rng, -1, 1), "conv_w");
            Value conv_b = make_parameter(uniform_tensor({4}, rng, -1, 1), "conv_b");
            Value root = g.mean(g.slice(g.concat({a, b}), 1, 5));
            root = g.add(root, g.mean(g.stack_rows({a, a})));
            root = g.add(root, g.sum(g.gather_rows(table, {5, 0, 5})));
            root = g.add(root, g.sum(g.maxpool_time(g.conv1d(conv_x, conv_w, conv_b))));
            g.backward(root);
            track(testutil::fd_check(g, root, {a, b, table, conv_x, conv_w, conv_b}),
                  "structural");
        }
    }

    // every full loss graph at toy dimensions (hidden 8, vocab 12, <=5 tokens)
    ModelState st = toy_state(11);
    const IdBatch bs = {{4, 5, 6, 7, 8}, {9, 10}};
    const IdBatch bd = {{9, 10, 11, 4}, {5, 6, 7}};
    const LossOpts opts;
    auto gen_params = st.groups({"encoder", "decoder_s", "decoder_d", "embedding_decoder"});
    auto gs_params = st.groups({"encoder", "decoder_s", "embedding_decoder"});
    // leaf grads accumulate across backward calls; clear between loss graphs
    auto clear = [&] { zero_grads(st.all_params()); };
    {
        Graph g;
        Value l = reconstruction_loss(g, st, bs, bd, opts);
        clear();
        g.backward(l);
        track(testutil::fd_check(g, l, gen_params), "L_rec");
    }
    {
        Graph g;
        Value l = denoising_loss(g, st, bs, bd, 3, opts);
        clear();
        g.backward(l);
        track(testutil::fd_check(g, l, gen_params), "L_denoi");
    }
    {
        Graph g;
        AdvLosses l = adversarial_losses(g, st, bs, bd, opts);
        clear();
        g.backward(l.adv_d);
        track(testutil::fd_check(g, l.adv_d, st.groups({"critic_conv", "critic_d_head"})),
              "L_adv_D");
        clear();
        g.backward(l.adv_gs);
        track(testutil::fd_check(g, l.adv_gs, gs_params), "L_adv_Gs");
    }
    {
        Graph g;
        DivLosses l = diversification_losses(g, st, bs, bd, opts);
        clear();
        g.backward(l.div_c);
        track(testutil::fd_check(g, l.div_c, st.groups({"critic_conv", "critic_c_head"})),
              "L_div_C");
        clear();
        g.backward(l.div_gs);
        track(testutil::fd_check(g, l.div_gs, gs_params), "L_div_Gs");
    }
    {
        const IdPairs pairs = {{{9, 10, 11}, {4, 5}}, {{6, 7, 8, 9}, {10, 11}}};
        Graph g;
        Value l = cross_entropy_loss(g, st, pairs, opts);
        clear();
        g.backward(l);
        track(testutil::fd_check(g, l, gen_params), "L_cross");
    }

    const double elapsed = seconds_since(t0);
    char detail[160];
    std::snprintf(detail, sizeof detail, "max rel err %.3g at %s, %.1f s (budget 120 s)", worst,
                  worst_at.c_str(), elapsed);
    record(1, "gradient integrity", worst < 1e-4 && elapsed < 120.0, detail);
}

// ---------------------------------------------------------------------------
// 2. Closed-form loss values
// ---------------------------------------------------------------------------

void criterion_2() {
    bool pass = true;
    std::string detail;
    const LossOpts opts;
    const IdBatch bs = {{4, 5, 6}, {7, 8}};
    const IdBatch bd = {{9, 10, 11, 4}};

    // D == C == 0.5 via a zeroed critic
    ModelState st = toy_state(13);
    for (const char* name : {"critic_conv", "critic_d_head", "critic_c_head"})
        for (auto& p : st.group(name))
            std::fill(p->val.values.begin(), p->val.values.end(), 0.0);
    {
        Graph g;
        AdvLosses l = adversarial_losses(g, st, bs, bd, opts);
        if (std::abs(l.adv_d->val.values[0] - 2.0 * std::log(2.0)) > 1e-9) {
            pass = false;
            detail += "L_adv_D != 2ln2; ";
        }
        if (std::abs(l.adv_gs->val.values[0] - std::log(2.0)) > 1e-9) {
            pass = false;
            detail += "L_adv_Gs != ln2; ";
        }
        DivLosses dl = diversification_losses(g, st, bs, bd, opts);
        if (std::abs(dl.div_c->val.values[0] - 2.0 * std::log(2.0)) > 1e-9 ||
            std::abs(dl.div_gs->val.values[0] - std::log(2.0)) > 1e-9) {
            pass = false;
            detail += "L_div mismatch; ";
        }
    }

    // identity noise reproduces reconstruction bitwise
    {
        ModelState st2 = toy_state(17);
        const IdBatch ones_s = {{4}, {5}};
        const IdBatch ones_d = {{6}, {7}};
        Graph g1, g2;
        Value denoi = denoising_loss(g1, st2, ones_s, ones_d, 9, opts);
        Value rec = reconstruction_loss(g2, st2, ones_s, ones_d, opts);
        if (!testutil::bitwise_equal(denoi->val.values, rec->val.values)) {
            pass = false;
            detail += "identity-noise not bitwise; ";
        }
    }

    // perfect-model losses are exactly zero
    {
        Graph g;
        Tensor dist({12});
        dist.at(5) = 1.0;
        std::vector<std::vector<Value>> dists = {{g.leaf(dist)}};
        Value nll = nll_mean(g, dists, {{5}}, opts.clamp_eps);
        Value bce = g.add(bce_real_mean(g, {g.scalar(1.0)}, opts.clamp_eps),
                          bce_fake_mean(g, {g.scalar(0.0)}, opts.clamp_eps));
        if (nll->val.values[0] != 0.0 || bce->val.values[0] != 0.0) {
            pass = false;
            detail += "perfect-model loss nonzero; ";
        }
    }
    if (detail.empty()) detail = "2ln2 / ln2 within 1e-9; bitwise identity-noise; exact zeros";
    record(2, "closed-form loss values", pass, detail);
}

// ---------------------------------------------------------------------------
// 3. Update-set discipline
// ---------------------------------------------------------------------------

void criterion_3() {
    SynthConfig scfg;
    scfg.class_size = 6;
    scfg.train_simple = 40;
    scfg.train_complex = 40;
    scfg.dev_size = 4;
    scfg.test_size = 4;
    scfg.heldout_simple = 4;
    scfg.emb_dim = 8;
    const SynthOutput synth = generate_synthetic_corpus(scfg);

    TrainingConfig cfg;
    cfg.init_steps = 1;
    cfg.adv_steps = 1;
    cfg.batch_size = 4;
    cfg.hidden = 8;
    cfg.emb_dim = 8;
    cfg.conv_filters = 4;
    cfg.eval_every = 100;
    cfg.seed = 5;

    const std::set<std::string> gen_set = {"encoder", "decoder_s", "decoder_d",
                                           "embedding_decoder"};
    const std::set<std::string> critic_set = {"critic_conv", "critic_d_head", "critic_c_head"};
    const std::map<std::string, std::set<std::string>> expected = {
        {"init.denoi", gen_set},
        {"init.rec", gen_set},
        {"init.critic", critic_set},
        {"adv.denoi", gen_set},
        {"adv.gen", gen_set},
        {"adv.critic", critic_set},
        {"semi.cross_s", {"encoder", "decoder_s", "embedding_decoder"}},
        {"semi.cross_d", {"encoder", "decoder_d", "embedding_decoder"}},
    };

    bool pass = true;
    std::string detail;
    auto run_mode = [&](const std::string& mode, const char* dir_name,
                        const std::vector<std::string>& want_order) {
        TrainingConfig c = cfg;
        c.mode = mode;
        Trainer t(synth.train, c, {}, fresh_dir(dir_name));
        std::map<std::string, std::vector<double>> before;
        std::vector<std::string> order;
        t.set_observer([&](const UpdateEvent& ev) {
            if (ev.before) {
                before.clear();
                for (const auto& p : t.state().all_params()) before[p->name] = p->val.values;
                order.push_back(ev.name);
                return;
            }
            const auto& listed = expected.at(ev.name);
            for (const auto& group_name : t.state().group_names()) {
                bool any_changed = false;
                for (const auto& p : t.state().group(group_name))
                    if (!testutil::bitwise_equal(before.at(p->name), p->val.values))
                        any_changed = true;
                const bool should_change = listed.count(group_name) != 0;
                if (any_changed != should_change) {
                    pass = false;
                    detail += std::string(ev.name) + " vs " + group_name +
                              (any_changed ? " moved; " : " frozen; ");
                }
            }
        });
        t.init_iteration();
        t.adv_iteration();
        if (order != want_order) {
            pass = false;
            detail += mode + " update order wrong; ";
        }
    };
    run_mode("unsupervised", "c3_unsup",
             {"init.denoi", "init.rec", "init.critic", "adv.denoi", "adv.gen", "adv.critic"});
    run_mode("semisupervised", "c3_semi",
             {"init.denoi", "init.rec", "init.critic", "adv.denoi", "adv.gen", "adv.critic",
              "semi.cross_s", "semi.cross_d"});
    if (detail.empty())
        detail = "exactly the listed parameter groups change in every update of both algorithms";
    record(3, "update-set discipline", pass, detail);
}

// ---------------------------------------------------------------------------
// 4. Metric oracles
// ---------------------------------------------------------------------------

void criterion_4() {
    bool pass = true;
    std::string detail;

    Rng rng(211);
    const std::vector<std::string> words = {"the", "cat", "dog", "sat", "ran",
                                            "fast", "slow", "a",   "mat", "on"};
    auto rand_sent = [&](int min_len, int max_len) {
        Sentence s;
        const int n = min_len + static_cast<int>(rng.next_below(
                                    static_cast<std::uint64_t>(max_len - min_len + 1)));
        for (int i = 0; i < n; ++i) s.tokens.push_back(words[rng.next_below(words.size())]);
        return s;
    };

    // SARI vs the brute-force n-gram multiset oracle, 200 randomized instances
    double max_sari_err = 0;
    for (int t = 0; t < 200; ++t) {
        EvalInstance inst(rand_sent(1, 12), rand_sent(1, 12), {});
        const int nrefs = 1 + static_cast<int>(rng.next_below(3));
        for (int r = 0; r < nrefs; ++r) inst.references.push_back(rand_sent(1, 12));
        std::vector<testutil::Tokens> refs;
        for (const auto& r : inst.references) refs.push_back(r.tokens);
        const double got = sari_instance(inst);
        const double want =
            testutil::oracle_sari_instance(inst.source.tokens, inst.prediction.tokens, refs);
        max_sari_err = std::max(max_sari_err, std::abs(got - want));
    }
    if (max_sari_err > 1e-9) {
        pass = false;
        detail += "sari oracle mismatch; ";
    }

    // BLEU = 100 on exact-reference corpora
    {
        std::vector<EvalInstance> exact;
        for (int i = 0; i < 5; ++i) {
            Sentence s = rand_sent(4, 9);
            exact.emplace_back(rand_sent(4, 9), s, std::vector<Sentence>{s, rand_sent(4, 9)});
        }
        if (std::abs(bleu(exact) - 100.0) > 1e-9) {
            pass = false;
            detail += "exact-reference BLEU != 100; ";
        }
    }

    // hand-computed clipped counts on the two-instance toy corpus
    {
        auto sent = [](std::vector<std::string> t) {
            Sentence s;
            s.tokens = std::move(t);
            return s;
        };
        std::vector<EvalInstance> v;
        v.emplace_back(sent({"x"}), sent({"the", "cat", "sat", "down"}),
                       std::vector<Sentence>{sent({"the", "cat", "sat", "down", "now"}),
                                             sent({"a", "cat", "sat", "down"})});
        v.emplace_back(sent({"x"}), sent({"dogs", "howl", "quite", "loud"}),
                       std::vector<Sentence>{sent({"dogs", "bark", "very", "loud"}),
                                             sent({"the", "dogs", "howl", "loud"})});
        const double want = 100.0 * std::pow(7.0 / 48.0, 0.25); // p_n = 7/8, 2/3, 1/2, 1/2
        if (std::abs(bleu(v) - want) > 1e-9) {
            pass = false;
            detail += "toy BLEU mismatch; ";
        }
    }

    if (std::abs(flesch_ease(tokenize("The cat sat.")) - 119.19) > 0.01) {
        pass = false;
        detail += "FE(The cat sat.) off; ";
    }

    if (detail.empty()) {
        char buf[140];
        std::snprintf(buf, sizeof buf,
                      "sari max |err| %.2g over 200 instances; BLEU exact + toy; FE 119.19",
                      max_sari_err);
        detail = buf;
    }
    record(4, "metric oracles", pass, detail);
}

// ---------------------------------------------------------------------------
// 5 + 6 + 8 share one desk-scale training run.
// ---------------------------------------------------------------------------

struct BigRun {
    SynthOutput data;
    TrainResult result;
    std::string run_dir;
    double train_seconds = 0;
};

BigRun big_run() {
    BigRun out;
    SynthConfig scfg; // 2000+2000 sentences, vocab well under 512
    scfg.seed = 42;
    scfg.class_size = 12;
    out.data = generate_synthetic_corpus(scfg);

    TrainingConfig cfg; // desk defaults: 600/800 steps, batch 8, hidden 64
    cfg.seed = 42;
    DevSet dev;
    for (const auto& [c, r] : out.data.dev) {
        dev.sources.push_back(c);
        dev.references.push_back({r});
    }
    out.run_dir = fresh_dir("big_run");
    const auto t0 = std::chrono::steady_clock::now();
    Trainer trainer(out.data.train, cfg, dev, out.run_dir, &out.data.embeddings);
    out.result = trainer.run();
    out.train_seconds = seconds_since(t0);
    return out;
}

void criterion_5(const BigRun& run) {
    const ModelState& st = *run.result.state;
    int n = 0, syn_hits = 0, fe_n = 0;
    double wd_sum = 0, fe_sum = 0;
    for (const auto& [src, ref] : run.data.test) {
        const Sentence pred = simplify_postprocessed(src, st);
        ++n;
        wd_sum += src.size() - pred.size();
        try {
            fe_sum += flesch_ease(pred) - flesch_ease(src);
            ++fe_n;
        } catch (const ContractError&) {
        }
        bool hit = false;
        for (const auto& tok : src.tokens) {
            auto it = run.data.synonyms.find(tok);
            if (it == run.data.synonyms.end()) continue;
            for (const auto& o : pred.tokens)
                if (o == it->second) hit = true;
        }
        if (hit) ++syn_hits;
    }
    const double word_diff_v = wd_sum / n;
    const double fe_diff_v = fe_n ? fe_sum / fe_n : 0.0;
    const double syn_frac = static_cast<double>(syn_hits) / n;

    double ov_s = 0;
    for (const auto& s : run.data.heldout_simple)
        ov_s += overlap(simplify_postprocessed(s, st).tokens, s.tokens);
    ov_s /= static_cast<double>(run.data.heldout_simple.size());

    double ov_d = 0;
    for (const auto& [src, ref] : run.data.test) {
        Graph g;
        const auto ids = st.vocab.to_ids(src);
        EncodeOut enc = encode(g, st, ids);
        Decode d = decode_sequence(
            g, st, DecoderSide::Difficult, enc,
            DecodeMode::free_running(st.cfg.max_free_len(static_cast<int>(ids.size()))));
        std::vector<std::string> toks;
        for (int id : d.tokens) toks.push_back(st.vocab.token(id));
        ov_d += overlap(toks, src.tokens);
    }
    ov_d /= static_cast<double>(run.data.test.size());

    // the selected checkpoint must not score below the untrained step-0 one
    double step0_sari = 0.0;
    for (const auto& m : run.result.log.checkpoints)
        if (m.step == 0) step0_sari = m.sari;
    const bool improved = run.result.selected.sari >= step0_sari;

    const bool pass = run.train_seconds <= 900.0 && word_diff_v > 0.5 && fe_diff_v > 0.0 &&
                      syn_frac >= 0.30 && ov_s >= 0.8 && ov_d >= 0.8 &&
                      st.vocab.size() <= 512 && improved;
    char detail[280];
    std::snprintf(detail, sizeof detail,
                  "train %.0f s (<=900); word-diff %.2f (>0.5); fe-diff %.1f (>0); synonym "
                  "%.0f%% (>=30%%); auto-encode G_s %.2f / G_d %.2f (>=0.8); vocab %d (<=512); "
                  "selected SARI %.1f >= step-0 %.1f",
                  run.train_seconds, word_diff_v, fe_diff_v, 100.0 * syn_frac, ov_s, ov_d,
                  st.vocab.size(), run.result.selected.sari, step0_sari);
    record(5, "end-to-end synthetic simplification", pass, detail);
}

void criterion_6(const BigRun& run) {
    LoadedCheckpoint init_end = load_checkpoint(run.run_dir + "/ckpt_init_end.bin");
    const ModelState& st = *init_end.state;
    int correct = 0, total = 0;
    for (const auto& s : run.data.heldout_simple) {
        Graph g;
        auto ids = st.vocab.to_ids(s);
        EncodeOut enc = encode(g, st, ids);
        auto target = ids;
        target.push_back(Vocabulary::kEos);
        Decode d = decode_sequence(g, st, DecoderSide::Simple, enc, DecodeMode::teacher(target));
        if (discriminate(g, st, d.contexts)->val.values[0] > 0.5) ++correct;
        ++total;
    }
    for (const auto& [src, ref] : run.data.test) {
        Graph g;
        auto ids = st.vocab.to_ids(src);
        EncodeOut enc = encode(g, st, ids);
        Decode d = decode_sequence(
            g, st, DecoderSide::Simple, enc,
            DecodeMode::free_running(st.cfg.max_free_len(static_cast<int>(ids.size()))));
        if (discriminate(g, st, d.contexts)->val.values[0] <= 0.5) ++correct;
        ++total;
    }
    const double acc = static_cast<double>(correct) / total;
    char detail[120];
    std::snprintf(detail, sizeof detail,
                  "held-out D accuracy after the initialization phase: %.3f (>=0.9)", acc);
    record(6, "discriminability after init phase", acc >= 0.9, detail);
}

void criterion_8(const BigRun& run) {
    bool pass = true;
    std::string detail;

    // unit examples, exactly as specified
    {
        Generation gen;
        gen.tokens = {"a", "<unk>", "b"};
        gen.argmax_source = {0, 3, 1};
        Sentence source;
        source.tokens = {"s0", "s1", "s2", "s3"};
        if (replace_oov(gen, source) != std::vector<std::string>{"a", "s3", "b"}) {
            pass = false;
            detail += "replace_oov example; ";
        }
        Generation none;
        none.tokens = {"a", "b"};
        none.argmax_source = {0, 0};
        if (replace_oov(none, source) != none.tokens) {
            pass = false;
            detail += "replace_oov no-unk example; ";
        }
        if (merge_repeats({"the", "the", "cat"}) != std::vector<std::string>{"the", "cat"} ||
            merge_repeats({"a", "b", "a"}) != std::vector<std::string>{"a", "b", "a"}) {
            pass = false;
            detail += "merge_repeats examples; ";
        }
    }

    // invariants on real outputs of the trained model
    int checked = 0;
    for (const auto& [src, ref] : run.data.test) {
        const Sentence pred = simplify_postprocessed(src, *run.result.state);
        for (std::size_t i = 0; i < pred.tokens.size(); ++i) {
            if (pred.tokens[i] == "<unk>") {
                pass = false;
                detail += "unk in output; ";
            }
            if (i && pred.tokens[i] == pred.tokens[i - 1]) {
                pass = false;
                detail += "adjacent duplicate; ";
            }
        }
        ++checked;
    }
    if (detail.empty())
        detail = "no <unk>, no adjacent duplicates over " + std::to_string(checked) +
                 " outputs; unit examples exact";
    record(8, "post-processing", pass, detail);
}

// ---------------------------------------------------------------------------
// 7. Ablation and sweep harnesses (reduced scale)
// ---------------------------------------------------------------------------

void criterion_7() {
    const std::string dir = fresh_dir("harness");
    bool pass = true;
    std::string detail;

    if (cli_main({"synth", "--out", dir + "/data", "--seed", "19", "--class-size", "8",
                  "--train-simple", "300", "--train-complex", "300", "--dev", "24", "--test",
                  "24", "--heldout-simple", "24", "--emb-dim", "16"}) != 0) {
        record(7, "ablation and sweep harnesses", false, "synth failed");
        return;
    }
    const std::string cfg_path = dir + "/train.cfg";
    {
        std::ofstream f(cfg_path);
        f << "init_steps=60\nadv_steps=90\nbatch_size=8\nhidden=32\nemb_dim=16\n"
          << "conv_filters=16\neval_every=50\nvocab_max=512\nlr_gen=0.001\nseed=19\n";
    }

    // all three ablation variants complete and produce evaluation reports
    for (const std::string variant : {"UNTS", "UNTS-adv", "UNTS-div"}) {
        const std::string run_dir = dir + "/run_" + variant;
        if (cli_main({"train", "--config", cfg_path, "--simple", dir + "/data/simple.txt",
                      "--complex", dir + "/data/complex.txt", "--dev-src",
                      dir + "/data/dev_src.txt", "--dev-refs", dir + "/data/dev_ref.0",
                      "--embeddings", dir + "/data/embeddings.txt", "--out", run_dir, "--set",
                      "variant=" + variant}) != 0) {
            pass = false;
            detail += variant + " train failed; ";
            continue;
        }
        std::string model;
        {
            std::ifstream f(run_dir + "/selected.txt");
            std::string line;
            while (std::getline(f, line))
                if (line.rfind("path: ", 0) == 0) model = line.substr(6);
        }
        if (model.empty() ||
            cli_main({"simplify", "--model", model, "--in", dir + "/data/test_src.txt",
                      "--out", run_dir + "/pred.txt"}) != 0 ||
            cli_main({"evaluate", "--src", dir + "/data/test_src.txt", "--pred",
                      run_dir + "/pred.txt", "--refs", dir + "/data/test_ref.0", "--report",
                      run_dir + "/report.txt"}) != 0) {
            pass = false;
            detail += variant + " report failed; ";
            continue;
        }
        const EvalReport rep = load_report(run_dir + "/report.txt");
        if (rep.instances != 24) {
            pass = false;
            detail += variant + " bad report; ";
        }
    }

    // labeled-data sweep over {0, small, large}, averaged over 3 seeds
    double sari_zero = -1, sari_large = -1;
    if (cli_main({"sweep", "--config", cfg_path, "--simple", dir + "/data/simple.txt",
                  "--complex", dir + "/data/complex.txt", "--parallel",
                  dir + "/data/parallel.tsv", "--dev-src", dir + "/data/dev_src.txt",
                  "--dev-refs", dir + "/data/dev_ref.0", "--embeddings",
                  dir + "/data/embeddings.txt", "--out", dir + "/sweep", "--sizes", "0,30,300",
                  "--seeds", "3"}) != 0) {
        pass = false;
        detail += "sweep failed; ";
    } else {
        std::ifstream f(dir + "/sweep/sweep.tsv");
        std::string line;
        std::getline(f, line); // header
        while (std::getline(f, line)) {
            std::istringstream ss(line);
            long size;
            double fe, sari_v, bleu_v, wd;
            int seeds;
            if (ss >> size >> fe >> sari_v >> bleu_v >> wd >> seeds) {
                if (size == 0) sari_zero = sari_v;
                if (size == 300) sari_large = sari_v;
            }
        }
        if (sari_zero < 0 || sari_large < 0) {
            pass = false;
            detail += "sweep table incomplete; ";
        } else if (sari_large < sari_zero) {
            pass = false;
            char buf[96];
            std::snprintf(buf, sizeof buf, "SARI large %.2f < zero %.2f; ", sari_large,
                          sari_zero);
            detail += buf;
        }
    }
    if (detail.empty()) {
        char buf[140];
        std::snprintf(buf, sizeof buf,
                      "3 variants trained + reported; sweep SARI %.2f (0) -> %.2f (300), 3 seeds",
                      sari_zero, sari_large);
        detail = buf;
    }
    record(7, "ablation and sweep harnesses", pass, detail);
}

} // namespace

int main() {
    std::printf("== acceptance suite ==\n");
    criterion_1();
    criterion_2();
    criterion_3();
    criterion_4();

    BigRun run = big_run();
    criterion_5(run);
    criterion_6(run);
    criterion_7();
    criterion_8(run);

    std::sort(g_results.begin(), g_results.end(),
              [](const Criterion& a, const Criterion& b) { return a.id < b.id; });
    int fails = 0;
    std::printf("\n== summary ==\n");
    for (const auto& c : g_results) {
        std::printf("criterion %d (%s): %s\n", c.id, c.name.c_str(), c.pass ? "PASS" : "FAIL");
        if (!c.pass) ++fails;
    }
    return fails;
}
