#include "unts/losses.hpp"

#include <algorithm>

namespace unts {

namespace {

void require_batch(const IdBatch& b, const char* what) {
    if (b.empty()) throw ContractError(std::string(what) + ": empty batch");
    for (const auto& s : b)
        if (s.empty()) throw ContractError(std::string(what) + ": empty sentence in batch");
}

IdSentence with_eos(const IdSentence& ids) {
    IdSentence t = ids;
    t.push_back(Vocabulary::kEos);
    return t;
}

// Per-sentence token-mean NLL of a teacher-forced decode.
Value sentence_nll(Graph& g, const Decode& dec, const IdSentence& target, double eps) {
    std::vector<Value> terms;
    terms.reserve(target.size());
    for (std::size_t t = 0; t < target.size(); ++t) {
        Value p = g.pick(dec.dists[t], target[t]);
        terms.push_back(g.affine(g.log(g.clamp_min(p, eps)), -1.0, 0.0));
    }
    return g.mean(g.concat(terms));
}

Value reconstruction_of(Graph& g, const ModelState& state, DecoderSide side,
                        const IdBatch& batch, const LossOpts& opts, bool noised,
                        Rng* noise_rng) {
    std::vector<Value> per_sentence;
    per_sentence.reserve(batch.size());
    for (const auto& ids : batch) {
        const IdSentence source = noised ? noise_ids(ids, *noise_rng) : ids;
        EncodeOut enc = encode(g, state, source);
        Decode dec = decode_sequence(g, state, side, enc, DecodeMode::teacher(with_eos(ids)));
        per_sentence.push_back(sentence_nll(g, dec, with_eos(ids), opts.clamp_eps));
    }
    return average(g, per_sentence);
}

struct TraceSet {
    std::vector<std::vector<Value>> traces;
};

TraceSet teacher_traces(Graph& g, const ModelState& state, DecoderSide side,
                        const IdBatch& batch) {
    TraceSet out;
    for (const auto& ids : batch) {
        EncodeOut enc = encode(g, state, ids);
        Decode dec = decode_sequence(g, state, side, enc, DecodeMode::teacher(with_eos(ids)));
        out.traces.push_back(dec.contexts);
    }
    return out;
}

TraceSet free_traces(Graph& g, const ModelState& state, DecoderSide side, const IdBatch& batch) {
    TraceSet out;
    for (const auto& ids : batch) {
        EncodeOut enc = encode(g, state, ids);
        Decode dec = decode_sequence(
            g, state, side, enc,
            DecodeMode::free_running(state.cfg.max_free_len(static_cast<int>(ids.size()))));
        out.traces.push_back(dec.contexts);
    }
    return out;
}

std::vector<Value> detached(Graph& g, const std::vector<Value>& contexts) {
    std::vector<Value> out;
    out.reserve(contexts.size());
    for (const auto& c : contexts) out.push_back(g.detach(c));
    return out;
}

std::vector<Value> score_traces(Graph& g, const ModelState& state, const CriticView& critic,
                                const TraceSet& set, bool discriminator, bool stop_gradient) {
    std::vector<Value> probs;
    probs.reserve(set.traces.size());
    for (const auto& trace : set.traces) {
        Value feats =
            trace_features(g, state, critic, stop_gradient ? detached(g, trace) : trace);
        probs.push_back(discriminator ? discriminate_features(g, critic, feats)
                                      : classify_features(g, critic, feats));
    }
    return probs;
}

} // namespace

Value nll_mean(Graph& g, const std::vector<std::vector<Value>>& dists, const IdBatch& targets,
               double clamp_eps) {
    if (dists.size() != targets.size() || dists.empty())
        throw ContractError("nll_mean: batch size mismatch or empty batch");
    std::vector<Value> per_sentence;
    per_sentence.reserve(targets.size());
    for (std::size_t i = 0; i < targets.size(); ++i) {
        std::vector<Value> terms;
        for (std::size_t t = 0; t < targets[i].size(); ++t) {
            Value p = g.pick(dists[i][t], targets[i][t]);
            terms.push_back(g.affine(g.log(g.clamp_min(p, clamp_eps)), -1.0, 0.0));
        }
        per_sentence.push_back(g.mean(g.concat(terms)));
    }
    return average(g, per_sentence);
}

Value bce_real_mean(Graph& g, const std::vector<Value>& probs, double clamp_eps) {
    if (probs.empty()) throw ContractError("bce_real_mean: empty batch");
    std::vector<Value> terms;
    terms.reserve(probs.size());
    for (const auto& p : probs)
        terms.push_back(g.affine(g.log(g.clamp_min(p, clamp_eps)), -1.0, 0.0));
    return average(g, terms);
}

Value bce_fake_mean(Graph& g, const std::vector<Value>& probs, double clamp_eps) {
    if (probs.empty()) throw ContractError("bce_fake_mean: empty batch");
    std::vector<Value> terms;
    terms.reserve(probs.size());
    for (const auto& p : probs) {
        Value one_minus = g.affine(p, -1.0, 1.0);
        terms.push_back(g.affine(g.log(g.clamp_min(one_minus, clamp_eps)), -1.0, 0.0));
    }
    return average(g, terms);
}

std::vector<std::size_t> bigram_swap_perm(std::size_t n, Rng& rng) {
    std::vector<std::size_t> perm(n);
    for (std::size_t i = 0; i < n; ++i) perm[i] = i;
    for (std::size_t i = 0; i + 1 < n; i += 2)
        if (rng.next_bool()) std::swap(perm[i], perm[i + 1]);
    return perm;
}

Sentence noise(const Sentence& s, std::uint64_t seed) {
    Rng rng(seed);
    const auto perm = bigram_swap_perm(s.tokens.size(), rng);
    Sentence out;
    out.tokens.resize(s.tokens.size());
    for (std::size_t i = 0; i < perm.size(); ++i) out.tokens[i] = s.tokens[perm[i]];
    return out;
}

IdSentence noise_ids(const IdSentence& ids, Rng& rng) {
    const auto perm = bigram_swap_perm(ids.size(), rng);
    IdSentence out(ids.size());
    for (std::size_t i = 0; i < perm.size(); ++i) out[i] = ids[perm[i]];
    return out;
}

Value reconstruction_term(Graph& g, const ModelState& state, DecoderSide side,
                          const IdBatch& batch, const LossOpts& opts) {
    require_batch(batch, "reconstruction_loss");
    return reconstruction_of(g, state, side, batch, opts, /*noised=*/false, nullptr);
}

Value reconstruction_loss(Graph& g, const ModelState& state, const IdBatch& batch_s,
                          const IdBatch& batch_d, const LossOpts& opts) {
    require_batch(batch_s, "reconstruction_loss");
    require_batch(batch_d, "reconstruction_loss");
    return g.add(reconstruction_of(g, state, DecoderSide::Simple, batch_s, opts, false, nullptr),
                 reconstruction_of(g, state, DecoderSide::Difficult, batch_d, opts, false,
                                   nullptr));
}

Value denoising_loss(Graph& g, const ModelState& state, const IdBatch& batch_s,
                     const IdBatch& batch_d, std::uint64_t seed, const LossOpts& opts) {
    require_batch(batch_s, "denoising_loss");
    require_batch(batch_d, "denoising_loss");
    Rng rng(seed);
    Value s_term =
        reconstruction_of(g, state, DecoderSide::Simple, batch_s, opts, /*noised=*/true, &rng);
    Value d_term =
        reconstruction_of(g, state, DecoderSide::Difficult, batch_d, opts, /*noised=*/true, &rng);
    return g.add(s_term, d_term);
}

AdvLosses adversarial_losses(Graph& g, const ModelState& state, const IdBatch& batch_s,
                             const IdBatch& batch_d, const LossOpts& opts) {
    require_batch(batch_s, "adversarial_losses");
    require_batch(batch_d, "adversarial_losses");
    TraceSet real = teacher_traces(g, state, DecoderSide::Simple, batch_s); // A_s(X_s)
    TraceSet fake = free_traces(g, state, DecoderSide::Simple, batch_d);    // A_s(X_d)

    CriticView live = critic_view(g, state, /*frozen=*/false);
    CriticView frozen = critic_view(g, state, /*frozen=*/true);

    auto d_real = score_traces(g, state, live, real, /*discriminator=*/true, /*stop=*/true);
    auto d_fake = score_traces(g, state, live, fake, true, true);
    Value adv_d = g.add(bce_real_mean(g, d_real, opts.clamp_eps),
                        bce_fake_mean(g, d_fake, opts.clamp_eps));

    auto d_fake_live = score_traces(g, state, frozen, fake, true, /*stop=*/false);
    Value adv_gs = bce_real_mean(g, d_fake_live, opts.clamp_eps);
    return {adv_d, adv_gs};
}

DivLosses diversification_losses(Graph& g, const ModelState& state, const IdBatch& batch_s,
                                 const IdBatch& batch_d, const LossOpts& opts) {
    require_batch(batch_s, "diversification_losses");
    require_batch(batch_d, "diversification_losses");
    TraceSet simple = teacher_traces(g, state, DecoderSide::Simple, batch_s);     // A_s(X_s)
    TraceSet difficult = teacher_traces(g, state, DecoderSide::Difficult, batch_d); // A_d(X_d)
    TraceSet crossed = free_traces(g, state, DecoderSide::Simple, batch_d);       // A_s(X_d)

    CriticView live = critic_view(g, state, /*frozen=*/false);
    CriticView frozen = critic_view(g, state, /*frozen=*/true);

    auto c_simple = score_traces(g, state, live, simple, /*discriminator=*/false, /*stop=*/true);
    auto c_difficult = score_traces(g, state, live, difficult, false, true);
    Value div_c = g.add(bce_real_mean(g, c_simple, opts.clamp_eps),
                        bce_fake_mean(g, c_difficult, opts.clamp_eps));

    auto c_crossed = score_traces(g, state, frozen, crossed, false, /*stop=*/false);
    Value div_gs = bce_real_mean(g, c_crossed, opts.clamp_eps);
    return {div_c, div_gs};
}

Value cross_entropy_loss(Graph& g, const ModelState& state, const IdPairs& pairs,
                         const LossOpts& opts) {
    if (pairs.empty()) throw ContractError("cross_entropy_loss: empty parallel batch");
    std::vector<Value> to_simple, to_difficult;
    for (const auto& [complex_ids, simple_ids] : pairs) {
        if (complex_ids.empty() || simple_ids.empty())
            throw ContractError("cross_entropy_loss: empty sentence in pair");
        {
            EncodeOut enc = encode(g, state, complex_ids);
            Decode dec = decode_sequence(g, state, DecoderSide::Simple, enc,
                                         DecodeMode::teacher(with_eos(simple_ids)));
            to_simple.push_back(sentence_nll(g, dec, with_eos(simple_ids), opts.clamp_eps));
        }
        {
            EncodeOut enc = encode(g, state, simple_ids);
            Decode dec = decode_sequence(g, state, DecoderSide::Difficult, enc,
                                         DecodeMode::teacher(with_eos(complex_ids)));
            to_difficult.push_back(sentence_nll(g, dec, with_eos(complex_ids), opts.clamp_eps));
        }
    }
    return g.add(average(g, to_simple), average(g, to_difficult));
}

Value generator_objective(Graph& g, const ModelState& state, const IdBatch& batch_s,
                          const IdBatch& batch_d, const LossOpts& opts,
                          const GeneratorTerms& terms) {
    require_batch(batch_s, "generator_objective");
    require_batch(batch_d, "generator_objective");
    Value total = reconstruction_loss(g, state, batch_s, batch_d, opts);
    if (terms.use_adversarial || terms.use_diversification) {
        TraceSet fake = free_traces(g, state, DecoderSide::Simple, batch_d); // A_s(X_d)
        CriticView frozen = critic_view(g, state, /*frozen=*/true);
        std::vector<Value> d_probs, c_probs;
        for (const auto& trace : fake.traces) {
            Value feats = trace_features(g, state, frozen, trace);
            if (terms.use_adversarial)
                d_probs.push_back(discriminate_features(g, frozen, feats));
            if (terms.use_diversification)
                c_probs.push_back(classify_features(g, frozen, feats));
        }
        if (terms.use_adversarial)
            total = g.add(total, bce_real_mean(g, d_probs, opts.clamp_eps));
        if (terms.use_diversification)
            total = g.add(total, bce_real_mean(g, c_probs, opts.clamp_eps));
    }
    return total;
}

Value critic_objective(Graph& g, const ModelState& state, const IdBatch& batch_s,
                       const IdBatch& batch_d, const LossOpts& opts) {
    require_batch(batch_s, "critic_objective");
    require_batch(batch_d, "critic_objective");
    TraceSet simple = teacher_traces(g, state, DecoderSide::Simple, batch_s);
    TraceSet crossed = free_traces(g, state, DecoderSide::Simple, batch_d);
    TraceSet difficult = teacher_traces(g, state, DecoderSide::Difficult, batch_d);

    CriticView live = critic_view(g, state, /*frozen=*/false);
    std::vector<Value> d_real, d_fake, c_real, c_fake;
    for (const auto& trace : simple.traces) {
        Value feats = trace_features(g, state, live, detached(g, trace));
        d_real.push_back(discriminate_features(g, live, feats));
        c_real.push_back(classify_features(g, live, feats));
    }
    for (const auto& trace : crossed.traces) {
        Value feats = trace_features(g, state, live, detached(g, trace));
        d_fake.push_back(discriminate_features(g, live, feats));
    }
    for (const auto& trace : difficult.traces) {
        Value feats = trace_features(g, state, live, detached(g, trace));
        c_fake.push_back(classify_features(g, live, feats));
    }

    Value adv_d = g.add(bce_real_mean(g, d_real, opts.clamp_eps),
                        bce_fake_mean(g, d_fake, opts.clamp_eps));
    Value div_c = g.add(bce_real_mean(g, c_real, opts.clamp_eps),
                        bce_fake_mean(g, c_fake, opts.clamp_eps));
    return g.add(adv_d, div_c);
}

} // namespace unts
