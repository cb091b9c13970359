#include "unts/model.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

namespace unts {

DecoderSide side_from_name(const std::string& name) {
    if (name == "G_s") return DecoderSide::Simple;
    if (name == "G_d") return DecoderSide::Difficult;
    throw ContractError("unknown decoder tag '" + name + "' (expected G_s or G_d)");
}

namespace {

GruParams init_gru(const std::string& prefix, int hidden, int in, Rng& rng) {
    const double ws = 1.0 / std::sqrt(static_cast<double>(in));
    const double us = 1.0 / std::sqrt(static_cast<double>(hidden));
    GruParams p;
    p.wr = make_parameter(Tensor::randn({hidden, in}, rng, ws), prefix + ".wr");
    p.wz = make_parameter(Tensor::randn({hidden, in}, rng, ws), prefix + ".wz");
    p.wn = make_parameter(Tensor::randn({hidden, in}, rng, ws), prefix + ".wn");
    p.ur = make_parameter(Tensor::randn({hidden, hidden}, rng, us), prefix + ".ur");
    p.uz = make_parameter(Tensor::randn({hidden, hidden}, rng, us), prefix + ".uz");
    p.un = make_parameter(Tensor::randn({hidden, hidden}, rng, us), prefix + ".un");
    p.br = make_parameter(Tensor({hidden}), prefix + ".br");
    p.bz = make_parameter(Tensor({hidden}), prefix + ".bz");
    p.bn = make_parameter(Tensor({hidden}), prefix + ".bn");
    return p;
}

DecoderParams init_decoder(const std::string& prefix, const ModelConfig& cfg, int vocab,
                           Rng& rng) {
    const int h = cfg.hidden;
    const int ctx = cfg.context_dim();
    DecoderParams d;
    d.l1 = init_gru(prefix + ".l1", h, cfg.emb_dim + ctx, rng);
    d.l2 = init_gru(prefix + ".l2", h, h, rng);
    const double hs = 1.0 / std::sqrt(static_cast<double>(h));
    const double cs = 1.0 / std::sqrt(static_cast<double>(ctx));
    d.att.w_general = make_parameter(Tensor::randn({h, ctx}, rng, hs), prefix + ".att.w");
    d.att.w_add_s = make_parameter(Tensor::randn({h, h}, rng, hs), prefix + ".att.ws");
    d.att.w_add_h = make_parameter(Tensor::randn({h, ctx}, rng, cs), prefix + ".att.wh");
    d.att.v_add = make_parameter(Tensor::randn({h}, rng, hs), prefix + ".att.v");
    d.w_comb = make_parameter(Tensor::randn({h, h + ctx}, rng, cs), prefix + ".w_comb");
    d.b_comb = make_parameter(Tensor({h}), prefix + ".b_comb");
    d.w_out = make_parameter(Tensor::randn({vocab, h}, rng, hs), prefix + ".w_out");
    d.b_out = make_parameter(Tensor({vocab}), prefix + ".b_out");
    d.w_init1 = make_parameter(Tensor::randn({h, ctx}, rng, cs), prefix + ".w_init1");
    d.b_init1 = make_parameter(Tensor({h}), prefix + ".b_init1");
    d.w_init2 = make_parameter(Tensor::randn({h, ctx}, rng, cs), prefix + ".w_init2");
    d.b_init2 = make_parameter(Tensor({h}), prefix + ".b_init2");
    return d;
}

std::vector<Value> gru_group(const GruParams& p) {
    return {p.wr, p.wz, p.wn, p.ur, p.uz, p.un, p.br, p.bz, p.bn};
}

void append(std::vector<Value>& into, const std::vector<Value>& from) {
    into.insert(into.end(), from.begin(), from.end());
}

// One GRU step; returns the next hidden state.
Value gru_step(Graph& g, const GruParams& p, const Value& x, const Value& h) {
    Value r = g.sigmoid(g.add(g.add(g.matvec(p.wr, x), g.matvec(p.ur, h)), p.br));
    Value z = g.sigmoid(g.add(g.add(g.matvec(p.wz, x), g.matvec(p.uz, h)), p.bz));
    Value n = g.tanh(g.add(g.matvec(p.wn, x), g.mul(r, g.add(g.matvec(p.un, h), p.bn))));
    // h' = (1 - z) * n + z * h
    return g.add(g.mul(g.affine(z, -1.0, 1.0), n), g.mul(z, h));
}

// Runs a GRU over a sequence (optionally reversed); returns all states.
std::vector<Value> gru_run(Graph& g, const GruParams& p, const std::vector<Value>& xs,
                           int hidden, bool reverse) {
    std::vector<Value> states(xs.size());
    Value h = g.constant(Tensor({hidden}));
    if (!reverse) {
        for (std::size_t i = 0; i < xs.size(); ++i) {
            h = gru_step(g, p, xs[i], h);
            states[i] = h;
        }
    } else {
        for (std::size_t i = xs.size(); i-- > 0;) {
            h = gru_step(g, p, xs[i], h);
            states[i] = h;
        }
    }
    return states;
}

} // namespace

ModelState ModelState::init(
    ModelConfig cfg, Vocabulary vocab, Rng& rng,
    const std::vector<std::pair<std::string, std::vector<double>>>* embeddings) {
    ModelState st;
    st.cfg = cfg;
    st.vocab = std::move(vocab);
    const int v = st.vocab.size();
    const int h = cfg.hidden;

    Tensor emb = Tensor::randn({v, cfg.emb_dim}, rng, 0.1);
    if (embeddings) {
        std::unordered_map<std::string, const std::vector<double>*> table;
        for (const auto& [tok, vec] : *embeddings) {
            if (static_cast<int>(vec.size()) != cfg.emb_dim)
                throw ConfigError("embedding file dimension " + std::to_string(vec.size()) +
                                  " does not match emb_dim " + std::to_string(cfg.emb_dim));
            table[tok] = &vec;
        }
        for (int id = 0; id < v; ++id) {
            auto it = table.find(st.vocab.token(id));
            if (it == table.end()) continue;
            for (int j = 0; j < cfg.emb_dim; ++j) emb.at(id, j) = (*it->second)[static_cast<std::size_t>(j)];
        }
    }
    st.emb_enc = make_parameter(emb, "embedding_encoder", /*requires_grad=*/false);
    st.emb_dec = cfg.tied_embeddings ? st.emb_enc
                                     : make_parameter(emb, "embedding_decoder");

    st.enc.l1_fwd = init_gru("enc.l1_fwd", h, cfg.emb_dim, rng);
    st.enc.l1_bwd = init_gru("enc.l1_bwd", h, cfg.emb_dim, rng);
    st.enc.l2_fwd = init_gru("enc.l2_fwd", h, cfg.context_dim(), rng);
    st.enc.l2_bwd = init_gru("enc.l2_bwd", h, cfg.context_dim(), rng);

    st.dec_s = init_decoder("dec_s", cfg, v, rng);
    st.dec_d = init_decoder("dec_d", cfg, v, rng);

    const int ctx = cfg.context_dim();
    int feat = 0;
    for (std::size_t i = 0; i < cfg.filter_sizes.size(); ++i) {
        const int s = cfg.filter_sizes[i];
        const double scale = 1.0 / std::sqrt(static_cast<double>(s * ctx));
        st.critic.conv_w.push_back(make_parameter(
            Tensor::randn({cfg.conv_filters, s, ctx}, rng, scale),
            "critic.conv_w" + std::to_string(s)));
        st.critic.conv_b.push_back(
            make_parameter(Tensor({cfg.conv_filters}), "critic.conv_b" + std::to_string(s)));
        feat += cfg.conv_filters;
    }
    const double fs = 1.0 / std::sqrt(static_cast<double>(feat));
    st.critic.d_w = make_parameter(Tensor::randn({1, feat}, rng, fs), "critic.d_w");
    st.critic.d_b = make_parameter(Tensor({1}), "critic.d_b");
    st.critic.c_w = make_parameter(Tensor::randn({1, feat}, rng, fs), "critic.c_w");
    st.critic.c_b = make_parameter(Tensor({1}), "critic.c_b");
    return st;
}

std::vector<std::string> ModelState::group_names() const {
    return {"embedding_encoder", "embedding_decoder", "encoder", "decoder_s",
            "decoder_d",         "critic_conv",       "critic_d_head", "critic_c_head"};
}

std::vector<Value> ModelState::group(const std::string& name) const {
    std::vector<Value> out;
    if (name == "embedding_encoder") {
        out.push_back(emb_enc);
    } else if (name == "embedding_decoder") {
        if (!cfg.tied_embeddings) out.push_back(emb_dec);
    } else if (name == "encoder") {
        append(out, gru_group(enc.l1_fwd));
        append(out, gru_group(enc.l1_bwd));
        append(out, gru_group(enc.l2_fwd));
        append(out, gru_group(enc.l2_bwd));
    } else if (name == "decoder_s" || name == "decoder_d") {
        const DecoderParams& d = name == "decoder_s" ? dec_s : dec_d;
        append(out, gru_group(d.l1));
        append(out, gru_group(d.l2));
        out.insert(out.end(), {d.att.w_general, d.att.w_add_s, d.att.w_add_h, d.att.v_add,
                               d.w_comb, d.b_comb, d.w_out, d.b_out, d.w_init1, d.b_init1,
                               d.w_init2, d.b_init2});
    } else if (name == "critic_conv") {
        append(out, critic.conv_w);
        append(out, critic.conv_b);
    } else if (name == "critic_d_head") {
        out.insert(out.end(), {critic.d_w, critic.d_b});
    } else if (name == "critic_c_head") {
        out.insert(out.end(), {critic.c_w, critic.c_b});
    } else {
        throw ContractError("unknown parameter group '" + name + "'");
    }
    return out;
}

std::vector<Value> ModelState::groups(const std::vector<std::string>& names) const {
    std::vector<Value> out;
    for (const auto& n : names) append(out, group(n));
    return out;
}

std::vector<Value> ModelState::all_params() const {
    std::vector<Value> out;
    for (const auto& n : group_names()) append(out, group(n));
    return out;
}

EncodeOut encode(Graph& g, const ModelState& state, const std::vector<int>& ids) {
    if (ids.empty()) throw ContractError("encode: empty sentence");
    const int h = state.cfg.hidden;

    std::vector<Value> xs;
    xs.reserve(ids.size());
    for (int id : ids) xs.push_back(g.gather_row(state.emb_enc, id, /*backprop=*/false));

    auto f1 = gru_run(g, state.enc.l1_fwd, xs, h, false);
    auto b1 = gru_run(g, state.enc.l1_bwd, xs, h, true);
    std::vector<Value> l1(ids.size());
    for (std::size_t i = 0; i < ids.size(); ++i) l1[i] = g.concat({f1[i], b1[i]});

    auto f2 = gru_run(g, state.enc.l2_fwd, l1, h, false);
    auto b2 = gru_run(g, state.enc.l2_bwd, l1, h, true);

    EncodeOut out;
    out.length = static_cast<int>(ids.size());
    out.states.resize(ids.size());
    for (std::size_t i = 0; i < ids.size(); ++i) out.states[i] = g.concat({f2[i], b2[i]});
    out.h_mat = g.stack_rows(out.states);
    out.f1 = f1.back();
    out.b1 = b1.front();
    out.f2 = f2.back();
    out.b2 = b2.front();
    return out;
}

std::pair<Value, Value> attend(Graph& g, const ModelState& state, const DecoderParams& dec,
                               const EncodeOut& enc, const Value& dec_state) {
    Value scores;
    if (state.cfg.attention == AttentionKind::General) {
        // s_i = d^T W h_i
        Value q = g.vecmat(dec_state, dec.att.w_general); // [2*hidden]
        scores = g.matvec(enc.h_mat, q);                  // [n]
    } else {
        // s_i = v . tanh(Ws d + Wh h_i)
        Value sd = g.matvec(dec.att.w_add_s, dec_state);
        std::vector<Value> per_pos;
        per_pos.reserve(enc.states.size());
        for (const auto& hi : enc.states) {
            Value t = g.tanh(g.add(sd, g.matvec(dec.att.w_add_h, hi)));
            per_pos.push_back(g.sum(g.mul(dec.att.v_add, t)));
        }
        scores = g.concat(per_pos);
    }
    Value weights = g.softmax(scores);
    Value context = g.vecmat(weights, enc.h_mat);
    return {context, weights};
}

std::array<Value, 2> decoder_init(Graph& g, const DecoderParams& dec, const EncodeOut& enc) {
    Value fin1 = g.concat({enc.f1, enc.b1});
    Value fin2 = g.concat({enc.f2, enc.b2});
    return {g.add(g.matvec(dec.w_init1, fin1), dec.b_init1),
            g.add(g.matvec(dec.w_init2, fin2), dec.b_init2)};
}

StepOut decode_step(Graph& g, const ModelState& state, DecoderSide side, int prev_token,
                    const std::array<Value, 2>& dec_state, const Value& prev_context,
                    const EncodeOut& enc) {
    const DecoderParams& dec = state.decoder(side);
    Value emb = g.gather_row(state.emb_dec, prev_token);
    Value x = g.concat({emb, prev_context});
    Value s1 = gru_step(g, dec.l1, x, dec_state[0]);
    Value s2 = gru_step(g, dec.l2, s1, dec_state[1]);
    auto [context, weights] = attend(g, state, dec, enc, s2);
    Value o = g.tanh(g.add(g.matvec(dec.w_comb, g.concat({s2, context})), dec.b_comb));
    Value dist = g.softmax(g.add(g.matvec(dec.w_out, o), dec.b_out));
    return {dist, {s1, s2}, context, weights};
}

Decode decode_sequence(Graph& g, const ModelState& state, DecoderSide side,
                       const EncodeOut& enc, const DecodeMode& mode) {
    if (mode.teacher_forced && mode.target.empty())
        throw ContractError("decode_sequence: teacher forcing requires a target");
    if (!mode.teacher_forced && mode.max_len < 1)
        throw ContractError("decode_sequence: free running requires max_len >= 1");

    Decode out;
    auto dec_state = decoder_init(g, state.decoder(side), enc);
    Value context = g.constant(Tensor({state.cfg.context_dim()}));
    int prev = Vocabulary::kBos;

    const int limit = mode.teacher_forced ? static_cast<int>(mode.target.size()) : mode.max_len;
    for (int t = 0; t < limit; ++t) {
        StepOut step = decode_step(g, state, side, prev, dec_state, context, enc);
        out.contexts.push_back(step.context);
        out.weights.push_back(step.weights);
        out.dists.push_back(step.dist);
        ++out.steps;
        dec_state = step.dec_state;
        context = step.context;
        if (mode.teacher_forced) {
            prev = mode.target[static_cast<std::size_t>(t)];
            out.tokens.push_back(prev);
        } else {
            const auto& p = step.dist->val.values;
            int best = 0;
            for (std::size_t i = 1; i < p.size(); ++i)
                if (p[i] > p[static_cast<std::size_t>(best)]) best = static_cast<int>(i);
            if (best == Vocabulary::kEos) {
                out.ended_eos = true;
                break;
            }
            out.tokens.push_back(best);
            prev = best;
        }
    }
    return out;
}

CriticView critic_view(Graph& g, const ModelState& state, bool frozen) {
    CriticView v;
    auto wrap = [&](const Value& p) { return frozen ? g.detach(p) : p; };
    for (const auto& w : state.critic.conv_w) v.conv_w.push_back(wrap(w));
    for (const auto& b : state.critic.conv_b) v.conv_b.push_back(wrap(b));
    v.d_w = wrap(state.critic.d_w);
    v.d_b = wrap(state.critic.d_b);
    v.c_w = wrap(state.critic.c_w);
    v.c_b = wrap(state.critic.c_b);
    return v;
}

Value trace_features(Graph& g, const ModelState& state, const CriticView& critic,
                     const std::vector<Value>& contexts) {
    if (contexts.empty()) throw ContractError("trace_features: empty trace");
    int needed = 0;
    for (int s : state.cfg.filter_sizes) needed = std::max(needed, s);
    std::vector<Value> rows = contexts;
    while (static_cast<int>(rows.size()) < needed)
        rows.push_back(g.constant(Tensor({state.cfg.context_dim()})));
    Value x = g.stack_rows(rows);
    std::vector<Value> pooled;
    for (std::size_t i = 0; i < critic.conv_w.size(); ++i)
        pooled.push_back(g.maxpool_time(g.conv1d(x, critic.conv_w[i], critic.conv_b[i])));
    return g.concat(pooled);
}

Value discriminate_features(Graph& g, const CriticView& critic, const Value& features) {
    return g.sigmoid(g.sum(g.add(g.matvec(critic.d_w, features), critic.d_b)));
}

Value classify_features(Graph& g, const CriticView& critic, const Value& features) {
    return g.sigmoid(g.sum(g.add(g.matvec(critic.c_w, features), critic.c_b)));
}

Value discriminate(Graph& g, const ModelState& state, const std::vector<Value>& contexts) {
    CriticView v = critic_view(g, state, /*frozen=*/false);
    return discriminate_features(g, v, trace_features(g, state, v, contexts));
}

Value classify(Graph& g, const ModelState& state, const std::vector<Value>& contexts) {
    CriticView v = critic_view(g, state, /*frozen=*/false);
    return classify_features(g, v, trace_features(g, state, v, contexts));
}

} // namespace unts
