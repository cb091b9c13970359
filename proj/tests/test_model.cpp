#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <set>

#include "test_util.hpp"
#include "unts/losses.hpp"
#include "unts/model.hpp"

using namespace unts;

namespace {

Vocabulary toy_vocab(int extra_tokens) {
    Vocabulary v;
    for (int i = 0; i < extra_tokens; ++i) v.add("tok" + std::to_string(i));
    return v;
}

ModelState toy_state(int hidden = 4, int emb = 3, int extra_tokens = 8, int filters = 2,
                     std::uint64_t seed = 5) {
    ModelConfig cfg;
    cfg.hidden = hidden;
    cfg.emb_dim = emb;
    cfg.conv_filters = filters;
    Rng rng(seed);
    return ModelState::init(cfg, toy_vocab(extra_tokens), rng);
}

void zero_params(ModelState& st) {
    for (auto& p : st.all_params())
        std::fill(p->val.values.begin(), p->val.values.end(), 0.0);
}

} // namespace

TEST_CASE("side_from_name") {
    CHECK(side_from_name("G_s") == DecoderSide::Simple);
    CHECK(side_from_name("G_d") == DecoderSide::Difficult);
    CHECK_THROWS_AS(side_from_name("G_x"), ContractError);
}

TEST_CASE("parameter groups") {
    ModelState st = toy_state();
    std::set<std::string> names;
    std::size_t total = 0;
    for (const auto& g : st.group_names()) {
        for (const auto& p : st.group(g)) {
            CHECK(names.insert(p->name).second); // unique names
            ++total;
        }
    }
    CHECK(total == st.all_params().size());
    CHECK_FALSE(st.emb_enc->requires_grad);
    CHECK(st.emb_dec->requires_grad);
    CHECK_THROWS_AS(st.group("nonsense"), ContractError);
}

TEST_CASE("encode") {
    SUBCASE("shape contract: n states of size 2*hidden") {
        ModelState st = toy_state();
        Graph g;
        EncodeOut enc = encode(g, st, {4, 5, 6, 7, 4});
        CHECK(enc.length == 5);
        CHECK(enc.states.size() == 5);
        for (const auto& h : enc.states) CHECK(h->val.shape == std::vector<int>{8});
        CHECK(enc.h_mat->val.shape == std::vector<int>{5, 8});
    }
    SUBCASE("all-zero parameters give all-zero states") {
        ModelState st = toy_state();
        zero_params(st);
        Graph g;
        EncodeOut enc = encode(g, st, {4, 5, 6});
        for (const auto& h : enc.states)
            for (double v : h->val.values) CHECK(v == 0.0);
    }
    SUBCASE("bidirectionality is order-sensitive") {
        ModelState st = toy_state();
        Graph g1, g2;
        EncodeOut fwd = encode(g1, st, {4, 5, 6, 7});
        EncodeOut rev = encode(g2, st, {7, 6, 5, 4});
        bool any_diff = false;
        for (std::size_t i = 0; i < fwd.states.size(); ++i)
            if (!testutil::bitwise_equal(fwd.states[i]->val.values,
                                         rev.states[i]->val.values))
                any_diff = true;
        CHECK(any_diff);
    }
    SUBCASE("empty sentence is an error") {
        ModelState st = toy_state();
        Graph g;
        CHECK_THROWS_AS(encode(g, st, {}), ContractError);
    }
}

TEST_CASE("attention context combination") {
    Graph g;
    Value h = g.leaf(Tensor::mat(3, 2, {1, 0, 0, 1, 2, 2}));
    SUBCASE("one-hot weights select that row") {
        Value onehot = g.leaf(Tensor::vec({0, 0, 1}));
        Value ctx = g.vecmat(onehot, h);
        CHECK(ctx->val.values[0] == 2.0);
        CHECK(ctx->val.values[1] == 2.0);
    }
    SUBCASE("uniform weights average the rows") {
        Value uniform = g.leaf(Tensor::vec({0.5, 0.5}));
        Value h2 = g.leaf(Tensor::mat(2, 2, {1, 0, 0, 1}));
        Value ctx = g.vecmat(uniform, h2);
        CHECK(ctx->val.values[0] == doctest::Approx(0.5));
        CHECK(ctx->val.values[1] == doctest::Approx(0.5));
    }
    SUBCASE("softmax scores (1,2,3) give the hand-computed mixture") {
        Value scores = g.leaf(Tensor::vec({1, 2, 3}));
        Value w = g.softmax(scores);
        Value ctx = g.vecmat(w, h);
        const double w0 = 0.09003057, w1 = 0.24472847, w2 = 0.66524096;
        CHECK(w->val.values[0] == doctest::Approx(w0).epsilon(1e-6));
        CHECK(w->val.values[1] == doctest::Approx(w1).epsilon(1e-6));
        CHECK(w->val.values[2] == doctest::Approx(w2).epsilon(1e-6));
        CHECK(ctx->val.values[0] == doctest::Approx(w0 * 1 + w1 * 0 + w2 * 2).epsilon(1e-6));
        CHECK(ctx->val.values[1] == doctest::Approx(w1 + w2 * 2).epsilon(1e-6));
    }
}

TEST_CASE("attend contract on the live model") {
    for (auto kind : {AttentionKind::General, AttentionKind::Additive}) {
        ModelState st = toy_state();
        st.cfg.attention = kind;
        Graph g;
        EncodeOut enc = encode(g, st, {4, 5, 6, 7});
        Value dec_state = g.leaf(Tensor::vec({0.1, -0.2, 0.3, 0.4}));
        auto [ctx, weights] = attend(g, st, st.dec_s, enc, dec_state);
        double sum = 0;
        for (double w : weights->val.values) {
            CHECK(w >= 0.0);
            sum += w;
        }
        CHECK(std::abs(sum - 1.0) <= 1e-6);
        // context equals the weighted sum of encoder states
        for (int j = 0; j < 8; ++j) {
            double expect = 0;
            for (int i = 0; i < 4; ++i)
                expect += weights->val.values[static_cast<std::size_t>(i)] *
                          enc.states[static_cast<std::size_t>(i)]->val.values[static_cast<std::size_t>(j)];
            CHECK(ctx->val.values[static_cast<std::size_t>(j)] ==
                  doctest::Approx(expect).epsilon(1e-9));
        }
    }
}

TEST_CASE("decode_step") {
    ModelState st = toy_state();
    SUBCASE("distribution sums to 1 and is strictly positive") {
        Graph g;
        EncodeOut enc = encode(g, st, {4, 5, 6});
        auto dec0 = decoder_init(g, st.dec_s, enc);
        Value ctx0 = g.constant(Tensor({st.cfg.context_dim()}));
        StepOut step = decode_step(g, st, DecoderSide::Simple, Vocabulary::kBos, dec0, ctx0, enc);
        double sum = 0;
        for (double p : step.dist->val.values) {
            CHECK(p > 0.0);
            sum += p;
        }
        CHECK(std::abs(sum - 1.0) <= 1e-6);
    }
    SUBCASE("pure function of its inputs") {
        auto run_once = [&] {
            Graph g;
            EncodeOut enc = encode(g, st, {4, 5, 6});
            auto dec0 = decoder_init(g, st.dec_s, enc);
            Value ctx0 = g.constant(Tensor({st.cfg.context_dim()}));
            return decode_step(g, st, DecoderSide::Simple, 5, dec0, ctx0, enc).dist->val.values;
        };
        CHECK(testutil::bitwise_equal(run_once(), run_once()));
    }
    SUBCASE("gradient of -log p(target) w.r.t. decoder params passes FD") {
        Graph g;
        EncodeOut enc = encode(g, st, {4, 5, 6});
        auto dec0 = decoder_init(g, st.dec_s, enc);
        Value ctx0 = g.constant(Tensor({st.cfg.context_dim()}));
        StepOut step = decode_step(g, st, DecoderSide::Simple, Vocabulary::kBos, dec0, ctx0, enc);
        Value loss = g.affine(g.log(g.clamp_min(g.pick(step.dist, 6), 1e-7)), -1.0, 0.0);
        g.backward(loss);
        auto rep = testutil::fd_check(g, loss, st.group("decoder_s"));
        CHECK(rep.max_rel_err < 1e-4);
    }
}

TEST_CASE("decode_sequence") {
    ModelState st = toy_state();
    Graph g;
    EncodeOut enc = encode(g, st, {4, 5, 6, 7});
    SUBCASE("teacher forcing emits one step per target token") {
        Decode d = decode_sequence(g, st, DecoderSide::Simple, enc,
                                   DecodeMode::teacher({5, 6, 7, 4}));
        CHECK(d.steps == 4);
        CHECK(d.contexts.size() == 4);
        CHECK(d.weights.size() == 4);
        CHECK(d.tokens == std::vector<int>{5, 6, 7, 4});
    }
    SUBCASE("free running respects max_len 1") {
        Decode d = decode_sequence(g, st, DecoderSide::Simple, enc, DecodeMode::free_running(1));
        CHECK(d.steps == 1);
        CHECK(d.contexts.size() == 1);
        CHECK(d.tokens.size() <= 1);
    }
    SUBCASE("mode preconditions") {
        CHECK_THROWS_AS(decode_sequence(g, st, DecoderSide::Simple, enc, DecodeMode::teacher({})),
                        ContractError);
        CHECK_THROWS_AS(
            decode_sequence(g, st, DecoderSide::Simple, enc, DecodeMode::free_running(0)),
            ContractError);
    }
}

TEST_CASE("discriminator and classifier") {
    SUBCASE("zeroed convolution stack reduces to sigmoid of the head bias") {
        ModelState st = toy_state();
        for (auto& w : st.critic.conv_w)
            std::fill(w->val.values.begin(), w->val.values.end(), 0.0);
        for (auto& b : st.critic.conv_b)
            std::fill(b->val.values.begin(), b->val.values.end(), 0.0);
        st.critic.d_b->val.values[0] = 0.0;
        st.critic.c_b->val.values[0] = -1.5;

        Graph g;
        std::vector<Value> trace = {g.leaf(Tensor::vec({1, 2, 3, 4, 5, 6, 7, 8}))};
        CHECK(discriminate(g, st, trace)->val.values[0] == doctest::Approx(0.5).epsilon(1e-12));
        CHECK(classify(g, st, trace)->val.values[0] ==
              doctest::Approx(1.0 / (1.0 + std::exp(1.5))).epsilon(1e-9));
    }
    SUBCASE("output strictly inside (0,1)") {
        ModelState st = toy_state();
        Graph g;
        std::vector<Value> trace;
        for (int t = 0; t < 7; ++t)
            trace.push_back(g.leaf(Tensor::vec({9, -9, 9, -9, 9, -9, 9, -9})));
        const double p = discriminate(g, st, trace)->val.values[0];
        CHECK(p > 0.0);
        CHECK(p < 1.0);
    }
    SUBCASE("empty trace is an error") {
        ModelState st = toy_state();
        Graph g;
        CHECK_THROWS_AS(discriminate(g, st, {}), ContractError);
    }
    SUBCASE("classifier shares convolution outputs bit-exactly") {
        ModelState st = toy_state();
        Graph g;
        std::vector<Value> trace = {g.leaf(Tensor::vec({1, -1, 2, -2, 3, -3, 4, -4})),
                                    g.leaf(Tensor::vec({0, 1, 0, 1, 0, 1, 0, 1}))};
        CriticView view = critic_view(g, st, false);
        Value feats = trace_features(g, st, view, trace);
        Value d = discriminate_features(g, view, feats);
        Value c = classify_features(g, view, feats);
        // same features node feeds both heads: sigmoid <- sum <- add <- matvec <- feats
        CHECK(d->inputs[0]->inputs[0]->inputs[0]->inputs[1].get() == feats.get());
        CHECK(c->inputs[0]->inputs[0]->inputs[0]->inputs[1].get() == feats.get());
    }
    SUBCASE("filter permutation with matching head permutation is invariant") {
        ModelState st = toy_state(4, 3, 8, 3);
        Graph g;
        std::vector<Value> trace;
        for (int t = 0; t < 6; ++t) {
            Tensor row({8});
            for (int j = 0; j < 8; ++j) row.at(j) = 0.31 * (t + 1) - 0.17 * j;
            trace.push_back(g.leaf(row));
        }
        const double before = discriminate(g, st, trace)->val.values[0];

        // swap filters 0 and 2 inside the first size block, and the matching
        // head weights
        const int f = st.cfg.conv_filters;
        auto& w = st.critic.conv_w[0]->val;
        auto& b = st.critic.conv_b[0]->val;
        const int width = w.numel() / f;
        for (int u = 0; u < width; ++u)
            std::swap(w.values[static_cast<std::size_t>(0 * width + u)],
                      w.values[static_cast<std::size_t>(2 * width + u)]);
        std::swap(b.values[0], b.values[2]);
        auto& head = st.critic.d_w->val;
        std::swap(head.values[0], head.values[2]);

        Graph g2;
        std::vector<Value> trace2;
        for (int t = 0; t < 6; ++t) {
            Tensor row({8});
            for (int j = 0; j < 8; ++j) row.at(j) = 0.31 * (t + 1) - 0.17 * j;
            trace2.push_back(g2.leaf(row));
        }
        const double after = discriminate(g2, st, trace2)->val.values[0];
        CHECK(after == doctest::Approx(before).epsilon(1e-12));
    }
    SUBCASE("short traces are padded for the widest filter") {
        ModelState st = toy_state();
        Graph g;
        std::vector<Value> trace = {g.leaf(Tensor::vec({1, 2, 3, 4, 5, 6, 7, 8}))};
        const double p = discriminate(g, st, trace)->val.values[0];
        CHECK(std::isfinite(p));
    }
}

TEST_CASE("encoder-side embedding stays fixed under decoder updates") {
    ModelState st = toy_state();
    const std::vector<double> before = st.emb_enc->val.values;
    Graph g;
    EncodeOut enc = encode(g, st, {4, 5});
    Decode d = decode_sequence(g, st, DecoderSide::Simple, enc, DecodeMode::teacher({4, 5}));
    Value loss = g.affine(g.log(g.clamp_min(g.pick(d.dists[0], 4), 1e-7)), -1.0, 0.0);
    g.backward(loss);
    CHECK_FALSE(st.emb_enc->has_grad());
    CHECK(st.emb_dec->has_grad());
    CHECK(testutil::bitwise_equal(before, st.emb_enc->val.values));
}
