#pragma once

#include <array>
#include <map>
#include <string>
#include <vector>

#include "unts/tensor.hpp"
#include "unts/text.hpp"

namespace unts {

enum class DecoderSide { Simple, Difficult }; // the G_s / G_d pathways

DecoderSide side_from_name(const std::string& name); // "G_s" or "G_d"

enum class AttentionKind { General, Additive };

struct ModelConfig {
    int hidden = 64;
    int emb_dim = 32;
    int conv_filters = 128; // per filter size
    std::vector<int> filter_sizes = {1, 2, 3, 4, 5};
    AttentionKind attention = AttentionKind::General;
    // When true the decoders read the static encoder-side table and no
    // embedding is ever updated; default gives the decoders their own
    // trainable copy, initialized identically.
    bool tied_embeddings = false;
    double free_len_factor = 1.5;
    int free_len_extra = 5;

    int context_dim() const { return 2 * hidden; }
    int max_free_len(int source_len) const {
        return static_cast<int>(free_len_factor * source_len) + free_len_extra;
    }
};

struct GruParams {
    Value wr, wz, wn; // [hidden, in]
    Value ur, uz, un; // [hidden, hidden]
    Value br, bz, bn; // [hidden]
};

struct AttentionParams {
    Value w_general;        // [hidden, 2*hidden]
    Value w_add_s, w_add_h; // additive variant: [hidden, hidden], [hidden, 2*hidden]
    Value v_add;            // [hidden]
};

struct EncoderParams {
    GruParams l1_fwd, l1_bwd; // input emb_dim
    GruParams l2_fwd, l2_bwd; // input 2*hidden
};

struct DecoderParams {
    GruParams l1; // input emb_dim + 2*hidden (context feeding)
    GruParams l2; // input hidden
    AttentionParams att;
    Value w_comb, b_comb; // [hidden, 3*hidden], [hidden]
    Value w_out, b_out;   // [vocab, hidden], [vocab]
    Value w_init1, b_init1, w_init2, b_init2; // per-layer state init from encoder finals
};

struct CriticParams {
    std::vector<Value> conv_w; // per filter size: [filters, size, 2*hidden]
    std::vector<Value> conv_b; // per filter size: [filters]
    Value d_w, d_b;            // discriminator head over pooled features
    Value c_w, c_b;            // classifier head over the same features
};

// All trainable state. Parameter group names used throughout training,
// checkpointing and the update-set instrumentation:
//   embedding_encoder (static), embedding_decoder, encoder, decoder_s,
//   decoder_d, critic_conv, critic_d_head, critic_c_head
class ModelState {
public:
    ModelConfig cfg;
    Vocabulary vocab;
    Value emb_enc; // [vocab, emb_dim], never updated
    Value emb_dec; // [vocab, emb_dim], trainable copy (== emb_enc when tied)
    EncoderParams enc;
    DecoderParams dec_s, dec_d;
    CriticParams critic;

    static ModelState init(
        ModelConfig cfg, Vocabulary vocab, Rng& rng,
        const std::vector<std::pair<std::string, std::vector<double>>>* embeddings = nullptr);

    const DecoderParams& decoder(DecoderSide side) const {
        return side == DecoderSide::Simple ? dec_s : dec_d;
    }

    std::vector<std::string> group_names() const;
    std::vector<Value> group(const std::string& name) const;
    std::vector<Value> groups(const std::vector<std::string>& names) const;
    // every parameter incl. the static embedding, in stable order
    std::vector<Value> all_params() const;
};

struct EncodeOut {
    std::vector<Value> states; // n vectors of size 2*hidden
    Value h_mat;               // [n, 2*hidden]
    Value f1, b1, f2, b2;      // per-layer final states (fwd last, bwd first)
    int length = 0;
};

// Runs the 2-layer bidirectional GRU over the token ids.
// Throws ContractError on an empty sentence.
EncodeOut encode(Graph& g, const ModelState& state, const std::vector<int>& ids);

// Attention over encoder states given the current decoder state:
// returns (context, weights) with weights a softmax over source positions.
std::pair<Value, Value> attend(Graph& g, const ModelState& state, const DecoderParams& dec,
                               const EncodeOut& enc, const Value& dec_state);

struct StepOut {
    Value dist;    // [vocab], sums to 1
    std::array<Value, 2> dec_state;
    Value context; // A_t, [2*hidden]
    Value weights; // attention row, [source length]
};

std::array<Value, 2> decoder_init(Graph& g, const DecoderParams& dec, const EncodeOut& enc);

StepOut decode_step(Graph& g, const ModelState& state, DecoderSide side, int prev_token,
                    const std::array<Value, 2>& dec_state, const Value& prev_context,
                    const EncodeOut& enc);

struct DecodeMode {
    bool teacher_forced = false;
    std::vector<int> target; // teacher forcing target (one step per token)
    int max_len = 0;         // free-running cap

    static DecodeMode teacher(std::vector<int> tgt) {
        return {true, std::move(tgt), 0};
    }
    static DecodeMode free_running(int cap) { return {false, {}, cap}; }
};

struct Decode {
    std::vector<int> tokens;     // emitted ids; excludes EOS
    std::vector<Value> contexts; // one per performed step (EOS step included)
    std::vector<Value> weights;  // attention rows, aligned with contexts
    std::vector<Value> dists;    // per-step output distributions
    bool ended_eos = false;
    int steps = 0;
};

// Teacher forcing performs exactly |target| steps; free running stops after
// the step that emits EOS or at max_len. The context/weight trace covers
// every performed step; `tokens` aligns with the non-EOS steps.
Decode decode_sequence(Graph& g, const ModelState& state, DecoderSide side,
                       const EncodeOut& enc, const DecodeMode& mode);

// Either the live critic parameters or detached (gradient-stopped) copies.
struct CriticView {
    std::vector<Value> conv_w, conv_b;
    Value d_w, d_b, c_w, c_b;
};

CriticView critic_view(Graph& g, const ModelState& state, bool frozen);

// Shared convolution stack + max-over-time pooling over a context-vector
// trace. Traces shorter than the largest filter are padded with zero rows.
// Throws ContractError on an empty trace.
Value trace_features(Graph& g, const ModelState& state, const CriticView& critic,
                     const std::vector<Value>& contexts);

Value discriminate_features(Graph& g, const CriticView& critic, const Value& features);
Value classify_features(Graph& g, const CriticView& critic, const Value& features);

// Convenience wrappers over the live parameters.
Value discriminate(Graph& g, const ModelState& state, const std::vector<Value>& contexts);
Value classify(Graph& g, const ModelState& state, const std::vector<Value>& contexts);

} // namespace unts
