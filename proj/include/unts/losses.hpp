#pragma once

#include <cstdint>
#include <vector>

#include "unts/model.hpp"
#include "unts/rng.hpp"

namespace unts {

// Token-id sentences; targets get EOS appended inside the loss builders.
using IdSentence = std::vector<int>;
using IdBatch = std::vector<IdSentence>;
using IdPairs = std::vector<std::pair<IdSentence, IdSentence>>; // (complex, simple)

struct LossOpts {
    double clamp_eps = 1e-7; // probability floor inside every log
};

// Mean over the batch of per-sentence token-mean negative log-likelihood.
Value nll_mean(Graph& g, const std::vector<std::vector<Value>>& dists,
               const IdBatch& targets, double clamp_eps);

// -mean log p  /  -mean log(1 - p) over a batch of scalar probabilities.
Value bce_real_mean(Graph& g, const std::vector<Value>& probs, double clamp_eps);
Value bce_fake_mean(Graph& g, const std::vector<Value>& probs, double clamp_eps);

// Permutation applying the bigram-swap noise: consecutive disjoint pairs
// each swapped with probability 1/2, trailing odd element kept.
std::vector<std::size_t> bigram_swap_perm(std::size_t n, Rng& rng);
Sentence noise(const Sentence& s, std::uint64_t seed);
IdSentence noise_ids(const IdSentence& ids, Rng& rng);

// Teacher-forced self-reconstruction through one pathway; exposed so tests
// can pin per-path values.
Value reconstruction_term(Graph& g, const ModelState& state, DecoderSide side,
                          const IdBatch& batch, const LossOpts& opts);

// L_rec: E-G_s reconstructs S, E-G_d reconstructs D.
Value reconstruction_loss(Graph& g, const ModelState& state, const IdBatch& batch_s,
                          const IdBatch& batch_d, const LossOpts& opts);

// L_denoi: encode the noised sentence, teacher-force the clean one.
// The noise stream is drawn from `seed` in batch order (S side then D side).
Value denoising_loss(Graph& g, const ModelState& state, const IdBatch& batch_s,
                     const IdBatch& batch_d, std::uint64_t seed, const LossOpts& opts);

struct AdvLosses {
    Value adv_d;  // updates the critic; traces are gradient-stopped
    Value adv_gs; // updates encoder + G_s; critic parameters are frozen
};

// Traces: A_s(X_s) teacher-forced on itself, A_s(X_d) free-running.
AdvLosses adversarial_losses(Graph& g, const ModelState& state, const IdBatch& batch_s,
                             const IdBatch& batch_d, const LossOpts& opts);

struct DivLosses {
    Value div_c;
    Value div_gs;
};

// Traces: A_s(X_s) and A_d(X_d) teacher-forced, A_s(X_d) free-running for
// the generator term.
DivLosses diversification_losses(Graph& g, const ModelState& state, const IdBatch& batch_s,
                                 const IdBatch& batch_d, const LossOpts& opts);

// L_cross over parallel pairs: -mean log P(X_s|X_d) - mean log P(X_d|X_s).
Value cross_entropy_loss(Graph& g, const ModelState& state, const IdPairs& pairs,
                         const LossOpts& opts);

// Composite objectives matching the two-phase algorithm's update lines.
struct GeneratorTerms {
    bool use_adversarial = true;   // dropped by the -adv ablation
    bool use_diversification = true; // dropped by the -div ablation
};

Value generator_objective(Graph& g, const ModelState& state, const IdBatch& batch_s,
                          const IdBatch& batch_d, const LossOpts& opts,
                          const GeneratorTerms& terms);
Value critic_objective(Graph& g, const ModelState& state, const IdBatch& batch_s,
                       const IdBatch& batch_d, const LossOpts& opts);

} // namespace unts
