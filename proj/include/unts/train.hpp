#pragma once

#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "unts/config.hpp"
#include "unts/eval.hpp"
#include "unts/losses.hpp"
#include "unts/model.hpp"
#include "unts/optim.hpp"

namespace unts {

struct TrainingConfig {
    long init_steps = 600;
    long adv_steps = 800;
    int batch_size = 8;
    double lr_gen = 0.00012;
    double lr_critic = 0.0005;
    int hidden = 64;
    int emb_dim = 32;
    int vocab_max = 512;
    int conv_filters = 128;
    double clamp_eps = 1e-7;
    double clip_norm = 5.0;
    std::uint64_t seed = 1;
    long eval_every = 100;
    std::string mode = "unsupervised"; // or "semisupervised"
    std::string variant = "UNTS";      // UNTS | UNTS-adv | UNTS-div
    double select_word_diff_min = 0.5;
    std::string attention = "general"; // or "additive"
    bool tied_embeddings = false;
    double free_len_factor = 1.5;
    int free_len_extra = 5;
    bool bleu_smooth = false; // add-one smoothing for tiny dev sets

    // full-scale reference configuration
    static TrainingConfig full_scale();

    ModelConfig model_config() const;
    GeneratorTerms generator_terms() const; // honors the ablation variant
    void validate() const;

    static const std::vector<std::string>& config_keys();
    static TrainingConfig from_kv(const KeyValueConfig& kv);
    KeyValueConfig to_kv() const;
};

struct DevSet {
    std::vector<Sentence> sources;
    std::vector<std::vector<Sentence>> references; // per source
};

struct TrainLogRow {
    long step;
    std::string name;
    double value;
};

struct CheckpointMetrics {
    long step = 0;
    double sari = 0, bleu = 0, fe_diff = 0, word_diff = 0;
    std::string path;
};

struct TrainLog {
    std::vector<TrainLogRow> losses;
    std::vector<CheckpointMetrics> checkpoints;
};

struct TrainResult {
    std::shared_ptr<ModelState> state; // the selected model
    TrainLog log;
    CheckpointMetrics selected;
};

// Selection rule: among checkpoints with word-diff above the threshold, the
// one with maximal SARI (earliest on ties); with no qualifying checkpoint,
// maximal SARI overall.
CheckpointMetrics select_checkpoint(const std::vector<CheckpointMetrics>& checkpoints,
                                    double word_diff_threshold);

struct UpdateEvent {
    const char* name; // e.g. "init.denoi", "adv.gen", "semi.cross_s"
    const std::vector<std::string>* groups;
    bool before;
};
using UpdateObserver = std::function<void(const UpdateEvent&)>;

// Deterministic length-bucketed batching: indices are sorted by length,
// chunked, and the chunk order is shuffled once per epoch.
class Batcher {
public:
    Batcher() = default;
    Batcher(std::vector<int> lengths, int batch_size, std::uint64_t seed);
    std::vector<int> next(); // indices of the next batch

    struct State {
        std::uint64_t rng[4] = {};
        std::uint64_t epoch = 0;
        std::uint64_t cursor = 0;
        std::vector<int> order;
    };
    State save() const;
    void restore(const State& s);

private:
    void refill();
    std::vector<int> lengths_;
    int batch_size_ = 1;
    Rng rng_;
    std::uint64_t epoch_ = 0;
    std::size_t cursor_ = 0;
    std::vector<int> order_;
};

struct TrainState {
    long global_step = 0;
    std::uint64_t train_rng[4] = {};
    Batcher::State s_batcher, d_batcher, p_batcher;
    std::map<std::string, Adam::Slot> adam_gen, adam_critic;
    std::uint64_t log_offset = 0;
};

class Trainer {
public:
    Trainer(const Corpus& corpus, TrainingConfig cfg, DevSet dev, std::string out_dir,
            const std::vector<std::pair<std::string, std::vector<double>>>* embeddings = nullptr);

    static std::unique_ptr<Trainer> resume(const std::string& checkpoint_path,
                                           const Corpus& corpus, DevSet dev,
                                           std::string out_dir);

    TrainResult run();

    // Phase entry points; each runs its remaining steps.
    void init_phase();
    void adversarial_phase();

    // Single iterations, for instrumented contract tests.
    void init_iteration();
    void adv_iteration();

    void set_observer(UpdateObserver obs) { observer_ = std::move(obs); }

    ModelState& state() { return *state_; }
    const TrainingConfig& config() const { return cfg_; }
    long global_step() const { return train_.global_step; }
    const TrainLog& log() const { return log_; }

    CheckpointMetrics checkpoint_and_eval(const std::string& tag = "");

private:
    Trainer() : gen_opt_(1.0), critic_opt_(1.0) {} // filled in by resume()
    void update(const char* name, const std::vector<std::string>& groups, Graph& g,
                const Value& loss, Adam& opt);
    IdBatch gather(const std::vector<std::vector<int>>& data, const std::vector<int>& idx) const;
    void maybe_cadence_eval();
    CheckpointMetrics select() const;

    TrainingConfig cfg_;
    std::shared_ptr<ModelState> state_;
    std::vector<std::vector<int>> ids_s_, ids_d_;
    IdPairs pairs_;
    DevSet dev_;
    std::string out_dir_;
    Rng train_rng_;
    Batcher s_batcher_, d_batcher_, p_batcher_;
    Adam gen_opt_, critic_opt_;
    TrainState train_;
    TrainLog log_;
    UpdateObserver observer_;
    std::string log_path_;
};

// The two-phase unsupervised algorithm with checkpointing and final model
// selection: among checkpoints whose dev word-diff exceeds the configured
// threshold, pick the one with maximal dev SARI (falling back to maximal
// SARI overall when none qualifies).
TrainResult train_unsupervised(
    const Corpus& corpus, const TrainingConfig& cfg, const DevSet& dev,
    const std::string& out_dir,
    const std::vector<std::pair<std::string, std::vector<double>>>* embeddings = nullptr);

// Same, plus the two cross-entropy updates per adversarial-phase iteration.
// Requires corpus.parallel to be non-empty.
TrainResult train_semisupervised(
    const Corpus& corpus, const TrainingConfig& cfg, const DevSet& dev,
    const std::string& out_dir,
    const std::vector<std::pair<std::string, std::vector<double>>>* embeddings = nullptr);

// variant in {UNTS, UNTS-adv, UNTS-div}; throws ConfigError otherwise.
TrainResult ablate(
    const std::string& variant, const Corpus& corpus, const TrainingConfig& cfg,
    const DevSet& dev, const std::string& out_dir,
    const std::vector<std::pair<std::string, std::vector<double>>>* embeddings = nullptr);

// Checkpoint file IO. Model-only loads are used by inference; the full form
// round-trips optimizer, batching and RNG state bitwise.
void save_checkpoint(const std::string& path, const TrainingConfig& cfg,
                     const ModelState& state, const TrainState* train);

struct LoadedCheckpoint {
    TrainingConfig cfg;
    std::shared_ptr<ModelState> state;
    std::optional<TrainState> train;
};
LoadedCheckpoint load_checkpoint(const std::string& path);

// Dev-set evaluation of the current model: simplify every source with
// post-processing and score against the references.
EvalReport evaluate_on(const ModelState& state, const DevSet& dev, bool bleu_smooth = false);

} // namespace unts
