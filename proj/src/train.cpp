#include "unts/train.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "unts/infer.hpp"

namespace unts {

namespace {

const std::vector<std::string> kGenGroups = {"encoder", "decoder_s", "decoder_d",
                                             "embedding_decoder"};
const std::vector<std::string> kCriticGroups = {"critic_conv", "critic_d_head",
                                                "critic_c_head"};
const std::vector<std::string> kCrossSimpleGroups = {"encoder", "decoder_s",
                                                     "embedding_decoder"};
const std::vector<std::string> kCrossDifficultGroups = {"encoder", "decoder_d",
                                                        "embedding_decoder"};

std::string fmt_double(double x) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

} // namespace

TrainingConfig TrainingConfig::full_scale() {
    TrainingConfig c;
    c.init_steps = 6000;
    c.adv_steps = 8000;
    c.batch_size = 36;
    c.hidden = 600;
    c.emb_dim = 300;
    c.vocab_max = 50000;
    c.conv_filters = 128;
    c.eval_every = 500;
    return c;
}

ModelConfig TrainingConfig::model_config() const {
    ModelConfig m;
    m.hidden = hidden;
    m.emb_dim = emb_dim;
    m.conv_filters = conv_filters;
    m.attention = attention == "additive" ? AttentionKind::Additive : AttentionKind::General;
    m.tied_embeddings = tied_embeddings;
    m.free_len_factor = free_len_factor;
    m.free_len_extra = free_len_extra;
    return m;
}

GeneratorTerms TrainingConfig::generator_terms() const {
    GeneratorTerms t;
    if (variant == "UNTS-adv") t.use_adversarial = false;
    if (variant == "UNTS-div") t.use_diversification = false;
    return t;
}

void TrainingConfig::validate() const {
    if (mode != "unsupervised" && mode != "semisupervised")
        throw ConfigError("mode must be unsupervised or semisupervised, got '" + mode + "'");
    if (variant != "UNTS" && variant != "UNTS-adv" && variant != "UNTS-div")
        throw ConfigError("variant must be UNTS, UNTS-adv or UNTS-div, got '" + variant + "'");
    if (attention != "general" && attention != "additive")
        throw ConfigError("attention must be general or additive, got '" + attention + "'");
    if (init_steps < 0 || adv_steps < 0) throw ConfigError("step counts must be >= 0");
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (lr_gen <= 0 || lr_critic <= 0) throw ConfigError("learning rates must be > 0");
    if (eval_every < 1) throw ConfigError("eval_every must be >= 1");
    if (clamp_eps <= 0 || clamp_eps >= 1) throw ConfigError("clamp_eps must be in (0,1)");
    if (hidden < 1 || emb_dim < 1 || vocab_max < 5 || conv_filters < 1)
        throw ConfigError("model dimensions must be positive");
}

const std::vector<std::string>& TrainingConfig::config_keys() {
    static const std::vector<std::string> keys = {
        "preset",        "init_steps",   "adv_steps",      "batch_size",
        "lr_gen",        "lr_critic",    "hidden",         "emb_dim",
        "vocab_max",     "conv_filters", "clamp_eps",      "clip_norm",
        "seed",          "eval_every",   "mode",           "variant",
        "select_word_diff_min",          "attention",      "tied_embeddings",
        "free_len_factor",               "free_len_extra", "bleu_smooth"};
    return keys;
}

TrainingConfig TrainingConfig::from_kv(const KeyValueConfig& kv) {
    kv.check_schema(config_keys());
    TrainingConfig c;
    const std::string preset = kv.get_string("preset", "desk");
    if (preset == "full") c = full_scale();
    else if (preset != "desk") throw ConfigError("preset must be desk or full");
    c.init_steps = kv.get_int("init_steps", c.init_steps);
    c.adv_steps = kv.get_int("adv_steps", c.adv_steps);
    c.batch_size = static_cast<int>(kv.get_int("batch_size", c.batch_size));
    c.lr_gen = kv.get_double("lr_gen", c.lr_gen);
    c.lr_critic = kv.get_double("lr_critic", c.lr_critic);
    c.hidden = static_cast<int>(kv.get_int("hidden", c.hidden));
    c.emb_dim = static_cast<int>(kv.get_int("emb_dim", c.emb_dim));
    c.vocab_max = static_cast<int>(kv.get_int("vocab_max", c.vocab_max));
    c.conv_filters = static_cast<int>(kv.get_int("conv_filters", c.conv_filters));
    c.clamp_eps = kv.get_double("clamp_eps", c.clamp_eps);
    c.clip_norm = kv.get_double("clip_norm", c.clip_norm);
    c.seed = static_cast<std::uint64_t>(kv.get_int("seed", static_cast<long>(c.seed)));
    c.eval_every = kv.get_int("eval_every", c.eval_every);
    c.mode = kv.get_string("mode", c.mode);
    c.variant = kv.get_string("variant", c.variant);
    c.select_word_diff_min = kv.get_double("select_word_diff_min", c.select_word_diff_min);
    c.attention = kv.get_string("attention", c.attention);
    c.tied_embeddings = kv.get_bool("tied_embeddings", c.tied_embeddings);
    c.free_len_factor = kv.get_double("free_len_factor", c.free_len_factor);
    c.free_len_extra = static_cast<int>(kv.get_int("free_len_extra", c.free_len_extra));
    c.bleu_smooth = kv.get_bool("bleu_smooth", c.bleu_smooth);
    c.validate();
    return c;
}

KeyValueConfig TrainingConfig::to_kv() const {
    KeyValueConfig kv;
    kv.set("init_steps", std::to_string(init_steps));
    kv.set("adv_steps", std::to_string(adv_steps));
    kv.set("batch_size", std::to_string(batch_size));
    kv.set("lr_gen", fmt_double(lr_gen));
    kv.set("lr_critic", fmt_double(lr_critic));
    kv.set("hidden", std::to_string(hidden));
    kv.set("emb_dim", std::to_string(emb_dim));
    kv.set("vocab_max", std::to_string(vocab_max));
    kv.set("conv_filters", std::to_string(conv_filters));
    kv.set("clamp_eps", fmt_double(clamp_eps));
    kv.set("clip_norm", fmt_double(clip_norm));
    kv.set("seed", std::to_string(seed));
    kv.set("eval_every", std::to_string(eval_every));
    kv.set("mode", mode);
    kv.set("variant", variant);
    kv.set("select_word_diff_min", fmt_double(select_word_diff_min));
    kv.set("attention", attention);
    kv.set("tied_embeddings", tied_embeddings ? "true" : "false");
    kv.set("free_len_factor", fmt_double(free_len_factor));
    kv.set("free_len_extra", std::to_string(free_len_extra));
    kv.set("bleu_smooth", bleu_smooth ? "true" : "false");
    return kv;
}

Batcher::Batcher(std::vector<int> lengths, int batch_size, std::uint64_t seed)
    : lengths_(std::move(lengths)), batch_size_(std::max(batch_size, 1)), rng_(seed) {
    if (lengths_.empty()) throw ContractError("batcher: empty dataset");
}

void Batcher::refill() {
    std::vector<int> idx(lengths_.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = static_cast<int>(i);
    std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) {
        return lengths_[static_cast<std::size_t>(a)] < lengths_[static_cast<std::size_t>(b)];
    });
    std::vector<std::vector<int>> chunks;
    for (std::size_t i = 0; i < idx.size(); i += static_cast<std::size_t>(batch_size_)) {
        const std::size_t end = std::min(idx.size(), i + static_cast<std::size_t>(batch_size_));
        chunks.emplace_back(idx.begin() + static_cast<long>(i), idx.begin() + static_cast<long>(end));
    }
    rng_.shuffle(chunks);
    order_.clear();
    for (const auto& c : chunks) order_.insert(order_.end(), c.begin(), c.end());
    cursor_ = 0;
    ++epoch_;
}

std::vector<int> Batcher::next() {
    if (order_.empty() || cursor_ >= order_.size()) refill();
    const std::size_t end = std::min(order_.size(), cursor_ + static_cast<std::size_t>(batch_size_));
    std::vector<int> batch(order_.begin() + static_cast<long>(cursor_),
                           order_.begin() + static_cast<long>(end));
    cursor_ = end;
    return batch;
}

Batcher::State Batcher::save() const {
    State s;
    const std::uint64_t* r = rng_.state();
    for (int i = 0; i < 4; ++i) s.rng[i] = r[i];
    s.epoch = epoch_;
    s.cursor = cursor_;
    s.order = order_;
    return s;
}

void Batcher::restore(const State& s) {
    rng_.set_state(s.rng);
    epoch_ = s.epoch;
    cursor_ = static_cast<std::size_t>(s.cursor);
    order_ = s.order;
}

namespace {

std::vector<int> sentence_lengths(const std::vector<std::vector<int>>& ids) {
    std::vector<int> out(ids.size());
    for (std::size_t i = 0; i < ids.size(); ++i) out[i] = static_cast<int>(ids[i].size());
    return out;
}

} // namespace

Trainer::Trainer(const Corpus& corpus, TrainingConfig cfg, DevSet dev, std::string out_dir,
                 const std::vector<std::pair<std::string, std::vector<double>>>* embeddings)
    : cfg_(std::move(cfg)), dev_(std::move(dev)), out_dir_(std::move(out_dir)),
      gen_opt_(cfg_.lr_gen), critic_opt_(cfg_.lr_critic) {
    cfg_.validate();
    if (corpus.simple_side.empty()) throw ContractError("training: simple corpus side is empty");
    if (corpus.complex_side.empty())
        throw ContractError("training: complex corpus side is empty");
    if (cfg_.mode == "semisupervised" && corpus.parallel.empty())
        throw ContractError("training: semisupervised mode requires parallel pairs");

    std::vector<Sentence> parallel_sentences;
    for (const auto& [c, s] : corpus.parallel) {
        parallel_sentences.push_back(c);
        parallel_sentences.push_back(s);
    }
    Vocabulary vocab = Vocabulary::build(
        {&corpus.simple_side, &corpus.complex_side, &parallel_sentences}, cfg_.vocab_max);

    Rng master(cfg_.seed);
    Rng model_rng(master.next_u64());
    state_ = std::make_shared<ModelState>(
        ModelState::init(cfg_.model_config(), std::move(vocab), model_rng, embeddings));

    for (const auto& s : corpus.simple_side) ids_s_.push_back(state_->vocab.to_ids(s));
    for (const auto& s : corpus.complex_side) ids_d_.push_back(state_->vocab.to_ids(s));
    for (const auto& [c, s] : corpus.parallel)
        pairs_.emplace_back(state_->vocab.to_ids(c), state_->vocab.to_ids(s));

    train_rng_ = Rng(master.next_u64());
    s_batcher_ = Batcher(sentence_lengths(ids_s_), cfg_.batch_size, master.next_u64());
    d_batcher_ = Batcher(sentence_lengths(ids_d_), cfg_.batch_size, master.next_u64());
    const std::uint64_t p_seed = master.next_u64();
    if (!pairs_.empty()) {
        std::vector<int> plens(pairs_.size());
        for (std::size_t i = 0; i < pairs_.size(); ++i)
            plens[i] = static_cast<int>(pairs_[i].first.size());
        p_batcher_ = Batcher(plens, cfg_.batch_size, p_seed);
    }

    std::filesystem::create_directories(out_dir_);
    log_path_ = out_dir_ + "/trainlog.txt";
    std::ofstream(log_path_, std::ios::trunc); // fresh run starts a fresh log
    cfg_.to_kv().save(out_dir_ + "/effective.cfg");
}

IdBatch Trainer::gather(const std::vector<std::vector<int>>& data,
                        const std::vector<int>& idx) const {
    IdBatch out;
    out.reserve(idx.size());
    for (int i : idx) out.push_back(data[static_cast<std::size_t>(i)]);
    return out;
}

namespace {

void append_log_line(const std::string& path, const std::string& line) {
    std::ofstream f(path, std::ios::app);
    if (!f) throw IoError("cannot append to " + path);
    f << line << "\n";
}

} // namespace

void Trainer::update(const char* name, const std::vector<std::string>& groups, Graph& g,
                     const Value& loss, Adam& opt) {
    if (observer_) observer_({name, &groups, true});
    g.backward(loss);
    auto params = state_->groups(groups);
    for (const auto& p : params) p->ensure_grad(); // parameters off this loss's path get zero grad
    clip_global_norm(params, cfg_.clip_norm);
    opt.step(params);
    zero_grads(state_->all_params());
    const long step = train_.global_step + 1;
    const double value = loss->val.values[0];
    log_.losses.push_back({step, name, value});
    append_log_line(log_path_, "loss " + std::to_string(step) + " " + name + " " +
                                   fmt_double(value));
    if (observer_) observer_({name, &groups, false});
}

void Trainer::init_iteration() {
    const IdBatch bs = gather(ids_s_, s_batcher_.next());
    const IdBatch bd = gather(ids_d_, d_batcher_.next());
    const LossOpts opts{cfg_.clamp_eps};
    {
        Graph g;
        Value l = denoising_loss(g, *state_, bs, bd, train_rng_.next_u64(), opts);
        update("init.denoi", kGenGroups, g, l, gen_opt_);
    }
    {
        Graph g;
        Value l = reconstruction_loss(g, *state_, bs, bd, opts);
        update("init.rec", kGenGroups, g, l, gen_opt_);
    }
    {
        Graph g;
        Value l = critic_objective(g, *state_, bs, bd, opts);
        update("init.critic", kCriticGroups, g, l, critic_opt_);
    }
}

void Trainer::adv_iteration() {
    const IdBatch bs = gather(ids_s_, s_batcher_.next());
    const IdBatch bd = gather(ids_d_, d_batcher_.next());
    const LossOpts opts{cfg_.clamp_eps};
    {
        Graph g;
        Value l = denoising_loss(g, *state_, bs, bd, train_rng_.next_u64(), opts);
        update("adv.denoi", kGenGroups, g, l, gen_opt_);
    }
    {
        Graph g;
        Value l = generator_objective(g, *state_, bs, bd, opts, cfg_.generator_terms());
        update("adv.gen", kGenGroups, g, l, gen_opt_);
    }
    {
        Graph g;
        Value l = critic_objective(g, *state_, bs, bd, opts);
        update("adv.critic", kCriticGroups, g, l, critic_opt_);
    }
    if (cfg_.mode == "semisupervised") {
        IdPairs pb;
        for (int i : p_batcher_.next()) pb.push_back(pairs_[static_cast<std::size_t>(i)]);
        {
            Graph g;
            Value l = cross_entropy_loss(g, *state_, pb, opts);
            update("semi.cross_s", kCrossSimpleGroups, g, l, gen_opt_);
        }
        {
            Graph g;
            Value l = cross_entropy_loss(g, *state_, pb, opts);
            update("semi.cross_d", kCrossDifficultGroups, g, l, gen_opt_);
        }
    }
}

EvalReport evaluate_on(const ModelState& state, const DevSet& dev, bool bleu_smooth) {
    if (dev.sources.empty()) throw ContractError("evaluate_on: empty dev set");
    std::vector<EvalInstance> instances;
    for (std::size_t i = 0; i < dev.sources.size(); ++i)
        instances.emplace_back(dev.sources[i], simplify_postprocessed(dev.sources[i], state),
                               dev.references[i]);
    EvalReport rep;
    rep.instances = static_cast<int>(instances.size());
    rep.word_diff = word_diff(instances);
    rep.sari = sari(instances);
    rep.bleu = bleu(instances, 4, bleu_smooth);
    try {
        rep.fe_diff = fe_diff(instances, &rep.fe_skipped);
    } catch (const ContractError&) {
        // FE undefined on every instance (e.g. all-empty predictions)
        rep.fe_diff = 0.0;
        rep.fe_skipped = rep.instances;
    }
    return rep;
}

CheckpointMetrics Trainer::checkpoint_and_eval(const std::string& tag) {
    EvalReport rep;
    if (!dev_.sources.empty()) rep = evaluate_on(*state_, dev_, cfg_.bleu_smooth);

    std::string fname;
    if (tag.empty()) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "ckpt_%06ld.bin", train_.global_step);
        fname = buf;
    } else {
        fname = "ckpt_" + tag + ".bin";
    }
    const std::string path = out_dir_ + "/" + fname;

    CheckpointMetrics m{train_.global_step, rep.sari, rep.bleu, rep.fe_diff, rep.word_diff,
                        path};
    log_.checkpoints.push_back(m);
    append_log_line(log_path_, "ckpt " + std::to_string(m.step) + " " + fmt_double(m.sari) +
                                   " " + fmt_double(m.bleu) + " " + fmt_double(m.fe_diff) +
                                   " " + fmt_double(m.word_diff) + " " + path);

    train_.log_offset = static_cast<std::uint64_t>(std::filesystem::file_size(log_path_));
    const std::uint64_t* r = train_rng_.state();
    for (int i = 0; i < 4; ++i) train_.train_rng[i] = r[i];
    train_.s_batcher = s_batcher_.save();
    train_.d_batcher = d_batcher_.save();
    if (!pairs_.empty()) train_.p_batcher = p_batcher_.save();
    train_.adam_gen = gen_opt_.slots();
    train_.adam_critic = critic_opt_.slots();
    save_checkpoint(path, cfg_, *state_, &train_);
    return m;
}

void Trainer::maybe_cadence_eval() {
    if (train_.global_step % cfg_.eval_every == 0) checkpoint_and_eval();
}

void Trainer::init_phase() {
    while (train_.global_step < cfg_.init_steps) {
        init_iteration();
        ++train_.global_step;
        maybe_cadence_eval();
    }
}

void Trainer::adversarial_phase() {
    const long total = cfg_.init_steps + cfg_.adv_steps;
    while (train_.global_step < total) {
        adv_iteration();
        ++train_.global_step;
        maybe_cadence_eval();
    }
}

CheckpointMetrics select_checkpoint(const std::vector<CheckpointMetrics>& checkpoints,
                                    double word_diff_threshold) {
    const CheckpointMetrics* best = nullptr;
    for (const auto& m : checkpoints)
        if (m.word_diff > word_diff_threshold && (!best || m.sari > best->sari)) best = &m;
    if (!best)
        for (const auto& m : checkpoints)
            if (!best || m.sari > best->sari) best = &m;
    if (!best) throw ContractError("select: no checkpoints recorded");
    return *best;
}

CheckpointMetrics Trainer::select() const {
    return select_checkpoint(log_.checkpoints, cfg_.select_word_diff_min);
}

TrainResult Trainer::run() {
    if (train_.global_step == 0 && log_.checkpoints.empty()) checkpoint_and_eval();
    init_phase();
    if (train_.global_step == cfg_.init_steps) {
        bool have = false;
        for (const auto& m : log_.checkpoints)
            if (m.path.size() >= 12 && m.path.find("ckpt_init_end") != std::string::npos)
                have = true;
        if (!have) checkpoint_and_eval("init_end");
    }
    adversarial_phase();
    if (log_.checkpoints.empty() || log_.checkpoints.back().step != train_.global_step)
        checkpoint_and_eval();

    const CheckpointMetrics sel = select();
    {
        std::ofstream f(out_dir_ + "/selected.txt");
        f << "path: " << sel.path << "\n"
          << "step: " << sel.step << "\n"
          << "sari: " << fmt_double(sel.sari) << "\n"
          << "bleu: " << fmt_double(sel.bleu) << "\n"
          << "fe_diff: " << fmt_double(sel.fe_diff) << "\n"
          << "word_diff: " << fmt_double(sel.word_diff) << "\n";
    }
    LoadedCheckpoint loaded = load_checkpoint(sel.path);
    return {loaded.state, log_, sel};
}

namespace {

TrainLog parse_trainlog(const std::string& path) {
    TrainLog log;
    std::ifstream f(path);
    if (!f) return log;
    std::string line;
    while (std::getline(f, line)) {
        std::istringstream ss(line);
        std::string kind;
        ss >> kind;
        if (kind == "loss") {
            TrainLogRow row;
            if (ss >> row.step >> row.name >> row.value) log.losses.push_back(row);
        } else if (kind == "ckpt") {
            CheckpointMetrics m;
            if (ss >> m.step >> m.sari >> m.bleu >> m.fe_diff >> m.word_diff >> m.path)
                log.checkpoints.push_back(m);
        }
    }
    return log;
}

} // namespace

std::unique_ptr<Trainer> Trainer::resume(const std::string& checkpoint_path,
                                         const Corpus& corpus, DevSet dev,
                                         std::string out_dir) {
    LoadedCheckpoint loaded = load_checkpoint(checkpoint_path);
    if (!loaded.train)
        throw ConfigError("checkpoint " + checkpoint_path + " has no training state");

    auto t = std::unique_ptr<Trainer>(new Trainer());
    t->cfg_ = loaded.cfg;
    t->state_ = loaded.state;
    t->dev_ = std::move(dev);
    t->out_dir_ = std::move(out_dir);
    t->gen_opt_ = Adam(t->cfg_.lr_gen);
    t->critic_opt_ = Adam(t->cfg_.lr_critic);
    t->gen_opt_.slots() = loaded.train->adam_gen;
    t->critic_opt_.slots() = loaded.train->adam_critic;
    t->train_ = *loaded.train;

    for (const auto& s : corpus.simple_side) t->ids_s_.push_back(t->state_->vocab.to_ids(s));
    for (const auto& s : corpus.complex_side) t->ids_d_.push_back(t->state_->vocab.to_ids(s));
    for (const auto& [c, s] : corpus.parallel)
        t->pairs_.emplace_back(t->state_->vocab.to_ids(c), t->state_->vocab.to_ids(s));
    if (t->ids_s_.empty() || t->ids_d_.empty())
        throw ContractError("resume: empty corpus side");

    t->train_rng_.set_state(loaded.train->train_rng);
    t->s_batcher_ = Batcher(sentence_lengths(t->ids_s_), t->cfg_.batch_size, 0);
    t->s_batcher_.restore(loaded.train->s_batcher);
    t->d_batcher_ = Batcher(sentence_lengths(t->ids_d_), t->cfg_.batch_size, 0);
    t->d_batcher_.restore(loaded.train->d_batcher);
    if (!t->pairs_.empty()) {
        std::vector<int> plens(t->pairs_.size());
        for (std::size_t i = 0; i < t->pairs_.size(); ++i)
            plens[i] = static_cast<int>(t->pairs_[i].first.size());
        t->p_batcher_ = Batcher(plens, t->cfg_.batch_size, 0);
        t->p_batcher_.restore(loaded.train->p_batcher);
    }

    std::filesystem::create_directories(t->out_dir_);
    t->log_path_ = t->out_dir_ + "/trainlog.txt";
    if (std::filesystem::exists(t->log_path_) &&
        std::filesystem::file_size(t->log_path_) > loaded.train->log_offset)
        std::filesystem::resize_file(t->log_path_, loaded.train->log_offset);
    t->log_ = parse_trainlog(t->log_path_);
    t->cfg_.to_kv().save(t->out_dir_ + "/effective.cfg");
    return t;
}

TrainResult train_unsupervised(
    const Corpus& corpus, const TrainingConfig& cfg, const DevSet& dev,
    const std::string& out_dir,
    const std::vector<std::pair<std::string, std::vector<double>>>* embeddings) {
    TrainingConfig c = cfg;
    c.mode = "unsupervised";
    Trainer t(corpus, c, dev, out_dir, embeddings);
    return t.run();
}

TrainResult train_semisupervised(
    const Corpus& corpus, const TrainingConfig& cfg, const DevSet& dev,
    const std::string& out_dir,
    const std::vector<std::pair<std::string, std::vector<double>>>* embeddings) {
    if (corpus.parallel.empty())
        throw ContractError("train_semisupervised: parallel data is empty");
    TrainingConfig c = cfg;
    c.mode = "semisupervised";
    Trainer t(corpus, c, dev, out_dir, embeddings);
    return t.run();
}

TrainResult ablate(
    const std::string& variant, const Corpus& corpus, const TrainingConfig& cfg,
    const DevSet& dev, const std::string& out_dir,
    const std::vector<std::pair<std::string, std::vector<double>>>* embeddings) {
    if (variant != "UNTS" && variant != "UNTS-adv" && variant != "UNTS-div")
        throw ConfigError("unknown ablation variant '" + variant + "'");
    TrainingConfig c = cfg;
    c.variant = variant;
    Trainer t(corpus, c, dev, out_dir, embeddings);
    return t.run();
}

} // namespace unts
