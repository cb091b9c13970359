#include <cstring>
#include <fstream>

#include "unts/train.hpp"

namespace unts {

namespace {

constexpr char kMagic[8] = {'U', 'N', 'T', 'S', 'C', 'K', 'P', '1'};

void write_u32(std::ostream& f, std::uint32_t v) {
    f.write(reinterpret_cast<const char*>(&v), sizeof v);
}
void write_u64(std::ostream& f, std::uint64_t v) {
    f.write(reinterpret_cast<const char*>(&v), sizeof v);
}
void write_i64(std::ostream& f, std::int64_t v) {
    f.write(reinterpret_cast<const char*>(&v), sizeof v);
}
void write_string(std::ostream& f, const std::string& s) {
    write_u64(f, s.size());
    f.write(s.data(), static_cast<std::streamsize>(s.size()));
}
void write_doubles(std::ostream& f, const std::vector<double>& v) {
    write_u64(f, v.size());
    f.write(reinterpret_cast<const char*>(v.data()),
            static_cast<std::streamsize>(v.size() * sizeof(double)));
}
void write_ints(std::ostream& f, const std::vector<int>& v) {
    write_u64(f, v.size());
    f.write(reinterpret_cast<const char*>(v.data()),
            static_cast<std::streamsize>(v.size() * sizeof(int)));
}

std::uint32_t read_u32(std::istream& f) {
    std::uint32_t v = 0;
    f.read(reinterpret_cast<char*>(&v), sizeof v);
    return v;
}
std::uint64_t read_u64(std::istream& f) {
    std::uint64_t v = 0;
    f.read(reinterpret_cast<char*>(&v), sizeof v);
    return v;
}
std::int64_t read_i64(std::istream& f) {
    std::int64_t v = 0;
    f.read(reinterpret_cast<char*>(&v), sizeof v);
    return v;
}
std::string read_string(std::istream& f) {
    const std::uint64_t n = read_u64(f);
    std::string s(n, '\0');
    f.read(s.data(), static_cast<std::streamsize>(n));
    return s;
}
std::vector<double> read_doubles(std::istream& f) {
    const std::uint64_t n = read_u64(f);
    std::vector<double> v(n);
    f.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(n * sizeof(double)));
    return v;
}
std::vector<int> read_ints(std::istream& f) {
    const std::uint64_t n = read_u64(f);
    std::vector<int> v(n);
    f.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(n * sizeof(int)));
    return v;
}

void write_batcher(std::ostream& f, const Batcher::State& s) {
    for (int i = 0; i < 4; ++i) write_u64(f, s.rng[i]);
    write_u64(f, s.epoch);
    write_u64(f, s.cursor);
    write_ints(f, s.order);
}

Batcher::State read_batcher(std::istream& f) {
    Batcher::State s;
    for (int i = 0; i < 4; ++i) s.rng[i] = read_u64(f);
    s.epoch = read_u64(f);
    s.cursor = read_u64(f);
    s.order = read_ints(f);
    return s;
}

void write_adam(std::ostream& f, const std::map<std::string, Adam::Slot>& slots) {
    write_u64(f, slots.size());
    for (const auto& [name, slot] : slots) {
        write_string(f, name);
        write_i64(f, slot.t);
        write_doubles(f, slot.m);
        write_doubles(f, slot.v);
    }
}

std::map<std::string, Adam::Slot> read_adam(std::istream& f) {
    std::map<std::string, Adam::Slot> slots;
    const std::uint64_t n = read_u64(f);
    for (std::uint64_t i = 0; i < n; ++i) {
        const std::string name = read_string(f);
        Adam::Slot slot;
        slot.t = read_i64(f);
        slot.m = read_doubles(f);
        slot.v = read_doubles(f);
        slots[name] = std::move(slot);
    }
    return slots;
}

} // namespace

void save_checkpoint(const std::string& path, const TrainingConfig& cfg,
                     const ModelState& state, const TrainState* train) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot write checkpoint " + path);
    f.write(kMagic, sizeof kMagic);
    write_u32(f, train ? 1u : 0u);

    const auto kv = cfg.to_kv().values();
    write_u64(f, kv.size());
    for (const auto& [k, v] : kv) {
        write_string(f, k);
        write_string(f, v);
    }

    write_u64(f, static_cast<std::uint64_t>(state.vocab.size()));
    for (int i = 0; i < state.vocab.size(); ++i) write_string(f, state.vocab.token(i));

    const auto params = state.all_params();
    write_u64(f, params.size());
    for (const auto& p : params) {
        write_string(f, p->name);
        write_ints(f, p->val.shape);
        write_doubles(f, p->val.values);
    }

    if (train) {
        write_i64(f, train->global_step);
        for (int i = 0; i < 4; ++i) write_u64(f, train->train_rng[i]);
        write_batcher(f, train->s_batcher);
        write_batcher(f, train->d_batcher);
        write_batcher(f, train->p_batcher);
        write_adam(f, train->adam_gen);
        write_adam(f, train->adam_critic);
        write_u64(f, train->log_offset);
    }
    if (!f) throw IoError("failed while writing checkpoint " + path);
}

LoadedCheckpoint load_checkpoint(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open checkpoint " + path);
    char magic[8];
    f.read(magic, sizeof magic);
    if (!f || std::memcmp(magic, kMagic, sizeof kMagic) != 0)
        throw ParseError("checkpoint " + path + ": bad magic");
    const std::uint32_t flags = read_u32(f);

    KeyValueConfig kv;
    const std::uint64_t nkv = read_u64(f);
    for (std::uint64_t i = 0; i < nkv; ++i) {
        const std::string k = read_string(f);
        kv.set(k, read_string(f));
    }
    LoadedCheckpoint out;
    out.cfg = TrainingConfig::from_kv(kv);

    Vocabulary vocab;
    const std::uint64_t nvocab = read_u64(f);
    for (std::uint64_t i = 0; i < nvocab; ++i) {
        const std::string tok = read_string(f);
        if (i < 4) {
            if (tok != vocab.token(static_cast<int>(i)))
                throw ParseError("checkpoint " + path + ": reserved token mismatch");
        } else {
            vocab.add(tok);
        }
    }

    Rng dummy(0);
    out.state = std::make_shared<ModelState>(
        ModelState::init(out.cfg.model_config(), std::move(vocab), dummy));

    std::map<std::string, Value> by_name;
    for (const auto& p : out.state->all_params()) by_name[p->name] = p;

    const std::uint64_t nparams = read_u64(f);
    if (nparams != by_name.size())
        throw ParseError("checkpoint " + path + ": parameter count mismatch");
    for (std::uint64_t i = 0; i < nparams; ++i) {
        const std::string name = read_string(f);
        const std::vector<int> shape = read_ints(f);
        const std::vector<double> values = read_doubles(f);
        auto it = by_name.find(name);
        if (it == by_name.end())
            throw ParseError("checkpoint " + path + ": unknown parameter '" + name + "'");
        if (it->second->val.shape != shape ||
            it->second->val.values.size() != values.size())
            throw ParseError("checkpoint " + path + ": shape mismatch on '" + name + "'");
        it->second->val.values = values;
    }

    if (flags & 1u) {
        TrainState ts;
        ts.global_step = read_i64(f);
        for (int i = 0; i < 4; ++i) ts.train_rng[i] = read_u64(f);
        ts.s_batcher = read_batcher(f);
        ts.d_batcher = read_batcher(f);
        ts.p_batcher = read_batcher(f);
        ts.adam_gen = read_adam(f);
        ts.adam_critic = read_adam(f);
        ts.log_offset = read_u64(f);
        out.train = std::move(ts);
    }
    if (!f) throw ParseError("checkpoint " + path + ": truncated");
    return out;
}

} // namespace unts
