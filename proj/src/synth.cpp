#include "unts/synth.hpp"

#include <array>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "unts/rng.hpp"

namespace unts {

namespace {

// Base words: one vowel group each, consonant-final so the rare-form suffix
// adds exactly three more vowel groups.
const std::array<const char*, 20> kAgents = {
    "cat", "dog", "man", "kid", "fox", "wolf", "king", "chef", "monk", "nun",
    "ram", "hen", "pig", "duck", "goat", "fish", "crab", "frog", "bat", "cub"};
const std::array<const char*, 20> kVerbs = {
    "runs", "eats", "naps", "digs", "sings", "jumps", "walks", "sits", "swims", "barks",
    "hunts", "rests", "hops", "claps", "nods", "growls", "drums", "knits", "yawns", "grins"};
const std::array<const char*, 20> kManners = {
    "fast", "slow", "hard", "soft", "long", "deep", "calm", "loud", "swift", "plain",
    "crisp", "firm", "warm", "cool", "dull", "keen", "mild", "sharp", "smooth", "grand"};
const std::array<const char*, 3> kJoins = {"moreover", "furthermore", "consequently"};

std::string rare_form(const std::string& base) { return base + "imonious"; }

struct Triple {
    int a, v, m;
    bool operator<(const Triple& o) const {
        return std::tie(a, v, m) < std::tie(o.a, o.v, o.m);
    }
    bool operator==(const Triple& o) const = default;
};

} // namespace

SynthOutput generate_synthetic_corpus(const SynthConfig& config) {
    const int c = config.class_size;
    if (c < 2 || c > static_cast<int>(kAgents.size()))
        throw ConfigError("synth: class_size must be in [2, " +
                          std::to_string(kAgents.size()) + "]");
    const long long triples = static_cast<long long>(c) * c * c;
    const long long simple_capacity = 3 * triples;
    const long long complex_capacity = 3 * triples * (triples - 1);
    const long long simple_needed = config.train_simple + config.heldout_simple;
    const long long complex_needed =
        config.train_complex + config.dev_size + config.test_size;
    if (simple_needed > simple_capacity || complex_needed > complex_capacity)
        throw ConfigError(
            "synth: vocabulary too small for requested distinct sentences (simple " +
            std::to_string(simple_needed) + "/" + std::to_string(simple_capacity) +
            ", complex " + std::to_string(complex_needed) + "/" +
            std::to_string(complex_capacity) + ")");

    Rng rng(config.seed);

    auto agent = [&](int i) { return std::string(kAgents[static_cast<std::size_t>(i)]); };
    auto verb = [&](int i) { return std::string(kVerbs[static_cast<std::size_t>(i)]); };
    auto manner = [&](int i) { return std::string(kManners[static_cast<std::size_t>(i)]); };

    auto render_simple = [&](const Triple& t, int tmpl) {
        Sentence s;
        switch (tmpl) {
            case 1: s.tokens = {"a", agent(t.a), verb(t.v), manner(t.m), "."}; break;
            case 2: s.tokens = {"the", agent(t.a), verb(t.v), manner(t.m), "now", "."}; break;
            default: s.tokens = {"the", agent(t.a), verb(t.v), manner(t.m), "."}; break;
        }
        return s;
    };
    auto render_clause = [&](const Triple& t) {
        return std::vector<std::string>{"the", rare_form(agent(t.a)), rare_form(verb(t.v)),
                                        rare_form(manner(t.m))};
    };
    auto render_complex = [&](const Triple& t1, const Triple& t2, int join) {
        Sentence s;
        for (auto& tok : render_clause(t1)) s.tokens.push_back(tok);
        s.tokens.push_back(",");
        s.tokens.push_back(kJoins[static_cast<std::size_t>(join)]);
        for (auto& tok : render_clause(t2)) s.tokens.push_back(tok);
        s.tokens.push_back(".");
        return s;
    };

    auto draw_triple = [&] {
        return Triple{static_cast<int>(rng.next_below(static_cast<std::uint64_t>(c))),
                      static_cast<int>(rng.next_below(static_cast<std::uint64_t>(c))),
                      static_cast<int>(rng.next_below(static_cast<std::uint64_t>(c)))};
    };

    SynthOutput out;

    std::set<std::pair<int, Triple>> used_simple;
    auto draw_simple = [&] {
        for (;;) {
            const int tmpl = static_cast<int>(rng.next_below(3));
            const Triple t = draw_triple();
            if (used_simple.insert({tmpl, t}).second) return render_simple(t, tmpl);
        }
    };

    std::set<std::tuple<int, Triple, Triple>> used_complex;
    struct ComplexDraw {
        Sentence sentence;
        Sentence reference; // canonical simple rendering of the first clause
    };
    auto draw_complex = [&]() -> ComplexDraw {
        for (;;) {
            const int join = static_cast<int>(rng.next_below(3));
            const Triple t1 = draw_triple();
            const Triple t2 = draw_triple();
            if (t1 == t2) continue;
            if (used_complex.insert({join, t1, t2}).second)
                return {render_complex(t1, t2, join), render_simple(t1, 0)};
        }
    };

    for (int i = 0; i < config.train_simple; ++i)
        out.train.simple_side.push_back(draw_simple());
    for (int i = 0; i < config.train_complex; ++i) {
        auto d = draw_complex();
        out.train.complex_side.push_back(d.sentence);
        out.train.parallel.emplace_back(d.sentence, d.reference);
    }
    for (int i = 0; i < config.dev_size; ++i) {
        auto d = draw_complex();
        out.dev.emplace_back(d.sentence, d.reference);
    }
    for (int i = 0; i < config.test_size; ++i) {
        auto d = draw_complex();
        out.test.emplace_back(d.sentence, d.reference);
    }
    for (int i = 0; i < config.heldout_simple; ++i)
        out.heldout_simple.push_back(draw_simple());

    for (int i = 0; i < c; ++i) {
        out.synonyms[rare_form(agent(i))] = agent(i);
        out.synonyms[rare_form(verb(i))] = verb(i);
        out.synonyms[rare_form(manner(i))] = manner(i);
    }

    // Synonym-tied embeddings: a rare token sits a small offset away from
    // its frequent counterpart, standing in for lexicon-tuned vectors.
    auto normal_vec = [&](double scale) {
        std::vector<double> v(static_cast<std::size_t>(config.emb_dim));
        for (auto& x : v) x = rng.next_normal() * scale;
        return v;
    };
    auto emit_pair = [&](const std::string& freq) {
        auto base = normal_vec(0.5);
        out.embeddings.emplace_back(freq, base);
        auto near = base;
        for (auto& x : near) x += rng.next_normal() * 0.01;
        out.embeddings.emplace_back(rare_form(freq), near);
    };
    for (int i = 0; i < c; ++i) emit_pair(agent(i));
    for (int i = 0; i < c; ++i) emit_pair(verb(i));
    for (int i = 0; i < c; ++i) emit_pair(manner(i));
    for (const char* glue : {"the", "a", "now", ",", "."})
        out.embeddings.emplace_back(glue, normal_vec(0.5));
    for (const char* join : kJoins)
        out.embeddings.emplace_back(join, normal_vec(0.5));

    return out;
}

void save_synonyms(const std::string& path, const std::map<std::string, std::string>& synonyms) {
    std::ofstream f(path);
    if (!f) throw IoError("cannot write " + path);
    for (const auto& [rare, freq] : synonyms) f << rare << "\t" << freq << "\n";
}

std::map<std::string, std::string> load_synonyms(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot open " + path);
    std::map<std::string, std::string> out;
    std::string line;
    long lineno = 0;
    while (std::getline(f, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto tab = line.find('\t');
        if (tab == std::string::npos || line.find('\t', tab + 1) != std::string::npos)
            throw ParseError("synonym file " + path + " line " + std::to_string(lineno) +
                             ": expected exactly one tab");
        out[line.substr(0, tab)] = line.substr(tab + 1);
    }
    return out;
}

void save_embeddings(const std::string& path,
                     const std::vector<std::pair<std::string, std::vector<double>>>& rows) {
    std::ofstream f(path);
    if (!f) throw IoError("cannot write " + path);
    char buf[64];
    for (const auto& [token, vec] : rows) {
        f << token;
        for (double x : vec) {
            std::snprintf(buf, sizeof buf, " %.17g", x);
            f << buf;
        }
        f << "\n";
    }
}

std::vector<std::pair<std::string, std::vector<double>>> load_embeddings(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot open " + path);
    std::vector<std::pair<std::string, std::vector<double>>> out;
    std::string line;
    long lineno = 0;
    std::size_t dim = 0;
    while (std::getline(f, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::istringstream ss(line);
        std::string token;
        ss >> token;
        std::vector<double> vec;
        double x;
        while (ss >> x) vec.push_back(x);
        if (vec.empty())
            throw ParseError("embedding file " + path + " line " + std::to_string(lineno) +
                             ": no values");
        if (dim == 0) dim = vec.size();
        if (vec.size() != dim)
            throw ParseError("embedding file " + path + " line " + std::to_string(lineno) +
                             ": inconsistent dimension");
        out.emplace_back(token, std::move(vec));
    }
    return out;
}

void save_parallel(const std::string& path,
                   const std::vector<std::pair<Sentence, Sentence>>& pairs) {
    std::ofstream f(path);
    if (!f) throw IoError("cannot write " + path);
    for (const auto& [cplx, simple] : pairs)
        f << cplx.text() << "\t" << simple.text() << "\n";
}

} // namespace unts
