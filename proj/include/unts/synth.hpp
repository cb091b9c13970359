#pragma once

#include <map>
#include <string>
#include <vector>

#include "unts/text.hpp"

namespace unts {

// Seeded generator of a two-register toy corpus. The simple side renders
// (agent, verb, manner) triples with short monosyllabic words; the complex
// side renders two triples with rare polysyllabic counterparts joined by a
// multi-syllable connective, so the two sides land on opposite ends of the
// FE scale by construction. Every complex sentence carries a ground-truth
// simple rendering of its first clause, which doubles as the reference for
// evaluation and as parallel data for semi-supervised runs.
struct SynthConfig {
    int class_size = 14;      // words drawn per class (agents/verbs/manners), max 20
    int train_simple = 2000;  // sentences on the simple side
    int train_complex = 2000; // sentences on the complex side
    int dev_size = 100;       // held-out (complex, simple-ref) pairs
    int test_size = 100;      // held-out (complex, simple-ref) pairs
    int heldout_simple = 100; // held-out simple sentences (auto-encoding checks)
    int emb_dim = 32;         // dimension of the emitted synonym-tied embeddings
    std::uint64_t seed = 7;
};

struct SynthOutput {
    Corpus train; // simple_side, complex_side, parallel = oracle alignments of complex_side
    std::vector<std::pair<Sentence, Sentence>> dev;  // (complex, simple-ref)
    std::vector<std::pair<Sentence, Sentence>> test; // (complex, simple-ref)
    std::vector<Sentence> heldout_simple;
    // rare token -> frequent equivalent
    std::map<std::string, std::string> synonyms;
    // synonym-aware embeddings; rare tokens sit next to their frequent pair
    std::vector<std::pair<std::string, std::vector<double>>> embeddings;
};

// Deterministic under config.seed. Throws ConfigError when the word classes
// cannot produce the requested number of distinct sentences.
SynthOutput generate_synthetic_corpus(const SynthConfig& config);

void save_synonyms(const std::string& path, const std::map<std::string, std::string>& synonyms);
std::map<std::string, std::string> load_synonyms(const std::string& path);

void save_embeddings(const std::string& path,
                     const std::vector<std::pair<std::string, std::vector<double>>>& rows);
// "token v1 v2 ... vd" per line; every row must have the same dimension.
std::vector<std::pair<std::string, std::vector<double>>> load_embeddings(const std::string& path);

void save_parallel(const std::string& path,
                   const std::vector<std::pair<Sentence, Sentence>>& pairs);

} // namespace unts
