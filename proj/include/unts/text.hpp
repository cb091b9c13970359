#pragma once

#include <optional>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "unts/error.hpp"

namespace unts {

struct Sentence {
    std::vector<std::string> tokens;

    int size() const { return static_cast<int>(tokens.size()); }
    std::string text() const; // space-joined
    bool operator==(const Sentence&) const = default;
};

// Lowercases, splits punctuation into single-character tokens, splits on
// whitespace. Throws ParseError on empty / whitespace-only input.
Sentence tokenize(const std::string& text);

// Vowel-group heuristic: count maximal runs of [aeiouy], subtract a
// word-final silent 'e' unless it is the only group, minimum 1.
// Non-alphabetic tokens count 0.
int count_syllables(const std::string& word);

bool is_alphabetic(const std::string& token);

// 206.835 - 1.015*(words/sentences) - 84.6*(syllables/words), counting only
// alphabetic tokens as words. Throws ContractError when there are no
// sentences or no alphabetic words.
double flesch_ease(const std::vector<Sentence>& sentences);
double flesch_ease(const Sentence& sentence);

struct Vocabulary {
    static constexpr int kPad = 0;
    static constexpr int kBos = 1;
    static constexpr int kEos = 2;
    static constexpr int kUnk = 3;

    std::vector<std::string> id_to_token;
    std::unordered_map<std::string, int> token_to_id;

    Vocabulary();
    int add(const std::string& token); // returns existing id if present
    int lookup(const std::string& token) const; // UNK fallback
    const std::string& token(int id) const { return id_to_token[static_cast<std::size_t>(id)]; }
    int size() const { return static_cast<int>(id_to_token.size()); }

    std::vector<int> to_ids(const Sentence& s) const;

    // Most frequent tokens of a corpus (ties by first appearance), capped at
    // max_size including the four reserved ids.
    static Vocabulary build(const std::vector<const std::vector<Sentence>*>& corpora, int max_size);
};

struct Corpus {
    std::vector<Sentence> simple_side;  // S
    std::vector<Sentence> complex_side; // D
    // parallel pairs (complex, simple), aligned by index
    std::vector<std::pair<Sentence, Sentence>> parallel;
};

struct PartitionResult {
    Corpus corpus;
    int kept_simple = 0;
    int kept_complex = 0;
    int discarded = 0;
};

// Per-sentence FE categorization: FE <= complex_max_fe goes to D,
// FE > simple_min_fe goes to S, everything else (including sentences with
// no alphabetic words) is discarded.
PartitionResult partition_corpus(const std::vector<Sentence>& sentences,
                                 double complex_max_fe = 10.0,
                                 double simple_min_fe = 70.0);

// One sentence per line; blank lines skipped.
std::vector<Sentence> load_sentences(const std::string& path);
void save_sentences(const std::string& path, const std::vector<Sentence>& sentences);

// Lines of "complex<TAB>simple". Throws ParseError naming the line when a
// line does not contain exactly one tab.
std::vector<std::pair<Sentence, Sentence>> load_parallel(const std::string& path);

} // namespace unts
