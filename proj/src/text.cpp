#include "unts/text.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

namespace unts {

std::string Sentence::text() const {
    std::string out;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        if (i) out += ' ';
        out += tokens[i];
    }
    return out;
}

Sentence tokenize(const std::string& text) {
    Sentence s;
    std::string cur;
    auto flush = [&] {
        if (!cur.empty()) {
            s.tokens.push_back(cur);
            cur.clear();
        }
    };
    for (unsigned char c : text) {
        if (std::isspace(c)) {
            flush();
        } else if (std::isalnum(c)) {
            cur += static_cast<char>(std::tolower(c));
        } else {
            flush();
            s.tokens.push_back(std::string(1, static_cast<char>(c)));
        }
    }
    flush();
    if (s.tokens.empty()) throw ParseError("tokenize: empty input");
    return s;
}

bool is_alphabetic(const std::string& token) {
    if (token.empty()) return false;
    for (unsigned char c : token)
        if (!std::isalpha(c)) return false;
    return true;
}

namespace {

bool is_vowel(char c) {
    switch (c) {
        case 'a': case 'e': case 'i': case 'o': case 'u': case 'y':
            return true;
        default:
            return false;
    }
}

} // namespace

int count_syllables(const std::string& word) {
    if (!is_alphabetic(word)) return 0;
    int groups = 0;
    bool in_group = false;
    for (char c : word) {
        const bool v = is_vowel(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
        if (v && !in_group) ++groups;
        in_group = v;
    }
    // word-final silent 'e'
    const char last = static_cast<char>(std::tolower(static_cast<unsigned char>(word.back())));
    if (last == 'e' && groups > 1) --groups;
    return std::max(groups, 1);
}

double flesch_ease(const std::vector<Sentence>& sentences) {
    if (sentences.empty()) throw ContractError("flesch_ease: no sentences");
    long words = 0, syllables = 0;
    for (const auto& s : sentences)
        for (const auto& tok : s.tokens)
            if (is_alphabetic(tok)) {
                ++words;
                syllables += count_syllables(tok);
            }
    if (words == 0) throw ContractError("flesch_ease: no alphabetic words");
    const double w = static_cast<double>(words);
    const double n = static_cast<double>(sentences.size());
    const double sy = static_cast<double>(syllables);
    return 206.835 - 1.015 * (w / n) - 84.6 * (sy / w);
}

double flesch_ease(const Sentence& sentence) {
    return flesch_ease(std::vector<Sentence>{sentence});
}

Vocabulary::Vocabulary() {
    id_to_token = {"<pad>", "<bos>", "<eos>", "<unk>"};
    for (int i = 0; i < 4; ++i) token_to_id[id_to_token[static_cast<std::size_t>(i)]] = i;
}

int Vocabulary::add(const std::string& token) {
    auto it = token_to_id.find(token);
    if (it != token_to_id.end()) return it->second;
    const int id = size();
    id_to_token.push_back(token);
    token_to_id[token] = id;
    return id;
}

int Vocabulary::lookup(const std::string& token) const {
    auto it = token_to_id.find(token);
    return it == token_to_id.end() ? kUnk : it->second;
}

std::vector<int> Vocabulary::to_ids(const Sentence& s) const {
    std::vector<int> ids;
    ids.reserve(s.tokens.size());
    for (const auto& t : s.tokens) ids.push_back(lookup(t));
    return ids;
}

Vocabulary Vocabulary::build(const std::vector<const std::vector<Sentence>*>& corpora,
                             int max_size) {
    std::unordered_map<std::string, long> freq;
    std::vector<std::string> order; // first-appearance order for tie breaks
    for (const auto* side : corpora)
        for (const auto& s : *side)
            for (const auto& tok : s.tokens) {
                auto [it, inserted] = freq.try_emplace(tok, 0);
                if (inserted) order.push_back(tok);
                ++it->second;
            }
    std::vector<int> idx(order.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = static_cast<int>(i);
    std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) {
        return freq[order[static_cast<std::size_t>(a)]] > freq[order[static_cast<std::size_t>(b)]];
    });
    Vocabulary v;
    for (int i : idx) {
        if (v.size() >= max_size) break;
        v.add(order[static_cast<std::size_t>(i)]);
    }
    return v;
}

PartitionResult partition_corpus(const std::vector<Sentence>& sentences,
                                 double complex_max_fe, double simple_min_fe) {
    PartitionResult r;
    for (const auto& s : sentences) {
        double fe;
        try {
            fe = flesch_ease(s);
        } catch (const ContractError&) {
            ++r.discarded;
            continue;
        }
        if (fe <= complex_max_fe) {
            r.corpus.complex_side.push_back(s);
            ++r.kept_complex;
        } else if (fe > simple_min_fe) {
            r.corpus.simple_side.push_back(s);
            ++r.kept_simple;
        } else {
            ++r.discarded;
        }
    }
    return r;
}

std::vector<Sentence> load_sentences(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    std::vector<Sentence> out;
    std::string line;
    while (std::getline(in, line)) {
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        out.push_back(tokenize(line));
    }
    return out;
}

void save_sentences(const std::string& path, const std::vector<Sentence>& sentences) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    for (const auto& s : sentences) out << s.text() << "\n";
}

std::vector<std::pair<Sentence, Sentence>> load_parallel(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    std::vector<std::pair<Sentence, Sentence>> out;
    std::string line;
    long lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto first = line.find('\t');
        if (first == std::string::npos || line.find('\t', first + 1) != std::string::npos)
            throw ParseError("parallel file " + path + " line " + std::to_string(lineno) +
                             ": expected exactly one tab");
        out.emplace_back(tokenize(line.substr(0, first)), tokenize(line.substr(first + 1)));
    }
    return out;
}

} // namespace unts
