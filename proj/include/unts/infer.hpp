#pragma once

#include <string>
#include <vector>

#include "unts/model.hpp"

namespace unts {

struct Generation {
    std::vector<std::string> tokens;   // raw decoder output, may contain <unk>
    std::vector<std::vector<double>> weights; // attention row per output token
    std::vector<int> argmax_source;    // argmax_i a_it per output token, ties to smallest i
};

// Greedy free-running decode through E-G_s; deterministic.
// Throws ContractError on an empty input.
Generation simplify(const Sentence& input, const ModelState& state);

// Every <unk> output token is replaced by the source surface token at the
// attention argmax for that step. Length-preserving.
std::vector<std::string> replace_oov(const Generation& gen, const Sentence& source);

// Collapses maximal runs of identical adjacent tokens to one.
std::vector<std::string> merge_repeats(const std::vector<std::string>& tokens);

// simplify + replace_oov + merge_repeats
Sentence simplify_postprocessed(const Sentence& input, const ModelState& state);

// One sentence per line in, one simplification per line out, order kept.
void simplify_file(const std::string& in_path, const std::string& out_path,
                   const ModelState& state);

} // namespace unts
