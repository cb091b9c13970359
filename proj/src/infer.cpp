#include "unts/infer.hpp"

#include <fstream>

namespace unts {

Generation simplify(const Sentence& input, const ModelState& state) {
    if (input.tokens.empty()) throw ContractError("simplify: empty input");
    Graph g;
    const std::vector<int> ids = state.vocab.to_ids(input);
    EncodeOut enc = encode(g, state, ids);
    Decode dec = decode_sequence(
        g, state, DecoderSide::Simple, enc,
        DecodeMode::free_running(state.cfg.max_free_len(static_cast<int>(ids.size()))));

    Generation out;
    // align with emitted tokens only; the EOS step carries no output token
    for (std::size_t t = 0; t < dec.tokens.size(); ++t) {
        out.tokens.push_back(state.vocab.token(dec.tokens[t]));
        const auto& w = dec.weights[t]->val.values;
        out.weights.push_back(w);
        int best = 0;
        for (std::size_t i = 1; i < w.size(); ++i)
            if (w[i] > w[static_cast<std::size_t>(best)]) best = static_cast<int>(i);
        out.argmax_source.push_back(best);
    }
    return out;
}

std::vector<std::string> replace_oov(const Generation& gen, const Sentence& source) {
    std::vector<std::string> out = gen.tokens;
    for (std::size_t t = 0; t < out.size(); ++t)
        if (out[t] == "<unk>")
            out[t] = source.tokens[static_cast<std::size_t>(gen.argmax_source[t])];
    return out;
}

std::vector<std::string> merge_repeats(const std::vector<std::string>& tokens) {
    std::vector<std::string> out;
    for (const auto& t : tokens)
        if (out.empty() || out.back() != t) out.push_back(t);
    return out;
}

Sentence simplify_postprocessed(const Sentence& input, const ModelState& state) {
    Generation gen = simplify(input, state);
    Sentence out;
    out.tokens = merge_repeats(replace_oov(gen, input));
    return out;
}

void simplify_file(const std::string& in_path, const std::string& out_path,
                   const ModelState& state) {
    std::ifstream in(in_path);
    if (!in) throw IoError("cannot open " + in_path);
    std::ofstream out(out_path);
    if (!out) throw IoError("cannot write " + out_path);
    std::string line;
    while (std::getline(in, line)) {
        if (line.find_first_not_of(" \t\r") == std::string::npos) {
            out << "\n";
            continue;
        }
        out << simplify_postprocessed(tokenize(line), state).text() << "\n";
    }
}

} // namespace unts
