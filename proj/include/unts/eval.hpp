#pragma once

#include <optional>
#include <string>
#include <vector>

#include "unts/text.hpp"

namespace unts {

struct EvalInstance {
    Sentence source;
    Sentence prediction;
    std::vector<Sentence> references; // at least one

    EvalInstance() = default;
    EvalInstance(Sentence src, Sentence pred, std::vector<Sentence> refs)
        : source(std::move(src)), prediction(std::move(pred)), references(std::move(refs)) {}
};

struct InstanceRow {
    int index = 0;
    double word_diff = 0.0;
    std::optional<double> fe_diff; // absent when FE is undefined on either side
    double sari = 0.0;

    bool operator==(const InstanceRow&) const = default;
};

struct EvalReport {
    double fe_diff = 0.0;
    double sari = 0.0;
    double bleu = 0.0;
    double word_diff = 0.0;
    int instances = 0;
    int fe_skipped = 0; // instances excluded from fe_diff
    std::vector<InstanceRow> rows;

    bool operator==(const EvalReport&) const = default;
};

// mean over instances of |source| - |prediction|, in tokens
double word_diff(const std::vector<EvalInstance>& instances);

// mean of FE(prediction) - FE(source); instances where FE is undefined on
// either side are skipped and counted in *skipped when provided
double fe_diff(const std::vector<EvalInstance>& instances, int* skipped = nullptr);

// Corpus-level multi-reference BLEU in [0,100]: clipped modified n-gram
// precision, geometric mean over n=1..max_n, brevity penalty against the
// closest reference length (ties to the shorter). With smoothing enabled,
// precisions for n >= 2 get add-one smoothing.
double bleu(const std::vector<EvalInstance>& instances, int max_n = 4, bool smooth = false);

// Sentence-level SARI in [0,100] averaged over the corpus: for each n in
// 1..max_n the score is (F_add + F_keep + P_del) / 3 over n-gram multisets,
// with reference counts weighted by 1/(number of references); a component
// whose system and reference sets are both empty scores 1.
double sari(const std::vector<EvalInstance>& instances, int max_n = 4);
double sari_instance(const EvalInstance& instance, int max_n = 4);

EvalReport evaluate(const std::vector<EvalInstance>& instances);

// key:value header + tab-separated per-instance table; doubles are printed
// round-trip exact
void save_report(const std::string& path, const EvalReport& report);
EvalReport load_report(const std::string& path);

} // namespace unts
