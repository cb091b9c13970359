#include "unts/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

namespace unts {

namespace {

using Ngram = std::vector<std::string>;
using Counts = std::map<Ngram, double>;

Counts ngram_counts(const Sentence& s, int n) {
    Counts c;
    const int len = s.size();
    for (int i = 0; i + n <= len; ++i) {
        Ngram g(s.tokens.begin() + i, s.tokens.begin() + i + n);
        c[g] += 1.0;
    }
    return c;
}

double get(const Counts& c, const Ngram& g) {
    auto it = c.find(g);
    return it == c.end() ? 0.0 : it->second;
}

// ratio with the pinned 0/0 convention
double component_ratio(double matched, double total_sys, double total_ref) {
    if (total_sys <= 0.0) return total_ref <= 0.0 ? 1.0 : 0.0;
    return matched / total_sys;
}

double f1(double p, double r) {
    return (p + r) <= 0.0 ? 0.0 : 2.0 * p * r / (p + r);
}

void require_nonempty(const std::vector<EvalInstance>& instances, const char* what) {
    if (instances.empty()) throw ContractError(std::string(what) + ": empty corpus");
    for (const auto& inst : instances)
        if (inst.references.empty())
            throw ContractError(std::string(what) + ": instance without references");
}

} // namespace

double word_diff(const std::vector<EvalInstance>& instances) {
    require_nonempty(instances, "word_diff");
    double acc = 0.0;
    for (const auto& inst : instances)
        acc += static_cast<double>(inst.source.size() - inst.prediction.size());
    return acc / static_cast<double>(instances.size());
}

double fe_diff(const std::vector<EvalInstance>& instances, int* skipped) {
    require_nonempty(instances, "fe_diff");
    double acc = 0.0;
    int used = 0, skip = 0;
    for (const auto& inst : instances) {
        try {
            const double d = flesch_ease(inst.prediction) - flesch_ease(inst.source);
            acc += d;
            ++used;
        } catch (const ContractError&) {
            ++skip;
        }
    }
    if (skipped) *skipped = skip;
    if (used == 0) throw ContractError("fe_diff: FE undefined on every instance");
    return acc / static_cast<double>(used);
}

double bleu(const std::vector<EvalInstance>& instances, int max_n, bool smooth) {
    require_nonempty(instances, "bleu");
    std::vector<double> matched(static_cast<std::size_t>(max_n), 0.0);
    std::vector<double> total(static_cast<std::size_t>(max_n), 0.0);
    long pred_len = 0, ref_len = 0;

    for (const auto& inst : instances) {
        pred_len += inst.prediction.size();
        // closest reference length; ties broken toward the shorter
        int best = inst.references[0].size();
        for (const auto& r : inst.references) {
            const int cand = r.size();
            const int d_cand = std::abs(cand - inst.prediction.size());
            const int d_best = std::abs(best - inst.prediction.size());
            if (d_cand < d_best || (d_cand == d_best && cand < best)) best = cand;
        }
        ref_len += best;

        for (int n = 1; n <= max_n; ++n) {
            const Counts pred = ngram_counts(inst.prediction, n);
            Counts clip;
            for (const auto& r : inst.references)
                for (const auto& [g, cnt] : ngram_counts(r, n))
                    clip[g] = std::max(clip[g], cnt);
            for (const auto& [g, cnt] : pred) {
                total[static_cast<std::size_t>(n - 1)] += cnt;
                matched[static_cast<std::size_t>(n - 1)] += std::min(cnt, get(clip, g));
            }
        }
    }

    double log_sum = 0.0;
    for (int n = 1; n <= max_n; ++n) {
        double m = matched[static_cast<std::size_t>(n - 1)];
        double t = total[static_cast<std::size_t>(n - 1)];
        if (smooth && n >= 2) {
            m += 1.0;
            t += 1.0;
        }
        if (t <= 0.0 || m <= 0.0) return 0.0;
        log_sum += std::log(m / t);
    }
    const double bp = pred_len >= ref_len
                          ? 1.0
                          : std::exp(1.0 - static_cast<double>(ref_len) /
                                               static_cast<double>(pred_len));
    return 100.0 * bp * std::exp(log_sum / max_n);
}

double sari_instance(const EvalInstance& instance, int max_n) {
    if (instance.references.empty())
        throw ContractError("sari: instance without references");
    const double r = static_cast<double>(instance.references.size());
    double score = 0.0;
    for (int n = 1; n <= max_n; ++n) {
        const Counts src = ngram_counts(instance.source, n);
        const Counts pred = ngram_counts(instance.prediction, n);
        Counts ref; // average count across references
        for (const auto& rs : instance.references)
            for (const auto& [g, cnt] : ngram_counts(rs, n)) ref[g] += cnt / r;

        std::map<Ngram, bool> grams;
        for (const auto& [g, _] : src) grams[g] = true;
        for (const auto& [g, _] : pred) grams[g] = true;
        for (const auto& [g, _] : ref) grams[g] = true;

        double add_sys = 0, add_ref = 0, add_match = 0;
        double keep_sys = 0, keep_ref = 0, keep_match = 0;
        double del_sys = 0, del_ref = 0, del_match = 0;
        for (const auto& [g, _] : grams) {
            const double cs = get(src, g), cp = get(pred, g), cr = get(ref, g);
            const double a_sys = std::max(0.0, cp - cs);
            const double a_ref = std::max(0.0, cr - cs);
            add_sys += a_sys;
            add_ref += a_ref;
            add_match += std::min(a_sys, a_ref);
            const double k_sys = std::min(cs, cp);
            const double k_ref = std::min(cs, cr);
            keep_sys += k_sys;
            keep_ref += k_ref;
            keep_match += std::min(k_sys, k_ref);
            const double d_sys = std::max(0.0, cs - cp);
            const double d_ref = std::max(0.0, cs - cr);
            del_sys += d_sys;
            del_ref += d_ref;
            del_match += std::min(d_sys, d_ref);
        }
        const double p_add = component_ratio(add_match, add_sys, add_ref);
        const double r_add = component_ratio(add_match, add_ref, add_sys);
        const double p_keep = component_ratio(keep_match, keep_sys, keep_ref);
        const double r_keep = component_ratio(keep_match, keep_ref, keep_sys);
        const double p_del = component_ratio(del_match, del_sys, del_ref);
        const double f_add = (add_sys <= 0.0 && add_ref <= 0.0) ? 1.0 : f1(p_add, r_add);
        const double f_keep = (keep_sys <= 0.0 && keep_ref <= 0.0) ? 1.0 : f1(p_keep, r_keep);
        score += (f_add + f_keep + p_del) / 3.0;
    }
    return 100.0 * score / static_cast<double>(max_n);
}

double sari(const std::vector<EvalInstance>& instances, int max_n) {
    require_nonempty(instances, "sari");
    double acc = 0.0;
    for (const auto& inst : instances) acc += sari_instance(inst, max_n);
    return acc / static_cast<double>(instances.size());
}

EvalReport evaluate(const std::vector<EvalInstance>& instances) {
    require_nonempty(instances, "evaluate");
    EvalReport rep;
    rep.instances = static_cast<int>(instances.size());
    rep.word_diff = word_diff(instances);
    rep.fe_diff = fe_diff(instances, &rep.fe_skipped);
    rep.bleu = bleu(instances);
    rep.sari = sari(instances);
    for (std::size_t i = 0; i < instances.size(); ++i) {
        InstanceRow row;
        row.index = static_cast<int>(i);
        row.word_diff =
            static_cast<double>(instances[i].source.size() - instances[i].prediction.size());
        try {
            row.fe_diff = flesch_ease(instances[i].prediction) - flesch_ease(instances[i].source);
        } catch (const ContractError&) {
            row.fe_diff.reset();
        }
        row.sari = sari_instance(instances[i]);
        rep.rows.push_back(std::move(row));
    }
    return rep;
}

namespace {

std::string fmt(double x) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

} // namespace

void save_report(const std::string& path, const EvalReport& report) {
    std::ofstream f(path);
    if (!f) throw IoError("cannot write " + path);
    f << "sari: " << fmt(report.sari) << "\n";
    f << "bleu: " << fmt(report.bleu) << "\n";
    f << "fe_diff: " << fmt(report.fe_diff) << "\n";
    f << "word_diff: " << fmt(report.word_diff) << "\n";
    f << "instances: " << report.instances << "\n";
    f << "fe_skipped: " << report.fe_skipped << "\n";
    f << "---\n";
    f << "index\tword_diff\tfe_diff\tsari\n";
    for (const auto& row : report.rows) {
        f << row.index << "\t" << fmt(row.word_diff) << "\t"
          << (row.fe_diff ? fmt(*row.fe_diff) : std::string("NA")) << "\t" << fmt(row.sari)
          << "\n";
    }
}

EvalReport load_report(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot open " + path);
    EvalReport rep;
    std::string line;
    bool in_table = false;
    bool header_skipped = false;
    long lineno = 0;
    while (std::getline(f, line)) {
        ++lineno;
        if (line.empty()) continue;
        if (line == "---") {
            in_table = true;
            continue;
        }
        if (!in_table) {
            const auto colon = line.find(": ");
            if (colon == std::string::npos)
                throw ParseError("report " + path + " line " + std::to_string(lineno) +
                                 ": expected 'key: value'");
            const std::string key = line.substr(0, colon);
            const std::string value = line.substr(colon + 2);
            if (key == "sari") rep.sari = std::stod(value);
            else if (key == "bleu") rep.bleu = std::stod(value);
            else if (key == "fe_diff") rep.fe_diff = std::stod(value);
            else if (key == "word_diff") rep.word_diff = std::stod(value);
            else if (key == "instances") rep.instances = std::stoi(value);
            else if (key == "fe_skipped") rep.fe_skipped = std::stoi(value);
            else
                throw ParseError("report " + path + " line " + std::to_string(lineno) +
                                 ": unknown key '" + key + "'");
        } else {
            if (!header_skipped) {
                header_skipped = true;
                continue;
            }
            std::istringstream ss(line);
            InstanceRow row;
            std::string fe;
            if (!(ss >> row.index >> row.word_diff >> fe >> row.sari))
                throw ParseError("report " + path + " line " + std::to_string(lineno) +
                                 ": bad row");
            if (fe != "NA") row.fe_diff = std::stod(fe);
            rep.rows.push_back(row);
        }
    }
    return rep;
}

} // namespace unts
