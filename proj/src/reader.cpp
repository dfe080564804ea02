#include "treenav/reader.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace treenav {

namespace {

struct Span {
    int start = 0, len = 0;
};

std::vector<Span> enumerate_spans(int n, int max_span_len) {
    std::vector<Span> spans;
    for (int s = 0; s < n; ++s)
        for (int l = 1; l <= max_span_len && s + l <= n; ++l) spans.push_back({s, l});
    return spans;
}

AnswerPrediction from_scores(const Tokens& context, const std::vector<Span>& spans,
                             const std::vector<double>& scores) {
    AnswerPrediction out;
    out.context_token_count = static_cast<int>(context.size());
    int best = 0;
    for (int i = 1; i < static_cast<int>(scores.size()); ++i)
        if (scores[static_cast<std::size_t>(i)] > scores[static_cast<std::size_t>(best)]) best = i;

    double mx = scores[static_cast<std::size_t>(best)];
    double z = 0.0;
    out.span_distribution.resize(scores.size());
    for (std::size_t i = 0; i < scores.size(); ++i) z += std::exp(scores[i] - mx);
    double ent = 0.0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        double p = std::exp(scores[i] - mx) / z;
        out.span_distribution[i] = p;
        if (p > 0.0) ent -= p * std::log(p);
    }
    out.entropy = std::max(0.0, ent);
    out.top_logit = mx;
    out.top_probability = out.span_distribution[static_cast<std::size_t>(best)];
    const Span& sp = spans[static_cast<std::size_t>(best)];
    out.tokens.assign(context.begin() + sp.start, context.begin() + sp.start + sp.len);
    return out;
}

}  // namespace

AnswerPrediction extract_overlap(const Tokens& question, const Tokens& context, int max_span_len) {
    if (context.empty()) throw std::invalid_argument("extract_overlap: empty context");
    if (max_span_len < 1) throw std::invalid_argument("extract_overlap: max_span_len must be >= 1");

    std::set<std::string> qset;
    for (const auto& t : question) qset.insert(lower(t));
    std::vector<int> hit(context.size());
    for (std::size_t i = 0; i < context.size(); ++i)
        hit[i] = qset.count(lower(context[i])) ? 1 : 0;

    auto spans = enumerate_spans(static_cast<int>(context.size()), max_span_len);
    std::vector<double> scores(spans.size());
    for (std::size_t i = 0; i < spans.size(); ++i) {
        int overlap = 0;
        for (int k = 0; k < spans[i].len; ++k)
            overlap += hit[static_cast<std::size_t>(spans[i].start + k)];
        scores[i] = overlap / (1.0 + 0.1 * (spans[i].len - 1));
    }
    return from_scores(context, spans, scores);
}

AnswerPrediction extract_oracle(const Tokens& question, const Tokens& context,
                                const std::vector<std::string>& aliases, double top_probability) {
    (void)question;
    if (context.empty()) throw std::invalid_argument("extract_oracle: empty context");

    Tokens hay = normalize_tokens(context);
    // Map normalized positions back to raw positions.
    std::vector<int> raw_pos;
    {
        int r = 0;
        for (const auto& tok : context) {
            Tokens n1 = normalize_tokens({tok});
            if (!n1.empty()) raw_pos.push_back(r);
            ++r;
        }
    }
    int found_start = -1, found_len = 0;
    for (const auto& a : aliases) {
        Tokens needle = normalize_text(a);
        if (needle.empty() || needle.size() > hay.size()) continue;
        for (std::size_t s = 0; s + needle.size() <= hay.size(); ++s) {
            bool ok = true;
            for (std::size_t k = 0; k < needle.size(); ++k)
                if (hay[s + k] != needle[k]) { ok = false; break; }
            if (ok) {
                int rs = raw_pos[s];
                int re = raw_pos[s + needle.size() - 1];
                if (found_start < 0 || rs < found_start) {
                    found_start = rs;
                    found_len = re - rs + 1;
                }
                break;
            }
        }
    }

    int msl = std::max(kDefaultMaxSpanLen, found_len);
    auto spans = enumerate_spans(static_cast<int>(context.size()), msl);
    AnswerPrediction out;
    out.context_token_count = static_cast<int>(context.size());
    out.span_distribution.assign(spans.size(), 0.0);

    std::size_t top = 0;
    if (found_start >= 0 && spans.size() > 1) {
        for (std::size_t i = 0; i < spans.size(); ++i)
            if (spans[i].start == found_start && spans[i].len == found_len) { top = i; break; }
        double rest = (1.0 - top_probability) / static_cast<double>(spans.size() - 1);
        for (auto& p : out.span_distribution) p = rest;
        out.span_distribution[top] = top_probability;
    } else if (found_start >= 0) {
        out.span_distribution[0] = 1.0;
    } else {
        double u = 1.0 / static_cast<double>(spans.size());
        for (auto& p : out.span_distribution) p = u;
        std::size_t best = 0;  // uniform: earliest, shortest
        top = best;
    }
    double ent = 0.0;
    for (double p : out.span_distribution)
        if (p > 0.0) ent -= p * std::log(p);
    out.entropy = ent;
    out.top_probability = out.span_distribution[top];
    out.top_logit = std::log(out.top_probability);
    const Span& sp = spans[top];
    out.tokens.assign(context.begin() + sp.start, context.begin() + sp.start + sp.len);
    return out;
}

std::optional<AnswerPrediction> OracleExtractor::predict(const ExtractQuery& q) const {
    auto it = aliases_by_qid_.find(q.qid);
    static const std::vector<std::string> kNone;
    const auto& aliases = it == aliases_by_qid_.end() ? kNone : it->second;
    return extract_oracle(*q.question, *q.context, aliases, top_probability_);
}

ExternalExtractor::ExternalExtractor(const std::string& jsonl_path) {
    std::ifstream in(jsonl_path);
    if (!in) throw std::runtime_error("external reader: cannot open " + jsonl_path);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw std::runtime_error("external reader: line " + std::to_string(lineno) + ": " +
                                     e.what());
        }
        AnswerPrediction p;
        p.tokens = j.value("tokens", Tokens{});
        p.top_probability = j.value("top_probability", 0.0);
        p.top_logit = j.value("top_logit", 0.0);
        p.entropy = j.value("entropy", 0.0);
        p.context_token_count = j.value("context_token_count", 0);
        if (j.contains("span_distribution"))
            p.span_distribution = j["span_distribution"].get<std::vector<double>>();
        table_[{j.at("qid").get<std::string>(), j.at("node_index").get<int>()}] = std::move(p);
    }
}

std::optional<AnswerPrediction> ExternalExtractor::predict(const ExtractQuery& q) const {
    auto it = table_.find({q.qid, q.node_index});
    if (it == table_.end()) return std::nullopt;
    return it->second;
}

std::unique_ptr<Extractor> make_extractor(const std::string& kind, const std::string& external_path,
                                          std::map<std::string, std::vector<std::string>> aliases_by_qid,
                                          int max_span_len) {
    if (kind == "overlap") return std::make_unique<OverlapExtractor>(max_span_len);
    if (kind == "oracle") return std::make_unique<OracleExtractor>(std::move(aliases_by_qid));
    if (kind == "external") return std::make_unique<ExternalExtractor>(external_path);
    throw std::invalid_argument("reader.kind must be one of overlap|oracle|external, got " + kind);
}

namespace {

Tokens f1_tokens(const std::string& s) { return tokenize(normalize_answer(s)); }

double token_f1(const Tokens& pred, const Tokens& gold) {
    if (pred.empty() || gold.empty()) return pred.empty() && gold.empty() ? 1.0 : 0.0;
    std::map<std::string, int> counts;
    for (const auto& t : gold) ++counts[t];
    int common = 0;
    for (const auto& t : pred) {
        auto it = counts.find(t);
        if (it != counts.end() && it->second > 0) {
            ++common;
            --it->second;
        }
    }
    if (common == 0) return 0.0;
    double precision = static_cast<double>(common) / static_cast<double>(pred.size());
    double recall = static_cast<double>(common) / static_cast<double>(gold.size());
    return 2.0 * precision * recall / (precision + recall);
}

}  // namespace

std::pair<int, double> score_em_f1(const std::string& prediction,
                                   const std::vector<std::string>& aliases) {
    std::string np = normalize_answer(prediction);
    if (np.empty()) return {0, 0.0};
    int em = 0;
    double f1 = 0.0;
    Tokens pt = f1_tokens(prediction);
    for (const auto& a : aliases) {
        if (np == normalize_answer(a)) em = 1;
        f1 = std::max(f1, token_f1(pt, f1_tokens(a)));
    }
    return {em, f1};
}

std::string aggregate_answer(const std::vector<std::pair<std::string, double>>& per_doc) {
    if (per_doc.empty()) throw std::invalid_argument("aggregate_answer: empty input");
    std::map<std::string, double> sums;
    std::map<std::string, std::string> first_spelling;
    for (const auto& [ans, p] : per_doc) {
        std::string key = normalize_answer(ans);
        sums[key] += p;
        first_spelling.emplace(key, ans);
    }
    const std::string* best_key = nullptr;
    for (const auto& [key, total] : sums) {
        if (!best_key || total > sums.at(*best_key)) best_key = &key;
        // std::map iterates keys in lexicographic order, so strictly-greater
        // replacement leaves ties with the lexicographically smaller key.
    }
    return first_spelling.at(*best_key);
}

}  // namespace treenav
