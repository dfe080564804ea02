#include "treenav/baselines.hpp"

#include <cmath>
#include <set>
#include <stdexcept>

namespace treenav {

namespace {

void count_paragraph_df(const DocTree& tree, std::map<std::string, long>& df, long& n) {
    for (const DocNode& node : tree.nodes) {
        if (node.kind != NodeKind::Paragraph) continue;
        ++n;
        std::set<std::string> seen;
        for (const auto& tok : node.label_tokens) seen.insert(lower(tok));
        for (const auto& term : seen) ++df[term];
    }
}

}  // namespace

TfIdfIndex TfIdfIndex::over_document(const DocTree& tree) {
    TfIdfIndex idx;
    count_paragraph_df(tree, idx.df_, idx.n_docs_);
    return idx;
}

TfIdfIndex TfIdfIndex::over_corpus(const std::vector<const DocTree*>& docs) {
    TfIdfIndex idx;
    for (const DocTree* d : docs) count_paragraph_df(*d, idx.df_, idx.n_docs_);
    return idx;
}

double TfIdfIndex::idf(const std::string& term) const {
    auto it = df_.find(lower(term));
    long df = it == df_.end() ? 0 : it->second;
    return std::log(static_cast<double>(n_docs_ + 1) / static_cast<double>(df + 1)) + 1.0;
}

std::map<std::string, double> TfIdfIndex::vectorize(const Tokens& tokens) const {
    std::map<std::string, long> tf;
    for (const auto& tok : tokens) ++tf[lower(tok)];
    std::map<std::string, double> v;
    double norm2 = 0.0;
    for (const auto& [term, count] : tf) {
        double w = static_cast<double>(count) * idf(term);
        v[term] = w;
        norm2 += w * w;
    }
    if (norm2 <= 0.0) return {};
    double inv = 1.0 / std::sqrt(norm2);
    for (auto& [term, w] : v) w *= inv;
    return v;
}

double TfIdfIndex::cosine(const std::map<std::string, double>& a,
                          const std::map<std::string, double>& b) {
    if (a.size() > b.size()) return cosine(b, a);
    double dot = 0.0;
    for (const auto& [term, w] : a) {
        auto it = b.find(term);
        if (it != b.end()) dot += w * it->second;
    }
    return dot;
}

namespace {

TfIdfChoice select_with_index(const Tokens& question, const DocTree& tree,
                              const TfIdfIndex& idx) {
    TfIdfChoice choice;
    std::map<std::string, double> qv = idx.vectorize(question);
    for (const DocNode& node : tree.nodes) {
        if (node.kind != NodeKind::Paragraph) continue;
        double score = qv.empty() ? 0.0 : TfIdfIndex::cosine(qv, idx.vectorize(node.label_tokens));
        if (choice.node == kNoNode || score > choice.score) {
            choice.node = node.id;
            choice.score = score;
        }
    }
    if (choice.node == kNoNode)
        throw std::invalid_argument("tfidf_select: document has no paragraphs");
    if (choice.score <= 0.0) {
        for (const DocNode& node : tree.nodes)
            if (node.kind == NodeKind::Paragraph) {
                choice.node = node.id;
                break;
            }
        choice.score = 0.0;
        choice.fallback = true;
    }
    return choice;
}

}  // namespace

TfIdfChoice doc_tfidf_select(const Tokens& question, const DocTree& tree) {
    return select_with_index(question, tree, TfIdfIndex::over_document(tree));
}

TfIdfChoice global_tfidf_select(const Tokens& question, const DocTree& tree,
                                const TfIdfIndex& corpus_index) {
    return select_with_index(question, tree, corpus_index);
}

NodeId random_walk(Env& env, Rng& rng) {
    env.reset();
    std::vector<Action> legal = legal_actions(env.coupled());
    while (!env.done()) env.step(legal[rng.below(legal.size())]);
    return env.episode().stop_node;
}

NodeId random_para(const DocTree& tree, Rng& rng) {
    std::vector<NodeId> pool;
    for (const DocNode& n : tree.nodes)
        if (n.kind != NodeKind::Sentence) pool.push_back(n.id);
    return pool[rng.below(pool.size())];
}

Tokens read_top_prefix(const DocTree& tree, int n_tokens) {
    if (n_tokens < 0) throw std::invalid_argument("read_top: n_tokens must be >= 0");
    Tokens out;
    for (const DocNode& n : tree.nodes) {
        if (n.kind == NodeKind::Sentence) continue;  // duplicates the paragraph text
        for (const auto& tok : n.label_tokens) {
            if (static_cast<int>(out.size()) >= n_tokens) return out;
            out.push_back(tok);
        }
    }
    return out;
}

std::optional<AnswerPrediction> read_top(const DocTree& tree, const Tokens& question,
                                         const Extractor& extractor, const std::string& qid,
                                         int n_tokens) {
    Tokens prefix = read_top_prefix(tree, n_tokens);
    if (prefix.empty()) return std::nullopt;
    ExtractQuery q;
    q.question = &question;
    q.context = &prefix;
    q.qid = qid;
    q.node_index = -1;
    return extractor.predict(q);
}

NodeId ensemble_threshold(const DocTree& tree, NodeId agent_stop, NodeId tfidf_stop, int l) {
    if (l == kEnsembleAlwaysAgent) return agent_stop;
    if (l < 0) throw std::invalid_argument("ensemble_threshold: l must be >= 0");
    return tree.node(agent_stop).index <= l ? agent_stop : tfidf_stop;
}

std::string ensemble_answer(const std::vector<std::pair<std::string, double>>& agent_preds,
                            const std::vector<std::pair<std::string, double>>& tfidf_preds) {
    std::vector<std::pair<std::string, double>> all = agent_preds;
    all.insert(all.end(), tfidf_preds.begin(), tfidf_preds.end());
    return aggregate_answer(all);
}

}  // namespace treenav
