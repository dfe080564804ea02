#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "treenav/doctree.hpp"
#include "treenav/env.hpp"
#include "treenav/reader.hpp"
#include "treenav/rng.hpp"

namespace treenav {

/// Sparse tf-idf index over a set of paragraphs. tf is the raw count,
/// idf = ln((N+1)/(df+1)) + 1 where N is the number of documents in scope.
/// No stopword removal; tokens are lowercased.
class TfIdfIndex {
  public:
    /// Per-document scope: every paragraph of `tree` is one "document".
    static TfIdfIndex over_document(const DocTree& tree);
    /// Global scope: idf over all paragraphs of all documents.
    static TfIdfIndex over_corpus(const std::vector<const DocTree*>& docs);

    double idf(const std::string& term) const;
    long scope_size() const { return n_docs_; }

    /// L2-normalized tf-idf weights for a bag of tokens. Unknown terms get
    /// the smoothed floor idf. Empty or all-zero input yields an empty map.
    std::map<std::string, double> vectorize(const Tokens& tokens) const;

    static double cosine(const std::map<std::string, double>& a,
                         const std::map<std::string, double>& b);

  private:
    std::map<std::string, long> df_;
    long n_docs_ = 0;
};

struct TfIdfChoice {
    NodeId node = kNoNode;
    double score = 0.0;
    bool fallback = false;  // all-zero question vector, first paragraph used
};

/// Argmax-cosine paragraph under per-document idf; ties to smaller index.
TfIdfChoice doc_tfidf_select(const Tokens& question, const DocTree& tree);

/// Same selection under corpus-level idf.
TfIdfChoice global_tfidf_select(const Tokens& question, const DocTree& tree,
                                const TfIdfIndex& corpus_index);

/// Uniform-random actions until Stop or budget; returns the stopping node.
NodeId random_walk(Env& env, Rng& rng);

/// Uniform over non-sentence nodes.
NodeId random_para(const DocTree& tree, Rng& rng);

inline constexpr int kReadTopTokens = 800;

/// Run the extractor on the first `n_tokens` tokens of the document in index
/// order (node labels, sentences skipped as duplicates).
std::optional<AnswerPrediction> read_top(const DocTree& tree, const Tokens& question,
                                         const Extractor& extractor, const std::string& qid,
                                         int n_tokens = kReadTopTokens);

/// The document prefix read_top feeds to the extractor (exposed for tests).
Tokens read_top_prefix(const DocTree& tree, int n_tokens = kReadTopTokens);

inline constexpr int kEnsembleThresholdDefault = 5;
inline constexpr int kEnsembleAlwaysAgent = -1;  // l = infinity sentinel

/// Agent stop if its index <= l, else the tf-idf stop. l = kEnsembleAlwaysAgent
/// always takes the agent.
NodeId ensemble_threshold(const DocTree& tree, NodeId agent_stop, NodeId tfidf_stop, int l);

/// Probability-sum answer ensemble over the concatenated per-document lists.
std::string ensemble_answer(const std::vector<std::pair<std::string, double>>& agent_preds,
                            const std::vector<std::pair<std::string, double>>& tfidf_preds);

}  // namespace treenav
