#pragma once

#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "treenav/corpus.hpp"
#include "treenav/doctree.hpp"
#include "treenav/env.hpp"

namespace treenav {

/// Everything eval needs about one finished (question, document) episode.
/// Sentence stops are judged at the encompassing paragraph.
struct NavOutcome {
    std::string qid;
    std::string doc_id;
    int stop_index = 0;
    NodeKind stop_kind = NodeKind::Title;
    bool has_answer = false;
    int path_length = 0;
    int answer_action_count = 0;
    long tokens_consumed = 0;
    double tokens_fraction = 0.0;
    std::optional<std::string> final_answer;
    double final_probability = 0.0;
    int fao = -1;  // first answer occurrence of the pair's document
};

/// Prefix tokens fed to the encoder for the union of visited paths, counted
/// once per node, plus nothing else (extractor tokens are added separately).
long observation_tokens_consumed(const DocTree& tree, const std::vector<NodeId>& visited);

NavOutcome outcome_from_episode(const DocTree& tree, const Episode& ep);

nlohmann::json outcome_to_json(const NavOutcome& o);
NavOutcome outcome_from_json(const nlohmann::json& j);

double navigation_accuracy(const std::vector<NavOutcome>& outcomes);
double aggregated_accuracy(const std::vector<NavOutcome>& outcomes);

/// Per question: aggregate answers over documents, then EM/F1 against the
/// question's aliases; missing predictions score (0, 0). Returns means.
std::pair<double, double> qa_metrics(const std::vector<NavOutcome>& outcomes,
                                     const std::map<std::string, std::vector<std::string>>& aliases);

struct PathStats {
    long outcomes = 0;
    double path_length_avg = 0.0;
    int path_length_min = 0;
    int path_length_max = 0;
    double answer_actions_avg = 0.0;
    double tokens_fraction_avg = 0.0;
    std::map<std::string, double> stop_kind_frac;  // sums to 1
};

PathStats path_stats(const std::vector<NavOutcome>& outcomes);

FaoHistogram stop_index_histogram(const std::vector<NavOutcome>& outcomes);

struct FaoBucket {
    int lo = 0;             // inclusive
    int hi = 0;             // exclusive; INT_MAX for the open tail
    double accuracy = 0.0;  // navigation accuracy within the bucket
    double mass = 0.0;      // fraction of outcomes in the bucket
    long count = 0;
};

/// Bucketed navigation accuracy by the pair's FAO index. `edges` are cut
/// points: edges {a, b} give buckets [0,a), [a,b), [b, inf). Empty buckets
/// are omitted; masses over returned buckets sum to 1.
std::vector<FaoBucket> accuracy_by_fao(
    const std::vector<NavOutcome>& outcomes,
    const std::map<std::pair<std::string, std::string>, int>& fao_by_pair,
    const std::vector<int>& edges);

std::string histogram_csv(const FaoHistogram& h);
std::string fao_buckets_csv(const std::vector<FaoBucket>& buckets);

}  // namespace treenav
