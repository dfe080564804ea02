#include "treenav/eval.hpp"

#include <algorithm>
#include <climits>
#include <set>
#include <sstream>
#include <stdexcept>

#include "treenav/reader.hpp"

namespace treenav {

long observation_tokens_consumed(const DocTree& tree, const std::vector<NodeId>& visited) {
    std::set<NodeId> on_paths;
    for (NodeId v : visited)
        for (NodeId u = v; u != kNoNode; u = tree.node(u).parent) on_paths.insert(u);
    long total = 0;
    for (NodeId u : on_paths)
        total += std::min<long>(kNodePrefixTokens,
                                static_cast<long>(tree.node(u).label_tokens.size()));
    return total;
}

NavOutcome outcome_from_episode(const DocTree& tree, const Episode& ep) {
    if (ep.stop_node == kNoNode) throw std::invalid_argument("outcome: episode did not stop");
    NavOutcome o;
    o.qid = ep.qid;
    o.doc_id = ep.doc_id.empty() ? tree.doc_id : ep.doc_id;
    const DocNode& stop = tree.node(ep.stop_node);
    o.stop_index = stop.index;
    o.stop_kind = stop.kind;
    NodeId judged = context_node(tree, ep.stop_node);
    o.has_answer = tree.answer_node_ids.count(judged) > 0;
    o.path_length = ep.step_count;
    std::vector<NodeId> visited;
    for (const TraceEntry& t : ep.trace) {
        visited.push_back(t.node_id);
        if (t.action == Action::Answer) ++o.answer_action_count;
    }
    visited.push_back(ep.stop_node);
    o.tokens_consumed = observation_tokens_consumed(tree, visited) + ep.rc_tokens_read;
    long doc_tokens = 0;
    for (const DocNode& n : tree.nodes)
        if (n.kind != NodeKind::Sentence) doc_tokens += static_cast<long>(n.label_tokens.size());
    o.tokens_fraction = doc_tokens > 0
                            ? std::min(1.0, static_cast<double>(o.tokens_consumed) /
                                                static_cast<double>(doc_tokens))
                            : 0.0;
    if (ep.emitted_answer) {
        o.final_answer = join(ep.emitted_answer->tokens);
        o.final_probability = ep.emitted_answer->top_probability;
    }
    if (auto f = tree.fao()) o.fao = *f;
    return o;
}

nlohmann::json outcome_to_json(const NavOutcome& o) {
    nlohmann::json j{{"qid", o.qid},
                     {"doc_id", o.doc_id},
                     {"stop_index", o.stop_index},
                     {"stop_kind", kind_name(o.stop_kind)},
                     {"has_answer", o.has_answer},
                     {"path_length", o.path_length},
                     {"answer_action_count", o.answer_action_count},
                     {"tokens_consumed", o.tokens_consumed},
                     {"tokens_fraction", o.tokens_fraction},
                     {"fao", o.fao}};
    if (o.final_answer) {
        j["final_answer"] = *o.final_answer;
        j["final_probability"] = o.final_probability;
    }
    return j;
}

NavOutcome outcome_from_json(const nlohmann::json& j) {
    NavOutcome o;
    o.qid = j.at("qid").get<std::string>();
    o.doc_id = j.at("doc_id").get<std::string>();
    o.stop_index = j.at("stop_index").get<int>();
    auto k = kind_from_name(j.at("stop_kind").get<std::string>());
    if (!k) throw std::runtime_error("outcome: unknown stop_kind " + j.at("stop_kind").dump());
    o.stop_kind = *k;
    o.has_answer = j.at("has_answer").get<bool>();
    o.path_length = j.at("path_length").get<int>();
    o.answer_action_count = j.value("answer_action_count", 0);
    o.tokens_consumed = j.value("tokens_consumed", 0L);
    o.tokens_fraction = j.value("tokens_fraction", 0.0);
    o.fao = j.value("fao", -1);
    if (j.contains("final_answer")) {
        o.final_answer = j.at("final_answer").get<std::string>();
        o.final_probability = j.value("final_probability", 0.0);
    }
    return o;
}

double navigation_accuracy(const std::vector<NavOutcome>& outcomes) {
    if (outcomes.empty()) throw std::invalid_argument("navigation_accuracy: no outcomes");
    long hits = 0;
    for (const NavOutcome& o : outcomes) hits += o.has_answer ? 1 : 0;
    return static_cast<double>(hits) / static_cast<double>(outcomes.size());
}

double aggregated_accuracy(const std::vector<NavOutcome>& outcomes) {
    if (outcomes.empty()) throw std::invalid_argument("aggregated_accuracy: no outcomes");
    std::map<std::string, bool> by_q;
    for (const NavOutcome& o : outcomes) by_q[o.qid] = by_q[o.qid] || o.has_answer;
    long hits = 0;
    for (const auto& [qid, ok] : by_q) hits += ok ? 1 : 0;
    return static_cast<double>(hits) / static_cast<double>(by_q.size());
}

std::pair<double, double> qa_metrics(
    const std::vector<NavOutcome>& outcomes,
    const std::map<std::string, std::vector<std::string>>& aliases) {
    std::map<std::string, std::vector<std::pair<std::string, double>>> preds;
    for (const NavOutcome& o : outcomes) {
        preds.try_emplace(o.qid);
        if (o.final_answer) preds[o.qid].emplace_back(*o.final_answer, o.final_probability);
    }
    if (preds.empty()) return {0.0, 0.0};
    double em = 0.0, f1 = 0.0;
    for (const auto& [qid, per_doc] : preds) {
        if (per_doc.empty()) continue;  // missing prediction scores (0, 0)
        std::string answer = aggregate_answer(per_doc);
        auto it = aliases.find(qid);
        if (it == aliases.end()) continue;
        auto [e, f] = score_em_f1(answer, it->second);
        em += e;
        f1 += f;
    }
    double n = static_cast<double>(preds.size());
    return {em / n, f1 / n};
}

PathStats path_stats(const std::vector<NavOutcome>& outcomes) {
    if (outcomes.empty()) throw std::invalid_argument("path_stats: no outcomes");
    PathStats s;
    s.outcomes = static_cast<long>(outcomes.size());
    s.path_length_min = outcomes.front().path_length;
    s.path_length_max = outcomes.front().path_length;
    std::map<std::string, long> kinds;
    for (const NavOutcome& o : outcomes) {
        s.path_length_avg += o.path_length;
        s.path_length_min = std::min(s.path_length_min, o.path_length);
        s.path_length_max = std::max(s.path_length_max, o.path_length);
        s.answer_actions_avg += o.answer_action_count;
        s.tokens_fraction_avg += o.tokens_fraction;
        ++kinds[kind_name(o.stop_kind)];
    }
    double n = static_cast<double>(outcomes.size());
    s.path_length_avg /= n;
    s.answer_actions_avg /= n;
    s.tokens_fraction_avg /= n;
    for (const auto& [k, c] : kinds) s.stop_kind_frac[k] = static_cast<double>(c) / n;
    return s;
}

FaoHistogram stop_index_histogram(const std::vector<NavOutcome>& outcomes) {
    FaoHistogram h;
    std::vector<int> indices;
    for (const NavOutcome& o : outcomes) {
        ++h.counts[o.stop_index];
        indices.push_back(o.stop_index);
        ++h.total;
    }
    if (!indices.empty()) {
        std::sort(indices.begin(), indices.end());
        h.median = indices[(indices.size() - 1) / 2];
    }
    return h;
}

std::vector<FaoBucket> accuracy_by_fao(
    const std::vector<NavOutcome>& outcomes,
    const std::map<std::pair<std::string, std::string>, int>& fao_by_pair,
    const std::vector<int>& edges) {
    for (std::size_t i = 1; i < edges.size(); ++i)
        if (edges[i] <= edges[i - 1])
            throw std::invalid_argument("accuracy_by_fao: edges must be strictly increasing");
    std::vector<FaoBucket> buckets;
    for (std::size_t i = 0; i <= edges.size(); ++i) {
        FaoBucket b;
        b.lo = i == 0 ? 0 : edges[i - 1];
        b.hi = i == edges.size() ? INT_MAX : edges[i];
        buckets.push_back(b);
    }
    std::vector<long> hits(buckets.size(), 0);
    long placed = 0;
    for (const NavOutcome& o : outcomes) {
        auto it = fao_by_pair.find({o.qid, o.doc_id});
        int fao = it != fao_by_pair.end() ? it->second : o.fao;
        if (fao < 0) continue;
        for (std::size_t i = 0; i < buckets.size(); ++i) {
            if (fao >= buckets[i].lo && fao < buckets[i].hi) {
                ++buckets[i].count;
                hits[i] += o.has_answer ? 1 : 0;
                ++placed;
                break;
            }
        }
    }
    std::vector<FaoBucket> out;
    for (std::size_t i = 0; i < buckets.size(); ++i) {
        if (buckets[i].count == 0) continue;
        buckets[i].accuracy = static_cast<double>(hits[i]) / static_cast<double>(buckets[i].count);
        buckets[i].mass = placed > 0 ? static_cast<double>(buckets[i].count) /
                                           static_cast<double>(placed)
                                     : 0.0;
        out.push_back(buckets[i]);
    }
    return out;
}

std::string histogram_csv(const FaoHistogram& h) {
    std::ostringstream out;
    out << "index,count\n";
    for (const auto& [idx, cnt] : h.counts) out << idx << "," << cnt << "\n";
    return out.str();
}

std::string fao_buckets_csv(const std::vector<FaoBucket>& buckets) {
    std::ostringstream out;
    out << "lo,hi,count,accuracy,mass\n";
    for (const FaoBucket& b : buckets) {
        out << b.lo << ",";
        if (b.hi == INT_MAX) out << "inf";
        else out << b.hi;
        out << "," << b.count << "," << b.accuracy << "," << b.mass << "\n";
    }
    return out.str();
}

}  // namespace treenav
