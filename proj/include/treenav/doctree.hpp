#pragma once

#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "treenav/tokens.hpp"

namespace treenav {

struct ParseError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct ValidationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

enum class NodeKind { Title, Section, Subsection, Paragraph, Sentence };

const char* kind_name(NodeKind k);
std::optional<NodeKind> kind_from_name(const std::string& name);
int kind_level(NodeKind k);  // Title=0 ... Sentence=4
bool is_heading(NodeKind k);  // Title, Section or Subsection

using NodeId = int;
inline constexpr NodeId kNoNode = -1;

struct DocNode {
    NodeId id = kNoNode;
    NodeKind kind = NodeKind::Title;
    std::string label;
    Tokens label_tokens;
    std::vector<NodeId> children;
    NodeId parent = kNoNode;
    int index = 0;  // pre-order rank over non-sentence nodes; sentences inherit
};

/// Ordered document tree. Node 0 is always the Title root. Immutable once
/// constructed; safe to share across concurrent readers.
struct DocTree {
    std::string doc_id;
    std::vector<DocNode> nodes;
    int max_index = 0;
    long token_count = 0;
    std::set<NodeId> answer_node_ids;

    const DocNode& node(NodeId id) const { return nodes.at(static_cast<std::size_t>(id)); }
    const DocNode& root() const { return nodes.front(); }
    int size() const { return static_cast<int>(nodes.size()); }

    /// First answer occurrence: min index over answer nodes.
    std::optional<int> fao() const;

    /// Node ids in pre-order (which equals arena order by construction).
    /// Height = distance to the farthest leaf descendant, sentences included.
    int height(NodeId id) const;
    int depth(NodeId id) const;

    /// Position of the node among its siblings, and distance from the last
    /// sibling. Root (no parent) reports 0 for both.
    int h_dist_start(NodeId id) const;
    int h_dist_end(NodeId id) const;
};

/// Re-derive max_index and token_count after structural edits.
void refresh_stats(DocTree& tree);

/// Assign pre-order indices over non-sentence nodes; sentences take the
/// parent paragraph's index. Arena order is canonicalized to pre-order.
void assign_indices(DocTree& tree);

/// Validate the DocNode invariants, throwing ValidationError on the first
/// violation (root kind, nesting legality, sentence placement).
void validate_tree(const DocTree& tree);

/// Rebuild the arena in pre-order (ids = pre-order ranks), preserving
/// structure, labels and answer annotations.
DocTree reorder_preorder(const DocTree& tree);

/// Drop all root children before the first Section/Subsection child (the
/// preface) together with their descendants, recomputing indices. Answer
/// annotations on surviving nodes are remapped. A document with no preface
/// comes back unchanged.
DocTree remove_preface(const DocTree& tree);

/// Mark every node whose label contains some alias as a contiguous token
/// subsequence after matching normalization.
DocTree annotate_answers(const DocTree& tree, const std::vector<std::string>& aliases);

struct QASample {
    std::string question_id;
    std::string question;
    Tokens question_tokens;
    std::vector<std::string> answer_aliases;
    std::vector<DocTree> documents;
};

enum class RejectReason {
    AnswerOnlyInTitles,
    SingleCharAnswer,
    FaoTooDeep,
    NoAnswer,
    NoDocumentsLeft,
};

const char* reject_reason_name(RejectReason r);

struct Rejection {
    std::string question_id;
    std::string doc_id;  // empty when the whole sample is rejected
    RejectReason reason;
};

inline constexpr int kMaxFaoIndex = 700;

struct FilterResult {
    std::optional<QASample> sample;
    std::vector<Rejection> rejections;
};

/// Dataset filtering rules: drop documents whose answer appears only in
/// headings, or whose FAO index exceeds 700, or with no answer at all; drop
/// the whole sample when every alias is a single character or no documents
/// survive. Documents must already be annotated.
FilterResult filter_sample(const QASample& sample);

}  // namespace treenav
