#include "treenav/doctree.hpp"

#include <algorithm>
#include <functional>
#include <map>

namespace treenav {

const char* kind_name(NodeKind k) {
    switch (k) {
        case NodeKind::Title: return "title";
        case NodeKind::Section: return "section";
        case NodeKind::Subsection: return "subsection";
        case NodeKind::Paragraph: return "paragraph";
        case NodeKind::Sentence: return "sentence";
    }
    return "?";
}

std::optional<NodeKind> kind_from_name(const std::string& name) {
    for (NodeKind k : {NodeKind::Title, NodeKind::Section, NodeKind::Subsection,
                       NodeKind::Paragraph, NodeKind::Sentence})
        if (name == kind_name(k)) return k;
    return std::nullopt;
}

int kind_level(NodeKind k) { return static_cast<int>(k); }

bool is_heading(NodeKind k) {
    return k == NodeKind::Title || k == NodeKind::Section || k == NodeKind::Subsection;
}

std::optional<int> DocTree::fao() const {
    std::optional<int> best;
    for (NodeId id : answer_node_ids) {
        int idx = node(id).index;
        if (!best || idx < *best) best = idx;
    }
    return best;
}

int DocTree::height(NodeId id) const {
    const DocNode& n = node(id);
    int best = 0;
    for (NodeId c : n.children) best = std::max(best, 1 + height(c));
    return best;
}

int DocTree::depth(NodeId id) const {
    int d = 0;
    for (NodeId cur = node(id).parent; cur != kNoNode; cur = node(cur).parent) ++d;
    return d;
}

int DocTree::h_dist_start(NodeId id) const {
    NodeId p = node(id).parent;
    if (p == kNoNode) return 0;
    const auto& sib = node(p).children;
    auto it = std::find(sib.begin(), sib.end(), id);
    return static_cast<int>(it - sib.begin());
}

int DocTree::h_dist_end(NodeId id) const {
    NodeId p = node(id).parent;
    if (p == kNoNode) return 0;
    const auto& sib = node(p).children;
    auto it = std::find(sib.begin(), sib.end(), id);
    return static_cast<int>(sib.end() - it) - 1;
}

void refresh_stats(DocTree& tree) {
    tree.max_index = 0;
    tree.token_count = 0;
    for (const DocNode& n : tree.nodes) {
        tree.max_index = std::max(tree.max_index, n.index);
        tree.token_count += static_cast<long>(n.label_tokens.size());
    }
}

void assign_indices(DocTree& tree) {
    int next = 0;
    std::function<void(NodeId, int)> walk = [&](NodeId id, int parent_index) {
        DocNode& n = tree.nodes[static_cast<std::size_t>(id)];
        if (n.kind == NodeKind::Sentence) {
            n.index = parent_index;
        } else {
            n.index = next++;
        }
        for (NodeId c : n.children) walk(c, n.index);
    };
    walk(0, 0);
    refresh_stats(tree);
}

void validate_tree(const DocTree& tree) {
    if (tree.nodes.empty()) throw ValidationError("empty tree");
    if (tree.root().kind != NodeKind::Title)
        throw ValidationError("root node must be a title");
    if (tree.root().parent != kNoNode)
        throw ValidationError("root node must have no parent");
    for (const DocNode& n : tree.nodes) {
        if (n.id != kNoNode && n.parent == kNoNode && n.id != 0)
            throw ValidationError("multiple roots");
        if (n.kind == NodeKind::Title && n.id != 0)
            throw ValidationError("title below the root");
        if (n.kind == NodeKind::Sentence && !n.children.empty())
            throw ValidationError("sentence node with children");
        for (NodeId c : n.children) {
            const DocNode& ch = tree.node(c);
            if (ch.parent != n.id) throw ValidationError("broken parent link");
            if (kind_level(ch.kind) <= kind_level(n.kind))
                throw ValidationError(std::string("illegal nesting: ") + kind_name(ch.kind) +
                                      " under " + kind_name(n.kind));
            if (ch.kind == NodeKind::Sentence && n.kind != NodeKind::Paragraph)
                throw ValidationError(std::string("sentence under ") + kind_name(n.kind));
        }
    }
}

namespace {

/// Copy the subtree rooted at `src_id` into `dst`, returning the new id.
NodeId copy_subtree(const DocTree& src, NodeId src_id, DocTree& dst, NodeId new_parent,
                    std::map<NodeId, NodeId>& id_map) {
    NodeId nid = static_cast<NodeId>(dst.nodes.size());
    dst.nodes.push_back(src.node(src_id));
    dst.nodes.back().id = nid;
    dst.nodes.back().parent = new_parent;
    dst.nodes.back().children.clear();
    id_map[src_id] = nid;
    for (NodeId c : src.node(src_id).children) {
        NodeId cc = copy_subtree(src, c, dst, nid, id_map);
        dst.nodes[static_cast<std::size_t>(nid)].children.push_back(cc);
    }
    return nid;
}

}  // namespace

DocTree reorder_preorder(const DocTree& tree) {
    DocTree out;
    out.doc_id = tree.doc_id;
    std::map<NodeId, NodeId> id_map;
    copy_subtree(tree, tree.root().id, out, kNoNode, id_map);
    for (NodeId old_id : tree.answer_node_ids) out.answer_node_ids.insert(id_map.at(old_id));
    assign_indices(out);
    return out;
}

DocTree remove_preface(const DocTree& tree) {
    const DocNode& root = tree.root();
    std::size_t first_section = root.children.size();
    for (std::size_t i = 0; i < root.children.size(); ++i) {
        NodeKind k = tree.node(root.children[i]).kind;
        if (k == NodeKind::Section || k == NodeKind::Subsection) {
            first_section = i;
            break;
        }
    }
    if (first_section == 0) return tree;  // nothing before the first section

    DocTree out;
    out.doc_id = tree.doc_id;
    std::map<NodeId, NodeId> id_map;
    out.nodes.push_back(root);
    out.nodes.back().children.clear();
    id_map[0] = 0;
    for (std::size_t i = first_section; i < root.children.size(); ++i) {
        NodeId cc = copy_subtree(tree, root.children[i], out, 0, id_map);
        out.nodes[0].children.push_back(cc);
    }
    for (NodeId old_id : tree.answer_node_ids) {
        auto it = id_map.find(old_id);
        if (it != id_map.end()) out.answer_node_ids.insert(it->second);
    }
    assign_indices(out);
    return out;
}

DocTree annotate_answers(const DocTree& tree, const std::vector<std::string>& aliases) {
    DocTree out = tree;
    out.answer_node_ids.clear();
    std::vector<Tokens> needles;
    for (const auto& a : aliases) {
        Tokens t = normalize_text(a);
        if (!t.empty()) needles.push_back(std::move(t));
    }
    for (const DocNode& n : out.nodes) {
        Tokens hay = normalize_tokens(n.label_tokens);
        for (const Tokens& needle : needles) {
            if (contains_subsequence(hay, needle)) {
                out.answer_node_ids.insert(n.id);
                break;
            }
        }
    }
    return out;
}

const char* reject_reason_name(RejectReason r) {
    switch (r) {
        case RejectReason::AnswerOnlyInTitles: return "answer_only_in_titles";
        case RejectReason::SingleCharAnswer: return "single_char_answer";
        case RejectReason::FaoTooDeep: return "fao_too_deep";
        case RejectReason::NoAnswer: return "no_answer";
        case RejectReason::NoDocumentsLeft: return "no_documents_left";
    }
    return "?";
}

FilterResult filter_sample(const QASample& sample) {
    FilterResult res;

    bool all_single_char = true;
    for (const auto& a : sample.answer_aliases) {
        if (normalize_answer(a).size() > 1) {
            all_single_char = false;
            break;
        }
    }
    if (all_single_char) {
        res.rejections.push_back({sample.question_id, "", RejectReason::SingleCharAnswer});
        return res;
    }

    QASample kept = sample;
    kept.documents.clear();
    for (const DocTree& doc : sample.documents) {
        if (doc.answer_node_ids.empty()) {
            res.rejections.push_back({sample.question_id, doc.doc_id, RejectReason::NoAnswer});
            continue;
        }
        bool any_body = false;
        for (NodeId id : doc.answer_node_ids) {
            if (!is_heading(doc.node(id).kind)) {
                any_body = true;
                break;
            }
        }
        if (!any_body) {
            res.rejections.push_back(
                {sample.question_id, doc.doc_id, RejectReason::AnswerOnlyInTitles});
            continue;
        }
        if (doc.fao().value() > kMaxFaoIndex) {
            res.rejections.push_back({sample.question_id, doc.doc_id, RejectReason::FaoTooDeep});
            continue;
        }
        kept.documents.push_back(doc);
    }
    if (kept.documents.empty()) {
        res.rejections.push_back({sample.question_id, "", RejectReason::NoDocumentsLeft});
        return res;
    }
    res.sample = std::move(kept);
    return res;
}

}  // namespace treenav
